#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "xwind/errors.hpp"
#include "xwind/harness.hpp"

namespace xwind {

MpcConfig MpcTuning::to_config(double torque_limit) const {
    MpcConfig cfg = MpcConfig::uniform(horizon, q, q_terminal, r, torque_limit);
    cfg.u_min = u_min.value_or(-torque_limit);
    cfg.u_max = u_max.value_or(torque_limit);
    cfg.output_constraints = output_constraints;
    if (output_constraints) {
        cfg.y_min = y_min;
        cfg.y_max = y_max;
    }
    return cfg;
}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        parts.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return parts;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
    std::ostringstream os;
    os << "invalid value '" << value << "' for " << key << " (expected " << expected << ")";
    throw ConfigError(os.str());
}

double to_double(std::string_view key, std::string_view value) {
    double out = 0.0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end || value.empty()) {
        bad_value(key, value, "a number");
    }
    return out;
}

long to_long(std::string_view key, std::string_view value) {
    long out = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end || value.empty()) {
        bad_value(key, value, "an integer");
    }
    return out;
}

bool to_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1" || value == "yes") {
        return true;
    }
    if (value == "false" || value == "0" || value == "no") {
        return false;
    }
    bad_value(key, value, "true or false");
}

std::vector<double> to_list(std::string_view key, std::string_view value) {
    std::vector<double> out;
    for (auto part : split(value, ',')) {
        out.push_back(to_double(key, part));
    }
    return out;
}

std::vector<std::pair<double, double>> to_pairs(std::string_view key, std::string_view value) {
    std::vector<std::pair<double, double>> out;
    if (trim(value).empty()) {
        return out;
    }
    for (auto part : split(value, ',')) {
        const auto fields = split(part, ':');
        if (fields.size() != 2) {
            bad_value(key, value, "a list of time:value pairs");
        }
        out.emplace_back(to_double(key, fields[0]), to_double(key, fields[1]));
    }
    return out;
}

template <typename Enum>
Enum to_enum(std::string_view key, std::string_view value,
             std::initializer_list<std::pair<std::string_view, Enum>> options) {
    for (const auto& [text, e] : options) {
        if (value == text) {
            return e;
        }
    }
    std::string expected = "one of";
    for (const auto& [text, e] : options) {
        expected += " ";
        expected += text;
    }
    bad_value(key, value, expected.c_str());
}

} // namespace

void apply_setting(ScenarioConfig& cfg, std::string_view dotted_key, std::string_view value) {
    const auto dot = dotted_key.find('.');
    if (dot == std::string_view::npos) {
        throw ConfigError("setting '" + std::string(dotted_key) + "' must be section.key");
    }
    const std::string_view section = dotted_key.substr(0, dot);
    const std::string_view key = dotted_key.substr(dot + 1);
    const std::string_view k = dotted_key;
    value = trim(value);

    auto num = [&] { return to_double(k, value); };

    if (section == "scenario") {
        if (key == "name") {
            cfg.name = std::string(value);
        } else if (key == "plant") {
            cfg.plant = to_enum<PlantKind>(
                k, value, {{"simplified", PlantKind::simplified}, {"full", PlantKind::full}});
        } else if (key == "controller") {
            cfg.controller = to_enum<ControllerKind>(
                k, value,
                {{"pid", ControllerKind::pid},
                 {"mpc_constrained", ControllerKind::mpc_constrained},
                 {"mpc_unconstrained", ControllerKind::mpc_unconstrained}});
        } else if (key == "estimator") {
            cfg.estimator = to_enum<EstimatorKind>(k, value,
                                                   {{"none", EstimatorKind::none},
                                                    {"pole_place", EstimatorKind::pole_place},
                                                    {"kalman", EstimatorKind::kalman}});
        } else if (key == "feedforward") {
            cfg.feedforward = to_bool(k, value);
        } else if (key == "duration") {
            cfg.duration = num();
        } else if (key == "Ts") {
            cfg.Ts = num();
        } else if (key == "noise_std") {
            cfg.noise_std = num();
        } else if (key == "seed") {
            const long seed = to_long(k, value);
            if (seed < 0) {
                bad_value(k, value, "a non-negative integer");
            }
            cfg.rng_seed = static_cast<std::uint64_t>(seed);
        } else if (key == "band") {
            cfg.band = num();
        } else if (key == "initial_theta") {
            cfg.initial.theta = num();
        } else if (key == "initial_theta_dot") {
            cfg.initial.theta_dot = num();
        } else {
            throw ConfigError("unknown key " + std::string(k));
        }
    } else if (section == "disturbance") {
        if (key == "type") {
            cfg.disturbance = to_enum<DisturbanceKind>(k, value,
                                                       {{"none", DisturbanceKind::none},
                                                        {"wind", DisturbanceKind::wind},
                                                        {"weight", DisturbanceKind::weight}});
        } else if (key == "wind_profile") {
            cfg.wind.breakpoints.clear();
            for (const auto& [t, v] : to_pairs(k, value)) {
                cfg.wind.breakpoints.push_back({t, v});
            }
        } else if (key == "wind_coeff") {
            cfg.wind_map.quad_coeff = num();
        } else if (key == "wind_direction") {
            const long dir = to_long(k, value);
            if (dir != 1 && dir != -1) {
                bad_value(k, value, "1 or -1");
            }
            cfg.wind_map.direction = static_cast<int>(dir);
        } else if (key == "weights") {
            cfg.weight.events.clear();
            for (const auto& [t, m] : to_pairs(k, value)) {
                cfg.weight.events.push_back({t, m});
            }
        } else if (key == "weight_side") {
            cfg.weight.side =
                to_enum<Side>(k, value, {{"left", Side::left}, {"right", Side::right}});
        } else {
            throw ConfigError("unknown key " + std::string(k));
        }
    } else if (section == "plant") {
        if (key == "inertia") {
            cfg.roll.inertia = num();
        } else if (key == "stiffness") {
            cfg.roll.stiffness = num();
        } else if (key == "damping") {
            cfg.roll.damping = num();
        } else if (key == "wingspan") {
            cfg.roll.wingspan = num();
        } else if (key == "input_delay") {
            cfg.roll.input_delay = num();
        } else if (key == "torque_limit") {
            cfg.roll.torque_limit = num();
        } else if (key == "inner_dt") {
            cfg.inner_dt = num();
        } else {
            throw ConfigError("unknown key " + std::string(k));
        }
    } else if (section == "motor") {
        double MotorParams::*field = nullptr;
        if (key == "thrust_coeff") {
            field = &MotorParams::thrust_coeff;
        } else if (key == "rotor_inertia") {
            field = &MotorParams::rotor_inertia;
        } else if (key == "torque_const") {
            field = &MotorParams::torque_const;
        } else if (key == "friction") {
            field = &MotorParams::friction;
        } else if (key == "drag_friction") {
            field = &MotorParams::drag_friction;
        } else if (key == "resistance") {
            field = &MotorParams::resistance;
        } else if (key == "inductance") {
            field = &MotorParams::inductance;
        } else if (key == "comm_delay") {
            field = &MotorParams::comm_delay;
        } else {
            throw ConfigError("unknown key " + std::string(k));
        }
        const double v = num();
        for (auto& m : cfg.motors) {
            m.*field = v;
        }
    } else if (section == "pid") {
        if (key == "kp") {
            cfg.pid.kp = num();
        } else if (key == "ki") {
            cfg.pid.ki = num();
        } else if (key == "kd") {
            cfg.pid.kd = num();
        } else if (key == "derivative_window") {
            cfg.pid.derivative_window = static_cast<int>(to_long(k, value));
        } else if (key == "meas_filter_alpha") {
            cfg.pid.meas_filter_alpha = num();
        } else {
            throw ConfigError("unknown key " + std::string(k));
        }
    } else if (section == "mpc") {
        if (key == "horizon") {
            cfg.mpc.horizon = static_cast<int>(to_long(k, value));
        } else if (key == "q") {
            cfg.mpc.q = num();
        } else if (key == "q_terminal") {
            cfg.mpc.q_terminal = num();
        } else if (key == "r") {
            cfg.mpc.r = num();
        } else if (key == "u_min") {
            cfg.mpc.u_min = num();
        } else if (key == "u_max") {
            cfg.mpc.u_max = num();
        } else if (key == "output_constraints") {
            cfg.mpc.output_constraints = to_bool(k, value);
        } else if (key == "y_min") {
            cfg.mpc.y_min = num();
        } else if (key == "y_max") {
            cfg.mpc.y_max = num();
        } else {
            throw ConfigError("unknown key " + std::string(k));
        }
    } else if (section == "estimator") {
        if (key == "poles") {
            cfg.poles.clear();
            for (double p : to_list(k, value)) {
                cfg.poles.emplace_back(p, 0.0);
            }
        } else if (key == "kalman_q") {
            const auto diag = to_list(k, value);
            if (diag.size() != 3) {
                bad_value(k, value, "three diagonal entries");
            }
            cfg.kalman.Q = Eigen::Vector3d(diag[0], diag[1], diag[2]).asDiagonal();
        } else if (key == "kalman_r") {
            cfg.kalman.R = num();
        } else if (key == "filter_alpha") {
            cfg.tau_filter_alpha = num();
        } else {
            throw ConfigError("unknown key " + std::string(k));
        }
    } else {
        throw ConfigError("unknown section [" + std::string(section) + "]");
    }
}

void ScenarioConfig::validate() const {
    std::vector<std::string> problems;
    auto check = [&problems](bool ok, std::string what) {
        if (!ok) {
            problems.push_back(std::move(what));
        }
    };
    auto guarded = [&problems](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            problems.emplace_back(e.what());
        }
    };

    check(std::isfinite(duration) && duration > 0.0, "scenario.duration must be > 0");
    check(std::isfinite(Ts) && Ts > 0.0, "scenario.Ts must be > 0");
    check(std::isfinite(noise_std) && noise_std >= 0.0, "scenario.noise_std must be >= 0");
    check(std::isfinite(band) && band > 0.0, "scenario.band must be > 0");
    check(std::isfinite(initial.theta) && std::isfinite(initial.theta_dot),
          "scenario.initial_theta and initial_theta_dot must be finite");
    check(!feedforward || estimator != EstimatorKind::none,
          "scenario.feedforward requires an estimator");
    check(controller == ControllerKind::pid || estimator != EstimatorKind::none,
          "MPC controllers need an estimator for the roll-rate estimate");
    check(tau_filter_alpha > 0.0 && tau_filter_alpha <= 1.0,
          "estimator.filter_alpha must be in (0, 1]");
    guarded([&] { roll.validate(); });

    if (std::isfinite(Ts) && Ts > 0.0) {
        guarded([&] {
            const DiscreteModel dm = design_model(roll, Ts);
            if (dm.kd < 1) {
                throw ConfigError("plant.input_delay must be at least one sample");
            }
        });
        PidConfig p = pid;
        p.Ts = Ts;
        guarded([&] { p.validate(); });
    }
    if (controller != ControllerKind::pid) {
        guarded([&] { mpc.to_config(roll.torque_limit).validate(); });
    }
    if (estimator == EstimatorKind::pole_place) {
        check(poles.size() == 3, "estimator.poles needs three entries");
    }
    if (estimator == EstimatorKind::kalman) {
        guarded([&] { kalman.validate(); });
    }
    if (disturbance == DisturbanceKind::wind) {
        guarded([&] { wind.validate(); });
        check(wind_map.quad_coeff > 0.0, "disturbance.wind_coeff must be > 0");
    }
    if (disturbance == DisturbanceKind::weight) {
        guarded([&] { weight.validate(); });
    }
    if (plant == PlantKind::full) {
        for (const auto& m : motors) {
            guarded([&] { m.validate(roll.input_delay); });
        }
        check(inner_dt > 0.0, "plant.inner_dt must be > 0");
        check(initial.theta == 0.0 && initial.theta_dot == 0.0,
              "the full plant starts at rest; initial_theta and initial_theta_dot must be 0");
        if (inner_dt > 0.0 && Ts > 0.0) {
            const double per_step = Ts / inner_dt;
            check(std::abs(per_step - std::round(per_step)) < 1e-6,
                  "scenario.Ts must be a multiple of plant.inner_dt");
            check(inner_dt <= 1e-3 + 1e-15, "plant.inner_dt must be <= 1 ms");
            const double kc = motors[0].comm_delay / Ts;
            check(std::abs(kc - std::round(kc)) < 1e-9,
                  "motor.comm_delay must be a multiple of scenario.Ts");
        }
    }

    if (!problems.empty()) {
        std::string msg = "invalid scenario '" + name + "':";
        for (const auto& p : problems) {
            msg += "\n  - " + p;
        }
        throw ConfigError(msg);
    }
}

ScenarioConfig parse_scenario(std::string_view text) {
    ScenarioConfig cfg;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        auto fail = [line_no](const std::string& what) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + what);
        };
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                fail("malformed section header '" + std::string(line) + "'");
            }
            section = std::string(trim(line.substr(1, line.size() - 2)));
            static constexpr std::string_view known[] = {"scenario", "disturbance", "plant",
                                                         "motor",    "pid",         "mpc",
                                                         "estimator"};
            if (std::find(std::begin(known), std::end(known), section) == std::end(known)) {
                fail("unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            fail("expected key = value, got '" + std::string(line) + "'");
        }
        if (section.empty()) {
            fail("key outside of any section");
        }
        const std::string key = std::string(trim(line.substr(0, eq)));
        if (key.empty()) {
            fail("empty key");
        }
        try {
            apply_setting(cfg, section + "." + key, line.substr(eq + 1));
        } catch (const ConfigError& e) {
            fail(e.what());
        }
    }
    cfg.validate();
    return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open scenario file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_scenario(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

} // namespace xwind
