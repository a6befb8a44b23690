#include <chrono>
#include <cmath>
#include <optional>

#include "xwind/errors.hpp"
#include "xwind/harness.hpp"

namespace xwind {

namespace {

long snap_to_step(double t, double Ts) {
    return std::lround(t / Ts);
}

int flag_of(QpStatus s) {
    switch (s) {
    case QpStatus::optimal:
        return static_cast<int>(StepFlag::optimal);
    case QpStatus::infeasible:
        return static_cast<int>(StepFlag::infeasible);
    case QpStatus::max_iters:
        return static_cast<int>(StepFlag::max_iters);
    }
    return static_cast<int>(StepFlag::none);
}

} // namespace

double disturbance_torque_at_step(const ScenarioConfig& cfg, long k) {
    switch (cfg.disturbance) {
    case DisturbanceKind::none:
        return 0.0;
    case DisturbanceKind::wind: {
        double speed = 0.0;
        for (const auto& bp : cfg.wind.breakpoints) {
            if (snap_to_step(bp.start_time, cfg.Ts) > k) {
                break;
            }
            speed = bp.speed;
        }
        return wind_speed_to_torque(speed, cfg.wind_map);
    }
    case DisturbanceKind::weight: {
        double mass = 0.0;
        for (const auto& ev : cfg.weight.events) {
            if (snap_to_step(ev.time, cfg.Ts) > k) {
                break;
            }
            mass = ev.mass_lb;
        }
        return weight_to_torque(mass, cfg.roll, cfg.weight.side);
    }
    }
    return 0.0;
}

std::vector<double> disturbance_events(const ScenarioConfig& cfg) {
    const long steps = std::lround(cfg.duration / cfg.Ts);
    std::vector<long> candidates;
    if (cfg.disturbance == DisturbanceKind::wind) {
        for (const auto& bp : cfg.wind.breakpoints) {
            candidates.push_back(snap_to_step(bp.start_time, cfg.Ts));
        }
    } else if (cfg.disturbance == DisturbanceKind::weight) {
        for (const auto& ev : cfg.weight.events) {
            candidates.push_back(snap_to_step(ev.time, cfg.Ts));
        }
    }
    std::vector<double> events;
    long last = -1;
    for (long k : candidates) {
        if (k <= last || k >= steps) {
            continue;
        }
        const double before = k > 0 ? disturbance_torque_at_step(cfg, k - 1) : 0.0;
        if (disturbance_torque_at_step(cfg, k) != before) {
            events.push_back(static_cast<double>(k) * cfg.Ts);
            last = k;
        }
    }
    if (events.empty()) {
        events.push_back(0.0);
    }
    return events;
}

RunResult run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();

    const DiscreteModel dm = design_model(cfg.roll, cfg.Ts);
    const AugmentedModel am = augment(dm);
    const double limit = cfg.roll.torque_limit;
    const double half_span = cfg.roll.wingspan / 2.0;

    std::optional<ObserverGain> gain;
    if (cfg.estimator == EstimatorKind::pole_place) {
        gain = place_observer_gain(am, cfg.poles);
    } else if (cfg.estimator == EstimatorKind::kalman) {
        gain = kalman_gain(am, solve_filter_are(am, cfg.kalman), cfg.kalman.R);
    }

    std::optional<PidController> pid;
    MpcConfig mpc_cfg;
    PredictionStack stack;
    QpSolver solver;
    if (cfg.controller == ControllerKind::pid) {
        PidConfig pc = cfg.pid;
        pc.Ts = cfg.Ts;
        pid.emplace(pc);
    } else {
        mpc_cfg = cfg.mpc.to_config(limit);
        stack = build_prediction(dm, mpc_cfg);
    }

    std::optional<FullPlantSimulator> full;
    int kc = 0;
    if (cfg.plant == PlantKind::full) {
        full.emplace(cfg.roll, cfg.motors, cfg.inner_dt);
        kc = static_cast<int>(std::lround(cfg.motors[0].comm_delay / cfg.Ts));
    }

    RunResult result;
    result.kd = dm.kd;
    result.events = disturbance_events(cfg);

    RollSensor sensor(cfg.noise_std, cfg.rng_seed);
    InputBuffer buf(dm.kd);
    ObserverState obs;
    RollState x = cfg.initial;

    const long steps = std::lround(cfg.duration / cfg.Ts);
    result.trace.reserve(static_cast<std::size_t>(steps));

    for (long k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * cfg.Ts;
        const double tau_w = disturbance_torque_at_step(cfg, k);
        const double y = sensor.measure(x.theta);
        const double delayed = buf.oldest();

        const Eigen::Vector3d prior = obs.x_hat;
        if (gain) {
            obs = observer_step(obs, y, delayed, *gain, am, cfg.tau_filter_alpha);
        }
        const double d = cfg.feedforward ? obs.filtered_tau_w : 0.0;

        TraceRecord rec;
        rec.t = t;
        rec.theta = x.theta;
        rec.theta_dot = x.theta_dot;
        rec.wingtip_disp = x.theta * half_span;
        rec.tau_w_true = tau_w;
        rec.tau_w_hat = obs.x_hat(2);
        rec.tau_w_hat_filtered = obs.filtered_tau_w;

        const auto start = std::chrono::steady_clock::now();
        double fb = 0.0;
        if (pid) {
            fb = pid->step(y, limit);
        } else {
            const RollState est{prior(0), prior(1)};
            if (cfg.controller == ControllerKind::mpc_constrained) {
                const MpcStepResult r =
                    mpc_constrained_step(est, buf, stack, mpc_cfg, d, &solver);
                fb = r.command;
                rec.qp_status = flag_of(r.status);
            } else {
                // The feed-forward stage applies the actuator limit after subtracting d.
                fb = mpc_unconstrained_step(est, buf, stack, limit + std::abs(d), d);
            }
        }
        result.controller_seconds +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        ++result.controller_steps;

        const double cmd = cfg.feedforward ? feedforward_compensate(fb, d, limit)
                                           : saturate(fb, limit);
        const double applied = buf.push(cmd);
        rec.cmd_torque = cmd;
        rec.applied_torque = applied;
        result.trace.push_back(rec);

        try {
            if (full) {
                const double sent = kc == 0 ? applied : buf[static_cast<std::size_t>(kc - 1)];
                full->advance(sent, tau_w, cfg.Ts);
                x = RollState{full->state().theta, full->state().theta_dot};
            } else {
                x = step_simplified_plant(x, applied, tau_w, dm, cfg.roll);
                if (!std::isfinite(x.theta) || !std::isfinite(x.theta_dot)) {
                    throw PlantDivergence("simplified plant state is not finite");
                }
            }
        } catch (const PlantDivergence& e) {
            TraceRecord last;
            last.t = t + cfg.Ts;
            last.theta = x.theta;
            last.theta_dot = x.theta_dot;
            last.wingtip_disp = x.theta * half_span;
            last.tau_w_true = tau_w;
            last.qp_status = static_cast<int>(StepFlag::diverged);
            result.trace.push_back(last);
            result.diverged = true;
            result.divergence_message = e.what();
            break;
        }
    }
    return result;
}

} // namespace xwind
