// Command-line front end: run, compare and sweep closed-loop scenarios.

#include <cstdio>
#include <filesystem>
#include <future>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xwind/errors.hpp"
#include "xwind/harness.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;

xwind::RunResult run_checked(const xwind::ScenarioConfig& cfg) {
    xwind::RunResult r = xwind::run_scenario(cfg);
    if (r.diverged) {
        throw xwind::PlantDivergence(cfg.name + ": " + r.divergence_message);
    }
    return r;
}

std::string settling_text(const xwind::EventMetrics& e) {
    std::ostringstream os;
    if (e.settled) {
        os << std::setprecision(4) << e.settling_time << " s";
    } else {
        os << "not-settled (>" << std::setprecision(4) << e.window << " s)";
    }
    return os.str();
}

int cmd_run(const std::string& file, const std::string& out, bool metrics,
            std::optional<double> band) {
    const xwind::ScenarioConfig cfg = xwind::load_scenario(file);
    const xwind::RunResult r = xwind::run_scenario(cfg);
    if (!out.empty()) {
        xwind::write_trace(r.trace, out);
    }
    if (metrics) {
        const auto m = xwind::compute_metrics(r.trace, band.value_or(cfg.band), r.events);
        std::cout << xwind::format_metrics(cfg.name, m);
        std::cout << "controller_mean_us = " << r.mean_controller_seconds() * 1e6 << '\n';
    }
    if (r.diverged) {
        std::cerr << "error: plant diverged in " << cfg.name << ": " << r.divergence_message
                  << '\n';
        return kExitDiverged;
    }
    return 0;
}

int cmd_compare(const std::string& file_a, const std::string& file_b,
                std::optional<double> band) {
    const xwind::ScenarioConfig a = xwind::load_scenario(file_a);
    const xwind::ScenarioConfig b = xwind::load_scenario(file_b);
    const xwind::RunResult ra = run_checked(a);
    const xwind::RunResult rb = run_checked(b);
    const double bw = band.value_or(a.band);
    const auto ma = xwind::compute_metrics(ra.trace, bw, ra.events);
    const auto mb = xwind::compute_metrics(rb.trace, bw, rb.events);

    std::cout << "baseline = " << a.name << '\n' << "candidate = " << b.name << '\n'
              << "band = " << bw << '\n';
    const std::size_t n = std::min(ma.events.size(), mb.events.size());
    if (ma.events.size() != mb.events.size()) {
        std::cout << "note = event counts differ (" << ma.events.size() << " vs "
                  << mb.events.size() << "); comparing the first " << n << '\n';
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto& ea = ma.events[i];
        const auto& eb = mb.events[i];
        const double base = ea.settled ? ea.settling_time : ea.window;
        const double cand = eb.settled ? eb.settling_time : eb.window;
        std::cout << "event." << i << ".time = " << ea.event_time << '\n'
                  << "event." << i << ".baseline_settling = " << settling_text(ea) << '\n'
                  << "event." << i << ".candidate_settling = " << settling_text(eb) << '\n';
        if (base > 0.0) {
            std::cout << "event." << i << ".reduction_pct = " << std::setprecision(4)
                      << xwind::response_reduction_pct(base, cand)
                      << (ea.settled ? "" : " (lower bound)") << '\n';
        }
        std::cout << "event." << i << ".baseline_peak = " << ea.peak_disp << '\n'
                  << "event." << i << ".candidate_peak = " << eb.peak_disp << '\n';
    }
    const double base = ma.worst_settling_bound();
    if (base > 0.0) {
        std::cout << "reduction_pct = " << std::setprecision(4)
                  << xwind::response_reduction_pct(base, mb.worst_settling_bound())
                  << (ma.all_settled() ? "" : " (lower bound)") << '\n';
    }
    return 0;
}

std::vector<std::string> split_values(const std::string& list) {
    std::vector<std::string> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

int cmd_sweep(const std::string& file, const std::string& param, const std::string& values,
              std::optional<double> band) {
    const xwind::ScenarioConfig base = xwind::load_scenario(file);
    const auto list = split_values(values);
    if (list.empty()) {
        throw xwind::ConfigError("--values is empty");
    }
    std::vector<xwind::ScenarioConfig> configs;
    for (const auto& v : list) {
        xwind::ScenarioConfig cfg = base;
        xwind::apply_setting(cfg, param, v);
        cfg.name = base.name + "[" + param + "=" + v + "]";
        cfg.validate();
        configs.push_back(std::move(cfg));
    }

    std::vector<std::future<xwind::RunResult>> jobs;
    jobs.reserve(configs.size());
    for (const auto& cfg : configs) {
        jobs.push_back(std::async(std::launch::async, [&cfg] { return xwind::run_scenario(cfg); }));
    }

    int code = 0;
    std::cout << param << ",settled,worst_settling,peak_disp\n";
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const xwind::RunResult r = jobs[i].get();
        if (r.diverged) {
            std::cout << list[i] << ",diverged,,\n";
            code = kExitDiverged;
            continue;
        }
        const auto m = xwind::compute_metrics(r.trace, band.value_or(configs[i].band), r.events);
        std::cout << list[i] << ',' << (m.all_settled() ? "true" : "false") << ','
                  << m.worst_settling_bound() << ',' << m.peak_disp() << '\n';
    }
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Crosswind roll stabilization simulator"};
    app.require_subcommand(1);

    std::string run_file;
    std::string run_out;
    bool run_metrics = false;
    std::optional<double> band;
    auto* run = app.add_subcommand("run", "Simulate one scenario");
    run->add_option("scenario", run_file, "Scenario file")->required();
    run->add_option("--out", run_out, "Write the trace CSV here");
    run->add_flag("--metrics", run_metrics, "Print settling and peak metrics");
    run->add_option("--band", band, "Settling band [m]");

    std::string cmp_a;
    std::string cmp_b;
    auto* compare = app.add_subcommand("compare", "Reduction of B's settling time against A");
    compare->add_option("baseline", cmp_a, "Baseline scenario")->required();
    compare->add_option("candidate", cmp_b, "Candidate scenario")->required();
    compare->add_option("--band", band, "Settling band [m]");

    std::string sweep_file;
    std::string sweep_param;
    std::string sweep_values;
    auto* sweep = app.add_subcommand("sweep", "Run a scenario over a list of parameter values");
    sweep->add_option("scenario", sweep_file, "Scenario file")->required();
    sweep->add_option("--param", sweep_param, "section.key to vary")->required();
    sweep->add_option("--values", sweep_values, "Comma-separated values")->required();
    sweep->add_option("--band", band, "Settling band [m]");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            return cmd_run(run_file, run_out, run_metrics, band);
        }
        if (*compare) {
            return cmd_compare(cmp_a, cmp_b, band);
        }
        return cmd_sweep(sweep_file, sweep_param, sweep_values, band);
    } catch (const xwind::PlantDivergence& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDiverged;
    } catch (const xwind::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}
