#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xwind/controllers.hpp"
#include "xwind/estimator.hpp"
#include "xwind/model.hpp"
#include "xwind/plant.hpp"

namespace xwind {

enum class PlantKind { simplified, full };
enum class ControllerKind { pid, mpc_constrained, mpc_unconstrained };
enum class EstimatorKind { none, pole_place, kalman };
enum class DisturbanceKind { none, wind, weight };

/// MPC weights as written in scenario files; the box defaults to ±τ_m,max.
struct MpcTuning {
    int horizon = 30;
    double q = 1.0;
    double q_terminal = 50.0;
    double r = 2e-9;
    std::optional<double> u_min;
    std::optional<double> u_max;
    bool output_constraints = false;
    double y_min = -0.05;
    double y_max = 0.05;

    [[nodiscard]] MpcConfig to_config(double torque_limit) const;
};

/// One closed-loop experiment. Every field has a documented default.
struct ScenarioConfig {
    std::string name = "scenario";
    PlantKind plant = PlantKind::simplified;
    ControllerKind controller = ControllerKind::pid;
    EstimatorKind estimator = EstimatorKind::none;
    bool feedforward = false;

    DisturbanceKind disturbance = DisturbanceKind::none;
    WindProfile wind;
    WindTorqueMap wind_map;
    WeightDisturbance weight;

    double duration = 60.0;
    double Ts = 0.1;
    double noise_std = 0.002;
    std::uint64_t rng_seed = 1;
    double band = 0.02;
    RollState initial;

    RollPlantParams roll;
    MotorPair motors{};
    double inner_dt = 1e-3;

    PidConfig pid;
    MpcTuning mpc;
    std::vector<std::complex<double>> poles{0.65, 0.7, 0.75};
    KalmanConfig kalman;
    double tau_filter_alpha = 0.05;

    /// Throws ConfigError listing every violated invariant.
    void validate() const;
};

/**
 * Parses the scenario text format: `[section]` headers, `key = value`
 * lines, `#` comments. Unknown sections or keys are rejected with their
 * line number. Defaults fill everything not mentioned. The result is
 * validated before it is returned.
 */
ScenarioConfig parse_scenario(std::string_view text);

ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Applies one `section.key = value` override (used by sweeps), unvalidated.
void apply_setting(ScenarioConfig& cfg, std::string_view dotted_key, std::string_view value);

/// Status column of the trace.
enum class StepFlag : int {
    none = 0,        ///< controller without a QP
    optimal = 1,     ///< QP solved
    infeasible = 2,  ///< QP infeasible, fallback law applied
    max_iters = 3,   ///< QP iteration cap, fallback law applied
    diverged = 4,    ///< plant state stopped being finite; run ended
};

struct TraceRecord {
    double t = 0.0;
    double theta = 0.0;
    double theta_dot = 0.0;
    double wingtip_disp = 0.0;
    double cmd_torque = 0.0;
    double applied_torque = 0.0;
    double tau_w_true = 0.0;
    double tau_w_hat = 0.0;
    double tau_w_hat_filtered = 0.0;
    int qp_status = 0;
};

struct RunResult {
    std::vector<TraceRecord> trace;
    std::vector<double> events;
    int kd = 0;
    bool diverged = false;
    std::string divergence_message;
    double controller_seconds = 0.0;
    long controller_steps = 0;

    [[nodiscard]] double mean_controller_seconds() const {
        return controller_steps > 0 ? controller_seconds / static_cast<double>(controller_steps)
                                    : 0.0;
    }
};

/// Disturbance torque acting during control step k (events snapped to steps).
double disturbance_torque_at_step(const ScenarioConfig& cfg, long k);

/// Times at which the disturbance torque changes, snapped to control steps.
std::vector<double> disturbance_events(const ScenarioConfig& cfg);

/**
 * Fixed-step closed loop at Ts:
 * measure → observer → controller → feed-forward → input buffer → plant.
 * Plant divergence ends the run with a final flagged record instead of
 * throwing.
 */
RunResult run_scenario(const ScenarioConfig& cfg);

struct EventMetrics {
    double event_time = 0.0;
    double window = 0.0;         ///< time until the next event or the trace end
    bool settled = false;
    double settling_time = 0.0;  ///< meaningful only when settled
    double peak_disp = 0.0;
};

struct Metrics {
    double band = 0.0;
    std::vector<EventMetrics> events;

    [[nodiscard]] bool all_settled() const;
    /// Worst settling time; unsettled events count as their full window.
    [[nodiscard]] double worst_settling_bound() const;
    [[nodiscard]] double peak_disp() const;
};

/// Per-event settling and peak of |wingtip_disp|. Throws InvalidParameter for band ≤ 0.
Metrics compute_metrics(const std::vector<TraceRecord>& trace, double band,
                        const std::vector<double>& events);

/// (baseline − candidate) / baseline · 100.
double response_reduction_pct(double baseline_settling, double candidate_settling);

inline constexpr std::string_view kTraceHeader =
    "t,theta,theta_dot,wingtip_disp,cmd_torque,applied_torque,tau_w_true,tau_w_hat,"
    "tau_w_hat_filtered,qp_status";

std::string format_trace(const std::vector<TraceRecord>& trace);

/// Throws Error carrying the path on I/O failure.
void write_trace(const std::vector<TraceRecord>& trace, const std::filesystem::path& path);

std::vector<TraceRecord> parse_trace(std::string_view csv);

/// Key-value report of a metrics object.
std::string format_metrics(const std::string& name, const Metrics& m);

} // namespace xwind
