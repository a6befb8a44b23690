#pragma once

#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "xwind/model.hpp"
#include "xwind/plant.hpp"
#include "xwind/qpsolve.hpp"

namespace xwind {

// ---------------------------------------------------------------------------
// PID baseline
// ---------------------------------------------------------------------------

struct PidConfig {
    double kp = 3200.0;
    double ki = 1200.0;
    double kd = 700.0;
    double Ts = 0.1;
    int derivative_window = 3;        ///< backward differences averaged for the D-term
    double meas_filter_alpha = 0.5;   ///< first-order low-pass on the roll measurement

    void validate() const;
};

/**
 * Discrete PID regulating θ to zero:
 *
 *   CO(k) = Kp e(k) + Ki I(k) + Kd Δe(k),   e(k) = −θ_f(k)
 *   I(k)  = I(k−1) + Ts e(k),  clamped so |Ki I| ≤ τ_limit
 *   Δe(k) = mean of the last `derivative_window` differences (e(i) − e(i−1)) / Ts
 *
 * Errors before the first step count as zero.
 */
class PidController {
public:
    explicit PidController(PidConfig cfg);

    double step(double theta_meas, double torque_limit);

    [[nodiscard]] double integral() const { return integral_; }
    [[nodiscard]] double integral_contribution() const { return cfg_.ki * integral_; }
    [[nodiscard]] double filtered_theta() const { return filtered_theta_; }
    [[nodiscard]] const PidConfig& config() const { return cfg_; }

private:
    PidConfig cfg_;
    double integral_ = 0.0;
    double filtered_theta_ = 0.0;
    std::vector<double> errors_;  // newest first, derivative_window + 1 entries
};

/// fb − τ̂_w, saturated to ±limit.
double feedforward_compensate(double fb_command, double tau_w_hat_filtered, double limit);

// ---------------------------------------------------------------------------
// Delay-compensating MPC
// ---------------------------------------------------------------------------

struct MpcConfig {
    int horizon = 30;
    std::vector<double> q_diag;   ///< output weights, terminal weight last
    std::vector<double> r_diag;   ///< input weights, all > 0
    double u_min = -1000.0;
    double u_max = 1000.0;
    bool output_constraints = false;
    double y_min = -std::numeric_limits<double>::infinity();
    double y_max = std::numeric_limits<double>::infinity();

    /// Uniform weights with a heavier terminal output weight.
    static MpcConfig uniform(int horizon, double q, double q_terminal, double r,
                             double torque_limit);

    void validate() const;
};

/**
 * Offline matrices of the delay-shifted predictor
 *
 *   x(k+kd) = K_shift x(k) + M_shift [τ(k−kd) … τ(k−1)]ᵀ
 *   Y(k)    = Phi x(k+kd) + G U(k)
 *
 * with Phi rows C A^j and G(i, j) = C A^(i−j) B for j ≤ i.
 */
struct PredictionStack {
    int kd = 0;
    Eigen::MatrixXd Phi;
    Eigen::MatrixXd G;
    Eigen::MatrixXd H;
    Eigen::MatrixXd H_inv;
    Eigen::Matrix2d K_shift;
    Eigen::MatrixXd M_shift;
    Eigen::VectorXd q_diag;
    Eigen::VectorXd r_diag;
    /// −H⁻¹ Gᵀ Q_c, mapping F(k) to the unconstrained optimal sequence.
    Eigen::MatrixXd unconstrained_gain;

    [[nodiscard]] int horizon() const { return static_cast<int>(G.rows()); }
};

/// Throws InvalidParameter for a bad config and NotPositiveDefinite if H is not PD.
PredictionStack build_prediction(const DiscreteModel& dm, const MpcConfig& cfg);

/**
 * Propagates x(k) across the input delay with the buffered commands.
 *
 * `disturbance` is a persistent torque added to every buffered input; with
 * feed-forward active it is the estimate that the compensation removed.
 * Throws BufferMismatch when the buffer length is not kd.
 */
RollState shift_state(const RollState& x, const InputBuffer& buf, const PredictionStack& stack,
                      double disturbance = 0.0);

/// F(k) = Phi x(k+kd).
Eigen::VectorXd free_response(const PredictionStack& stack, const RollState& shifted);

/// QP of the constrained MPC for free response F. The input box is shifted by
/// `disturbance` so that the compensated command stays inside [u_min, u_max].
QpProblem mpc_qp(const PredictionStack& stack, const MpcConfig& cfg, const Eigen::VectorXd& F,
                 double disturbance = 0.0);

struct MpcStepResult {
    double command = 0.0;
    QpStatus status = QpStatus::optimal;
    int iterations = 0;
    bool fallback = false;  ///< QP failed; saturated unconstrained law used
};

MpcStepResult mpc_constrained_step(const RollState& x, const InputBuffer& buf,
                                   const PredictionStack& stack, const MpcConfig& cfg,
                                   double disturbance = 0.0, QpSolver* solver = nullptr,
                                   const QpOptions& opts = {});

/// First element of −H⁻¹GᵀQ_cF(k), saturated to ±torque_limit.
double mpc_unconstrained_step(const RollState& x, const InputBuffer& buf,
                              const PredictionStack& stack, double torque_limit,
                              double disturbance = 0.0);

} // namespace xwind
