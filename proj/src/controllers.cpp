#include "xwind/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "xwind/errors.hpp"

namespace xwind {

void PidConfig::validate() const {
    if (!(std::isfinite(kp) && std::isfinite(ki) && std::isfinite(kd))) {
        throw InvalidParameter("PidConfig: gains must be finite");
    }
    if (!(std::isfinite(Ts) && Ts > 0.0)) {
        throw InvalidParameter("PidConfig: Ts must be > 0");
    }
    if (derivative_window < 1) {
        throw InvalidParameter("PidConfig: derivative_window must be >= 1");
    }
    if (!(meas_filter_alpha > 0.0 && meas_filter_alpha <= 1.0)) {
        throw InvalidParameter("PidConfig: meas_filter_alpha must be in (0, 1]");
    }
}

PidController::PidController(PidConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    errors_.assign(static_cast<std::size_t>(cfg_.derivative_window) + 1, 0.0);
}

double PidController::step(double theta_meas, double torque_limit) {
    filtered_theta_ = cfg_.meas_filter_alpha * theta_meas +
                      (1.0 - cfg_.meas_filter_alpha) * filtered_theta_;
    const double error = -filtered_theta_;

    integral_ += cfg_.Ts * error;
    if (cfg_.ki != 0.0) {
        const double bound = torque_limit / std::abs(cfg_.ki);
        integral_ = std::clamp(integral_, -bound, bound);
    }

    std::rotate(errors_.rbegin(), errors_.rbegin() + 1, errors_.rend());
    errors_.front() = error;
    double diff_sum = 0.0;
    for (int i = 0; i < cfg_.derivative_window; ++i) {
        const auto k = static_cast<std::size_t>(i);
        diff_sum += (errors_[k] - errors_[k + 1]) / cfg_.Ts;
    }
    const double derivative = diff_sum / cfg_.derivative_window;

    const double command = cfg_.kp * error + cfg_.ki * integral_ + cfg_.kd * derivative;
    return saturate(command, torque_limit);
}

double feedforward_compensate(double fb_command, double tau_w_hat_filtered, double limit) {
    return saturate(fb_command - tau_w_hat_filtered, limit);
}

MpcConfig MpcConfig::uniform(int horizon, double q, double q_terminal, double r,
                             double torque_limit) {
    MpcConfig cfg;
    cfg.horizon = horizon;
    cfg.q_diag.assign(static_cast<std::size_t>(std::max(horizon, 0)), q);
    if (!cfg.q_diag.empty()) {
        cfg.q_diag.back() = q_terminal;
    }
    cfg.r_diag.assign(static_cast<std::size_t>(std::max(horizon, 0)), r);
    cfg.u_min = -torque_limit;
    cfg.u_max = torque_limit;
    return cfg;
}

void MpcConfig::validate() const {
    if (horizon < 1) {
        throw InvalidParameter("MpcConfig: horizon must be >= 1");
    }
    const auto n = static_cast<std::size_t>(horizon);
    if (q_diag.size() != n || r_diag.size() != n) {
        throw InvalidParameter("MpcConfig: q_diag and r_diag must have `horizon` entries");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(std::isfinite(q_diag[i]) && q_diag[i] >= 0.0)) {
            throw InvalidParameter("MpcConfig: output weights must be >= 0");
        }
        if (!(std::isfinite(r_diag[i]) && r_diag[i] > 0.0)) {
            throw InvalidParameter("MpcConfig: input weights must be > 0");
        }
    }
    if (*std::max_element(q_diag.begin(), q_diag.end()) > q_diag.back()) {
        throw InvalidParameter("MpcConfig: terminal output weight must be the largest");
    }
    if (!(u_min < u_max)) {
        throw InvalidParameter("MpcConfig: u_min must be < u_max");
    }
    if (output_constraints && !(y_min < y_max)) {
        throw InvalidParameter("MpcConfig: y_min must be < y_max");
    }
}

PredictionStack build_prediction(const DiscreteModel& dm, const MpcConfig& cfg) {
    cfg.validate();
    const int np = cfg.horizon;
    PredictionStack s;
    s.kd = dm.kd;

    // markov(j) = C A^j B, powers(j) = C A^j.
    std::vector<Eigen::RowVector2d> powers(static_cast<std::size_t>(np) + 1);
    powers[0] = dm.C;
    for (int j = 1; j <= np; ++j) {
        powers[static_cast<std::size_t>(j)] = powers[static_cast<std::size_t>(j) - 1] * dm.A;
    }
    s.Phi.resize(np, 2);
    s.G.setZero(np, np);
    for (int i = 0; i < np; ++i) {
        s.Phi.row(i) = powers[static_cast<std::size_t>(i) + 1];
        for (int j = 0; j <= i; ++j) {
            s.G(i, j) = powers[static_cast<std::size_t>(i - j)].dot(dm.B);
        }
    }

    s.q_diag = Eigen::Map<const Eigen::VectorXd>(cfg.q_diag.data(), np);
    s.r_diag = Eigen::Map<const Eigen::VectorXd>(cfg.r_diag.data(), np);
    const Eigen::MatrixXd qg = s.q_diag.asDiagonal() * s.G;
    s.H = s.G.transpose() * qg;
    s.H.diagonal() += s.r_diag;
    s.H = (0.5 * (s.H + s.H.transpose())).eval();

    const Eigen::LLT<Eigen::MatrixXd> llt(s.H);
    if (llt.info() != Eigen::Success) {
        throw NotPositiveDefinite("build_prediction: H is not positive definite");
    }
    s.H_inv = llt.solve(Eigen::MatrixXd::Identity(np, np));
    const double residual =
        (s.H * s.H_inv - Eigen::MatrixXd::Identity(np, np)).cwiseAbs().maxCoeff();
    if (!(residual < 1e-9)) {
        std::ostringstream os;
        os << "build_prediction: H H⁻¹ deviates from identity by " << residual;
        throw NotPositiveDefinite(os.str());
    }
    s.unconstrained_gain = -s.H_inv * qg.transpose();

    s.K_shift = Eigen::Matrix2d::Identity();
    s.M_shift.resize(2, dm.kd);
    // Column i multiplies τ(k−kd+i) and equals A^(kd−1−i) B.
    Eigen::Vector2d column = dm.B;
    for (int i = dm.kd - 1; i >= 0; --i) {
        s.M_shift.col(i) = column;
        column = dm.A * column;
        s.K_shift = dm.A * s.K_shift;
    }
    return s;
}

RollState shift_state(const RollState& x, const InputBuffer& buf, const PredictionStack& stack,
                      double disturbance) {
    if (static_cast<int>(buf.size()) != stack.kd) {
        std::ostringstream os;
        os << "shift_state: buffer holds " << buf.size() << " commands, model delay is "
           << stack.kd;
        throw BufferMismatch(os.str());
    }
    Eigen::Vector2d shifted = stack.K_shift * x.vec();
    for (int i = 0; i < stack.kd; ++i) {
        shifted += stack.M_shift.col(i) * (buf[static_cast<std::size_t>(i)] + disturbance);
    }
    return RollState::from(shifted);
}

Eigen::VectorXd free_response(const PredictionStack& stack, const RollState& shifted) {
    return stack.Phi * shifted.vec();
}

QpProblem mpc_qp(const PredictionStack& stack, const MpcConfig& cfg, const Eigen::VectorXd& F,
                 double disturbance) {
    const Eigen::Index np = stack.horizon();
    QpProblem p;
    p.H = stack.H;
    p.f = 2.0 * stack.G.transpose() * (stack.q_diag.asDiagonal() * F);
    p.lower = Eigen::VectorXd::Constant(np, cfg.u_min + disturbance);
    p.upper = Eigen::VectorXd::Constant(np, cfg.u_max + disturbance);
    if (cfg.output_constraints) {
        p.rows = stack.G;
        p.row_lower = Eigen::VectorXd::Constant(np, cfg.y_min) - F;
        p.row_upper = Eigen::VectorXd::Constant(np, cfg.y_max) - F;
    } else {
        p.rows.resize(0, np);
        p.row_lower.resize(0);
        p.row_upper.resize(0);
    }
    return p;
}

MpcStepResult mpc_constrained_step(const RollState& x, const InputBuffer& buf,
                                   const PredictionStack& stack, const MpcConfig& cfg,
                                   double disturbance, QpSolver* solver,
                                   const QpOptions& opts) {
    const RollState shifted = shift_state(x, buf, stack, disturbance);
    const Eigen::VectorXd F = free_response(stack, shifted);
    const QpProblem qp = mpc_qp(stack, cfg, F, disturbance);

    QpSolver local;
    QpSolver& s = solver != nullptr ? *solver : local;
    const QpSolution sol = s.solve(qp, opts);

    MpcStepResult result;
    result.status = sol.status;
    result.iterations = sol.iterations;
    if (sol.status == QpStatus::optimal) {
        result.command = sol.u_star(0);
    } else {
        const double u0 = stack.unconstrained_gain.row(0).dot(F);
        result.command = std::clamp(u0, cfg.u_min + disturbance, cfg.u_max + disturbance);
        result.fallback = true;
    }
    return result;
}

double mpc_unconstrained_step(const RollState& x, const InputBuffer& buf,
                              const PredictionStack& stack, double torque_limit,
                              double disturbance) {
    const RollState shifted = shift_state(x, buf, stack, disturbance);
    const double u0 = stack.unconstrained_gain.row(0).dot(stack.Phi * shifted.vec());
    return saturate(u0, torque_limit);
}

} // namespace xwind
