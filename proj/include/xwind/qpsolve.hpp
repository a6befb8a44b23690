#pragma once

#include <vector>

#include <Eigen/Dense>

namespace xwind {

/**
 * Dense strictly convex QP
 *
 *   minimize    uᵀ H u + fᵀ u
 *   subject to  lower ≤ u ≤ upper
 *               row_lower ≤ rows · u ≤ row_upper
 *
 * Note the objective carries no ½. Infinite bounds are allowed and
 * simply drop the corresponding constraint. `rows` may have zero rows.
 */
struct QpProblem {
    Eigen::MatrixXd H;
    Eigen::VectorXd f;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    Eigen::MatrixXd rows;
    Eigen::VectorXd row_lower;
    Eigen::VectorXd row_upper;

    /// Box-only problem with no linear rows.
    static QpProblem box(Eigen::MatrixXd H, Eigen::VectorXd f, Eigen::VectorXd lower,
                         Eigen::VectorXd upper);

    [[nodiscard]] Eigen::Index size() const { return f.size(); }
    [[nodiscard]] double objective(const Eigen::VectorXd& u) const;
    /// Throws InvalidParameter on inconsistent sizes, asymmetric or non-PD H,
    /// or crossed bounds.
    void validate() const;
};

enum class QpStatus { optimal, infeasible, max_iters };

const char* to_string(QpStatus status);

/// Nonnegative multipliers, one per side of every constraint.
struct QpMultipliers {
    Eigen::VectorXd box_lower;
    Eigen::VectorXd box_upper;
    Eigen::VectorXd row_lower;
    Eigen::VectorXd row_upper;

    static QpMultipliers zeros(Eigen::Index n, Eigen::Index m);
};

struct QpOptions {
    double tol = 1e-8;
    int max_iters = 5000;
    /// Record the dual objective after every sweep (debug aid and tests).
    bool record_dual_objective = false;
    /// Optional multipliers from a previous solve of the same structure.
    const QpMultipliers* warm_start = nullptr;
};

struct QpSolution {
    Eigen::VectorXd u_star;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    QpStatus status = QpStatus::max_iters;
    QpMultipliers multipliers;
    /// Dual objective ½λᵀPλ + dᵀλ per sweep when requested; non-increasing.
    std::vector<double> dual_objective_history;
};

/// Largest of the stationarity, primal, dual and complementarity violations.
double check_kkt(const QpProblem& p, const Eigen::VectorXd& u, const QpMultipliers& mult);

/// Dual-norm bound beyond which a problem is declared infeasible.
inline constexpr double kQpDualDivergence = 1e12;

/**
 * Hildreth dual coordinate ascent with a closed-form fast path and an
 * active-set polish.
 *
 * The unconstrained minimizer −½H⁻¹f is returned directly when it is
 * feasible. Otherwise coordinate sweeps on the dual run until the current
 * positive multipliers identify an active set whose equality-constrained
 * KKT solution is primal and dual feasible. Work buffers live in the
 * solver object so repeated solves of one size do not reallocate.
 */
class QpSolver {
public:
    QpSolution solve(const QpProblem& p, const QpOptions& opts = {});

private:
    Eigen::MatrixXd M_;
    Eigen::VectorXd b_;
    Eigen::MatrixXd W_;
    Eigen::MatrixXd P_;
    Eigen::VectorXd d_;
    Eigen::VectorXd lambda_;
    std::vector<int> kind_;
    std::vector<Eigen::Index> index_;
};

QpSolution solve_qp(const QpProblem& p, const QpOptions& opts = {});

} // namespace xwind
