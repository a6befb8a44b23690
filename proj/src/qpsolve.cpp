#include "xwind/qpsolve.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>

#include "xwind/errors.hpp"

namespace xwind {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum Kind : int { kBoxUpper = 0, kBoxLower = 1, kRowUpper = 2, kRowLower = 3 };

double max_abs(const Eigen::VectorXd& v) {
    return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

} // namespace

QpProblem QpProblem::box(Eigen::MatrixXd H, Eigen::VectorXd f, Eigen::VectorXd lower,
                         Eigen::VectorXd upper) {
    QpProblem p;
    const Eigen::Index n = f.size();
    p.H = std::move(H);
    p.f = std::move(f);
    p.lower = std::move(lower);
    p.upper = std::move(upper);
    p.rows.resize(0, n);
    p.row_lower.resize(0);
    p.row_upper.resize(0);
    return p;
}

double QpProblem::objective(const Eigen::VectorXd& u) const {
    return u.dot(H * u) + f.dot(u);
}

void QpProblem::validate() const {
    const Eigen::Index n = f.size();
    if (H.rows() != n || H.cols() != n || lower.size() != n || upper.size() != n) {
        throw InvalidParameter("QpProblem: H, f and box sizes disagree");
    }
    if (rows.cols() != n || row_lower.size() != rows.rows() || row_upper.size() != rows.rows()) {
        throw InvalidParameter("QpProblem: row constraint sizes disagree");
    }
    if (!H.allFinite() || !f.allFinite() || !rows.allFinite()) {
        throw InvalidParameter("QpProblem: non-finite data");
    }
    const double hscale = std::max(1.0, H.cwiseAbs().maxCoeff());
    if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * hscale) {
        throw InvalidParameter("QpProblem: H is not symmetric");
    }
    if (n > 0) {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
        if (!(es.eigenvalues().minCoeff() > 0.0)) {
            throw InvalidParameter("QpProblem: H is not positive definite");
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::isnan(lower(i)) || std::isnan(upper(i)) || lower(i) > upper(i)) {
            throw InvalidParameter("QpProblem: box bounds crossed");
        }
    }
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        if (std::isnan(row_lower(i)) || std::isnan(row_upper(i)) || row_lower(i) > row_upper(i)) {
            throw InvalidParameter("QpProblem: row bounds crossed");
        }
    }
}

const char* to_string(QpStatus status) {
    switch (status) {
    case QpStatus::optimal:
        return "optimal";
    case QpStatus::infeasible:
        return "infeasible";
    case QpStatus::max_iters:
        return "max_iters";
    }
    return "unknown";
}

QpMultipliers QpMultipliers::zeros(Eigen::Index n, Eigen::Index m) {
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(m),
            Eigen::VectorXd::Zero(m)};
}

double check_kkt(const QpProblem& p, const Eigen::VectorXd& u, const QpMultipliers& mult) {
    const Eigen::Index n = p.size();
    const Eigen::Index m = p.rows.rows();
    if (u.size() != n || mult.box_lower.size() != n || mult.box_upper.size() != n ||
        mult.row_lower.size() != m || mult.row_upper.size() != m) {
        throw InvalidParameter("check_kkt: dimension mismatch");
    }

    Eigen::VectorXd grad = 2.0 * p.H * u + p.f + mult.box_upper - mult.box_lower;
    if (m > 0) {
        grad += p.rows.transpose() * (mult.row_upper - mult.row_lower);
    }
    double residual = max_abs(grad);

    // Primal, dual and complementarity. An infinite bound must carry a zero
    // multiplier and contributes no slack.
    auto side = [&residual](double slack, double lambda) {
        residual = std::max(residual, std::max(0.0, -lambda));
        if (std::isinf(slack)) {
            residual = std::max(residual, std::abs(lambda) > 0.0 ? kInf : 0.0);
            return;
        }
        residual = std::max(residual, std::max(0.0, -slack));
        residual = std::max(residual, std::abs(lambda * slack));
    };
    for (Eigen::Index i = 0; i < n; ++i) {
        side(u(i) - p.lower(i), mult.box_lower(i));
        side(p.upper(i) - u(i), mult.box_upper(i));
    }
    if (m > 0) {
        const Eigen::VectorXd r = p.rows * u;
        for (Eigen::Index i = 0; i < m; ++i) {
            side(r(i) - p.row_lower(i), mult.row_lower(i));
            side(p.row_upper(i) - r(i), mult.row_upper(i));
        }
    }
    return residual;
}

QpSolution QpSolver::solve(const QpProblem& p, const QpOptions& opts) {
    p.validate();
    const Eigen::Index n = p.size();
    const Eigen::Index m = p.rows.rows();

    QpSolution sol;
    sol.multipliers = QpMultipliers::zeros(n, m);

    const Eigen::MatrixXd hs = 2.0 * p.H;
    const Eigen::LLT<Eigen::MatrixXd> llt(hs);
    if (llt.info() != Eigen::Success) {
        throw NotPositiveDefinite("solve_qp: H is not positive definite");
    }
    const Eigen::VectorXd u0 = -llt.solve(p.f);

    auto finish = [&](const Eigen::VectorXd& u, QpStatus status) {
        sol.u_star = u;
        sol.objective = p.objective(u);
        sol.kkt_residual = check_kkt(p, u, sol.multipliers);
        sol.status = status;
        if (status == QpStatus::optimal && !(sol.kkt_residual <= opts.tol)) {
            sol.status = QpStatus::max_iters;
        }
        return sol;
    };

    // Single-row interval test: a row that no point of the box can satisfy.
    for (Eigen::Index r = 0; r < m; ++r) {
        double lo = 0.0;
        double hi = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double a = p.rows(r, j);
            if (a > 0.0) {
                lo += a * p.lower(j);
                hi += a * p.upper(j);
            } else if (a < 0.0) {
                lo += a * p.upper(j);
                hi += a * p.lower(j);
            }
        }
        const double slack = 1e-12 * (1.0 + std::abs(p.row_lower(r)) + std::abs(p.row_upper(r)));
        if (p.row_lower(r) > hi + slack || p.row_upper(r) < lo - slack) {
            return finish(u0, QpStatus::infeasible);
        }
    }

    // Stack finite constraint sides as M u ≤ b with unit-norm rows.
    kind_.clear();
    index_.clear();
    std::vector<double> bvals;
    std::vector<double> scales;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (std::isfinite(p.upper(j))) {
            kind_.push_back(kBoxUpper), index_.push_back(j), bvals.push_back(p.upper(j));
            scales.push_back(1.0);
        }
        if (std::isfinite(p.lower(j))) {
            kind_.push_back(kBoxLower), index_.push_back(j), bvals.push_back(-p.lower(j));
            scales.push_back(1.0);
        }
    }
    for (Eigen::Index r = 0; r < m; ++r) {
        const double norm = p.rows.row(r).norm();
        if (norm == 0.0) {
            continue;  // already cleared by the interval test
        }
        if (std::isfinite(p.row_upper(r))) {
            kind_.push_back(kRowUpper), index_.push_back(r), bvals.push_back(p.row_upper(r));
            scales.push_back(norm);
        }
        if (std::isfinite(p.row_lower(r))) {
            kind_.push_back(kRowLower), index_.push_back(r), bvals.push_back(-p.row_lower(r));
            scales.push_back(norm);
        }
    }
    const auto mc = static_cast<Eigen::Index>(kind_.size());
    M_.setZero(mc, n);
    b_.resize(mc);
    for (Eigen::Index i = 0; i < mc; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double s = scales[k];
        switch (kind_[k]) {
        case kBoxUpper:
            M_(i, index_[k]) = 1.0;
            break;
        case kBoxLower:
            M_(i, index_[k]) = -1.0;
            break;
        case kRowUpper:
            M_.row(i) = p.rows.row(index_[k]) / s;
            break;
        case kRowLower:
            M_.row(i) = -p.rows.row(index_[k]) / s;
            break;
        }
        b_(i) = bvals[k] / s;
    }

    auto primal_violation = [&](const Eigen::VectorXd& u) {
        if (mc == 0) {
            return 0.0;
        }
        return std::max(0.0, (M_ * u - b_).maxCoeff());
    };

    auto store_multipliers = [&](const Eigen::VectorXd& lam) {
        sol.multipliers = QpMultipliers::zeros(n, m);
        for (Eigen::Index i = 0; i < mc; ++i) {
            const auto k = static_cast<std::size_t>(i);
            const double value = lam(i) / scales[k];
            switch (kind_[k]) {
            case kBoxUpper:
                sol.multipliers.box_upper(index_[k]) = value;
                break;
            case kBoxLower:
                sol.multipliers.box_lower(index_[k]) = value;
                break;
            case kRowUpper:
                sol.multipliers.row_upper(index_[k]) = value;
                break;
            case kRowLower:
                sol.multipliers.row_lower(index_[k]) = value;
                break;
            }
        }
    };

    const bool have_warm = opts.warm_start != nullptr &&
                           opts.warm_start->box_lower.size() == n &&
                           opts.warm_start->row_lower.size() == m;

    if (!have_warm && primal_violation(u0) <= 1e-12 * (1.0 + max_abs(b_))) {
        return finish(u0, QpStatus::optimal);
    }

    W_ = llt.solve(M_.transpose());
    P_ = M_ * W_;
    d_ = b_ - M_ * u0;
    lambda_.setZero(mc);
    if (have_warm) {
        const QpMultipliers& w = *opts.warm_start;
        for (Eigen::Index i = 0; i < mc; ++i) {
            const auto k = static_cast<std::size_t>(i);
            double value = 0.0;
            switch (kind_[k]) {
            case kBoxUpper:
                value = w.box_upper(index_[k]);
                break;
            case kBoxLower:
                value = w.box_lower(index_[k]);
                break;
            case kRowUpper:
                value = w.row_upper(index_[k]);
                break;
            case kRowLower:
                value = w.row_lower(index_[k]);
                break;
            }
            lambda_(i) = std::max(0.0, value * scales[k]);
        }
    }

    // Radius of the region searched for feasible points by the Farkas test.
    // An unbounded box falls back to a generous multiple of the free optimum.
    double box_radius = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        box_radius = std::max({box_radius, std::abs(p.lower(j)), std::abs(p.upper(j))});
    }
    if (!std::isfinite(box_radius)) {
        box_radius = std::max(1e6, 1e3 * max_abs(u0));
    }

    auto dual_objective = [&]() { return 0.5 * lambda_.dot(P_ * lambda_) + d_.dot(lambda_); };
    const double primal_tol = 1e-9 * (1.0 + max_abs(b_));

    // Equality-constrained KKT solve on a working set seeded by λ > 0, then
    // a few primal/dual exchanges: drop the most negative multiplier or add
    // the most violated constraint until both sides are feasible.
    std::vector<Eigen::Index> last_seed{-1};
    auto polish = [&](Eigen::VectorXd& u_out) -> bool {
        std::vector<Eigen::Index> work;
        for (Eigen::Index i = 0; i < mc; ++i) {
            if (lambda_(i) > 0.0) {
                work.push_back(i);
            }
        }
        if (work == last_seed) {
            return false;
        }
        last_seed = work;
        const int max_exchanges = static_cast<int>(2 * mc + 4);
        for (int exchange = 0; exchange < max_exchanges; ++exchange) {
            const auto na = static_cast<Eigen::Index>(work.size());
            Eigen::VectorXd nu;
            if (na > 0) {
                Eigen::MatrixXd paa(na, na);
                Eigen::VectorXd rhs(na);
                for (Eigen::Index a = 0; a < na; ++a) {
                    const Eigen::Index ia = work[static_cast<std::size_t>(a)];
                    rhs(a) = -d_(ia);
                    for (Eigen::Index c = 0; c < na; ++c) {
                        paa(a, c) = P_(ia, work[static_cast<std::size_t>(c)]);
                    }
                }
                nu = paa.completeOrthogonalDecomposition().solve(rhs);
                Eigen::Index worst = 0;
                const double most_negative = na > 0 ? nu.minCoeff(&worst) : 0.0;
                if (most_negative < -1e-10 * std::max(1.0, max_abs(nu))) {
                    work.erase(work.begin() + worst);
                    continue;
                }
            }
            Eigen::VectorXd lam = Eigen::VectorXd::Zero(mc);
            for (Eigen::Index a = 0; a < na; ++a) {
                lam(work[static_cast<std::size_t>(a)]) = std::max(0.0, nu(a));
            }
            Eigen::VectorXd u = u0 - W_ * lam;
            for (auto i : work) {
                const auto k = static_cast<std::size_t>(i);
                if (kind_[k] == kBoxUpper) {
                    u(index_[k]) = p.upper(index_[k]);
                } else if (kind_[k] == kBoxLower) {
                    u(index_[k]) = p.lower(index_[k]);
                }
            }
            const Eigen::VectorXd violation = M_ * u - b_;
            Eigen::Index add = -1;
            double add_amount = primal_tol;
            for (Eigen::Index i = 0; i < mc; ++i) {
                if (violation(i) > add_amount &&
                    std::find(work.begin(), work.end(), i) == work.end()) {
                    add = i;
                    add_amount = violation(i);
                }
            }
            if (add >= 0) {
                work.push_back(add);
                continue;
            }
            if (primal_violation(u) > primal_tol) {
                return false;
            }
            const Eigen::VectorXd saved = lambda_;
            store_multipliers(lam);
            if (check_kkt(p, u, sol.multipliers) <= opts.tol) {
                lambda_ = lam;
                u_out = u;
                return true;
            }
            store_multipliers(saved);
            return false;
        }
        return false;
    };

    // Farkas alternative: y ≥ 0 with Mᵀy ≈ 0 and bᵀy < 0 rules out every
    // point within box_radius. The candidate y is λ projected onto the
    // kernel of the transposed rows it currently weights.
    auto certifies_infeasible = [&]() {
        const double lmax = max_abs(lambda_);
        if (!(lmax > 0.0)) {
            return false;
        }
        std::vector<Eigen::Index> support;
        for (Eigen::Index i = 0; i < mc; ++i) {
            if (lambda_(i) > 1e-9 * lmax) {
                support.push_back(i);
            }
        }
        const auto ns = static_cast<Eigen::Index>(support.size());
        Eigen::MatrixXd mt(n, ns);
        Eigen::VectorXd ls(ns);
        Eigen::VectorXd bs(ns);
        for (Eigen::Index a = 0; a < ns; ++a) {
            const Eigen::Index i = support[static_cast<std::size_t>(a)];
            mt.col(a) = M_.row(i).transpose();
            ls(a) = lambda_(i);
            bs(a) = b_(i);
        }
        auto test = [&](const Eigen::VectorXd& y_raw) {
            const double l1 = y_raw.lpNorm<1>();
            if (!(l1 > 0.0)) {
                return false;
            }
            const Eigen::VectorXd y = y_raw / l1;
            const double gap = bs.dot(y);
            const double leak = (mt * y).lpNorm<1>() * box_radius;
            return gap + leak < -1e-12 * (1.0 + max_abs(bs));
        };
        if (test(ls)) {
            return true;
        }
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(mt);
        const Eigen::MatrixXd kernel = lu.kernel();
        if (kernel.cols() == 0 || kernel.isZero()) {
            return false;
        }
        const Eigen::VectorXd y =
            kernel * (kernel.transpose() * kernel).ldlt().solve(kernel.transpose() * ls);
        if (y.minCoeff() < -1e-9 * max_abs(y)) {
            return false;
        }
        return test(y.cwiseMax(0.0));
    };

    Eigen::VectorXd u = u0;
    [[maybe_unused]] double prev_dual = dual_objective();
    for (int it = 1; it <= opts.max_iters; ++it) {
        double change = 0.0;
        for (Eigen::Index i = 0; i < mc; ++i) {
            const double w = d_(i) + P_.row(i).dot(lambda_) - P_(i, i) * lambda_(i);
            const double next = std::max(0.0, -w / P_(i, i));
            change = std::max(change, std::abs(next - lambda_(i)));
            lambda_(i) = next;
        }
        sol.iterations = it;
        const double dual = dual_objective();
        if (opts.record_dual_objective) {
            sol.dual_objective_history.push_back(dual);
        }
        // Exact coordinate minimization cannot increase the dual objective.
        assert(dual <= prev_dual + 1e-9 * (1.0 + std::abs(prev_dual)));
        prev_dual = dual;

        if (polish(u)) {
            return finish(u, QpStatus::optimal);
        }

        const double lam_norm = lambda_.norm();
        if (lam_norm > kQpDualDivergence ||
            ((it % 10 == 0 || it == 2) && certifies_infeasible())) {
            store_multipliers(lambda_);
            return finish(u0 - W_ * lambda_, QpStatus::infeasible);
        }
        if (change <= 1e-15 * std::max(1.0, max_abs(lambda_))) {
            break;
        }
    }

    store_multipliers(lambda_);
    u = u0 - W_ * lambda_;
    return finish(u, QpStatus::optimal);
}

QpSolution solve_qp(const QpProblem& p, const QpOptions& opts) {
    QpSolver solver;
    return solver.solve(p, opts);
}

} // namespace xwind
