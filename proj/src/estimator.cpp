#include "xwind/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "xwind/errors.hpp"

namespace xwind {

void KalmanConfig::validate() const {
    if (!Q.allFinite() || (Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Q.norm())) {
        throw InvalidParameter("KalmanConfig: Q must be symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(Q);
    if (es.eigenvalues().minCoeff() < -1e-12 * (1.0 + Q.norm())) {
        throw InvalidParameter("KalmanConfig: Q must be positive semi-definite");
    }
    if (!(std::isfinite(R) && R > 0.0)) {
        throw InvalidParameter("KalmanConfig: R must be > 0");
    }
    if (!(are_tol > 0.0) || are_max_iters < 1) {
        throw InvalidParameter("KalmanConfig: are_tol and are_max_iters must be positive");
    }
}

namespace {

// Monic characteristic polynomial coefficients [c0, c1, c2] of z³ + c2 z² + c1 z + c0.
Eigen::Vector3d characteristic_coeffs(std::span<const std::complex<double>> poles) {
    std::vector<std::complex<double>> poly{1.0};
    for (const auto& p : poles) {
        std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i) {
            next[i] += poly[i];
            next[i + 1] -= p * poly[i];
        }
        poly = std::move(next);
    }
    // poly = [1, a1, a2, a3] for z³ + a1 z² + a2 z + a3.
    return {poly[3].real(), poly[2].real(), poly[1].real()};
}

void check_conjugate_closed(std::span<const std::complex<double>> poles) {
    std::vector<bool> used(poles.size(), false);
    for (std::size_t i = 0; i < poles.size(); ++i) {
        if (used[i]) {
            continue;
        }
        const auto& p = poles[i];
        const double scale = std::max(1.0, std::abs(p));
        if (std::abs(p.imag()) <= 1e-12 * scale) {
            used[i] = true;
            continue;
        }
        bool found = false;
        for (std::size_t j = i + 1; j < poles.size(); ++j) {
            if (!used[j] && std::abs(poles[j] - std::conj(p)) <= 1e-9 * scale) {
                used[i] = used[j] = true;
                found = true;
                break;
            }
        }
        if (!found) {
            throw InvalidParameter("place_observer_gain: complex poles must come in conjugate pairs");
        }
    }
}

} // namespace

ObserverGain place_observer_gain(const AugmentedModel& am,
                                 std::span<const std::complex<double>> poles) {
    if (poles.size() != 3) {
        throw InvalidParameter("place_observer_gain: exactly three poles required");
    }
    for (const auto& p : poles) {
        if (!(std::abs(p) < 1.0)) {
            std::ostringstream os;
            os << "place_observer_gain: pole " << p << " is not inside the unit circle";
            throw InvalidParameter(os.str());
        }
    }
    check_conjugate_closed(poles);
    if (check_observability(am) < 3) {
        throw Unobservable("place_observer_gain: (A_aug, C_aug) is not observable");
    }

    // Ackermann on the dual: L = φ(A) O⁻¹ e₃ with O = [C; CA; CA²].
    Eigen::Matrix3d obs;
    obs.row(0) = am.C;
    obs.row(1) = am.C * am.A;
    obs.row(2) = am.C * am.A * am.A;
    const Eigen::Vector3d c = characteristic_coeffs(poles);
    const Eigen::Matrix3d a2 = am.A * am.A;
    const Eigen::Matrix3d phi =
        a2 * am.A + c(2) * a2 + c(1) * am.A + c(0) * Eigen::Matrix3d::Identity();
    const Eigen::Vector3d e3(0.0, 0.0, 1.0);
    ObserverGain gain;
    gain.L = phi * obs.fullPivLu().solve(e3);
    return gain;
}

Eigen::Matrix3d riccati_map(const AugmentedModel& am, const Eigen::Matrix3d& P,
                            const Eigen::Matrix3d& Q, double R) {
    const Eigen::Vector3d pc = P * am.C.transpose();
    const double innovation = (am.C * pc)(0) + R;
    const Eigen::Matrix3d posterior = P - pc * pc.transpose() / innovation;
    Eigen::Matrix3d next = am.A * posterior * am.A.transpose() + Q;
    return 0.5 * (next + next.transpose());
}

Eigen::Matrix3d solve_filter_are(const AugmentedModel& am, const KalmanConfig& kc) {
    kc.validate();
    Eigen::Matrix3d P = kc.Q;
    for (int it = 0; it < kc.are_max_iters; ++it) {
        const Eigen::Matrix3d next = riccati_map(am, P, kc.Q, kc.R);
        const double scale = next.norm();
        const double residual = scale > 0.0 ? (next - P).norm() / scale : 0.0;
        P = next;
        if (residual < kc.are_tol) {
            // Polish until the fixed point stops moving in the last bits.
            for (int extra = 0; extra < 50; ++extra) {
                const Eigen::Matrix3d again = riccati_map(am, P, kc.Q, kc.R);
                const bool settled = (again - P).norm() <= 1e-15 * again.norm();
                P = again;
                if (settled) {
                    break;
                }
            }
            return P;
        }
    }
    std::ostringstream os;
    os << "solve_filter_are: no convergence after " << kc.are_max_iters << " iterations";
    throw NoConvergence(os.str());
}

ObserverGain kalman_gain(const AugmentedModel& am, const Eigen::Matrix3d& P, double R) {
    const double innovation = (am.C * P * am.C.transpose())(0) + R;
    if (!(innovation > 0.0)) {
        throw InvalidParameter("kalman_gain: C P Cᵀ + R must be > 0");
    }
    ObserverGain gain;
    gain.L = am.A * P * am.C.transpose() / innovation;
    return gain;
}

Eigen::Vector3cd error_eigenvalues(const AugmentedModel& am, const ObserverGain& gain) {
    const Eigen::Matrix3d closed = am.A - gain.L * am.C;
    return Eigen::EigenSolver<Eigen::Matrix3d>(closed, false).eigenvalues();
}

double error_spectral_radius(const AugmentedModel& am, const ObserverGain& gain) {
    return error_eigenvalues(am, gain).cwiseAbs().maxCoeff();
}

ObserverState observer_step(const ObserverState& os, double y_meas, double delayed_cmd,
                            const ObserverGain& gain, const AugmentedModel& am,
                            double filter_alpha) {
    ObserverState next;
    const double innovation = y_meas - (am.C * os.x_hat)(0);
    next.x_hat = am.A * os.x_hat + am.B * delayed_cmd + gain.L * innovation;
    next.filtered_tau_w = lowpass(os.filtered_tau_w, next.x_hat(2), filter_alpha);
    return next;
}

} // namespace xwind
