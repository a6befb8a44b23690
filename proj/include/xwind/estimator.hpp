#pragma once

#include <complex>
#include <span>

#include <Eigen/Dense>

#include "xwind/model.hpp"

namespace xwind {

/// Output-injection gain L of x̂⁺ = A x̂ + B u + L (y − C x̂).
struct ObserverGain {
    Eigen::Vector3d L = Eigen::Vector3d::Zero();
};

struct KalmanConfig {
    Eigen::Matrix3d Q = Eigen::Vector3d(1e-4, 0.15, 3e8).asDiagonal();
    double R = 0.01;
    double are_tol = 1e-9;
    int are_max_iters = 100000;

    void validate() const;
};

/// Augmented estimate (θ̂, θ̇̂, τ̂_w) and the low-passed torque estimate.
struct ObserverState {
    Eigen::Vector3d x_hat = Eigen::Vector3d::Zero();
    double filtered_tau_w = 0.0;
};

/**
 * Ackermann placement on the dual pair (Aᵀ, Cᵀ).
 *
 * Poles must lie in the open unit disc and be closed under conjugation.
 * Throws Unobservable when the pair has rank < 3 and InvalidParameter for
 * an unstable or non-conjugate pole set.
 */
ObserverGain place_observer_gain(const AugmentedModel& am,
                                 std::span<const std::complex<double>> poles);

/// Right-hand side of the filter Riccati equation.
Eigen::Matrix3d riccati_map(const AugmentedModel& am, const Eigen::Matrix3d& P,
                            const Eigen::Matrix3d& Q, double R);

/// Steady-state covariance by Riccati iteration from P₀ = Q.
/// Throws NoConvergence after `are_max_iters`.
Eigen::Matrix3d solve_filter_are(const AugmentedModel& am, const KalmanConfig& kc);

/// L_K = A P Cᵀ (C P Cᵀ + R)⁻¹.
ObserverGain kalman_gain(const AugmentedModel& am, const Eigen::Matrix3d& P, double R);

/// Largest |λ| of A − L C.
double error_spectral_radius(const AugmentedModel& am, const ObserverGain& gain);

Eigen::Vector3cd error_eigenvalues(const AugmentedModel& am, const ObserverGain& gain);

inline double lowpass(double prev, double next, double alpha) {
    return alpha * next + (1.0 - alpha) * prev;
}

/// One observer update; `delayed_cmd` is τ_m(k − k_d).
ObserverState observer_step(const ObserverState& os, double y_meas, double delayed_cmd,
                            const ObserverGain& gain, const AugmentedModel& am,
                            double filter_alpha);

} // namespace xwind
