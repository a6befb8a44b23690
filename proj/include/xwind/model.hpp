#pragma once

#include <Eigen/Dense>

namespace xwind {

/**
 * Physical constants of the wing roll model
 *
 *   J θ̈ = −K θ − B θ̇ + τ_m(t − T_d) + τ_w
 *
 * Defaults are the nominal values identified for the eleven-meter wing.
 * The torque limit is not a measured value; it only has to exceed the
 * ≈600 N·m experimental disturbances.
 */
struct RollPlantParams {
    double inertia = 6374.5;     ///< J [kg·m²]
    double stiffness = 25489.0;  ///< K [N·m/rad]
    double damping = 3000.0;     ///< B [N·m·s/rad]
    double wingspan = 11.0;      ///< d [m]
    double input_delay = 1.0;    ///< T_d [s]
    double torque_limit = 1000.0;///< τ_m,max [N·m]

    /// Throws InvalidParameter naming the first violated invariant.
    void validate() const;
};

struct ContinuousModel {
    Eigen::Matrix2d A;
    Eigen::Vector2d B;
};

/// ZOH-sampled roll model with an integer input delay of `kd` samples.
struct DiscreteModel {
    Eigen::Matrix2d A;
    Eigen::Vector2d B;
    Eigen::RowVector2d C{1.0, 0.0};
    double Ts = 0.0;
    int kd = 0;
};

/// Roll model with the disturbance torque appended as a constant third state.
struct AugmentedModel {
    Eigen::Matrix3d A;
    Eigen::Vector3d B;
    Eigen::RowVector3d C{1.0, 0.0, 0.0};
};

ContinuousModel continuous_roll_model(const RollPlantParams& params);

/// Tolerance used when checking that T_d / T_s is an integer.
inline constexpr double kDelayIntegerTolerance = 1e-9;

/**
 * Zero-order-hold discretization.
 *
 * A = exp(A_c Ts) and B = ∫₀^Ts exp(A_c σ) dσ · B_c, both read off the
 * exponential of the block matrix [[A_c, B_c], [0, 0]]·Ts. Throws
 * NonIntegerDelay unless Td / Ts is an integer to within 1e-9.
 */
DiscreteModel discretize_zoh(const ContinuousModel& cm, double Ts, double Td);

AugmentedModel augment(const DiscreteModel& dm);

/// Singular values below this fraction of the largest count as zero.
inline constexpr double kRankThreshold = 1e-8;

/// Numerical rank of [C; CA; CA²].
int check_observability(const AugmentedModel& am);

/// Numerical rank of an arbitrary matrix under kRankThreshold.
int numerical_rank(const Eigen::MatrixXd& m);

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
Eigen::MatrixXd expm(const Eigen::MatrixXd& m);

/// Convenience: builds the delayed design model from plant parameters.
DiscreteModel design_model(const RollPlantParams& params, double Ts);

} // namespace xwind
