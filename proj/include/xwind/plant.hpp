#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "xwind/model.hpp"

namespace xwind {

/// Wingtip DC motor with propeller. Defaults are assumed constants chosen so
/// the motor settles in a few tens of milliseconds, far below T_d.
struct MotorParams {
    double thrust_coeff = 0.01;     ///< K̃ [N·s²/rad²]
    double rotor_inertia = 0.05;    ///< J_m [kg·m²]
    double torque_const = 0.5;      ///< K_m [N·m/A]
    double friction = 0.01;         ///< b_m [N·m·s/rad]
    double drag_friction = 1e-5;    ///< b̃_m [N·m·s²/rad²]
    double resistance = 0.2;        ///< R_m [Ω]
    double inductance = 1e-3;       ///< L_m [H]
    double comm_delay = 0.1;        ///< T_c [s]

    /// Throws InvalidParameter; `input_delay` is T_d of the paired roll model.
    void validate(double input_delay) const;
};

/// Index 0 is the right-wingtip motor, index 1 the left one.
using MotorPair = std::array<MotorParams, 2>;

/// Six states of the full plant: roll, roll rate, and (speed, current) per motor.
struct FullPlantState {
    double theta = 0.0;
    double theta_dot = 0.0;
    std::array<double, 2> omega{};
    std::array<double, 2> current{};
};

struct RollState {
    double theta = 0.0;
    double theta_dot = 0.0;

    [[nodiscard]] Eigen::Vector2d vec() const { return {theta, theta_dot}; }
    static RollState from(const Eigen::Vector2d& v) { return {v(0), v(1)}; }
};

/**
 * FIFO of the last `kd` commanded torques, oldest first.
 *
 * The oldest element is the torque that reaches the plant at the current
 * step; push() evicts and returns it. With kd == 0 push() returns its
 * argument unchanged.
 */
class InputBuffer {
public:
    explicit InputBuffer(int kd, double initial = 0.0);

    double push(double command);

    [[nodiscard]] std::size_t size() const { return data_.size(); }
    /// Element `i` counted from the oldest.
    [[nodiscard]] double operator[](std::size_t i) const;
    [[nodiscard]] double oldest() const;
    [[nodiscard]] Eigen::VectorXd values() const;

private:
    std::vector<double> data_;
    std::size_t head_ = 0;
};

[[nodiscard]] double saturate(double u, double limit);

/// F = K̃ ω². Throws InvalidParameter for negative speed.
double motor_thrust(double omega, const MotorParams& mp);

/// τ_m = (F₂ − F₁)·d/2 with F₁ at the right wingtip.
double motor_pair_torque(double thrust_right, double thrust_left, double wingspan);

/// Motor torque produced by the current motor speeds.
double full_plant_motor_torque(const FullPlantState& s, const MotorPair& motors,
                               const RollPlantParams& rp);

/// One RK4 step of the coupled roll/motor ODEs. `voltages` are the values
/// already delayed by T_c. Motor speeds are clamped at zero afterwards.
/// Throws PlantDivergence if a state becomes non-finite.
FullPlantState step_full_plant(const FullPlantState& s, const MotorPair& motors,
                               const RollPlantParams& rp, const Eigen::Vector2d& voltages,
                               double tau_w, double dt);

/// Steady-state voltage pair that makes the motors produce `torque`.
Eigen::Vector2d torque_to_voltages(double torque, const MotorPair& motors, double wingspan);

/**
 * Full plant plus the T_c communication delay line, advanced at a fixed
 * inner step.
 */
class FullPlantSimulator {
public:
    FullPlantSimulator(RollPlantParams rp, MotorPair motors, double inner_dt = 1e-3);

    /// Sends the voltages that realize `torque_command` and integrates for `period`.
    void advance(double torque_command, double tau_w, double period);

    [[nodiscard]] const FullPlantState& state() const { return state_; }
    [[nodiscard]] double motor_torque() const;
    [[nodiscard]] double inner_dt() const { return inner_dt_; }

private:
    RollPlantParams rp_;
    MotorPair motors_;
    double inner_dt_;
    FullPlantState state_;
    std::vector<Eigen::Vector2d> delay_line_;
    std::size_t delay_head_ = 0;
};

/// x⁺ = A x + B (sat(τ_applied) + τ_w).
RollState step_simplified_plant(const RollState& s, double applied_torque, double tau_w,
                                const DiscreteModel& dm, const RollPlantParams& rp);

/// Piecewise-constant wind speed; the first breakpoint is at t = 0.
struct WindProfile {
    struct Breakpoint {
        double start_time;  ///< [s]
        double speed;       ///< [m/s]
    };
    std::vector<Breakpoint> breakpoints{{0.0, 0.0}};

    void validate() const;
    [[nodiscard]] double speed_at(double t) const;
};

/// Quadratic surrogate for the wind-speed → roll-torque map. The default
/// coefficient makes 8 km/h equal to a 15 lb wingtip weight.
struct WindTorqueMap {
    double quad_coeff = 74.3;  ///< c [N·m/(m/s)²]
    int direction = 1;         ///< ±1
};

double wind_speed_to_torque(double speed, const WindTorqueMap& map);

enum class Side { left, right };

inline constexpr double kNewtonsPerPound = 4.44822;

/// Torque from a weight hung at one wingtip; a left-side weight is positive.
double weight_to_torque(double mass_lb, const RollPlantParams& rp, Side side = Side::left);

struct WeightDisturbance {
    struct Event {
        double time;     ///< [s]
        double mass_lb;  ///< total mass hanging from `time` on
    };
    std::vector<Event> events;
    Side side = Side::left;

    void validate() const;
    [[nodiscard]] double mass_at(double t) const;
};

/// Gaussian roll-angle sensor with its own seeded generator.
class RollSensor {
public:
    RollSensor(double noise_std, std::uint64_t seed);

    double measure(double theta);

private:
    double noise_std_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace xwind
