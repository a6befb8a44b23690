#include "xwind/plant.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "xwind/errors.hpp"

namespace xwind {

void MotorParams::validate(double input_delay) const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!(positive(thrust_coeff) && positive(rotor_inertia) && positive(torque_const) &&
          positive(friction) && positive(drag_friction) && positive(resistance) &&
          positive(inductance))) {
        throw InvalidParameter("MotorParams: all motor constants must be > 0");
    }
    if (!(std::isfinite(comm_delay) && comm_delay >= 0.0)) {
        throw InvalidParameter("MotorParams: comm_delay must be >= 0");
    }
    if (!(comm_delay < input_delay)) {
        throw InvalidParameter("MotorParams: comm_delay must be < input_delay");
    }
}

InputBuffer::InputBuffer(int kd, double initial) {
    if (kd < 0) {
        throw InvalidParameter("InputBuffer: kd must be >= 0");
    }
    data_.assign(static_cast<std::size_t>(kd), initial);
}

double InputBuffer::push(double command) {
    if (data_.empty()) {
        return command;
    }
    const double evicted = data_[head_];
    data_[head_] = command;
    head_ = (head_ + 1) % data_.size();
    return evicted;
}

double InputBuffer::operator[](std::size_t i) const {
    return data_[(head_ + i) % data_.size()];
}

double InputBuffer::oldest() const {
    if (data_.empty()) {
        throw BufferMismatch("InputBuffer: empty buffer has no oldest element");
    }
    return data_[head_];
}

Eigen::VectorXd InputBuffer::values() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(data_.size()));
    for (std::size_t i = 0; i < data_.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = (*this)[i];
    }
    return v;
}

double saturate(double u, double limit) {
    return std::clamp(u, -limit, limit);
}

double motor_thrust(double omega, const MotorParams& mp) {
    if (omega < 0.0) {
        throw InvalidParameter("motor_thrust: motors run in one direction only");
    }
    return mp.thrust_coeff * omega * omega;
}

double motor_pair_torque(double thrust_right, double thrust_left, double wingspan) {
    return (thrust_left - thrust_right) * wingspan / 2.0;
}

double full_plant_motor_torque(const FullPlantState& s, const MotorPair& motors,
                               const RollPlantParams& rp) {
    const double f_right = motors[0].thrust_coeff * s.omega[0] * s.omega[0];
    const double f_left = motors[1].thrust_coeff * s.omega[1] * s.omega[1];
    return motor_pair_torque(f_right, f_left, rp.wingspan);
}

namespace {

using State6 = Eigen::Matrix<double, 6, 1>;

State6 pack(const FullPlantState& s) {
    State6 x;
    x << s.theta, s.theta_dot, s.omega[0], s.omega[1], s.current[0], s.current[1];
    return x;
}

FullPlantState unpack(const State6& x) {
    FullPlantState s;
    s.theta = x(0);
    s.theta_dot = x(1);
    s.omega = {x(2), x(3)};
    s.current = {x(4), x(5)};
    return s;
}

State6 derivative(const State6& x, const MotorPair& motors, const RollPlantParams& rp,
                  const Eigen::Vector2d& voltages, double tau_w) {
    State6 dx;
    const double f_right = motors[0].thrust_coeff * x(2) * x(2);
    const double f_left = motors[1].thrust_coeff * x(3) * x(3);
    const double tau_m = motor_pair_torque(f_right, f_left, rp.wingspan);
    dx(0) = x(1);
    dx(1) = (-rp.stiffness * x(0) - rp.damping * x(1) + tau_m + tau_w) / rp.inertia;
    for (int i = 0; i < 2; ++i) {
        const MotorParams& m = motors[static_cast<std::size_t>(i)];
        const double omega = x(2 + i);
        const double current = x(4 + i);
        dx(2 + i) = (m.torque_const * current - m.friction * omega -
                     m.drag_friction * omega * omega) /
                    m.rotor_inertia;
        dx(4 + i) = (voltages(i) - m.resistance * current - m.torque_const * omega) /
                    m.inductance;
    }
    return dx;
}

} // namespace

FullPlantState step_full_plant(const FullPlantState& s, const MotorPair& motors,
                               const RollPlantParams& rp, const Eigen::Vector2d& voltages,
                               double tau_w, double dt) {
    const State6 x = pack(s);
    const State6 k1 = derivative(x, motors, rp, voltages, tau_w);
    const State6 k2 = derivative(x + 0.5 * dt * k1, motors, rp, voltages, tau_w);
    const State6 k3 = derivative(x + 0.5 * dt * k2, motors, rp, voltages, tau_w);
    const State6 k4 = derivative(x + dt * k3, motors, rp, voltages, tau_w);
    State6 next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) {
        throw PlantDivergence("step_full_plant: non-finite state");
    }
    next(2) = std::max(next(2), 0.0);
    next(3) = std::max(next(3), 0.0);
    return unpack(next);
}

Eigen::Vector2d torque_to_voltages(double torque, const MotorPair& motors, double wingspan) {
    Eigen::Vector2d v = Eigen::Vector2d::Zero();
    if (torque == 0.0) {
        return v;
    }
    // Positive torque needs left thrust (index 1), negative needs right thrust.
    const int index = torque > 0.0 ? 1 : 0;
    const MotorParams& m = motors[static_cast<std::size_t>(index)];
    const double thrust = 2.0 * std::abs(torque) / wingspan;
    const double omega = std::sqrt(thrust / m.thrust_coeff);
    const double current = (m.friction * omega + m.drag_friction * omega * omega) / m.torque_const;
    v(index) = m.resistance * current + m.torque_const * omega;
    return v;
}

FullPlantSimulator::FullPlantSimulator(RollPlantParams rp, MotorPair motors, double inner_dt)
    : rp_(rp), motors_(motors), inner_dt_(inner_dt) {
    rp_.validate();
    for (const auto& m : motors_) {
        m.validate(rp_.input_delay);
    }
    if (!(inner_dt_ > 0.0)) {
        throw InvalidParameter("FullPlantSimulator: inner_dt must be > 0");
    }
    // Both motors share one cable; the delay line carries voltage pairs.
    const double steps = motors_[0].comm_delay / inner_dt_;
    const double rounded = std::round(steps);
    if (std::abs(steps - rounded) > 1e-6 || motors_[0].comm_delay != motors_[1].comm_delay) {
        throw InvalidParameter(
            "FullPlantSimulator: both motors need the same comm_delay, a multiple of inner_dt");
    }
    delay_line_.assign(static_cast<std::size_t>(rounded), Eigen::Vector2d::Zero());
}

void FullPlantSimulator::advance(double torque_command, double tau_w, double period) {
    const Eigen::Vector2d sent = torque_to_voltages(torque_command, motors_, rp_.wingspan);
    const auto steps = static_cast<long>(std::llround(period / inner_dt_));
    for (long i = 0; i < steps; ++i) {
        Eigen::Vector2d applied = sent;
        if (!delay_line_.empty()) {
            applied = delay_line_[delay_head_];
            delay_line_[delay_head_] = sent;
            delay_head_ = (delay_head_ + 1) % delay_line_.size();
        }
        state_ = step_full_plant(state_, motors_, rp_, applied, tau_w, inner_dt_);
    }
}

double FullPlantSimulator::motor_torque() const {
    return full_plant_motor_torque(state_, motors_, rp_);
}

RollState step_simplified_plant(const RollState& s, double applied_torque, double tau_w,
                                const DiscreteModel& dm, const RollPlantParams& rp) {
    const double torque = saturate(applied_torque, rp.torque_limit);
    return RollState::from(dm.A * s.vec() + dm.B * (torque + tau_w));
}

void WindProfile::validate() const {
    if (breakpoints.empty() || breakpoints.front().start_time != 0.0) {
        throw InvalidParameter("WindProfile: first breakpoint must be at t = 0");
    }
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
        if (!(std::isfinite(breakpoints[i].speed) && breakpoints[i].speed >= 0.0)) {
            throw InvalidParameter("WindProfile: speeds must be >= 0");
        }
        if (i > 0 && !(breakpoints[i].start_time > breakpoints[i - 1].start_time)) {
            throw InvalidParameter("WindProfile: start times must be strictly increasing");
        }
    }
}

double WindProfile::speed_at(double t) const {
    double speed = 0.0;
    for (const auto& bp : breakpoints) {
        if (bp.start_time > t) {
            break;
        }
        speed = bp.speed;
    }
    return speed;
}

double wind_speed_to_torque(double speed, const WindTorqueMap& map) {
    if (speed < 0.0) {
        throw InvalidParameter("wind_speed_to_torque: speed must be >= 0");
    }
    return static_cast<double>(map.direction) * map.quad_coeff * speed * speed;
}

double weight_to_torque(double mass_lb, const RollPlantParams& rp, Side side) {
    if (mass_lb < 0.0) {
        throw InvalidParameter("weight_to_torque: mass must be >= 0");
    }
    const double sign = side == Side::left ? 1.0 : -1.0;
    return sign * mass_lb * kNewtonsPerPound * rp.wingspan / 2.0;
}

void WeightDisturbance::validate() const {
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (!(std::isfinite(events[i].mass_lb) && events[i].mass_lb >= 0.0)) {
            throw InvalidParameter("WeightDisturbance: masses must be >= 0");
        }
        if (!std::isfinite(events[i].time) || (i > 0 && events[i].time < events[i - 1].time)) {
            throw InvalidParameter("WeightDisturbance: event times must be non-decreasing");
        }
    }
}

double WeightDisturbance::mass_at(double t) const {
    double mass = 0.0;
    for (const auto& e : events) {
        if (e.time > t) {
            break;
        }
        mass = e.mass_lb;
    }
    return mass;
}

RollSensor::RollSensor(double noise_std, std::uint64_t seed) : noise_std_(noise_std), rng_(seed) {
    if (!(std::isfinite(noise_std) && noise_std >= 0.0)) {
        throw InvalidParameter("RollSensor: noise_std must be >= 0");
    }
}

double RollSensor::measure(double theta) {
    if (noise_std_ == 0.0) {
        return theta;
    }
    return theta + noise_std_ * normal_(rng_);
}

} // namespace xwind
