#include "xwind/model.hpp"

#include <cmath>
#include <sstream>

#include "xwind/errors.hpp"

namespace xwind {

namespace {

void require(bool ok, const char* what) {
    if (!ok) {
        throw InvalidParameter(std::string("RollPlantParams: ") + what);
    }
}

} // namespace

void RollPlantParams::validate() const {
    require(std::isfinite(inertia) && inertia > 0.0, "inertia must be > 0");
    require(std::isfinite(stiffness) && stiffness >= 0.0, "stiffness must be >= 0");
    require(std::isfinite(damping) && damping >= 0.0, "damping must be >= 0");
    require(std::isfinite(wingspan) && wingspan > 0.0, "wingspan must be > 0");
    require(std::isfinite(input_delay) && input_delay >= 0.0, "input_delay must be >= 0");
    require(std::isfinite(torque_limit) && torque_limit > 0.0, "torque_limit must be > 0");
}

ContinuousModel continuous_roll_model(const RollPlantParams& params) {
    params.validate();
    ContinuousModel cm;
    cm.A << 0.0, 1.0,
        -params.stiffness / params.inertia, -params.damping / params.inertia;
    cm.B << 0.0, 1.0 / params.inertia;
    return cm;
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) {
        throw InvalidParameter("expm: matrix must be square");
    }
    const Eigen::Index n = m.rows();
    if (n == 0) {
        return m;
    }

    // Scale so the infinity norm is at most 1/2, where 20 Taylor terms are
    // below double precision (0.5^20 / 20! ~ 4e-25).
    const double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    }
    const Eigen::MatrixXd scaled = m / std::ldexp(1.0, squarings);

    Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
    for (int k = 1; k <= 30; ++k) {
        term = term * scaled / static_cast<double>(k);
        result += term;
        if (term.cwiseAbs().maxCoeff() <= 1e-18 * result.cwiseAbs().maxCoeff()) {
            break;
        }
    }
    for (int i = 0; i < squarings; ++i) {
        result = result * result;
    }
    return result;
}

DiscreteModel discretize_zoh(const ContinuousModel& cm, double Ts, double Td) {
    if (!(std::isfinite(Ts) && Ts > 0.0)) {
        throw InvalidParameter("discretize_zoh: Ts must be > 0");
    }
    if (!(std::isfinite(Td) && Td >= 0.0)) {
        throw InvalidParameter("discretize_zoh: Td must be >= 0");
    }
    const double ratio = Td / Ts;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) >= kDelayIntegerTolerance) {
        std::ostringstream os;
        os << "discretize_zoh: Td/Ts = " << ratio << " is not an integer";
        throw NonIntegerDelay(os.str());
    }

    Eigen::Matrix3d block = Eigen::Matrix3d::Zero();
    block.topLeftCorner<2, 2>() = cm.A * Ts;
    block.topRightCorner<2, 1>() = cm.B * Ts;
    const Eigen::MatrixXd e = expm(block);

    DiscreteModel dm;
    dm.A = e.topLeftCorner(2, 2);
    dm.B = e.topRightCorner(2, 1);
    dm.Ts = Ts;
    dm.kd = static_cast<int>(rounded);
    return dm;
}

AugmentedModel augment(const DiscreteModel& dm) {
    AugmentedModel am;
    am.A.setZero();
    am.A.topLeftCorner<2, 2>() = dm.A;
    am.A.topRightCorner<2, 1>() = dm.B;
    am.A(2, 2) = 1.0;
    am.B << dm.B, 0.0;
    am.C << dm.C, 0.0;
    return am;
}

int numerical_rank(const Eigen::MatrixXd& m) {
    if (m.size() == 0) {
        return 0;
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) {
        return 0;
    }
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > kRankThreshold * s(0)) {
            ++rank;
        }
    }
    return rank;
}

int check_observability(const AugmentedModel& am) {
    Eigen::Matrix3d obs;
    obs.row(0) = am.C;
    obs.row(1) = am.C * am.A;
    obs.row(2) = am.C * am.A * am.A;
    return numerical_rank(obs);
}

DiscreteModel design_model(const RollPlantParams& params, double Ts) {
    return discretize_zoh(continuous_roll_model(params), Ts, params.input_delay);
}

} // namespace xwind
