#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "doctest.h"
#include "xwind/errors.hpp"
#include "xwind/estimator.hpp"
#include "xwind/model.hpp"
#include "xwind/plant.hpp"

using namespace xwind;

namespace {

AugmentedModel nominal() {
    return augment(design_model(RollPlantParams{}, 0.1));
}

// Smallest total distance over all pairings of two three-element sets.
double matched_distance(const Eigen::Vector3cd& got, std::array<std::complex<double>, 3> want) {
    std::array<int, 3> perm{0, 1, 2};
    double best = 1e300;
    do {
        double worst = 0.0;
        for (int i = 0; i < 3; ++i) {
            worst = std::max(worst, std::abs(got(i) - want[static_cast<std::size_t>(perm[i])]));
        }
        best = std::min(best, worst);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Right-hand side of the filter Riccati equation, written out directly.
Eigen::Matrix3d are_rhs(const AugmentedModel& am, const Eigen::Matrix3d& P,
                        const Eigen::Matrix3d& Q, double R) {
    const Eigen::Matrix3d& A = am.A;
    const Eigen::RowVector3d& C = am.C;
    const double s = (C * P * C.transpose())(0) + R;
    return A * P * A.transpose() - A * P * C.transpose() * (C * P * A.transpose()) / s + Q;
}

// Structure-preserving doubling for the same equation; an independent
// solver that squares the iteration count each pass.
Eigen::Matrix3d doubling_are(const AugmentedModel& am, const Eigen::Matrix3d& Q, double R) {
    Eigen::Matrix3d A = am.A.transpose();
    Eigen::Matrix3d G = am.C.transpose() * am.C / R;
    Eigen::Matrix3d H = Q;
    for (int it = 0; it < 60; ++it) {
        const Eigen::Matrix3d W = Eigen::Matrix3d::Identity() + G * H;
        const Eigen::PartialPivLU<Eigen::Matrix3d> lu(W);
        const Eigen::Matrix3d WA = lu.solve(A);
        const Eigen::Matrix3d WG = lu.solve(G);
        const Eigen::Matrix3d H_next = H + A.transpose() * H * WA;
        G = G + A * WG * A.transpose();
        A = A * WA;
        const bool done = (H_next - H).norm() <= 1e-15 * H_next.norm();
        H = H_next;
        if (done) {
            break;
        }
    }
    return H;
}

} // namespace

TEST_CASE("lowpass filter") {
    CHECK(lowpass(3.0, 7.0, 1.0) == 7.0);
    CHECK(lowpass(0.0, 100.0, 0.2) == doctest::Approx(20.0));
    double y = -50.0;
    double prev_gap = std::abs(y - 10.0);
    for (int i = 0; i < 30; ++i) {
        y = lowpass(y, 10.0, 0.3);
        const double gap = std::abs(y - 10.0);
        CHECK(gap == doctest::Approx(0.7 * prev_gap).epsilon(1e-12));
        prev_gap = gap;
    }
}

TEST_CASE("pole placement on the nominal model") {
    const AugmentedModel am = nominal();
    const std::vector<std::complex<double>> poles{0.65, 0.7, 0.75};
    const ObserverGain g = place_observer_gain(am, poles);
    CHECK(matched_distance(error_eigenvalues(am, g), {0.65, 0.7, 0.75}) < 1e-6);
    CHECK(g.L(0) == doctest::Approx(0.815).epsilon(1e-3));
    CHECK(g.L(1) == doctest::Approx(1.671).epsilon(1e-3));
    CHECK(g.L(2) == doctest::Approx(1.7187e4).epsilon(1e-3));
}

TEST_CASE("pole placement accepts conjugate pairs") {
    const AugmentedModel am = nominal();
    const std::vector<std::complex<double>> poles{{0.5, 0.2}, {0.5, -0.2}, 0.3};
    const ObserverGain g = place_observer_gain(am, poles);
    CHECK(matched_distance(error_eigenvalues(am, g), {{{0.5, 0.2}, {0.5, -0.2}, 0.3}}) < 1e-6);
}

TEST_CASE("pole placement over random observable models") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int tested = 0;
    while (tested < 100) {
        RollPlantParams p;
        p.inertia = 1000.0 + 10000.0 * u(rng);
        p.stiffness = 5000.0 + 40000.0 * u(rng);
        p.damping = 500.0 + 5000.0 * u(rng);
        const AugmentedModel am = augment(design_model(p, 0.1));
        if (check_observability(am) < 3) {
            continue;
        }
        std::array<std::complex<double>, 3> want;
        if (u(rng) < 0.5) {
            want = {0.9 * u(rng), 0.9 * u(rng) - 0.45, 0.9 * u(rng)};
        } else {
            const std::complex<double> c = std::polar(0.2 + 0.7 * u(rng), 0.1 + 2.5 * u(rng));
            want = {c, std::conj(c), 0.9 * u(rng)};
        }
        const ObserverGain g = place_observer_gain(am, want);
        CHECK(matched_distance(error_eigenvalues(am, g), want) < 1e-6);
        ++tested;
    }
}

TEST_CASE("pole placement at the open-loop eigenvalues needs no gain") {
    AugmentedModel am = nominal();
    am.A *= 0.9;  // moves the integrating disturbance mode inside the unit disc
    const Eigen::Vector3cd ev = Eigen::EigenSolver<Eigen::Matrix3d>(am.A).eigenvalues();
    const std::vector<std::complex<double>> poles{ev(0), ev(1), ev(2)};
    const ObserverGain g = place_observer_gain(am, poles);
    CHECK(g.L.norm() < 1e-6);
}

TEST_CASE("pole placement errors") {
    const AugmentedModel am = nominal();
    const std::vector<std::complex<double>> unstable{0.5, 0.6, 1.0};
    CHECK_THROWS_AS(place_observer_gain(am, unstable), InvalidParameter);
    const std::vector<std::complex<double>> lonely{{0.5, 0.2}, 0.5, 0.3};
    CHECK_THROWS_AS(place_observer_gain(am, lonely), InvalidParameter);
    const std::vector<std::complex<double>> two{0.5, 0.6};
    CHECK_THROWS_AS(place_observer_gain(am, two), InvalidParameter);

    DiscreteModel dm = design_model(RollPlantParams{}, 0.1);
    dm.B.setZero();
    const std::vector<std::complex<double>> ok{0.65, 0.7, 0.75};
    CHECK_THROWS_AS(place_observer_gain(augment(dm), ok), Unobservable);
}

TEST_CASE("filter Riccati fixed point on the nominal tuning") {
    const AugmentedModel am = nominal();
    const KalmanConfig kc;
    const Eigen::Matrix3d P = solve_filter_are(am, kc);
    const double residual = (are_rhs(am, P, kc.Q, kc.R) - P).norm() / P.norm();
    CHECK(residual < 1e-9);
    CHECK((P - P.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * P.norm());
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(P);
    CHECK(es.eigenvalues().minCoeff() > -1e-9 * P.norm());

    const Eigen::Matrix3d P_ref = doubling_are(am, kc.Q, kc.R);
    CHECK((P - P_ref).norm() / P_ref.norm() < 1e-8);

    const ObserverGain g = kalman_gain(am, P, kc.R);
    const ObserverGain g_ref = kalman_gain(am, P_ref, kc.R);
    CHECK((g.L - g_ref.L).norm() / g_ref.L.norm() < 1e-8);
    CHECK(g.L(0) == doctest::Approx(1.219).epsilon(1e-3));
    CHECK(g.L(1) == doctest::Approx(5.267).epsilon(1e-3));
    CHECK(g.L(2) == doctest::Approx(9.0012e4).epsilon(1e-3));
    CHECK(error_spectral_radius(am, g) < 1.0);
}

TEST_CASE("filter Riccati equation with zero dynamics") {
    AugmentedModel am = nominal();
    am.A.setZero();
    const KalmanConfig kc;
    const Eigen::Matrix3d P = solve_filter_are(am, kc);
    CHECK(P == kc.Q);
}

TEST_CASE("Riccati solution is homogeneous in Q and R") {
    const AugmentedModel am = nominal();
    const KalmanConfig kc;
    const Eigen::Matrix3d P = solve_filter_are(am, kc);
    const ObserverGain g = kalman_gain(am, P, kc.R);
    for (double c : {1e-3, 7.0, 1e4}) {
        KalmanConfig scaled = kc;
        scaled.Q *= c;
        scaled.R *= c;
        const Eigen::Matrix3d Pc = solve_filter_are(am, scaled);
        CHECK((Pc - c * P).norm() / (c * P.norm()) < 1e-9);
        const ObserverGain gc = kalman_gain(am, Pc, scaled.R);
        CHECK((gc.L - g.L).norm() / g.L.norm() < 1e-9);
    }
}

TEST_CASE("Kalman gain limits and errors") {
    const AugmentedModel am = nominal();
    CHECK(kalman_gain(am, Eigen::Matrix3d::Zero(), 1.0).L.norm() == 0.0);
    CHECK_THROWS_AS(kalman_gain(am, Eigen::Matrix3d::Zero(), 0.0), InvalidParameter);

    KalmanConfig kc;
    const ObserverGain nominal_gain = kalman_gain(am, solve_filter_are(am, kc), kc.R);
    // With a huge R the disturbance mode is barely corrected, so the plain
    // fixed-point iteration needs far more than the default iteration cap.
    // The covariance comes from the doubling solver instead.
    KalmanConfig noisy = kc;
    noisy.R = 1e12 * kc.Q.trace();
    const Eigen::Matrix3d P_noisy = doubling_are(am, noisy.Q, noisy.R);
    CHECK((are_rhs(am, P_noisy, noisy.Q, noisy.R) - P_noisy).norm() / P_noisy.norm() < 1e-9);
    const ObserverGain small = kalman_gain(am, P_noisy, noisy.R);
    CHECK(small.L.norm() < 1e-3 * nominal_gain.L.norm());
    CHECK_THROWS_AS(solve_filter_are(am, noisy), NoConvergence);

    KalmanConfig bad = kc;
    bad.R = -1.0;
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    bad = kc;
    bad.Q(0, 1) = 1.0;
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    bad = kc;
    bad.are_max_iters = 2;
    CHECK_THROWS_AS(solve_filter_are(am, bad), NoConvergence);
}

TEST_CASE("observer step with a perfect estimate is a pure prediction") {
    const AugmentedModel am = nominal();
    const std::vector<std::complex<double>> poles{0.65, 0.7, 0.75};
    const ObserverGain g = place_observer_gain(am, poles);
    ObserverState os;
    os.x_hat = Eigen::Vector3d(0.01, -0.02, 250.0);
    os.filtered_tau_w = 100.0;
    const ObserverState next = observer_step(os, 0.01, 300.0, g, am, 0.2);
    const Eigen::Vector3d predicted = am.A * os.x_hat + am.B * 300.0;
    CHECK((next.x_hat - predicted).norm() == 0.0);
    CHECK(next.filtered_tau_w == doctest::Approx(0.2 * predicted(2) + 0.8 * 100.0));
}

TEST_CASE("estimation error follows the error dynamics") {
    const AugmentedModel am = nominal();
    const std::vector<std::complex<double>> poles{0.65, 0.7, 0.75};
    const KalmanConfig kc;
    const std::array<ObserverGain, 2> gains{place_observer_gain(am, poles),
                                            kalman_gain(am, solve_filter_are(am, kc), kc.R)};
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (const auto& g : gains) {
        const Eigen::Matrix3d Ae = am.A - g.L * am.C;
        for (int trial = 0; trial < 50; ++trial) {
            Eigen::Vector3d x(0.01 * n(rng), 0.01 * n(rng), 300.0 * n(rng));
            ObserverState os;
            Eigen::Vector3d e = x - os.x_hat;
            for (int k = 0; k < 20; ++k) {
                const double u = 200.0 * n(rng);
                os = observer_step(os, (am.C * x)(0), u, g, am, 1.0);
                x = am.A * x + am.B * u;
                const Eigen::Vector3d e_next = Ae * e;
                CHECK((x - os.x_hat - e_next).norm() <= 1e-12 * std::max(1.0, e.norm()));
                e = x - os.x_hat;
            }
        }
    }
}

TEST_CASE("torque estimate converges on the noiseless plant") {
    const RollPlantParams rp;
    const DiscreteModel dm = design_model(rp, 0.1);
    const AugmentedModel am = augment(dm);
    const std::vector<std::complex<double>> poles{0.65, 0.7, 0.75};
    const KalmanConfig kc;
    const std::array<ObserverGain, 2> gains{place_observer_gain(am, poles),
                                            kalman_gain(am, solve_filter_are(am, kc), kc.R)};
    for (const auto& g : gains) {
        RollState x;
        ObserverState os;
        std::vector<double> errors;
        for (int k = 0; k <= 150; ++k) {
            const Eigen::Vector3d truth(x.theta, x.theta_dot, 600.0);
            errors.push_back((truth - os.x_hat).norm());
            if (k >= 20) {
                CHECK(std::abs(os.x_hat(2) - 600.0) <= 0.05 * 600.0);
            }
            os = observer_step(os, x.theta, 0.0, g, am, 0.2);
            x = step_simplified_plant(x, 0.0, 600.0, dm, rp);
        }
        // Decay rate over the last 40 samples that sit well above round-off.
        std::size_t end = 0;
        while (end + 1 < errors.size() && errors[end + 1] > 1e-11) {
            ++end;
        }
        REQUIRE(end >= 50);
        const double rate = std::pow(errors[end] / errors[end - 40], 1.0 / 40.0);
        CHECK(rate <= error_spectral_radius(am, g) + 1e-3);
    }
}
