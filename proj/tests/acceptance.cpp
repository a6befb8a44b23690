// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "xwind/controllers.hpp"
#include "xwind/estimator.hpp"
#include "xwind/harness.hpp"
#include "xwind/model.hpp"
#include "xwind/plant.hpp"
#include "xwind/qpsolve.hpp"

using namespace xwind;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

ScenarioConfig scenario(const std::string& name) {
    return load_scenario(std::filesystem::path(XWIND_SCENARIO_DIR) / (name + ".cfg"));
}

AugmentedModel nominal_augmented() {
    return augment(design_model(RollPlantParams{}, 0.1));
}

// P = A P Aᵀ − A P Cᵀ (C P Cᵀ + R)⁻¹ C P Aᵀ + Q, written out here so the check
// does not reuse the library's own map.
Eigen::Matrix3d filter_are_rhs(const AugmentedModel& am, const Eigen::Matrix3d& P,
                               const Eigen::Matrix3d& Q, double R) {
    const Eigen::Vector3d PCt = P * am.C.transpose();
    const double s = (am.C * PCt)(0) + R;
    return am.A * P * am.A.transpose() - (am.A * PCt) * (am.A * PCt).transpose() / s + Q;
}

double max_abs_theta(const Metrics& m) { return m.peak_disp(); }

// Absolute tolerance for comparing two peak displacements [m].
constexpr double kPeakRoundoff = 1e-12;

void criterion_1(Verdict& v) {
    const AugmentedModel am = nominal_augmented();
    const std::vector<std::complex<double>> poles{0.65, 0.7, 0.75};
    const ObserverGain g = place_observer_gain(am, poles);
    const Eigen::Matrix3d closed = am.A - g.L * am.C;
    Eigen::Vector3cd ev = Eigen::EigenSolver<Eigen::Matrix3d>(closed, false).eigenvalues();
    std::vector<double> re;
    double worst_im = 0.0;
    for (int i = 0; i < 3; ++i) {
        re.push_back(ev(i).real());
        worst_im = std::max(worst_im, std::abs(ev(i).imag()));
    }
    std::sort(re.begin(), re.end());
    double err = worst_im;
    for (int i = 0; i < 3; ++i) {
        err = std::max(err, std::abs(re[static_cast<std::size_t>(i)] - poles[i].real()));
    }
    v.detail << "max eigenvalue error " << err;
    v.require(err < 1e-6, "eigenvalue error < 1e-6");
}

void criterion_2(Verdict& v) {
    const AugmentedModel am = nominal_augmented();
    const KalmanConfig kc;
    const Eigen::Matrix3d P = solve_filter_are(am, kc);
    const double residual = (filter_are_rhs(am, P, kc.Q, kc.R) - P).norm() / P.norm();
    const ObserverGain g = kalman_gain(am, P, kc.R);
    const Eigen::Matrix3d closed = am.A - g.L * am.C;
    const double rho =
        Eigen::EigenSolver<Eigen::Matrix3d>(closed, false).eigenvalues().cwiseAbs().maxCoeff();
    v.detail << "relative residual " << residual << ", spectral radius " << rho;
    v.require(residual < 1e-9, "residual < 1e-9");
    v.require(rho < 1.0, "spectral radius < 1");
}

void criterion_3(Verdict& v) {
    constexpr double onset = 10.0;
    constexpr double target = 600.0;
    const RollPlantParams rp;
    const double lb = target / (kNewtonsPerPound * rp.wingspan / 2.0);

    for (auto kind : {EstimatorKind::pole_place, EstimatorKind::kalman}) {
        const char* label = kind == EstimatorKind::kalman ? "kalman" : "pole_place";
        ScenarioConfig cfg;
        cfg.controller = ControllerKind::pid;
        cfg.estimator = kind;
        cfg.disturbance = DisturbanceKind::weight;
        cfg.weight.events = {{onset, lb}};
        cfg.duration = 60.0;

        cfg.noise_std = 0.0;
        const RunResult clean = run_scenario(cfg);
        double clean_err = 0.0;
        for (const auto& rec : clean.trace) {
            if (rec.t >= onset + 2.0 - 1e-9) {
                clean_err = std::max(clean_err, std::abs(rec.tau_w_hat - target) / target);
            }
        }

        cfg.noise_std = 0.002;
        const RunResult noisy = run_scenario(cfg);
        // After convergence: the raw estimate has settled and the low-pass
        // has run for five of its time constants.
        const double alpha = cfg.tau_filter_alpha;
        const double filter_settle = 5.0 * cfg.Ts / alpha;
        const double converged = onset + filter_settle;
        double noisy_err = 0.0;
        for (const auto& rec : noisy.trace) {
            if (rec.t >= converged - 1e-9) {
                noisy_err =
                    std::max(noisy_err, std::abs(rec.tau_w_hat_filtered - target) / target);
            }
        }
        v.detail << label << ": noiseless error after 2 s " << 100.0 * clean_err
                 << "%, noisy filtered error after " << filter_settle << " s "
                 << 100.0 * noisy_err << "%; ";
        v.require(clean_err <= 0.05, std::string(label) + " within 5% by 2 s");
        v.require(noisy_err <= 0.10, std::string(label) + " filtered within 10%");
    }
}

void criterion_4(Verdict& v) {
    const DiscreteModel dm = design_model(RollPlantParams{}, 0.1);
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    int cases = 0;
    for (int np = 1; np <= 5; ++np) {
        const MpcConfig cfg = MpcConfig::uniform(np, 1.0, 50.0, 2e-9, 1000.0);
        const PredictionStack s = build_prediction(dm, cfg);
        for (int trial = 0; trial < 20; ++trial, ++cases) {
            const RollState x{0.05 * u(rng), 0.05 * u(rng)};
            InputBuffer buf(dm.kd);
            for (int i = 0; i < dm.kd; ++i) {
                buf.push(1000.0 * u(rng));
            }
            const Eigen::VectorXd U =
                1000.0 * Eigen::VectorXd::NullaryExpr(np, [&] { return u(rng); });
            const Eigen::VectorXd Y = free_response(s, shift_state(x, buf, s)) + s.G * U;

            Eigen::Vector2d sim = x.vec();
            for (std::size_t i = 0; i < buf.size(); ++i) {
                sim = dm.A * sim + dm.B * buf[i];
            }
            for (int i = 0; i < np; ++i) {
                sim = dm.A * sim + dm.B * U(i);
                worst = std::max(worst, std::abs(Y(i) - (dm.C * sim)(0)));
            }
        }
    }
    v.detail << cases << " cases, max error " << worst;
    v.require(worst < 1e-12, "predictor error < 1e-12");
}

void criterion_5(Verdict& v) {
    const DiscreteModel dm = design_model(RollPlantParams{}, 0.1);
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    QpSolver solver;

    // (a) inactive constraints: 50 states small enough that the whole
    // closed-form sequence sits inside the box.
    MpcConfig cfg = MpcConfig::uniform(30, 1.0, 50.0, 2e-9, 1000.0);
    const PredictionStack s = build_prediction(dm, cfg);
    double closed_form_err = 0.0;
    double worst_kkt = 0.0;
    int inactive = 0;
    while (inactive < 50) {
        const RollState x{0.002 * u(rng), 0.002 * u(rng)};
        InputBuffer buf(dm.kd);
        for (int i = 0; i < dm.kd; ++i) {
            buf.push(50.0 * u(rng));
        }
        const Eigen::VectorXd F = free_response(s, shift_state(x, buf, s));
        const Eigen::VectorXd U = s.unconstrained_gain * F;
        if (U.cwiseAbs().maxCoeff() >= 0.99 * cfg.u_max) {
            continue;
        }
        ++inactive;
        const QpProblem qp = mpc_qp(s, cfg, F);
        const QpSolution sol = solver.solve(qp);
        if (sol.status != QpStatus::optimal) {
            v.require(false, "inactive instance optimal");
            continue;
        }
        closed_form_err = std::max(closed_form_err, (sol.u_star - U).cwiseAbs().maxCoeff());
        worst_kkt = std::max(worst_kkt, check_kkt(qp, sol.u_star, sol.multipliers));
    }

    // (b) Np = 2 with a tight box against an exhaustive grid.
    MpcConfig box = MpcConfig::uniform(2, 1.0, 50.0, 2e-9, 300.0);
    const PredictionStack s2 = build_prediction(dm, box);
    double grid_gap = 0.0;
    double grid_slack = 0.0;
    int active = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const RollState x{0.05 * u(rng), 0.1 * u(rng)};
        InputBuffer buf(dm.kd);
        for (int i = 0; i < dm.kd; ++i) {
            buf.push(800.0 * u(rng));
        }
        const Eigen::VectorXd F = free_response(s2, shift_state(x, buf, s2));
        const QpProblem qp = mpc_qp(s2, box, F);
        const QpSolution sol = solver.solve(qp);
        if (sol.status != QpStatus::optimal) {
            v.require(false, "grid instance optimal");
            continue;
        }
        worst_kkt = std::max(worst_kkt, check_kkt(qp, sol.u_star, sol.multipliers));

        const double range = box.u_max - box.u_min;
        constexpr int cells = 600;
        const double pitch = range / cells;
        double best = 1e300;
        for (int i = 0; i <= cells; ++i) {
            for (int j = 0; j <= cells; ++j) {
                const Eigen::Vector2d w(box.u_min + i * pitch, box.u_min + j * pitch);
                best = std::min(best, qp.objective(w));
            }
        }
        // The grid point nearest the optimum is at most half a pitch away
        // per coordinate, which bounds how much better the solver must be.
        const Eigen::VectorXd grad = 2.0 * qp.H * sol.u_star + qp.f;
        const double lmax =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(qp.H).eigenvalues().maxCoeff();
        const double cell_cost = grad.lpNorm<1>() * pitch + 2.0 * lmax * pitch * pitch;
        grid_gap = std::max(grid_gap, sol.objective - best);
        grid_slack = std::max(grid_slack, (best - sol.objective) / cell_cost);
        if ((sol.u_star.array().abs() >= box.u_max - 1e-9).any()) {
            ++active;
        }
    }
    v.detail << "closed-form error " << closed_form_err << ", solver above grid by "
             << grid_gap << ", grid gap / cell bound " << grid_slack << ", " << active
             << "/50 grid cases active, worst KKT " << worst_kkt;
    v.require(closed_form_err < 1e-6, "closed-form agreement < 1e-6");
    v.require(grid_gap <= 1e-9, "solver no worse than the grid");
    v.require(grid_slack <= 1.0, "grid within one cell of the solver");
    v.require(active > 0, "some grid cases have active bounds");
    v.require(worst_kkt <= 1e-8, "KKT <= 1e-8");
}

void criterion_6(Verdict& v) {
    const ScenarioConfig pid_cfg = scenario("fig2_pid_steady");
    const ScenarioConfig mpc_cfg = scenario("fig2_mpc_steady");
    const RunResult pid = run_scenario(pid_cfg);
    const RunResult mpc = run_scenario(mpc_cfg);
    const Metrics mp = compute_metrics(pid.trace, 0.02, pid.events);
    const Metrics mm = compute_metrics(mpc.trace, 0.02, mpc.events);
    const double t_pid = mp.worst_settling_bound();
    const double t_mpc = mm.worst_settling_bound();
    const double reduction = response_reduction_pct(t_pid, t_mpc);
    v.detail << "PID " << (mp.all_settled() ? "settled at " : "not settled, window ") << t_pid
             << " s; MPC " << (mm.all_settled() ? "settled at " : "not settled, window ")
             << t_mpc << " s; reduction " << reduction << "%";
    const bool pid_unsettled_60 = !mp.all_settled() || t_pid > 60.0;
    v.require(pid_unsettled_60, "PID not settled within 60 s");
    v.require(mm.all_settled() && t_mpc <= 10.0, "MPC settles within 10 s");
    v.require(reduction >= 75.0, "reduction >= 75%");
}

void criterion_7(Verdict& v) {
    const ScenarioConfig pid_cfg = scenario("fig9_pid_weight_square");
    const ScenarioConfig mpc_cfg = scenario("fig9_mpc_weight_square");
    const RunResult pid = run_scenario(pid_cfg);
    const RunResult mpc = run_scenario(mpc_cfg);
    const Metrics mp = compute_metrics(pid.trace, 0.02, pid.events);
    const Metrics mm = compute_metrics(mpc.trace, 0.02, mpc.events);

    bool spacing = mm.events.size() >= 2;
    for (std::size_t i = 1; i < mm.events.size(); ++i) {
        spacing = spacing && std::abs(mm.events[i].event_time - mm.events[i - 1].event_time - 25.0) < 1e-9;
    }
    int mpc_settled = 0;
    double mpc_worst = 0.0;
    for (const auto& e : mm.events) {
        mpc_settled += e.settled ? 1 : 0;
        mpc_worst = std::max(mpc_worst, e.settling_time);
    }
    int pid_settled = 0;
    for (const auto& e : mp.events) {
        pid_settled += e.settled ? 1 : 0;
    }
    v.detail << "MPC re-settled " << mpc_settled << "/" << mm.events.size()
             << " events (worst " << mpc_worst << " s); PID re-settled " << pid_settled << "/"
             << mp.events.size();
    v.require(spacing, "events every 25 s");
    v.require(mm.all_settled(), "MPC re-settles before each subsequent event");
    v.require(!mp.all_settled(), "PID misses at least one event");
}

void criterion_8(Verdict& v) {
    for (const char* fig : {"fig10", "fig11"}) {
        const std::string suffix = std::string(fig) == "fig10" ? "_step" : "_square";
        const ScenarioConfig c_cfg = scenario(std::string(fig) + "_mpc_constrained" + suffix);
        const ScenarioConfig u_cfg = scenario(std::string(fig) + "_mpc_unconstrained" + suffix);
        const RunResult c = run_scenario(c_cfg);
        const RunResult un = run_scenario(u_cfg);
        const Metrics mc = compute_metrics(c.trace, 0.02, c.events);
        const Metrics mu = compute_metrics(un.trace, 0.02, un.events);
        const double tc = mc.worst_settling_bound();
        const double tu = mu.worst_settling_bound();
        const double pc = max_abs_theta(mc);
        const double pu = max_abs_theta(mu);
        const double us_c = 1e6 * c.mean_controller_seconds();
        const double us_u = 1e6 * un.mean_controller_seconds();
        v.detail << fig << ": settling " << tu << " s vs " << tc << " s, peak " << pu << " vs "
                 << pc << " m (difference " << pu - pc << "), compute " << us_u << " us vs " << us_c << " us; ";
        v.require(mc.all_settled() && mu.all_settled(), std::string(fig) + " both settle");
        v.require(tu <= 1.5 * tc, std::string(fig) + " settling within 1.5x");
        // Both peaks fall inside the dead time after the event, where neither
        // law can act yet, so equal peaks differ only by floating-point noise.
        v.require(pu >= pc - kPeakRoundoff, std::string(fig) + " unconstrained peak >= constrained");
        v.require(us_u < 0.5 * us_c, std::string(fig) + " unconstrained compute lower");
    }
}

void criterion_9(Verdict& v) {
    int scenarios = 0;
    long records = 0;
    for (const auto& entry : std::filesystem::directory_iterator(XWIND_SCENARIO_DIR)) {
        if (entry.path().extension() != ".cfg") {
            continue;
        }
        const ScenarioConfig cfg = load_scenario(entry.path());
        const RunResult a = run_scenario(cfg);
        const RunResult b = run_scenario(cfg);
        const std::string name = entry.path().stem().string();
        v.require(format_trace(a.trace) == format_trace(b.trace), name + " byte-identical");
        const double limit = cfg.roll.torque_limit;
        bool causal = true;
        bool saturated = true;
        for (std::size_t k = 0; k < a.trace.size(); ++k) {
            const auto& rec = a.trace[k];
            const auto kd = static_cast<std::size_t>(a.kd);
            const double expected = k >= kd ? a.trace[k - kd].cmd_torque : 0.0;
            causal = causal && rec.applied_torque == expected;
            saturated = saturated && std::abs(rec.cmd_torque) <= limit &&
                        std::abs(rec.applied_torque) <= limit;
        }
        v.require(causal, name + " causal");
        v.require(saturated, name + " saturated");
        ++scenarios;
        records += static_cast<long>(a.trace.size());
    }
    v.detail << scenarios << " scenarios, " << records << " records each run twice";
    v.require(scenarios >= 10, "bundled suite present");
}

struct Criterion {
    int id;
    const char* title;
    double limit_s;
    std::function<void(Verdict&)> run;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "observer pole placement", 1.0, criterion_1},
        {2, "filter Riccati fixed point", 1.0, criterion_2},
        {3, "estimator convergence", 5.0, criterion_3},
        {4, "predictor equivalence", 1.0, criterion_4},
        {5, "QP correctness", 10.0, criterion_5},
        {6, "steady-wind ordering", 30.0, criterion_6},
        {7, "square-disturbance recovery", 30.0, criterion_7},
        {8, "constrained vs unconstrained MPC", 30.0, criterion_8},
        {9, "determinism and causality", 60.0, criterion_9},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        Verdict v;
        const auto start = std::chrono::steady_clock::now();
        try {
            c.run(v);
        } catch (const std::exception& e) {
            v.require(false, std::string("exception: ") + e.what());
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::ostringstream limit;
        limit << "runtime < " << c.limit_s << " s";
        v.require(elapsed < c.limit_s, limit.str());
        failures += v.pass ? 0 : 1;
        std::string detail = v.detail.str();
        while (!detail.empty() && (detail.back() == ' ' || detail.back() == ';')) {
            detail.pop_back();
        }
        std::printf("criterion %d: %s (%s) %s; %.3f s\n", c.id, v.pass ? "PASS" : "FAIL",
                    c.title, detail.c_str(), elapsed);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
                criteria.size());
    return failures == 0 ? 0 : 1;
}
