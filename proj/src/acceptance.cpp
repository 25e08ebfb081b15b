#include "hypstab/acceptance.hpp"

#include <cmath>
#include <cstdarg>
#include <random>
#include <sstream>

#include "hypstab/scenario.hpp"

namespace hypstab {

namespace {

std::string fmt_detail(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

// --- pinned scenarios ------------------------------------------------------

SpeedProfile constant_speed(double v) {
    SpeedProfile p;
    p.base = Polynomial({v});
    return p;
}

ComponentData sine1(double amp) {
    ComponentData c;
    c.sine = {amp};
    return c;
}

/// k = m = 1, speeds (1, 1), B = [0.8], data (0.8 sin, sin); T_opt = 2.
Scenario scenario_1x1() {
    Scenario s;
    s.k = 1;
    s.m = 1;
    s.speeds = {constant_speed(1.0), constant_speed(1.0)};
    s.coupling = LinearCoupling{Eigen::MatrixXd::Constant(1, 1, 0.8)};
    s.initial.components = {sine1(0.8), sine1(1.0)};
    s.horizon = 3.0;
    return s;
}

/// k = 1, m = 2, speeds (1, 1, 2), B = [1 2]; T_opt = 1.5.
Scenario scenario_1x2() {
    Scenario s;
    s.k = 1;
    s.m = 2;
    s.speeds = {constant_speed(1.0), constant_speed(1.0), constant_speed(2.0)};
    Eigen::MatrixXd B(1, 2);
    B << 1.0, 2.0;
    s.coupling = LinearCoupling{B};
    ComponentData w3;
    w3.sine = {0.0, 0.5};
    s.initial.components = {sine1(1.0), sine1(1.0), w3};
    s.horizon = 2.5;
    return s;
}

/// k = 2, m = 1, speeds (2, 1, 1); the single control is the zero map; T_opt = 2.
Scenario scenario_2x1() {
    Scenario s;
    s.k = 2;
    s.m = 1;
    s.speeds = {constant_speed(2.0), constant_speed(1.0), constant_speed(1.0)};
    Eigen::MatrixXd B(2, 1);
    B << 1.0, 1.0;
    s.coupling = LinearCoupling{B};
    s.initial.components = {sine1(1.0), sine1(0.5), sine1(0.8)};
    s.horizon = 2.4;
    return s;
}

/// Quasilinear small-data scenario: speeds lambda_i0 (1 + 0.05 y_i), a
/// quadratic boundary map, smoothstep data with ||w0||_C1 = 0.01, delta = 0.2.
Scenario scenario_quasilinear(int nx) {
    Scenario s;
    s.k = 1;
    s.m = 2;
    const double base[] = {1.0, 1.0, 2.0};
    for (int c = 0; c < 3; ++c) {
        SpeedProfile p;
        p.base = Polynomial({base[c]});
        p.state_coupling = std::vector<double>(3, 0.0);
        p.state_coupling[static_cast<std::size_t>(c)] = 0.05 * base[c];
        s.speeds.push_back(p);
    }
    NonlinearCoupling nc;
    nc.linear.resize(1, 2);
    nc.linear << 1.0, 2.0;
    nc.quad = {{QuadraticTerm{1, 1, 0.1}}};
    s.coupling = nc;

    // smoothstep 3x^2 - 2x^3 vanishes with zero slope at x = 0 (both
    // compatibility orders hold exactly) and has zero slope at x = 1
    const double amp = 0.01 / 2.5; // sup|s| + sup|s'| = 2.5 for the smoothstep
    for (int c = 0; c < 3; ++c) {
        ComponentData d;
        d.poly = Polynomial({0.0, 0.0, 3.0 * amp, -2.0 * amp});
        s.initial.components.push_back(d);
    }

    s.feedback = FeedbackMode::Nonlinear;
    s.sampling = SamplingMode::LocalCauchy;
    s.delta = 0.2;
    s.y_max = 0.05;
    s.nx = nx;
    s.lyapunov.q = {1.0};
    s.lyapunov.rate = {1.0};
    s.horizon = 1.75; // T_opt + delta + margin
    s.record_every = 0.01;
    return s;
}

struct Loop {
    HyperbolicSystem sys;
    FeedbackLaw law;
    TimingData timing;
    Scenario scenario;
};

Loop make_loop(const Scenario& s) {
    HyperbolicSystem sys = s.make_system();
    FeedbackLaw law = s.make_law(sys);
    TimingData timing = compute_timing(sys);
    return Loop{std::move(sys), std::move(law), std::move(timing), s};
}

double residual_at(const SimulationTrace& trace, double t) {
    for (const auto& row : trace.rows)
        if (row.t >= t - 1e-9) return row.linf;
    return trace.rows.back().linf;
}

// --- criteria --------------------------------------------------------------

/// Plug-in consistency of the synthesized maps over random class members.
CriterionResult criterion_1() {
    CriterionResult res{1, "feedback plug-in consistency", false, ""};
    const std::pair<int, int> shapes[] = {{1, 1}, {1, 3}, {2, 2}, {2, 3}, {3, 2}, {3, 3}};
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    double worst = 0.0;

    for (auto [k, m] : shapes) {
        const int n = k + m, ell = std::max(k, m);
        int accepted = 0;
        while (accepted < 200) {
            Eigen::MatrixXd B(k, m);
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < m; ++j) B(i, j) = uni(rng);
            // sample comfortably inside the open class: reject trailing
            // blocks conditioned worse than 1e4
            bool well_conditioned = true;
            int top = (m >= k) ? std::min(m, k) : m - 1;
            for (int i = 1; i <= top && well_conditioned; ++i) {
                Eigen::JacobiSVD<Eigen::MatrixXd> svd(B.bottomRightCorner(i, i));
                double smax = svd.singularValues()(0);
                double smin = svd.singularValues()(svd.singularValues().size() - 1);
                well_conditioned = smax > 0.0 && smin > 1e-4 * smax;
            }
            if (!well_conditioned || !check_class_B(B, k, m).member) continue;
            FeedbackLaw law;
            try {
                law = synthesize_linear(B, k, m);
            } catch (const SingularSubmatrix&) {
                continue;
            }
            ++accepted;

            int jmax = n - ell;
            for (int j = 1; j <= jmax; ++j) {
                Eigen::VectorXd v(m);
                int free_count = (n - j) - k;
                for (int idx = 0; idx < m; ++idx) v[idx] = 0.0;
                for (int idx = 0; idx < free_count; ++idx) v[idx] = uni(rng);
                for (int c = n - j; c < n; ++c) v[c - k] = law.eval_map(c, v.head(c - k));
                Eigen::VectorXd rows = (B * v).tail(j);
                worst = std::max(worst, rows.size() ? rows.cwiseAbs().maxCoeff() : 0.0);
                if (j == jmax && m <= k)
                    worst = std::max(worst, (B * v).cwiseAbs().maxCoeff());
            }
        }
    }
    res.pass = worst <= 1e-10;
    res.detail = fmt_detail("worst row residual %.3e (tol 1e-10; 200 draws x 6 shapes, "
                            "class sampled with conditioning margin 1e4)",
                            worst);
    return res;
}

/// Delay-map derivative identity against finite differences.
CriterionResult criterion_2() {
    CriterionResult res{2, "delay-map derivative identity", false, ""};

    auto profile = [](std::vector<double> c) {
        SpeedProfile p;
        p.base = Polynomial(std::move(c));
        return p;
    };
    std::vector<std::vector<SpeedProfile>> families = {
        {constant_speed(1.5), constant_speed(1.0), constant_speed(2.0), constant_speed(3.0)},
        {profile({2.0, 0.5}), profile({1.0, 0.2}), profile({1.7, 0.3}), profile({2.5, 0.5})},
        {profile({2.0, 0.3, 0.1, 0.05}), profile({1.0, 0.2, -0.1, 0.05}),
         profile({1.8, 0.2, 0.0, 0.1}), profile({3.0, 0.0, 0.5})},
    };

    double worst = 0.0;
    for (auto& speeds : families) {
        HyperbolicSystem sys(1, 3, speeds, LinearCoupling{Eigen::MatrixXd::Ones(1, 3)});
        if (!validate_system(sys).ok()) {
            res.detail = "internal: test system failed validation";
            return res;
        }
        const double h = 1e-4;
        for (int i = 1; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                for (int g = 0; g < 64; ++g) {
                    double x = h + (1.0 - 2.0 * h) * g / 63.0;
                    double a_mid = delay_map(sys, i, j, x);
                    double fd =
                        (delay_map(sys, i, j, x + h) - delay_map(sys, i, j, x - h)) / (2.0 * h);
                    double expected = sys.speed(i, a_mid) / sys.speed(j, x);
                    worst = std::max(worst, std::abs(fd - expected) / std::abs(expected));
                }
    }
    res.pass = worst <= 1e-5;
    res.detail = fmt_detail("max relative identity error %.3e (tol 1e-5)", worst);
    return res;
}

/// Finite-time vanishing at machine precision in exact-advection mode.
CriterionResult criterion_3() {
    CriterionResult res{3, "finite-time vanishing (exact advection)", false, ""};
    double worst = 0.0;
    Scenario cases[] = {scenario_1x1(), scenario_1x2()};
    double t_opts[] = {2.0, 1.5};
    for (int i = 0; i < 2; ++i) {
        Loop loop = make_loop(cases[i]);
        SimOptions opts = cases[i].sim_options();
        opts.mode = SolverMode::ExactAdvection;
        SimulationTrace trace =
            simulate(loop.sys, loop.law, cases[i].initial, cases[i].horizon, opts);
        if (std::abs(loop.timing.t_opt - t_opts[i]) > 1e-12) {
            res.detail = fmt_detail("unexpected T_opt %.15g", loop.timing.t_opt);
            return res;
        }
        for (const auto& row : trace.rows)
            if (row.t >= t_opts[i] - 1e-12) worst = std::max(worst, row.linf);
    }
    res.pass = worst <= 1e-12;
    res.detail = fmt_detail("max |w| after T_opt %.3e (tol 1e-12)", worst);
    return res;
}

/// First-order shrinkage of the post-T_opt residual under grid refinement.
CriterionResult criterion_4() {
    CriterionResult res{4, "grid convergence of vanishing (upwind)", false, ""};
    Scenario cases[] = {scenario_1x1(), scenario_1x2()};
    double t_opts[] = {2.0, 1.5};
    double worst_ratio = 1e300;
    std::ostringstream detail;
    for (int i = 0; i < 2; ++i) {
        Loop loop = make_loop(cases[i]);
        double prev = 0.0;
        detail << (i ? " | " : "") << "residuals:";
        for (int nx : {101, 201, 401}) {
            SimOptions opts = cases[i].sim_options();
            opts.nx = nx;
            SimulationTrace trace =
                simulate(loop.sys, loop.law, cases[i].initial, cases[i].horizon, opts);
            double r = residual_at(trace, t_opts[i] + 0.1);
            detail << " " << fmt_detail("%.3e", r);
            if (prev > 0.0) {
                double ratio = r < 1e-14 ? 1e6 : prev / r;
                worst_ratio = std::min(worst_ratio, ratio);
            }
            prev = r;
        }
    }
    res.pass = worst_ratio >= 1.8;
    res.detail = fmt_detail("min halving ratio %.3f (need >= 1.8); %s", worst_ratio,
                            detail.str().c_str());
    return res;
}

/// Per-step Lyapunov decay in both solver modes.
CriterionResult criterion_5() {
    CriterionResult res{5, "Lyapunov decay rate", false, ""};
    Scenario cases[] = {scenario_1x1(), scenario_1x2()};
    double worst_margin = -1e300;
    int cells = 0, failed = 0;

    for (auto& sc : cases) {
        Loop loop = make_loop(sc);
        double gamma = calibrate_gamma(loop.sys, loop.law);
        double max_lambda = loop.sys.max_speed(0.0);
        for (double q : {1.0, 2.0})
            for (double rate : {1.0, 2.0, 4.0})
                for (SolverMode mode : {SolverMode::ExactAdvection, SolverMode::Upwind}) {
                    SimulationTrace trace = run_with_lyapunov(loop.sys, loop.law, sc, q, rate,
                                                              gamma, 201, mode);
                    std::vector<std::pair<double, double>> series;
                    for (const auto& row : trace.rows) series.emplace_back(row.t, row.lyapunov);
                    double dx = 1.0 / 200.0;
                    double tol = mode == SolverMode::ExactAdvection
                                     ? 1e-10
                                     : 5.0 * dx * q * rate * max_lambda;
                    DecayReport rep = verify_decay(series, q, rate, tol);
                    ++cells;
                    if (!rep.pass) ++failed;
                    worst_margin = std::max(worst_margin, rep.worst_margin);
                }
    }
    res.pass = failed == 0;
    res.detail = fmt_detail("%d/%d cells pass, worst margin %.3e", cells - failed, cells,
                            worst_margin);
    return res;
}

/// Envelope constants fitted per rate agree within a factor of 3.
CriterionResult criterion_6() {
    CriterionResult res{6, "envelope constant independence", false, ""};
    Scenario sc = scenario_1x1();
    Loop loop = make_loop(sc);
    double gamma = calibrate_gamma(loop.sys, loop.law);

    double cmin = 1e300, cmax = 0.0;
    for (double rate : {1.0, 2.0, 4.0}) {
        SimulationTrace trace = run_with_lyapunov(loop.sys, loop.law, sc, 2.0, rate, gamma, 201,
                                                  SolverMode::ExactAdvection);
        std::vector<std::pair<double, double>> lq_series;
        for (const auto& row : trace.rows) lq_series.emplace_back(row.t, row.lq);
        double c = envelope_constant(lq_series, rate, loop.timing.t_opt);
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
    }
    res.pass = cmax <= 3.0 * cmin;
    res.detail = fmt_detail("fitted C range [%.4g, %.4g], spread %.3f (need <= 3)", cmin, cmax,
                            cmax / cmin);
    return res;
}

/// Weight derivative identities and the weight-ratio bound.
CriterionResult criterion_7() {
    CriterionResult res{7, "weight identities and ratio bound", false, ""};
    std::vector<SpeedProfile> speeds = {
        [] { SpeedProfile p; p.base = Polynomial({2.0, 0.3, 0.1, 0.05}); return p; }(),
        [] { SpeedProfile p; p.base = Polynomial({1.0, 0.2, -0.1, 0.05}); return p; }(),
        [] { SpeedProfile p; p.base = Polynomial({1.8, 0.2, 0.0, 0.1}); return p; }(),
        [] { SpeedProfile p; p.base = Polynomial({3.0, 0.0, 0.5}); return p; }(),
    };
    HyperbolicSystem sys(1, 3, speeds, LinearCoupling{Eigen::MatrixXd::Ones(1, 3)});
    TimingData timing = compute_timing(sys);

    double worst_identity = 0.0;
    double cmin = 1e300, cmax = 0.0;
    for (double q : {1.0, 2.0, 4.0})
        for (double rate : {1.0, 2.0, 4.0}) {
            LyapunovWeights w = build_weights(sys, q, rate, 2.0, 64);
            worst_identity = std::max(worst_identity, weight_identity_residual(sys, w));
            double a = w.p.minCoeff(), A = w.p.maxCoeff();
            double c = std::pow(A / a, 1.0 / q) * std::exp(-rate * timing.t_opt);
            cmin = std::min(cmin, c);
            cmax = std::max(cmax, c);
        }
    bool identity_ok = worst_identity <= 1e-11;
    bool ratio_ok = cmax <= 3.0 * cmin;
    res.pass = identity_ok && ratio_ok;
    res.detail = fmt_detail("identity residual %.3e (tol 1e-11), fitted ratio constant "
                            "[%.4g, %.4g] spread %.3f (need <= 3)",
                            worst_identity, cmin, cmax, cmax / cmin);
    return res;
}

/// Norm equivalence with a q-independent constant fitted at q = 2.
CriterionResult criterion_8() {
    CriterionResult res{8, "norm equivalence across q", false, ""};
    std::vector<SpeedProfile> speeds = {constant_speed(2.0), constant_speed(1.5),
                                        constant_speed(1.0), constant_speed(2.0)};
    Eigen::MatrixXd B(2, 2);
    B << 1.0, 0.5, 0.25, 1.0;
    HyperbolicSystem sys(2, 2, speeds, LinearCoupling{B});
    FeedbackLaw law = synthesize_linear(B, 2, 2);
    law.attach_sample_positions(sys);

    BMap maps = [&sys](int r, int c, double x) { return delay_map(sys, r, c, x); };

    const int nx = 201;
    std::mt19937_64 rng(88);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<StateGrid> states;
    for (int s = 0; s < 100; ++s) {
        InitialData data;
        data.components.resize(4);
        for (auto& comp : data.components) comp.sine = {uni(rng), uni(rng), uni(rng)};
        states.push_back(data.sample(nx));
    }

    auto ratio = [&](const StateGrid& g, double q) {
        return triple_norm(g, law, maps, q) / lq_norm(g, q);
    };

    // the fit: worst deviation at q = 2, with a fixed 25% headroom
    double fit = 1.0;
    for (const auto& g : states) {
        double r = ratio(g, 2.0);
        fit = std::max(fit, std::max(r, 1.0 / r));
    }
    double lambda_star = 1.25 * fit;

    double worst = 1.0;
    for (double q : {1.0, 2.0, 4.0, 8.0})
        for (const auto& g : states) {
            double r = ratio(g, q);
            worst = std::max(worst, std::max(r, 1.0 / r));
        }
    res.pass = worst <= lambda_star;
    res.detail = fmt_detail("lambda* = %.4f (fit at q=2 x 1.25), worst deviation %.4f over "
                            "q in {1,2,4,8}",
                            lambda_star, worst);
    return res;
}

/// Quasilinear small-data run: active C1 ramps, decay of the sup norm, and
/// the two-part functional decaying at the slackened rate.
CriterionResult criterion_9() {
    CriterionResult res{9, "quasilinear small-data decay", false, ""};
    const double t_opt = 1.5, delta = 0.2;

    double residuals[2];
    int grids[] = {101, 201};
    double jump_max = 0.0, control_t0_err = 0.0;
    DecayReport decay;
    double w0_inf = 0.0;

    for (int gi = 0; gi < 2; ++gi) {
        Scenario sc = scenario_quasilinear(grids[gi]);
        Loop loop = make_loop(sc);
        double gamma = calibrate_gamma(loop.sys, loop.law);

        ValidationReport vrep = validate_system(loop.sys, sc.y_max);
        CompatibilityReport crep =
            check_compatibility(sc.initial.sample(sc.nx), loop.sys);
        if (!vrep.ok() || !crep.pass(sc.tol_compat)) {
            res.detail = "internal: quasilinear scenario invalid or incompatible";
            return res;
        }

        SimulationTrace trace = run_with_lyapunov(loop.sys, loop.law, sc, 1.0, 1.0, gamma,
                                                  sc.nx, SolverMode::Upwind);
        StateGrid w0 = sc.initial.sample(sc.nx);
        w0_inf = linf_norm(w0);
        residuals[gi] = residual_at(trace, t_opt + delta);

        if (gi == 1) {
            // (a) ramp activity: the control at t = 0 equals the initial trace
            // at x = 1; C1 junction measured on the frozen state at delta/2
            ClosedLoopSolver solver(loop.sys, loop.law, sc.sim_options());
            StateGrid state = solver.initial_state(sc.initial);
            Eigen::VectorXd c0 = solver.controls(0.0, state);
            for (int j = 0; j < loop.sys.m(); ++j)
                control_t0_err = std::max(
                    control_t0_err,
                    std::abs(c0[j] - w0.values(loop.sys.k() + j, w0.nx() - 1)));

            while (state.time < 0.5 * delta - 1e-12) solver.step(state, solver.default_dt());
            ClosureOptions copts;
            copts.mode = FeedbackMode::Nonlinear;
            copts.sampling = SamplingMode::Frozen;
            ClosureEvaluator frozen(loop.sys, loop.law, copts);
            const double h = 1e-6, tj = 0.5 * delta;
            auto W = [&](double t) { return frozen.evaluate(t, state); };
            Eigen::VectorXd left =
                (3.0 * W(tj) - 4.0 * W(tj - h) + W(tj - 2.0 * h)) / (2.0 * h);
            Eigen::VectorXd right =
                (-3.0 * W(tj) + 4.0 * W(tj + h) - W(tj + 2.0 * h)) / (2.0 * h);
            jump_max = (left - right).cwiseAbs().maxCoeff();

            // (c) two-part functional decay with 20% slack for t >= delta/2
            std::vector<std::pair<double, double>> series;
            for (const auto& row : trace.rows) series.emplace_back(row.t, row.lyapunov);
            double dx = 1.0 / (sc.nx - 1);
            double tol = 5.0 * dx * 1.0 * 1.0 * loop.sys.max_speed(sc.y_max);
            decay = verify_decay(series, 1.0, 1.0, tol, 1e-12, 0.2, 0.5 * delta);
        }
    }

    bool ramps_ok = control_t0_err <= 1e-9 && jump_max <= 1e-6;
    bool residual_ok = residuals[1] <= 1e-3 * w0_inf && residuals[1] < residuals[0];
    res.pass = ramps_ok && residual_ok && decay.pass;
    res.detail = fmt_detail(
        "control(0) error %.2e, C1 jump %.2e (tol 1e-6); residual %.3e <= %.3e and < %.3e; "
        "decay %s (worst margin %.2e)",
        control_t0_err, jump_max, residuals[1], 1e-3 * w0_inf, residuals[0],
        decay.pass ? "pass" : "FAIL", decay.worst_margin);
    return res;
}

/// m < k: the single control is identically zero and the state still vanishes.
CriterionResult criterion_10() {
    CriterionResult res{10, "m < k zero-map control path", false, ""};
    Scenario sc = scenario_2x1();
    Loop loop = make_loop(sc);

    bool zero_map = loop.law.linear_row(loop.law.ell()).size() == 0;
    if (std::abs(loop.timing.t_opt - 2.0) > 1e-12) {
        res.detail = fmt_detail("unexpected T_opt %.15g", loop.timing.t_opt);
        return res;
    }

    // exact mode: machine-zero after T_opt, controls identically zero
    SimOptions opts = sc.sim_options();
    opts.mode = SolverMode::ExactAdvection;
    SimulationTrace exact = simulate(loop.sys, loop.law, sc.initial, sc.horizon, opts);
    double worst_after = 0.0, worst_control = 0.0;
    for (const auto& row : exact.rows)
        if (row.t >= 2.0 - 1e-12) worst_after = std::max(worst_after, row.linf);
    for (const auto& [t, ctl] : exact.controls)
        worst_control = std::max(worst_control, ctl.cwiseAbs().maxCoeff());

    // upwind mode: residual past T_opt at grid-error scale
    SimOptions up = sc.sim_options();
    SimulationTrace trace = simulate(loop.sys, loop.law, sc.initial, sc.horizon, up);
    double res201 = residual_at(trace, 2.0 + 0.1);
    for (const auto& [t, ctl] : trace.controls)
        worst_control = std::max(worst_control, ctl.cwiseAbs().maxCoeff());
    double dx = 1.0 / (sc.nx - 1);

    res.pass = zero_map && worst_after <= 1e-12 && worst_control == 0.0 &&
               res201 <= 10.0 * dx;
    res.detail = fmt_detail("bottom map empty: %s; exact residual after T_opt %.2e; controls "
                            "max %.2e; upwind residual %.3e (tol %.3e)",
                            zero_map ? "yes" : "no", worst_after, worst_control, res201,
                            10.0 * dx);
    return res;
}

} // namespace

std::vector<CriterionResult> run_acceptance(Suite suite) {
    std::vector<CriterionResult> out;
    bool linear = suite != Suite::Nonlinear;
    bool nonlinear = suite != Suite::Linear;

    if (linear) {
        out.push_back(criterion_1());
        out.push_back(criterion_2());
        out.push_back(criterion_3());
        out.push_back(criterion_4());
        out.push_back(criterion_5());
        out.push_back(criterion_6());
        out.push_back(criterion_7());
        out.push_back(criterion_8());
    }
    if (nonlinear) out.push_back(criterion_9());
    if (linear) out.push_back(criterion_10());
    return out;
}

} // namespace hypstab
