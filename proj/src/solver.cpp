#include "hypstab/solver.hpp"

#include <bit>
#include <cmath>

#include "hypstab/characteristics.hpp"

namespace hypstab {

double lq_norm(const StateGrid& state, double q) {
    const int nx = state.nx();
    const double dx = state.dx();
    double total = 0.0;
    for (int p = 0; p < nx; ++p) {
        double s = 0.0;
        for (int c = 0; c < state.n(); ++c) s += std::pow(std::abs(state.values(c, p)), q);
        double w = (p == 0 || p == nx - 1) ? 0.5 : 1.0;
        total += w * s;
    }
    return std::pow(total * dx, 1.0 / q);
}

double linf_norm(const StateGrid& state) { return state.max_abs(); }

Eigen::MatrixXd time_derivative_field(const StateGrid& state, const HyperbolicSystem& sys) {
    const int n = state.n(), nx = state.nx(), k = sys.k();
    const double dx = state.dx();
    Eigen::MatrixXd out(n, nx);
    const auto& w = state.values;

    for (int c = 0; c < n; ++c) {
        bool rightward = c < k;
        for (int p = 0; p < nx; ++p) {
            double lam = sys.speed(c, state.x(p), w.col(p));
            double wx;
            if (rightward) {
                wx = (p >= 1) ? (w(c, p) - w(c, p - 1)) / dx
                              : (-3.0 * w(c, 0) + 4.0 * w(c, 1) - w(c, 2)) / (2.0 * dx);
                out(c, p) = -lam * wx;
            } else {
                wx = (p <= nx - 2)
                         ? (w(c, p + 1) - w(c, p)) / dx
                         : (3.0 * w(c, nx - 1) - 4.0 * w(c, nx - 2) + w(c, nx - 3)) / (2.0 * dx);
                out(c, p) = lam * wx;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Upwind closed loop

ClosedLoopSolver::ClosedLoopSolver(const HyperbolicSystem& sys, const FeedbackLaw& law,
                                   SimOptions opts)
    : sys_(sys), law_(law), opts_(opts) {
    max_speed_box_ = sys_.max_speed(opts_.y_max);
    double dx = 1.0 / (opts_.nx - 1);
    dt_ = opts_.cfl * dx / max_speed_box_;

    ClosureOptions copts;
    copts.mode = law_.mode;
    copts.sampling = opts_.sampling;
    copts.flow.max_step = std::min(dx / max_speed_box_, 1e-3);
    closure_ = std::make_unique<ClosureEvaluator>(sys_, law_, copts);
    if (law_.mode == FeedbackMode::Nonlinear && opts_.sampling == SamplingMode::LocalCauchy)
        closure_->set_private_stepper(
            [this](StateGrid& s, double dt) { interior_sweep(s, dt); }, dt_);
}

void ClosedLoopSolver::interior_sweep(StateGrid& state, double dt) const {
    const int n = state.n(), nx = state.nx(), k = sys_.k(), m = sys_.m();
    const double r = dt / state.dx();
    const Eigen::MatrixXd old = state.values;

    for (int c = 0; c < n; ++c) {
        if (c < k) {
            for (int p = nx - 1; p >= 1; --p) {
                double nu = sys_.speed(c, state.x(p), old.col(p)) * r;
                state.values(c, p) = old(c, p) - nu * (old(c, p) - old(c, p - 1));
            }
        } else {
            for (int p = 0; p <= nx - 2; ++p) {
                double nu = sys_.speed(c, state.x(p), old.col(p)) * r;
                state.values(c, p) = old(c, p) + nu * (old(c, p + 1) - old(c, p));
            }
        }
    }
    state.time += dt;
    // boundary relation at x = 0, imposed on the freshly updated trace
    Eigen::VectorXd wplus = state.values.col(0).tail(m);
    state.values.col(0).head(k) = sys_.boundary_map(wplus);
}

void ClosedLoopSolver::step(StateGrid& state, double dt) {
    double lam_now = 0.0;
    for (int c = 0; c < state.n(); ++c)
        for (int p = 0; p < state.nx(); ++p)
            lam_now = std::max(lam_now, sys_.speed(c, state.x(p), state.values.col(p)));
    if (dt * lam_now > state.dx() * (1.0 + 1e-12))
        throw CFLViolation("dt exceeds the CFL bound for the current state");

    interior_sweep(state, dt);
    Eigen::VectorXd controls = closure_->evaluate(state.time, state);
    const int last = state.nx() - 1;
    for (int c = sys_.k(); c < sys_.n(); ++c) state.values(c, last) = controls[c - sys_.k()];
}

SimulationTrace ClosedLoopSolver::simulate(const InitialData& w0, double horizon,
                                           const TraceHooks& hooks) {
    SimulationTrace trace;
    StateGrid state = initial_state(w0);

    auto record = [&](const StateGrid& s) {
        TraceRow row;
        row.t = s.time;
        row.l1 = lq_norm(s, 1.0);
        row.l2 = lq_norm(s, 2.0);
        row.lq = lq_norm(s, opts_.q);
        row.linf = linf_norm(s);
        row.lyapunov = hooks.lyapunov ? hooks.lyapunov(s) : 0.0;
        row.vnorm = hooks.vnorm ? hooks.vnorm(s) : 0.0;
        trace.rows.push_back(row);
        trace.controls.emplace_back(
            s.time, Eigen::VectorXd(s.values.col(s.nx() - 1).tail(sys_.m())));
    };

    std::vector<double> snaps = opts_.snapshot_times;
    std::sort(snaps.begin(), snaps.end());
    std::size_t next_snap = 0;
    auto maybe_snapshot = [&](const StateGrid& s) {
        while (next_snap < snaps.size() && s.time >= snaps[next_snap] - 0.5 * dt_) {
            trace.snapshots.emplace_back(s.time, s);
            ++next_snap;
        }
    };

    record(state);
    maybe_snapshot(state);

    double next_record = opts_.record_every;
    long nsteps = static_cast<long>(std::ceil(horizon / dt_ - 1e-9));
    for (long i = 0; i < nsteps; ++i) {
        step(state, dt_);
        if (linf_norm(state) > opts_.blowup_threshold)
            throw BlowUp("state norm exceeded the blow-up guard");
        if (opts_.record_every <= 0.0 || state.time >= next_record - 1e-12) {
            record(state);
            while (next_record <= state.time + 1e-12) next_record += opts_.record_every;
        }
        maybe_snapshot(state);
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Exact method of characteristics (constant speeds, linear loop)

ExactLinearEvaluator::ExactLinearEvaluator(const HyperbolicSystem& sys, const FeedbackLaw& law,
                                           const InitialData& w0)
    : sys_(sys), law_(law), w0_(w0) {
    if (!sys_.has_linear_coupling() || law_.mode != FeedbackMode::Linear)
        throw ValidationError("exact advection requires a linear closed loop");
    for (int c = 0; c < sys_.n(); ++c) {
        if (!sys_.profile(c).is_constant())
            throw ValidationError("exact advection requires constant speeds");
        lambda_.push_back(sys_.speed(c, 0.0));
    }
    for (int c = law_.ell(); c < law_.n(); ++c) {
        std::vector<double> pos;
        for (int r = law_.k; r < c; ++r) pos.push_back(lambda_[static_cast<std::size_t>(r)] /
                                                       lambda_[static_cast<std::size_t>(c)]);
        sample_pos_.push_back(std::move(pos));
    }
    memo_.resize(static_cast<std::size_t>(sys_.n()));
}

double ExactLinearEvaluator::component(int c, double t, double x) const {
    if (t <= 0.0) return w0_.eval(c, SpeedProfile::clamp(x));
    const double lam = lambda_[static_cast<std::size_t>(c)];
    if (c < sys_.k()) {
        double foot = x - lam * t;
        if (foot >= -1e-13) return w0_.eval(c, SpeedProfile::clamp(foot));
        return boundary_value(c, std::max(t - x / lam, 0.0));
    }
    double foot = x + lam * t;
    if (foot <= 1.0 + 1e-13) return w0_.eval(c, SpeedProfile::clamp(foot));
    return boundary_value(c, std::max(t - (1.0 - x) / lam, 0.0));
}

double ExactLinearEvaluator::boundary_value(int c, double t) const {
    auto& memo = memo_[static_cast<std::size_t>(c)];
    long long key = std::bit_cast<long long>(t);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;

    double value;
    if (c < sys_.k()) {
        Eigen::VectorXd wplus(sys_.m());
        for (int j = sys_.k(); j < sys_.n(); ++j) wplus[j - sys_.k()] = component(j, t, 0.0);
        value = sys_.coupling_matrix_at_zero().row(c).dot(wplus);
    } else if (!law_.is_defect_slot(c)) {
        value = 0.0;
    } else {
        const auto& pos = sample_pos_[static_cast<std::size_t>(c - law_.ell())];
        Eigen::VectorXd args(c - law_.k);
        for (int r = law_.k; r < c; ++r)
            args[r - law_.k] = component(r, t, pos[static_cast<std::size_t>(r - law_.k)]);
        value = law_.eval_map(c, args);
    }
    memo.emplace(key, value);
    return value;
}

void ExactLinearEvaluator::fill(StateGrid& g, double t) const {
    g.time = t;
    for (int c = 0; c < sys_.n(); ++c)
        for (int p = 0; p < g.nx(); ++p) g.values(c, p) = component(c, t, g.x(p));
}

Eigen::VectorXd ExactLinearEvaluator::boundary_controls(double t) const {
    Eigen::VectorXd out(sys_.m());
    for (int c = sys_.k(); c < sys_.n(); ++c)
        out[c - sys_.k()] = law_.is_defect_slot(c) ? boundary_value(c, t) : 0.0;
    return out;
}

// ---------------------------------------------------------------------------

SimulationTrace simulate(const HyperbolicSystem& sys, const FeedbackLaw& law,
                         const InitialData& w0, double horizon, const SimOptions& opts,
                         const TraceHooks& hooks) {
    if (opts.mode == SolverMode::Upwind) {
        ClosedLoopSolver solver(sys, law, opts);
        return solver.simulate(w0, horizon, hooks);
    }

    ExactLinearEvaluator ev(sys, law, w0);
    SimulationTrace trace;
    StateGrid state(sys.n(), opts.nx);
    const double dt = state.dx(); // node-aligned cadence for integer speeds

    std::vector<double> snaps = opts.snapshot_times;
    std::sort(snaps.begin(), snaps.end());
    std::size_t next_snap = 0;

    long nsteps = static_cast<long>(std::ceil(horizon / dt - 1e-9));
    for (long i = 0; i <= nsteps; ++i) {
        double t = dt * static_cast<double>(i);
        ev.fill(state, t);
        TraceRow row;
        row.t = t;
        row.l1 = lq_norm(state, 1.0);
        row.l2 = lq_norm(state, 2.0);
        row.lq = lq_norm(state, opts.q);
        row.linf = linf_norm(state);
        row.lyapunov = hooks.lyapunov ? hooks.lyapunov(state) : 0.0;
        row.vnorm = hooks.vnorm ? hooks.vnorm(state) : 0.0;
        trace.rows.push_back(row);
        trace.controls.emplace_back(t, ev.boundary_controls(t));
        while (next_snap < snaps.size() && t >= snaps[next_snap] - 0.5 * dt) {
            trace.snapshots.emplace_back(t, state);
            ++next_snap;
        }
    }
    return trace;
}

} // namespace hypstab
