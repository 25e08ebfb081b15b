#include "hypstab/feedback.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <sstream>

namespace hypstab {

namespace {

constexpr double kSingularRel = 1e-12;
constexpr double kNewtonTol = 1e-12;

bool invertible(const Eigen::MatrixXd& A) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    double smax = svd.singularValues()(0);
    double smin = svd.singularValues()(svd.singularValues().size() - 1);
    return smax > 0.0 && smin >= kSingularRel * smax;
}

/// Full stage solve: u = X v for the last `stage` rows of B, u the trailing
/// `stage` positive components.
Eigen::MatrixXd stage_solution(const Eigen::MatrixXd& B, int m, int stage) {
    Eigen::MatrixXd R = B.bottomRows(stage);
    Eigen::MatrixXd L = R.leftCols(m - stage);
    Eigen::MatrixXd Q = R.rightCols(stage);
    return -Q.fullPivLu().solve(L);
}

} // namespace

ClassBReport check_class_B(const Eigen::MatrixXd& B, int k, int m) {
    ClassBReport report;
    int top = std::min(m - 1, k);
    for (int i = 1; i <= top; ++i) {
        bool ok = invertible(B.bottomRightCorner(i, i));
        report.per_index.emplace_back(i, ok);
        if (!ok) report.member = false;
    }
    return report;
}

Ramp Ramp::hermite(double v0, double d0, double t_end) {
    Ramp r;
    r.t_end = t_end;
    if (t_end <= 0.0) return r;
    r.c0 = v0;
    r.c1 = d0;
    r.c2 = (-3.0 * v0 - 2.0 * d0 * t_end) / (t_end * t_end);
    r.c3 = (2.0 * v0 + d0 * t_end) / (t_end * t_end * t_end);
    return r;
}

const Eigen::RowVectorXd& FeedbackLaw::linear_row(int c) const {
    return rows.at(static_cast<std::size_t>(c - ell()));
}

double FeedbackLaw::eval_map(int c, const Eigen::VectorXd& args) const {
    if (args.size() == 0) return 0.0;
    if (!coupling_) return linear_row(c).dot(args);

    if (args.cwiseAbs().maxCoeff() == 0.0) return 0.0;

    const NonlinearCoupling& nc = *coupling_;
    int stage = n() - c;
    Eigen::MatrixXd X = stage_solution(nc.linear, m, stage);
    Eigen::VectorXd u = X * args;

    Eigen::VectorXd v(m);
    for (int it = 0; it < 60; ++it) {
        v << args, u;
        Eigen::VectorXd res = nc.value(v).tail(stage);
        if (res.cwiseAbs().maxCoeff() < kNewtonTol) return u[0];

        Eigen::MatrixXd J = nc.jacobian(v).bottomRows(stage).rightCols(stage);
        Eigen::VectorXd du = J.fullPivLu().solve(res);
        double base_norm = res.norm();
        double alpha = 1.0;
        bool improved = false;
        for (int trial = 0; trial < 40; ++trial) {
            Eigen::VectorXd u_try = u - alpha * du;
            v << args, u_try;
            if (nc.value(v).tail(stage).norm() < base_norm) {
                u = u_try;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!improved)
            throw NoConvergence("nonlinear boundary map left its convergence neighborhood");
    }
    throw NoConvergence("nonlinear boundary map did not reach the residual tolerance");
}

Eigen::RowVectorXd FeedbackLaw::map_gradient(int c, const Eigen::VectorXd& args) const {
    if (args.size() == 0) return Eigen::RowVectorXd(0);
    if (!coupling_) return linear_row(c);

    // implicit-function row at the solved trailing components
    const NonlinearCoupling& nc = *coupling_;
    int stage = n() - c;
    Eigen::VectorXd u = stage_solution(nc.linear, m, stage) * args;
    Eigen::VectorXd v(m);
    for (int it = 0; it < 60; ++it) {
        v << args, u;
        Eigen::VectorXd res = nc.value(v).tail(stage);
        if (res.cwiseAbs().maxCoeff() < kNewtonTol) break;
        Eigen::MatrixXd J = nc.jacobian(v).bottomRows(stage).rightCols(stage);
        u -= J.fullPivLu().solve(res);
    }
    v << args, u;
    Eigen::MatrixXd Jrows = nc.jacobian(v).bottomRows(stage);
    Eigen::MatrixXd Lj = Jrows.leftCols(m - stage);
    Eigen::MatrixXd Qj = Jrows.rightCols(stage);
    Eigen::MatrixXd G = -Qj.fullPivLu().solve(Lj);
    return G.row(0);
}

void FeedbackLaw::attach_sample_positions(const HyperbolicSystem& sys, const FlowOptions& opts) {
    sample_positions_.clear();
    for (int c = ell(); c < n(); ++c) {
        std::vector<double> pos;
        for (int r = k; r < c; ++r) pos.push_back(delay_map(sys, r, c, 1.0, opts));
        sample_positions_.push_back(std::move(pos));
    }
}

const std::vector<double>& FeedbackLaw::sample_positions(int c) const {
    return sample_positions_.at(static_cast<std::size_t>(c - ell()));
}

void FeedbackLaw::attach_ramps(std::vector<RampPair> ramps, double delta) {
    ramps_ = std::move(ramps);
    delta_ = delta;
}

const RampPair& FeedbackLaw::ramp(int c) const {
    return ramps_.at(static_cast<std::size_t>(c - k));
}

FeedbackLaw synthesize_linear(const Eigen::MatrixXd& B, int k, int m) {
    FeedbackLaw law;
    law.k = k;
    law.m = m;
    law.mode = FeedbackMode::Linear;

    // Class membership covers i <= min(m-1, k); when m >= k the construction
    // additionally needs the full min(m, k) block so that imposing every map
    // forces all coupled rows to vanish.
    int required = (m >= k) ? std::min(m, k) : m - 1;
    for (int i = 1; i <= required; ++i) {
        if (!invertible(B.bottomRightCorner(i, i))) {
            std::ostringstream os;
            os << "trailing " << i << "x" << i << " block of B is numerically singular";
            throw SingularSubmatrix(i, os.str());
        }
        law.checked_invertibility_indices.push_back(i);
    }

    const int ell = law.ell();
    const int n = law.n();
    for (int c = ell; c < n; ++c) {
        int nargs = c - k;
        if (nargs == 0) {
            law.rows.emplace_back(Eigen::RowVectorXd(0));
            continue;
        }
        int stage = n - c;
        law.rows.emplace_back(stage_solution(B, m, stage).row(0));
    }
    return law;
}

FeedbackLaw synthesize_nonlinear(const NonlinearCoupling& coupling, int k, int m) {
    FeedbackLaw law = synthesize_linear(coupling.linear, k, m);
    law.mode = FeedbackMode::Nonlinear;
    law.coupling_ = coupling;
    return law;
}

std::vector<RampPair> build_ramps(const StateGrid& w0, const HyperbolicSystem& sys,
                                  double delta) {
    if (!(delta > 0.0)) throw ValidationError("ramps require delta > 0");
    if (w0.nx() < 3) throw ValidationError("ramps require at least 3 grid points");

    const int k = sys.k(), n = sys.n(), N = w0.nx() - 1;
    const double dx = w0.dx();
    Eigen::VectorXd y_end = w0.values.col(N);

    std::vector<RampPair> ramps;
    for (int c = k; c < n; ++c) {
        double v0 = w0.values(c, N);
        double d =
            (3.0 * w0.values(c, N) - 4.0 * w0.values(c, N - 1) + w0.values(c, N - 2)) /
            (2.0 * dx);
        double lam = sys.speed(c, 1.0, y_end);
        RampPair pair;
        pair.zeta = Ramp::hermite(v0, lam * d, 0.5 * delta);
        pair.eta = Ramp::hermite(1.0, 0.0, 0.5 * delta);
        ramps.push_back(pair);
    }
    return ramps;
}

CompatibilityReport check_compatibility(const StateGrid& w0, const HyperbolicSystem& sys) {
    if (w0.nx() < 3) throw ValidationError("compatibility check requires at least 3 grid points");
    const int k = sys.k(), m = sys.m(), n = sys.n();
    const double dx = w0.dx();

    Eigen::VectorXd at0 = w0.values.col(0);
    Eigen::VectorXd wplus = at0.tail(m);

    CompatibilityReport rep;
    rep.order0 = at0.head(k) - sys.boundary_map(wplus);

    Eigen::VectorXd d(n);
    for (int c = 0; c < n; ++c)
        d[c] = (-3.0 * w0.values(c, 0) + 4.0 * w0.values(c, 1) - w0.values(c, 2)) / (2.0 * dx);

    Eigen::VectorXd lhs(k);
    for (int c = 0; c < k; ++c) lhs[c] = -sys.speed(c, 0.0, at0) * d[c];
    Eigen::VectorXd rhs_inner(m);
    for (int j = 0; j < m; ++j) rhs_inner[j] = sys.speed(k + j, 0.0, at0) * d[k + j];
    rep.order1 = lhs - sys.boundary_jacobian(wplus) * rhs_inner;
    return rep;
}

// ---------------------------------------------------------------------------
// Closure evaluation

namespace {

/// Frozen-snapshot speed of one family: exact base plus the interpolated
/// affine state term, precomputed on the nodes.
class FrozenFamilySpeed {
  public:
    FrozenFamilySpeed(const HyperbolicSystem& sys, const StateGrid& frozen, int c)
        : base_(&sys.profile(c).base) {
        const auto& coup = sys.profile(c).state_coupling;
        if (!coup.empty()) {
            dot_.resize(frozen.nx());
            for (int p = 0; p < frozen.nx(); ++p) {
                double s = 0.0;
                for (int j = 0; j < frozen.n(); ++j) s += coup[static_cast<std::size_t>(j)] * frozen.values(j, p);
                dot_[p] = s;
            }
        }
    }

    double operator()(double x) const {
        double v = (*base_)(SpeedProfile::clamp(x));
        if (dot_.size()) {
            const int N = static_cast<int>(dot_.size()) - 1;
            double s = SpeedProfile::clamp(x) * N;
            int p = std::min(static_cast<int>(s), N - 1);
            double f = s - p;
            v += (1.0 - f) * dot_[p] + f * dot_[p + 1];
        }
        return v;
    }

  private:
    const Polynomial* base_;
    Eigen::VectorXd dot_;
};

template <typename F>
double rk4_step_local(F&& v, double x, double h) {
    double k1 = v(x);
    double k2 = v(x + 0.5 * h * k1);
    double k3 = v(x + 0.5 * h * k2);
    double k4 = v(x + h * k3);
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Leftward transit from x = 1 to x = 0 for a generic positive-family speed.
template <typename F>
double transit_from_one(F&& speed, double hmax, double pos_tol) {
    auto v = [&](double p) { return -speed(p); };
    double t = 0.0, p = 1.0;
    for (long iter = 0; iter < 10000000L; ++iter) {
        double p_next = rk4_step_local(v, p, hmax);
        if (p_next <= 0.0) {
            double a = 0.0, b = hmax;
            while (b - a > 1e-15) {
                double mid = 0.5 * (a + b);
                double pm = rk4_step_local(v, p, mid);
                if (std::abs(pm) <= pos_tol) return t + mid;
                (pm > 0.0 ? a : b) = mid;
            }
            return t + 0.5 * (a + b);
        }
        t += hmax;
        p = p_next;
    }
    return t;
}

} // namespace

ClosureEvaluator::ClosureEvaluator(const HyperbolicSystem& sys, const FeedbackLaw& law,
                                   ClosureOptions opts)
    : sys_(sys), law_(law), opts_(opts) {}

void ClosureEvaluator::set_private_stepper(InteriorStepFn step, double dt) {
    private_step_ = std::move(step);
    private_dt_ = dt;
}

Eigen::VectorXd ClosureEvaluator::evaluate(double t, const StateGrid& state) {
    const int k = law_.k, n = law_.n();
    Eigen::VectorXd out(law_.m);

    if (opts_.mode == FeedbackMode::Linear) {
        for (int c = k; c < n; ++c) {
            if (!law_.is_defect_slot(c)) {
                out[c - k] = 0.0;
                continue;
            }
            const auto& pos = law_.sample_positions(c);
            Eigen::VectorXd args(c - k);
            for (int r = k; r < c; ++r) args[r - k] = state.interp(r, pos[static_cast<std::size_t>(r - k)]);
            out[c - k] = law_.eval_map(c, args);
        }
        return out;
    }

    std::vector<StateGrid> history;
    bool local = opts_.sampling == SamplingMode::LocalCauchy && private_step_;
    if (local) {
        // slowest positive transit plus margin for the state-perturbed speeds
        double horizon = 1.3 * speed_reciprocal_integral(sys_, k, 0.0, 1.0);
        history = advance_private(state, horizon);
    }

    for (int c = k; c < n; ++c) {
        const RampPair& rp = law_.ramp(c);
        double zeta = rp.zeta.value(t);
        if (!law_.is_defect_slot(c)) {
            out[c - k] = zeta;
            continue;
        }
        double gate = 1.0 - rp.eta.value(t);
        double mval = 0.0;
        if (law_.args_count(c) > 0) {
            Eigen::VectorXd args = sampled_args(c, t, state, history);
            mval = law_.eval_map(c, args);
        }
        out[c - k] = zeta + gate * mval;
    }
    return out;
}

Eigen::VectorXd ClosureEvaluator::sampled_args(int c, double t, const StateGrid& state,
                                               const std::vector<StateGrid>& history) const {
    const int k = law_.k;
    Eigen::VectorXd args(c - k);
    const double hmax = opts_.flow.max_step;

    if (history.empty()) {
        // frozen snapshot: time-independent field at the current state
        FrozenFamilySpeed speed_c(sys_, state, c);
        double t_c = transit_from_one(speed_c, hmax, opts_.flow.position_tol);
        for (int r = k; r < c; ++r) {
            FrozenFamilySpeed speed_r(sys_, state, r);
            // family-r characteristic anchored at (t_c, 0), traced back to 0
            double x = 0.0;
            int nsteps = std::max(1, static_cast<int>(std::ceil(t_c / hmax)));
            double h = t_c / nsteps;
            for (int i = 0; i < nsteps; ++i) x = rk4_step_local(speed_r, x, h);
            args[r - k] = state.interp(r, x);
        }
        return args;
    }

    // local-Cauchy: flow through the advanced private field
    auto field_speed = [&](int fam, double s, double x) {
        double rel = (s - state.time) / private_dt_;
        int idx = static_cast<int>(rel);
        int last = static_cast<int>(history.size()) - 1;
        if (idx >= last) {
            Eigen::VectorXd y(sys_.n());
            for (int j = 0; j < sys_.n(); ++j) y[j] = history[static_cast<std::size_t>(last)].interp(j, x);
            return sys_.speed(fam, x, y);
        }
        if (idx < 0) idx = 0;
        double f = rel - idx;
        Eigen::VectorXd y(sys_.n());
        for (int j = 0; j < sys_.n(); ++j)
            y[j] = (1.0 - f) * history[static_cast<std::size_t>(idx)].interp(j, x) +
                   f * history[static_cast<std::size_t>(idx) + 1].interp(j, x);
        return sys_.speed(fam, x, y);
    };

    // forward trace of the slot characteristic from (t, 1) until it reaches 0
    double s = t, x = 1.0;
    double h = std::min(hmax, private_dt_);
    double t_c = -1.0;
    long max_iter = static_cast<long>(std::ceil(private_dt_ * history.size() / h)) + 8;
    for (long it = 0; it < max_iter; ++it) {
        auto v = [&](double p) { return -field_speed(c, s, p); };
        double x_next = rk4_step_local(v, x, h);
        if (x_next <= 0.0) {
            double a = 0.0, b = h;
            while (b - a > 1e-15) {
                double mid = 0.5 * (a + b);
                double pm = rk4_step_local(v, x, mid);
                if (std::abs(pm) <= opts_.flow.position_tol) break;
                (pm > 0.0 ? a : b) = mid;
            }
            t_c = (s - t) + 0.5 * (a + b);
            break;
        }
        x = x_next;
        s += h;
    }
    if (t_c < 0.0)
        throw BlowUp("slot characteristic failed to reach x = 0 inside the advanced horizon");

    for (int r = k; r < c; ++r) {
        // backward trace from (t + t_c, 0) down to t
        double xr = 0.0, sr = t + t_c;
        int nsteps = std::max(1, static_cast<int>(std::ceil(t_c / h)));
        double hb = t_c / nsteps;
        for (int i = 0; i < nsteps; ++i) {
            auto v = [&](double p) { return -field_speed(r, sr, p); };
            xr = rk4_step_local(v, xr, -hb);
            sr -= hb;
        }
        args[r - k] = state.interp(r, xr);
    }
    return args;
}

std::vector<StateGrid> ClosureEvaluator::advance_private(const StateGrid& state,
                                                         double horizon) {
    std::vector<StateGrid> history;
    history.push_back(state);
    int steps = static_cast<int>(std::ceil(horizon / private_dt_));
    const int k = law_.k, n = law_.n();

    for (int i = 0; i < steps; ++i) {
        StateGrid next = history.back();
        private_step_(next, private_dt_);
        // x = 1 inflow for the private copy: ramps plus maps read at the
        // zero-state sampling positions (the influence of this corner on the
        // main sampling region is second order in the data size)
        const int last = next.nx() - 1;
        for (int c = k; c < n; ++c) {
            const RampPair& rp = law_.ramp(c);
            double zeta = rp.zeta.value(next.time);
            if (!law_.is_defect_slot(c)) {
                next.values(c, last) = zeta;
                continue;
            }
            double gate = 1.0 - rp.eta.value(next.time);
            double mval = 0.0;
            if (law_.args_count(c) > 0) {
                const auto& pos = law_.sample_positions(c);
                Eigen::VectorXd args(c - k);
                for (int r = k; r < c; ++r)
                    args[r - k] = next.interp(r, pos[static_cast<std::size_t>(r - k)]);
                mval = law_.eval_map(c, args);
            }
            next.values(c, last) = zeta + gate * mval;
        }
        history.push_back(std::move(next));
    }
    return history;
}

} // namespace hypstab
