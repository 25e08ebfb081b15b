#include "hypstab/characteristics.hpp"

#include <cmath>

namespace hypstab {

namespace {

double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive(const std::function<double(double)>& f, double a, double b, double fa,
                double fm, double fb, double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = simpson(a, m, fa, flm, fm);
    double right = simpson(m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

/// One classical RK4 step of dx/dt = v(x).
template <typename F>
double rk4_step(F&& v, double x, double h) {
    double k1 = v(x);
    double k2 = v(x + 0.5 * h * k1);
    double k3 = v(x + 0.5 * h * k2);
    double k4 = v(x + h * k3);
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <typename F>
double rk4_integrate(F&& v, double t, double s, double xi, double hmax) {
    double span = t - s;
    if (span == 0.0) return xi;
    int nsteps = static_cast<int>(std::ceil(std::abs(span) / hmax));
    if (nsteps < 1) nsteps = 1;
    double h = span / nsteps;
    double x = xi;
    for (int i = 0; i < nsteps; ++i) x = rk4_step(v, x, h);
    return x;
}

/// Speed of family c against the zero state.
struct ZeroStateSpeed {
    const HyperbolicSystem& sys;
    int c;
    double operator()(double x) const { return sys.speed(c, x); }
};

/// Speed of family c against a frozen snapshot.
struct FrozenSpeed {
    const HyperbolicSystem& sys;
    const StateGrid& frozen;
    int c;
    double operator()(double x) const {
        Eigen::VectorXd y(frozen.n());
        for (int j = 0; j < frozen.n(); ++j) y[j] = frozen.interp(j, x);
        return sys.speed(c, x, y);
    }
};

template <typename F>
double flow_impl(const HyperbolicSystem& sys, int c, double t, double s, double xi, F&& speed,
                 bool constant, const FlowOptions& opts) {
    double sgn = c < sys.k() ? 1.0 : -1.0;
    if (constant) return xi + sgn * speed(xi) * (t - s);
    return rk4_integrate([&](double x) { return sgn * speed(x); }, t, s, xi, opts.max_step);
}

/// Time for the leftward family-j characteristic from (0, x) to reach 0:
/// march until the position crosses, then bisect in time inside the step.
template <typename F>
double transit_impl(int j, double x, F&& speed, bool constant, const FlowOptions& opts) {
    (void)j;
    if (x <= 0.0) return 0.0;
    if (constant) return x / speed(x);
    auto v = [&](double p) { return -speed(p); };
    double h = opts.max_step;
    double t_lo = 0.0, p_lo = x;
    // positions strictly decrease at a rate bounded below, so this terminates
    for (long iter = 0; iter < 100000000L; ++iter) {
        double p_hi = rk4_step(v, p_lo, h);
        if (p_hi <= 0.0) {
            double a = 0.0, b = h;
            double pa = p_lo;
            while (b - a > 1e-15) {
                double mid = 0.5 * (a + b);
                double pm = rk4_step(v, p_lo, mid);
                if (std::abs(pm) <= opts.position_tol) return t_lo + mid;
                if (pm > 0.0) {
                    a = mid;
                    pa = pm;
                } else {
                    b = mid;
                }
            }
            (void)pa;
            return t_lo + 0.5 * (a + b);
        }
        t_lo += h;
        p_lo = p_hi;
    }
    return t_lo;
}

} // namespace

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double tol) {
    if (a == b) return 0.0;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = simpson(a, b, fa, fm, fb);
    return adaptive(f, a, b, fa, fm, fb, whole, tol, 48);
}

double speed_reciprocal_integral(const HyperbolicSystem& sys, int c, double a, double b) {
    const auto& prof = sys.profile(c);
    if (prof.base.is_constant()) return (b - a) / prof.value(0.0);
    return integrate_adaptive([&](double x) { return 1.0 / sys.speed(c, x); }, a, b, 1e-13);
}

double flow(const HyperbolicSystem& sys, int c, double t, double s, double xi,
            const FlowOptions& opts) {
    return flow_impl(sys, c, t, s, xi, ZeroStateSpeed{sys, c}, sys.profile(c).base.is_constant(),
                     opts);
}

double flow_frozen(const HyperbolicSystem& sys, int c, double t, double s, double xi,
                   const StateGrid& frozen, const FlowOptions& opts) {
    bool constant = sys.profile(c).base.is_constant() && !sys.profile(c).has_coupling();
    return flow_impl(sys, c, t, s, xi, FrozenSpeed{sys, frozen, c}, constant, opts);
}

double transit_time(const HyperbolicSystem& sys, int j, double x, const FlowOptions& opts) {
    return transit_impl(j, x, ZeroStateSpeed{sys, j}, sys.profile(j).base.is_constant(), opts);
}

double transit_time_frozen(const HyperbolicSystem& sys, int j, double x, const StateGrid& frozen,
                           const FlowOptions& opts) {
    bool constant = sys.profile(j).base.is_constant() && !sys.profile(j).has_coupling();
    return transit_impl(j, x, FrozenSpeed{sys, frozen, j}, constant, opts);
}

double delay_map(const HyperbolicSystem& sys, int i, int j, double x, const FlowOptions& opts) {
    double tau = transit_time(sys, j, x, opts);
    return flow(sys, i, 0.0, tau, 0.0, opts);
}

double delay_map_frozen(const HyperbolicSystem& sys, int i, int j, double x,
                        const StateGrid& frozen, const FlowOptions& opts) {
    double tau = transit_time_frozen(sys, j, x, frozen, opts);
    return flow_frozen(sys, i, 0.0, tau, 0.0, frozen, opts);
}

TimingData compute_timing(const HyperbolicSystem& sys) {
    TimingData td;
    td.tau.resize(static_cast<std::size_t>(sys.n()));
    for (int c = 0; c < sys.n(); ++c)
        td.tau[static_cast<std::size_t>(c)] = speed_reciprocal_integral(sys, c, 0.0, 1.0);

    const int k = sys.k(), m = sys.m(), n = sys.n();
    double best = 0.0;
    if (m >= k) {
        for (int i = 0; i < k; ++i) best = std::max(best, td.tau[i] + td.tau[m + i]);
        best = std::max(best, td.tau[k]);
    } else {
        for (int c = k; c < n; ++c) best = std::max(best, td.tau[c - m] + td.tau[c]);
    }
    td.t_opt = best;
    return td;
}

} // namespace hypstab
