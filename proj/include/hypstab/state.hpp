#ifndef HYPSTAB_STATE_HPP
#define HYPSTAB_STATE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "hypstab/polynomial.hpp"

namespace hypstab {

/// Discretized state w(t, .) on the uniform grid x_p = p / (nx - 1).
struct StateGrid {
    double time = 0.0;
    Eigen::MatrixXd values; // n x nx

    StateGrid() = default;
    StateGrid(int n, int nx) : values(Eigen::MatrixXd::Zero(n, nx)) {}

    int n() const { return static_cast<int>(values.rows()); }
    int nx() const { return static_cast<int>(values.cols()); }
    double dx() const { return 1.0 / (nx() - 1); }
    double x(int p) const { return static_cast<double>(p) / (nx() - 1); }

    /// Linear interpolation of component c at position x, clamped to [0,1].
    double interp(int c, double xq) const {
        const int N = nx() - 1;
        double s = xq * N;
        if (s <= 0.0) return values(c, 0);
        if (s >= static_cast<double>(N)) return values(c, N);
        int p = static_cast<int>(s);
        double f = s - p;
        return (1.0 - f) * values(c, p) + f * values(c, p + 1);
    }

    double max_abs() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }
};

/// Per-component initial data: finite sine series plus an optional polynomial,
/// or raw grid samples.
struct ComponentData {
    std::vector<double> sine; // A_r sin(r pi x), r = 1..size
    Polynomial poly;
    std::vector<double> raw;  // when non-empty, overrides the analytic parts

    bool analytic() const { return raw.empty(); }

    double eval(double x) const {
        if (!raw.empty()) return interp_raw(x);
        double v = poly(x);
        for (std::size_t r = 0; r < sine.size(); ++r)
            v += sine[r] * std::sin((static_cast<double>(r) + 1.0) * M_PI * x);
        return v;
    }

    double eval_derivative(double x) const {
        if (!raw.empty()) return fd_raw(x);
        double v = poly.derivative(x);
        for (std::size_t r = 0; r < sine.size(); ++r) {
            double w = (static_cast<double>(r) + 1.0) * M_PI;
            v += sine[r] * w * std::cos(w * x);
        }
        return v;
    }

    bool operator==(const ComponentData& o) const {
        return sine == o.sine && poly == o.poly && raw == o.raw;
    }

  private:
    double interp_raw(double x) const {
        const int N = static_cast<int>(raw.size()) - 1;
        double s = std::min(std::max(x, 0.0), 1.0) * N;
        int p = std::min(static_cast<int>(s), N - 1);
        double f = s - p;
        return (1.0 - f) * raw[p] + f * raw[p + 1];
    }
    double fd_raw(double x) const {
        double h = 1.0 / (static_cast<double>(raw.size()) - 1.0);
        double a = std::max(0.0, x - h), b = std::min(1.0, x + h);
        return (interp_raw(b) - interp_raw(a)) / (b - a);
    }
};

struct InitialData {
    std::vector<ComponentData> components;

    int n() const { return static_cast<int>(components.size()); }
    bool analytic() const {
        for (const auto& c : components)
            if (!c.analytic()) return false;
        return true;
    }

    double eval(int c, double x) const { return components[static_cast<std::size_t>(c)].eval(x); }
    double eval_derivative(int c, double x) const {
        return components[static_cast<std::size_t>(c)].eval_derivative(x);
    }

    StateGrid sample(int nx) const {
        StateGrid g(n(), nx);
        for (int c = 0; c < n(); ++c)
            for (int p = 0; p < nx; ++p) g.values(c, p) = eval(c, g.x(p));
        return g;
    }

    /// sup |w| + sup |w'| over all components, sampled on a fine grid.
    double c1_norm(int samples = 2048) const {
        double sup = 0.0, sup_d = 0.0;
        for (int c = 0; c < n(); ++c)
            for (int p = 0; p <= samples; ++p) {
                double x = static_cast<double>(p) / samples;
                sup = std::max(sup, std::abs(eval(c, x)));
                sup_d = std::max(sup_d, std::abs(eval_derivative(c, x)));
            }
        return sup + sup_d;
    }

    bool operator==(const InitialData& o) const { return components == o.components; }
};

} // namespace hypstab

#endif
