#ifndef HYPSTAB_SYSTEM_HPP
#define HYPSTAB_SYSTEM_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hypstab/errors.hpp"
#include "hypstab/polynomial.hpp"

namespace hypstab {

/// One characteristic speed magnitude: a cubic in x, extended by its boundary
/// values outside [0,1], plus an optional affine coupling to the state vector.
struct SpeedProfile {
    Polynomial base;                    // degree <= 3, positive on [0,1]
    std::vector<double> state_coupling; // empty, or one coefficient per component

    /// lambda(x, 0) with the constant extension outside [0,1].
    double value(double x) const {
        return base(clamp(x));
    }

    /// lambda(x, y): base plus the affine state term.
    double value(double x, const Eigen::VectorXd& y) const {
        double v = base(clamp(x));
        for (std::size_t j = 0; j < state_coupling.size() && j < static_cast<std::size_t>(y.size()); ++j)
            v += state_coupling[j] * y[static_cast<Eigen::Index>(j)];
        return v;
    }

    bool is_constant() const { return base.is_constant() && !has_coupling(); }
    bool has_coupling() const {
        for (double c : state_coupling)
            if (c != 0.0) return true;
        return false;
    }

    static double clamp(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

    bool operator==(const SpeedProfile& o) const {
        return base == o.base && state_coupling == o.state_coupling;
    }
};

/// Linear boundary relation w_-(t,0) = B w_+(t,0).
struct LinearCoupling {
    Eigen::MatrixXd B; // k x m
};

/// One quadratic monomial coeff * v_j * v_l of a boundary map component.
struct QuadraticTerm {
    int j = 0;
    int l = 0;
    double coeff = 0.0;
    bool operator==(const QuadraticTerm& o) const {
        return j == o.j && l == o.l && coeff == o.coeff;
    }
};

/// Quadratic polynomial boundary map with value 0 at the origin.
struct NonlinearCoupling {
    Eigen::MatrixXd linear;                         // k x m, equals the Jacobian at 0
    std::vector<std::vector<QuadraticTerm>> quad;   // per output row

    Eigen::VectorXd value(const Eigen::VectorXd& v) const;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& v) const;
};

using BoundaryCoupling = std::variant<LinearCoupling, NonlinearCoupling>;

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

/// Static problem data: dimensions, ordered speed profiles, boundary coupling.
/// Components 0..k-1 carry negative eigenvalues (rightward transport),
/// components k..k+m-1 positive eigenvalues (leftward transport).
class HyperbolicSystem {
  public:
    HyperbolicSystem(int k, int m, std::vector<SpeedProfile> speeds, BoundaryCoupling coupling);

    int k() const { return k_; }
    int m() const { return m_; }
    int n() const { return k_ + m_; }

    const SpeedProfile& profile(int c) const { return speeds_.at(static_cast<std::size_t>(c)); }
    const std::vector<SpeedProfile>& profiles() const { return speeds_; }

    /// Speed magnitude lambda_c(x, 0).
    double speed(int c, double x) const { return profile(c).value(x); }
    double speed(int c, double x, const Eigen::VectorXd& y) const { return profile(c).value(x, y); }

    /// Signed eigenvalue: -lambda for c < k, +lambda for c >= k.
    double signed_speed(int c, double x) const {
        return c < k_ ? -speed(c, x) : speed(c, x);
    }
    double signed_speed(int c, double x, const Eigen::VectorXd& y) const {
        return c < k_ ? -speed(c, x, y) : speed(c, x, y);
    }

    bool is_quasilinear() const;
    bool has_linear_coupling() const { return std::holds_alternative<LinearCoupling>(coupling_); }
    const BoundaryCoupling& coupling() const { return coupling_; }

    /// Jacobian of the boundary map at the origin (the matrix B of the class test).
    const Eigen::MatrixXd& coupling_matrix_at_zero() const;

    /// Evaluate the x = 0 boundary map on a positive-component trace.
    Eigen::VectorXd boundary_map(const Eigen::VectorXd& w_plus) const;
    Eigen::MatrixXd boundary_jacobian(const Eigen::VectorXd& w_plus) const;

    /// Largest speed magnitude over x in [0,1] and the state box |y|_inf <= y_max.
    double max_speed(double y_max = 0.0) const;

  private:
    int k_;
    int m_;
    std::vector<SpeedProfile> speeds_;
    BoundaryCoupling coupling_;
    mutable Eigen::MatrixXd b_at_zero_;
};

/// lambda(x, y) for a single profile with the constant extension in x.
double evaluate_speed(const SpeedProfile& profile, double x);
double evaluate_speed(const SpeedProfile& profile, double x, const Eigen::VectorXd& y);

/// Sample positivity and strict ordering on a fine grid (and, quasilinear, on
/// the corners of the state box). An empty report means the system is valid.
ValidationReport validate_system(const HyperbolicSystem& sys, double y_max = 0.0,
                                 int grid_points = 1024);

} // namespace hypstab

#endif
