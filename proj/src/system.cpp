#include "hypstab/system.hpp"

#include <cmath>
#include <sstream>

namespace hypstab {

Eigen::VectorXd NonlinearCoupling::value(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out = linear * v;
    for (std::size_t r = 0; r < quad.size(); ++r)
        for (const auto& t : quad[r]) out[static_cast<Eigen::Index>(r)] += t.coeff * v[t.j] * v[t.l];
    return out;
}

Eigen::MatrixXd NonlinearCoupling::jacobian(const Eigen::VectorXd& v) const {
    Eigen::MatrixXd J = linear;
    for (std::size_t r = 0; r < quad.size(); ++r)
        for (const auto& t : quad[r]) {
            J(static_cast<Eigen::Index>(r), t.j) += t.coeff * v[t.l];
            J(static_cast<Eigen::Index>(r), t.l) += t.coeff * v[t.j];
        }
    return J;
}

HyperbolicSystem::HyperbolicSystem(int k, int m, std::vector<SpeedProfile> speeds,
                                   BoundaryCoupling coupling)
    : k_(k), m_(m), speeds_(std::move(speeds)), coupling_(std::move(coupling)) {
    if (k_ < 1 || m_ < 1) throw ValidationError("k >= 1 and m >= 1 are required");
    if (static_cast<int>(speeds_.size()) != n())
        throw ValidationError("expected one speed profile per component");
    for (const auto& s : speeds_) {
        if (s.base.degree() > 3)
            throw ValidationError("speed profiles are restricted to cubics in x");
        if (!s.state_coupling.empty() && static_cast<int>(s.state_coupling.size()) != n())
            throw ValidationError("state coupling must have one coefficient per component");
    }
    const auto& B = coupling_matrix_at_zero();
    if (B.rows() != k_ || B.cols() != m_)
        throw ValidationError("boundary coupling must be k x m");
}

bool HyperbolicSystem::is_quasilinear() const {
    for (const auto& s : speeds_)
        if (s.has_coupling()) return true;
    return false;
}

const Eigen::MatrixXd& HyperbolicSystem::coupling_matrix_at_zero() const {
    if (b_at_zero_.size() == 0) {
        if (const auto* lin = std::get_if<LinearCoupling>(&coupling_))
            b_at_zero_ = lin->B;
        else
            b_at_zero_ = std::get<NonlinearCoupling>(coupling_).linear;
    }
    return b_at_zero_;
}

Eigen::VectorXd HyperbolicSystem::boundary_map(const Eigen::VectorXd& w_plus) const {
    if (const auto* lin = std::get_if<LinearCoupling>(&coupling_)) return lin->B * w_plus;
    return std::get<NonlinearCoupling>(coupling_).value(w_plus);
}

Eigen::MatrixXd HyperbolicSystem::boundary_jacobian(const Eigen::VectorXd& w_plus) const {
    if (const auto* lin = std::get_if<LinearCoupling>(&coupling_)) return lin->B;
    return std::get<NonlinearCoupling>(coupling_).jacobian(w_plus);
}

double HyperbolicSystem::max_speed(double y_max) const {
    double best = 0.0;
    const int samples = 256;
    for (int c = 0; c < n(); ++c) {
        const auto& sp = profile(c);
        for (int p = 0; p <= samples; ++p) {
            double x = static_cast<double>(p) / samples;
            double v = sp.value(x);
            double swing = 0.0;
            for (double cj : sp.state_coupling) swing += std::abs(cj) * y_max;
            best = std::max(best, v + swing);
        }
    }
    return best;
}

double evaluate_speed(const SpeedProfile& profile, double x) { return profile.value(x); }

double evaluate_speed(const SpeedProfile& profile, double x, const Eigen::VectorXd& y) {
    return profile.value(x, y);
}

namespace {

void check_at_state(const HyperbolicSystem& sys, const Eigen::VectorXd* y,
                    const std::string& where, int grid_points,
                    std::vector<std::string>& out) {
    auto speed = [&](int c, double x) {
        return y ? sys.speed(c, x, *y) : sys.speed(c, x);
    };
    for (int p = 0; p < grid_points; ++p) {
        double x = static_cast<double>(p) / (grid_points - 1);
        for (int c = 0; c < sys.n(); ++c) {
            if (!(speed(c, x) > 0.0)) {
                std::ostringstream os;
                os << "component " << c + 1 << ": non-positive speed " << speed(c, x)
                   << " at x=" << x << where;
                out.push_back(os.str());
                return; // one message per state point is enough
            }
        }
        for (int c = 0; c + 1 < sys.n(); ++c) {
            double a = c < sys.k() ? -speed(c, x) : speed(c, x);
            double b = c + 1 < sys.k() ? -speed(c + 1, x) : speed(c + 1, x);
            if (!(a < b)) {
                std::ostringstream os;
                os << "components " << c + 1 << "," << c + 2
                   << ": eigenvalue ordering violated at x=" << x << where;
                out.push_back(os.str());
                return;
            }
        }
    }
}

} // namespace

ValidationReport validate_system(const HyperbolicSystem& sys, double y_max, int grid_points) {
    ValidationReport report;
    check_at_state(sys, nullptr, "", grid_points, report.violations);

    if (sys.is_quasilinear() && y_max > 0.0) {
        const int n = sys.n();
        // corners of |y|_inf <= y_max
        for (long long mask = 0; mask < (1LL << n); ++mask) {
            Eigen::VectorXd y(n);
            for (int j = 0; j < n; ++j) y[j] = (mask >> j & 1) ? y_max : -y_max;
            std::ostringstream os;
            os << " (corner y=[";
            for (int j = 0; j < n; ++j) os << (j ? "," : "") << y[j];
            os << "])";
            check_at_state(sys, &y, os.str(), grid_points, report.violations);
        }
    }

    if (!sys.has_linear_coupling()) {
        const auto& nl = std::get<NonlinearCoupling>(sys.coupling());
        Eigen::VectorXd z = nl.value(Eigen::VectorXd::Zero(sys.m()));
        if (z.cwiseAbs().maxCoeff() != 0.0)
            report.violations.push_back("boundary map does not vanish at 0");
    }
    return report;
}

} // namespace hypstab
