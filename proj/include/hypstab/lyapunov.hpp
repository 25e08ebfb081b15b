#ifndef HYPSTAB_LYAPUNOV_HPP
#define HYPSTAB_LYAPUNOV_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "hypstab/feedback.hpp"
#include "hypstab/solver.hpp"
#include "hypstab/state.hpp"
#include "hypstab/system.hpp"

namespace hypstab {

/// Exponential weights p_c sampled on the solver grid, plus the parameters
/// they were built from.
struct LyapunovWeights {
    double q = 1.0;
    double rate = 1.0;  // the decay parameter Lambda
    double gamma = 1.0;
    Eigen::MatrixXd p;  // n x nx samples

    double at(int c, double x) const; // linear interpolation between samples
};

/// Weights from the closed-form exponentials of the reciprocal-speed
/// integrals; exact for constant speeds, quadrature-built otherwise.
LyapunovWeights build_weights(const HyperbolicSystem& sys, double q, double rate,
                              double gamma, int nx);

/// Max residual of (lambda_c p_c)(b) - (lambda_c p_c)(a) = -/+ q Lambda
/// Int_a^b p_c over adjacent grid nodes, relative to max |lambda p|.
double weight_identity_residual(const HyperbolicSystem& sys, const LyapunovWeights& w);

/// Smallest power of two making the boundary defect sum dominate the coupled
/// rows at x = 0, sampled over random traces. Throws CalibrationFailed above
/// the 2^40 cap.
double calibrate_gamma(const HyperbolicSystem& sys, const FeedbackLaw& law,
                       std::uint64_t seed = 2024, int samples = 512);

/// Evaluates the weighted functional (and its unweighted norm analog) on
/// states, with the interior sampling positions cached on the grid.
class LyapunovEvaluator {
  public:
    LyapunovEvaluator(const HyperbolicSystem& sys, const FeedbackLaw& law,
                      LyapunovWeights weights, int nx);

    /// Weighted component-plus-defect integral (the linear functional; the
    /// quasilinear variant refreshes the delay maps from the state).
    double value(const StateGrid& state) const;

    /// C1 part: the same quadrature applied to the time-derivative field and
    /// the time-differentiated defects. Caches the previous call's sampling
    /// positions to difference them in time.
    double value_c1(const StateGrid& state);

    /// Weighted functional in quasilinear mode: value + value_c1.
    double total(const StateGrid& state);

    /// Defect field T_c(x_p) for one defect slot, for diagnostics.
    Eigen::VectorXd defect_field(const StateGrid& state, int c) const;

    const LyapunovWeights& weights() const { return weights_; }
    bool quasilinear() const { return quasilinear_; }
    void reset_history() { have_prev_ = false; }

  private:
    // per defect slot: rows = sampled families, cols = grid nodes
    std::vector<Eigen::MatrixXd> position_grid(const StateGrid& state) const;
    double value_impl(const StateGrid& state,
                      const std::vector<Eigen::MatrixXd>& positions) const;
    double c1_impl(const StateGrid& state, const std::vector<Eigen::MatrixXd>& positions);

    const HyperbolicSystem& sys_;
    const FeedbackLaw& law_;
    LyapunovWeights weights_;
    int nx_;
    bool quasilinear_ = false;
    std::vector<Eigen::MatrixXd> static_positions_;
    // previous-call sampling positions for the d/dt a finite difference
    bool have_prev_ = false;
    double prev_time_ = 0.0;
    std::vector<Eigen::MatrixXd> prev_positions_;
};

/// Unweighted norm analog built on the delay maps of the law.
double vnorm(const StateGrid& state, const HyperbolicSystem& sys, const FeedbackLaw& law,
             double q);

/// Same structure with arbitrary admissible reparametrizations b_{r,c} in
/// place of the delay maps; used for the norm-equivalence checks.
using BMap = std::function<double(int r, int c, double x)>;
double triple_norm(const StateGrid& state, const FeedbackLaw& law, const BMap& b, double q);

struct DecayReport {
    bool pass = true;
    double worst_margin = 0.0; // most positive violation of the per-step bound
    int violations = 0;
    int steps_checked = 0;
};

/// Per-step check V(t_{n+1}) <= V(t_n) e^{-q Lambda dt} (1 + tol) while V
/// stays above floor_rel * V(0); slack shrinks the required rate for the
/// quasilinear runs.
DecayReport verify_decay(const std::vector<std::pair<double, double>>& series, double q,
                         double rate, double tol_disc, double floor_rel = 1e-12,
                         double slack = 0.0, double t_min = 0.0);

/// Fitted envelope constant: max over the trace of
/// ||w(t)||_q / (e^{rate (t_opt - t)} ||w0||_q).
double envelope_constant(const std::vector<std::pair<double, double>>& lq_series,
                         double rate, double t_opt);

} // namespace hypstab

#endif
