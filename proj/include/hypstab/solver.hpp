#ifndef HYPSTAB_SOLVER_HPP
#define HYPSTAB_SOLVER_HPP

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "hypstab/feedback.hpp"
#include "hypstab/state.hpp"
#include "hypstab/system.hpp"

namespace hypstab {

enum class SolverMode { Upwind, ExactAdvection };

struct TraceRow {
    double t = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
    double lq = 0.0;
    double linf = 0.0;
    double lyapunov = 0.0;
    double vnorm = 0.0;
};

struct SimulationTrace {
    std::vector<TraceRow> rows;
    std::vector<std::pair<double, StateGrid>> snapshots;
    std::vector<std::pair<double, Eigen::VectorXd>> controls; // x = 1 values per record time
};

/// Optional evaluators recorded alongside the norms.
struct TraceHooks {
    std::function<double(const StateGrid&)> lyapunov;
    std::function<double(const StateGrid&)> vnorm;
};

struct SimOptions {
    int nx = 201;
    double cfl = 0.9;
    SolverMode mode = SolverMode::Upwind;
    SamplingMode sampling = SamplingMode::LocalCauchy;
    double q = 2.0;            // exponent of the lq trace column
    double record_every = 0.0; // 0 records every step
    std::vector<double> snapshot_times;
    double blowup_threshold = 1e6;
    double y_max = 1.0;        // state box radius used for the fixed step size
};

/// Vector L^q norm (composite trapezoid across components) and sup norm.
double lq_norm(const StateGrid& state, double q);
double linf_norm(const StateGrid& state);

/// Upwind-biased d_t w = -/+ lambda d_x w with second-order one-sided stencils
/// at the nodes that lack upwind data.
Eigen::MatrixXd time_derivative_field(const StateGrid& state, const HyperbolicSystem& sys);

/// First-order upwind closed-loop stepper for x- and state-dependent speeds.
class ClosedLoopSolver {
  public:
    ClosedLoopSolver(const HyperbolicSystem& sys, const FeedbackLaw& law, SimOptions opts);

    double default_dt() const { return dt_; }
    StateGrid initial_state(const InitialData& w0) const { return w0.sample(opts_.nx); }

    /// Advance by dt: interior sweep, then feedback at x = 1 and the boundary
    /// relation at x = 0, both at the new time. Throws CFLViolation.
    void step(StateGrid& state, double dt);

    SimulationTrace simulate(const InitialData& w0, double horizon,
                             const TraceHooks& hooks = {});

    Eigen::VectorXd controls(double t, const StateGrid& state) { return closure_->evaluate(t, state); }
    const SimOptions& options() const { return opts_; }

  private:
    void interior_sweep(StateGrid& state, double dt) const;

    const HyperbolicSystem& sys_;
    const FeedbackLaw& law_;
    SimOptions opts_;
    double dt_ = 0.0;
    double max_speed_box_ = 0.0;
    std::unique_ptr<ClosureEvaluator> closure_;
};

/// Exact method-of-characteristics evaluator for constant speeds with linear
/// coupling and linear feedback; every value resolves recursively to initial
/// data through the boundary relations, so transport carries no grid error.
class ExactLinearEvaluator {
  public:
    ExactLinearEvaluator(const HyperbolicSystem& sys, const FeedbackLaw& law,
                         const InitialData& w0);

    double component(int c, double t, double x) const;
    void fill(StateGrid& g, double t) const;
    Eigen::VectorXd boundary_controls(double t) const;

  private:
    double boundary_value(int c, double t) const; // at the inflow end of family c

    const HyperbolicSystem& sys_;
    const FeedbackLaw& law_;
    const InitialData& w0_;
    std::vector<double> lambda_;                    // constant speeds
    std::vector<std::vector<double>> sample_pos_;   // a_{r,c}(1) per defect slot
    // boundary values memoized per component on the exact time bits
    mutable std::vector<std::unordered_map<long long, double>> memo_;
};

/// Run the closed loop in the requested mode and record the trace.
SimulationTrace simulate(const HyperbolicSystem& sys, const FeedbackLaw& law,
                         const InitialData& w0, double horizon, const SimOptions& opts,
                         const TraceHooks& hooks = {});

} // namespace hypstab

#endif
