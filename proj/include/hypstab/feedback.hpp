#ifndef HYPSTAB_FEEDBACK_HPP
#define HYPSTAB_FEEDBACK_HPP

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "hypstab/characteristics.hpp"
#include "hypstab/state.hpp"
#include "hypstab/system.hpp"

namespace hypstab {

/// Per-index result of the trailing-submatrix invertibility test.
struct ClassBReport {
    bool member = true;
    std::vector<std::pair<int, bool>> per_index; // (i, invertible) for tested i
};

/// Membership test for the admissible matrix class: the trailing i x i block
/// must be invertible for 1 <= i <= min(m-1, k). An empty range passes.
ClassBReport check_class_B(const Eigen::MatrixXd& B, int k, int m);

/// C1 cubic ramp on [0, t_end], identically zero afterwards.
struct Ramp {
    double t_end = 0.0;
    double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;

    static Ramp hermite(double v0, double d0, double t_end);

    double value(double t) const {
        if (t >= t_end || t_end <= 0.0) return 0.0;
        return ((c3 * t + c2) * t + c1) * t + c0;
    }
    double derivative(double t) const {
        if (t >= t_end || t_end <= 0.0) return 0.0;
        return (3.0 * c3 * t + 2.0 * c2) * t + c1;
    }
};

/// Value ramp (blends the initial boundary trace to zero) and gate ramp
/// (blends the stabilizing feedback in), one pair per controlled component.
struct RampPair {
    Ramp zeta;
    Ramp eta;
};

enum class FeedbackMode { Linear, Nonlinear };
enum class SamplingMode { LocalCauchy, Frozen };

/// Synthesized boundary feedback: one map per defect slot c in [max(m,k), n),
/// expressing component c at x = 1 through slower positive components. The
/// bottom map is empty (identically zero) whenever m <= k.
class FeedbackLaw {
  public:
    int k = 0;
    int m = 0;
    FeedbackMode mode = FeedbackMode::Linear;

    int n() const { return k + m; }
    int ell() const { return std::max(m, k); }
    bool is_defect_slot(int c) const { return c >= ell() && c < n(); }
    int args_count(int c) const { return c - k; }

    /// Row of the linear map (or the linearization at 0) for a defect slot.
    const Eigen::RowVectorXd& linear_row(int c) const;

    /// Evaluate the map for defect slot c; exact zero on zero input.
    double eval_map(int c, const Eigen::VectorXd& args) const;

    /// Gradient of the map at the given arguments (implicit-function row in
    /// the nonlinear case).
    Eigen::RowVectorXd map_gradient(int c, const Eigen::VectorXd& args) const;

    /// Interior sampling positions a_{r,c}(1) for each defect slot (linear case).
    void attach_sample_positions(const HyperbolicSystem& sys, const FlowOptions& opts = {});
    bool has_sample_positions() const { return !sample_positions_.empty(); }
    const std::vector<double>& sample_positions(int c) const;

    void attach_ramps(std::vector<RampPair> ramps, double delta);
    bool has_ramps() const { return !ramps_.empty(); }
    double delta() const { return delta_; }
    const RampPair& ramp(int c) const; // c in [k, n)

    const std::optional<NonlinearCoupling>& nonlinear_coupling() const { return coupling_; }

    // populated by the synthesis routines
    std::vector<Eigen::RowVectorXd> rows;            // per defect slot, size c - k
    std::vector<int> checked_invertibility_indices;  // which trailing blocks were required

  private:
    friend FeedbackLaw synthesize_linear(const Eigen::MatrixXd&, int, int);
    friend FeedbackLaw synthesize_nonlinear(const NonlinearCoupling&, int, int);

    std::vector<std::vector<double>> sample_positions_; // per defect slot
    std::vector<RampPair> ramps_;                       // per positive component
    double delta_ = 0.0;
    std::optional<NonlinearCoupling> coupling_;
};

/// Gaussian elimination on the trailing rows of B. Requires the trailing
/// blocks invertible up to min(m, k) when m >= k (the full block is what makes
/// imposing every map force all coupled rows to vanish), up to m-1 otherwise.
FeedbackLaw synthesize_linear(const Eigen::MatrixXd& B, int k, int m);

/// Nonlinear maps evaluated on demand by a damped Newton solve of the trailing
/// rows, started from the linearization at 0.
FeedbackLaw synthesize_nonlinear(const NonlinearCoupling& coupling, int k, int m);

/// Ramps matching the initial boundary trace at x = 1 over [0, delta/2].
std::vector<RampPair> build_ramps(const StateGrid& w0, const HyperbolicSystem& sys, double delta);

struct CompatibilityReport {
    Eigen::VectorXd order0; // w_-(0,0) - B(w_+(0,0))
    Eigen::VectorXd order1; // first-order mismatch at x = 0
    double max_order0() const { return order0.size() ? order0.cwiseAbs().maxCoeff() : 0.0; }
    double max_order1() const { return order1.size() ? order1.cwiseAbs().maxCoeff() : 0.0; }
    bool pass(double tol) const { return max_order0() <= tol && max_order1() <= tol; }
};

/// Order-0 and order-1 compatibility residuals of initial data at x = 0,
/// with one-sided second-order differences on the grid.
CompatibilityReport check_compatibility(const StateGrid& w0, const HyperbolicSystem& sys);

/// Advances a private state copy: interior upwind sweep plus the x = 0
/// relation; the x = 1 inflow nodes are left for the caller to impose.
using InteriorStepFn = std::function<void(StateGrid&, double dt)>;

struct ClosureOptions {
    FeedbackMode mode = FeedbackMode::Linear;
    SamplingMode sampling = SamplingMode::LocalCauchy;
    FlowOptions flow;
};

/// Evaluates the m control values at x = 1 from the current state. Linear mode
/// reads the cached sampling positions; nonlinear mode traces characteristics
/// through the frozen snapshot or through a privately advanced copy.
class ClosureEvaluator {
  public:
    ClosureEvaluator(const HyperbolicSystem& sys, const FeedbackLaw& law, ClosureOptions opts);

    /// Required for local-Cauchy sampling: dt is the private advance step.
    void set_private_stepper(InteriorStepFn step, double dt);

    /// Control values for components k..n-1, in component order.
    Eigen::VectorXd evaluate(double t, const StateGrid& state);

  private:
    Eigen::VectorXd sampled_args(int c, double t, const StateGrid& state,
                                 const std::vector<StateGrid>& history) const;
    std::vector<StateGrid> advance_private(const StateGrid& state, double horizon);

    const HyperbolicSystem& sys_;
    const FeedbackLaw& law_;
    ClosureOptions opts_;
    InteriorStepFn private_step_;
    double private_dt_ = 0.0;
};

} // namespace hypstab

#endif
