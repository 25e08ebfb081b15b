#ifndef HYPSTAB_SCENARIO_HPP
#define HYPSTAB_SCENARIO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hypstab/feedback.hpp"
#include "hypstab/lyapunov.hpp"
#include "hypstab/solver.hpp"
#include "hypstab/state.hpp"
#include "hypstab/system.hpp"

namespace hypstab {

struct LyapunovParams {
    std::vector<double> q{1.0};
    std::vector<double> rate{1.0}; // Lambda sweep values
    bool gamma_auto = true;
    double gamma = 1.0;

    bool operator==(const LyapunovParams& o) const {
        return q == o.q && rate == o.rate && gamma_auto == o.gamma_auto &&
               (gamma_auto || gamma == o.gamma);
    }
};

/// Fully resolved run description: system, data, feedback mode, numerics,
/// functional parameters, horizon and outputs.
struct Scenario {
    int k = 1;
    int m = 1;
    std::vector<SpeedProfile> speeds;
    BoundaryCoupling coupling = LinearCoupling{Eigen::MatrixXd::Zero(1, 1)};
    InitialData initial;

    FeedbackMode feedback = FeedbackMode::Linear;
    SamplingMode sampling = SamplingMode::LocalCauchy;
    int nx = 201;
    double cfl = 0.9;
    SolverMode solver = SolverMode::Upwind;
    LyapunovParams lyapunov;
    double horizon = 1.0;
    double delta = 0.0;      // T - T_opt margin for ramped feedback
    double y_max = 1.0;
    double tol_compat = 1e-8;
    double record_every = 0.0;
    std::string output_dir = "out";
    std::uint64_t seed = 1;

    HyperbolicSystem make_system() const { return HyperbolicSystem(k, m, speeds, coupling); }

    /// Synthesize the feedback and attach sampling positions (and ramps, when
    /// the feedback is ramped) for this scenario's numerics.
    FeedbackLaw make_law(const HyperbolicSystem& sys) const;

    SimOptions sim_options() const;

    bool operator==(const Scenario& o) const;
};

/// Parse a scenario file; collects every schema defect with line context
/// before throwing SchemaError.
Scenario parse_scenario(const std::string& path);
Scenario parse_scenario_text(const std::string& text, const std::string& origin = "<text>");

/// Inverse of parsing, up to formatting: parse(serialize(s)) == s.
std::string serialize_scenario(const Scenario& s);

/// Trace and snapshot writers with locale-independent formatting, so repeated
/// runs are byte-identical.
void write_trace_csv(const std::string& path, const SimulationTrace& trace);
void write_snapshot_csv(const std::string& path, const StateGrid& state);

/// Output directory resolution: scenario value unless HYPSTAB_OUTPUT_DIR is set.
std::string resolve_output_dir(const Scenario& s);

/// One simulation cell with the Lyapunov and norm hooks wired for (q, rate,
/// gamma); the functional column is the two-part total on quasilinear systems.
SimulationTrace run_with_lyapunov(const HyperbolicSystem& sys, const FeedbackLaw& law,
                                  const Scenario& s, double q, double rate, double gamma,
                                  int nx, SolverMode mode,
                                  std::vector<double> snapshot_times = {});

} // namespace hypstab

#endif
