#ifndef HYPSTAB_CHARACTERISTICS_HPP
#define HYPSTAB_CHARACTERISTICS_HPP

#include <functional>
#include <vector>

#include "hypstab/state.hpp"
#include "hypstab/system.hpp"

namespace hypstab {

struct FlowOptions {
    double max_step = 1e-3;       // RK4 step bound
    double position_tol = 1e-10;  // event detection tolerance
};

/// Transit times tau_c and the optimal stabilization time.
struct TimingData {
    std::vector<double> tau; // one per component
    double t_opt = 0.0;
};

/// Characteristic position x_c(t, s, xi): the family-c trajectory anchored at
/// position xi at time s, evaluated at time t. Families below k move right,
/// the rest move left; speeds are extended constant outside [0,1].
double flow(const HyperbolicSystem& sys, int c, double t, double s, double xi,
            const FlowOptions& opts = {});

/// Same flow with speeds evaluated against a frozen state snapshot.
double flow_frozen(const HyperbolicSystem& sys, int c, double t, double s, double xi,
                   const StateGrid& frozen, const FlowOptions& opts = {});

/// Time for the leftward family-j characteristic from (0, x) to reach x = 0.
double transit_time(const HyperbolicSystem& sys, int j, double x,
                    const FlowOptions& opts = {});
double transit_time_frozen(const HyperbolicSystem& sys, int j, double x,
                           const StateGrid& frozen, const FlowOptions& opts = {});

/// Delay map a_{i,j}(x) = x_i(0, tau(j,x), 0) for positive families i < j.
double delay_map(const HyperbolicSystem& sys, int i, int j, double x,
                 const FlowOptions& opts = {});
double delay_map_frozen(const HyperbolicSystem& sys, int i, int j, double x,
                        const StateGrid& frozen, const FlowOptions& opts = {});

/// Transit times by adaptive quadrature of 1/lambda_c(., 0) and the optimal
/// time from their max formula (branching on m >= k).
TimingData compute_timing(const HyperbolicSystem& sys);

/// Integral of 1/lambda_c(s, 0) over [a, b], to near machine accuracy.
double speed_reciprocal_integral(const HyperbolicSystem& sys, int c, double a, double b);

/// Adaptive Simpson quadrature of an arbitrary integrand.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double tol = 1e-12);

} // namespace hypstab

#endif
