#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "hypstab/characteristics.hpp"

using namespace hypstab;

namespace {

SpeedProfile make_profile(std::vector<double> coeffs) {
    SpeedProfile p;
    p.base = Polynomial(std::move(coeffs));
    return p;
}

/// k = 1, m = 1 with lambda = (1, 2).
HyperbolicSystem constant_sys() {
    return HyperbolicSystem(1, 1, {make_profile({1.0}), make_profile({2.0})},
                            LinearCoupling{Eigen::MatrixXd::Constant(1, 1, 0.5)});
}

/// k = 1, m = 2 with lambda = (1.5 | 1 + x, 2): one x-dependent positive family.
HyperbolicSystem affine_sys() {
    return HyperbolicSystem(1, 2,
                            {make_profile({1.5}), make_profile({1.0, 1.0}),
                             make_profile({2.0})},
                            LinearCoupling{Eigen::MatrixXd::Ones(1, 2)});
}

} // namespace

TEST_CASE("constant-speed flows follow straight characteristics") {
    HyperbolicSystem sys = constant_sys();
    // rightward family: x = xi + (t - s)
    CHECK(flow(sys, 0, 0.7, 0.2, 0.1) == doctest::Approx(0.6).epsilon(1e-12));
    // leftward family at speed 2: x = xi - 2 (t - s)
    CHECK(flow(sys, 1, 0.5, 0.0, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("flow through lambda(x) = 1 + x matches the closed form") {
    HyperbolicSystem sys = affine_sys();
    // leftward: x(t) = (1 + xi) e^{-(t-s)} - 1
    double got = flow(sys, 1, std::log(2.0), 0.0, 1.0);
    CHECK(got == doctest::Approx(0.0).epsilon(1e-10));
    double mid = flow(sys, 1, 0.25, 0.0, 0.5);
    CHECK(mid == doctest::Approx(1.5 * std::exp(-0.25) - 1.0).epsilon(1e-10));
}

TEST_CASE("flow group property over random anchors") {
    HyperbolicSystem sys = affine_sys();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> pos(0.0, 1.0), time(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        int c = trial % 3;
        double r = time(rng), s = time(rng), t = time(rng), xi = pos(rng);
        double direct = flow(sys, c, t, r, xi);
        double chained = flow(sys, c, t, s, flow(sys, c, s, r, xi));
        CHECK(std::abs(direct - chained) <= 1e-8);
    }
}

TEST_CASE("transit times: closed forms and event detection") {
    HyperbolicSystem sys = affine_sys();
    CHECK(transit_time(sys, 2, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(transit_time(sys, 2, 0.0) == doctest::Approx(0.0));
    // integral of dx / (1 + x) over [0, 1]
    CHECK(transit_time(sys, 1, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-8));
}

TEST_CASE("timing: tau by quadrature and the optimal-time branches") {
    SUBCASE("k = m = 1, lambda = (1, 1)") {
        HyperbolicSystem sys(1, 1, {make_profile({1.0}), make_profile({1.0})},
                             LinearCoupling{Eigen::MatrixXd::Ones(1, 1)});
        TimingData td = compute_timing(sys);
        CHECK(td.tau[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(td.tau[1] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(td.t_opt == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("k = 1, m = 2, lambda = (1, 1, 2)") {
        HyperbolicSystem sys(1, 2,
                             {make_profile({1.0}), make_profile({1.0}), make_profile({2.0})},
                             LinearCoupling{Eigen::MatrixXd::Ones(1, 2)});
        TimingData td = compute_timing(sys);
        CHECK(td.tau[2] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(td.t_opt == doctest::Approx(1.5).epsilon(1e-12));
    }
    SUBCASE("k = 2, m = 1, lambda = (2, 1, 1)") {
        HyperbolicSystem sys(2, 1,
                             {make_profile({2.0}), make_profile({1.0}), make_profile({1.0})},
                             LinearCoupling{Eigen::MatrixXd::Ones(2, 1)});
        TimingData td = compute_timing(sys);
        CHECK(td.tau[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(td.t_opt == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("negative-family transit times increase with the index") {
        HyperbolicSystem sys(2, 1,
                             {make_profile({2.0}), make_profile({1.0}), make_profile({1.0})},
                             LinearCoupling{Eigen::MatrixXd::Ones(2, 1)});
        TimingData td = compute_timing(sys);
        CHECK(td.tau[0] < td.tau[1]);
    }
}

TEST_CASE("compute_timing agrees with transit_time at x = 1") {
    HyperbolicSystem sys = affine_sys();
    TimingData td = compute_timing(sys);
    for (int j = sys.k(); j < sys.n(); ++j)
        CHECK(std::abs(transit_time(sys, j, 1.0) - td.tau[static_cast<std::size_t>(j)]) <= 1e-8);
}

TEST_CASE("delay map: constant-speed ratio and the affine oracle") {
    HyperbolicSystem sys = affine_sys();
    SUBCASE("constant pair scales by the speed ratio") {
        HyperbolicSystem cs(1, 2,
                            {make_profile({1.5}), make_profile({1.0}), make_profile({2.0})},
                            LinearCoupling{Eigen::MatrixXd::Ones(1, 2)});
        CHECK(delay_map(cs, 1, 2, 1.0) == doctest::Approx(0.5).epsilon(1e-10));
        CHECK(delay_map(cs, 1, 2, 0.0) == doctest::Approx(0.0));
    }
    SUBCASE("lambda_i = 1 + x against lambda_j = 2: a(1) = e^{1/2} - 1") {
        CHECK(delay_map(sys, 1, 2, 1.0) ==
              doctest::Approx(std::exp(0.5) - 1.0).epsilon(1e-8));
        CHECK(delay_map(sys, 1, 2, 0.0) == doctest::Approx(0.0));
    }
}

TEST_CASE("delay maps are strictly increasing and satisfy the derivative identity") {
    HyperbolicSystem sys = affine_sys();
    const double h = 1e-4;
    double prev = -1.0;
    for (int g = 0; g < 64; ++g) {
        double x = h + (1.0 - 2.0 * h) * g / 63.0;
        double a = delay_map(sys, 1, 2, x);
        CHECK(a > prev);
        prev = a;
        double fd = (delay_map(sys, 1, 2, x + h) - delay_map(sys, 1, 2, x - h)) / (2.0 * h);
        double expected = sys.speed(1, a) / sys.speed(2, x);
        CHECK(std::abs(fd - expected) <= 1e-5 * std::abs(expected));
    }
}

TEST_CASE("backward and forward anchored flows agree at the transit time") {
    // x_i(-tau_j, 0, 0) = x_i(0, tau_j, 0) for the leftward families
    HyperbolicSystem sys = affine_sys();
    TimingData td = compute_timing(sys);
    for (int i = 1; i < 3; ++i)
        for (int j = 1; j < 3; ++j) {
            double tau = td.tau[static_cast<std::size_t>(j)];
            CHECK(flow(sys, i, -tau, 0.0, 0.0) ==
                  doctest::Approx(flow(sys, i, 0.0, tau, 0.0)).epsilon(1e-10));
        }
}

TEST_CASE("frozen-state flows reduce to zero-state flows without coupling") {
    HyperbolicSystem sys = affine_sys();
    StateGrid frozen(3, 51);
    frozen.values.setConstant(0.3);
    CHECK(flow_frozen(sys, 1, 0.4, 0.0, 0.9, frozen) ==
          doctest::Approx(flow(sys, 1, 0.4, 0.0, 0.9)).epsilon(1e-12));
    CHECK(delay_map_frozen(sys, 1, 2, 1.0, frozen) ==
          doctest::Approx(delay_map(sys, 1, 2, 1.0)).epsilon(1e-12));
}

TEST_CASE("adaptive quadrature hits analytic integrals") {
    double v = integrate_adaptive([](double x) { return 1.0 / (1.0 + x); }, 0.0, 1.0);
    CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}
