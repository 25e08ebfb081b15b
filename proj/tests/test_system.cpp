#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hypstab/system.hpp"

using namespace hypstab;

namespace {

SpeedProfile make_profile(std::vector<double> coeffs, std::vector<double> coupling = {}) {
    SpeedProfile p;
    p.base = Polynomial(std::move(coeffs));
    p.state_coupling = std::move(coupling);
    return p;
}

} // namespace

TEST_CASE("speed evaluation with the constant extension") {
    CHECK(evaluate_speed(make_profile({2.0}), 0.3) == doctest::Approx(2.0));
    SpeedProfile affine = make_profile({1.0, 1.0}); // 1 + x
    CHECK(evaluate_speed(affine, -0.5) == doctest::Approx(1.0));
    CHECK(evaluate_speed(affine, 1.7) == doctest::Approx(2.0));
    // constant for x <= 0 and x >= 1
    CHECK(evaluate_speed(affine, -3.0) == evaluate_speed(affine, 0.0));
    CHECK(evaluate_speed(affine, 42.0) == evaluate_speed(affine, 1.0));
}

TEST_CASE("affine state coupling enters the speed") {
    SpeedProfile p = make_profile({1.0}, {0.5, 0.0});
    Eigen::VectorXd y(2);
    y << 0.2, 7.0;
    CHECK(evaluate_speed(p, 0.5, y) == doctest::Approx(1.1));
}

TEST_CASE("validate_system accepts an ordered 1x1 pair") {
    HyperbolicSystem sys(1, 1, {make_profile({1.0}), make_profile({2.0})},
                         LinearCoupling{Eigen::MatrixXd::Constant(1, 1, 0.5)});
    CHECK(validate_system(sys).ok());
}

TEST_CASE("equal negative speeds violate the strict ordering") {
    HyperbolicSystem sys(2, 1,
                         {make_profile({1.0}), make_profile({1.0}), make_profile({2.0})},
                         LinearCoupling{Eigen::MatrixXd::Ones(2, 1)});
    ValidationReport rep = validate_system(sys);
    CHECK_FALSE(rep.ok());
}

TEST_CASE("quasilinear positivity is checked at the state-box corners") {
    // lambda_2(x, y) = 1 + y_1 dips below zero at the corner y_1 = -2
    HyperbolicSystem sys(1, 1, {make_profile({3.0}), make_profile({1.0}, {1.0, 0.0})},
                         LinearCoupling{Eigen::MatrixXd::Constant(1, 1, 0.5)});
    CHECK(validate_system(sys, 0.5).ok());
    ValidationReport rep = validate_system(sys, 2.0);
    CHECK_FALSE(rep.ok());
}

TEST_CASE("signed eigenvalues are strictly increasing in the family index") {
    HyperbolicSystem sys(2, 2,
                         {make_profile({2.0, 0.5}), make_profile({1.0, 0.25}),
                          make_profile({1.0, 0.1}), make_profile({2.0, 1.0})},
                         LinearCoupling{Eigen::MatrixXd::Identity(2, 2)});
    REQUIRE(validate_system(sys).ok());
    for (int p = 0; p <= 1024; ++p) {
        double x = p / 1024.0;
        for (int c = 0; c + 1 < sys.n(); ++c)
            CHECK(sys.signed_speed(c, x) < sys.signed_speed(c + 1, x));
    }
}

TEST_CASE("quadratic boundary map vanishes at the origin exactly") {
    NonlinearCoupling nc;
    nc.linear.resize(1, 2);
    nc.linear << 1.0, 2.0;
    nc.quad = {{QuadraticTerm{1, 1, 1.0}}};
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    CHECK(nc.value(zero)[0] == 0.0);

    Eigen::VectorXd v(2);
    v << 0.19, -0.1;
    CHECK(nc.value(v)[0] == doctest::Approx(0.0).epsilon(1e-14));
    Eigen::MatrixXd J = nc.jacobian(v);
    CHECK(J(0, 0) == doctest::Approx(1.0));
    CHECK(J(0, 1) == doctest::Approx(1.8));
}

TEST_CASE("construction rejects malformed systems") {
    CHECK_THROWS_AS(HyperbolicSystem(0, 1, {}, LinearCoupling{Eigen::MatrixXd::Ones(0, 1)}),
                    ValidationError);
    CHECK_THROWS_AS(HyperbolicSystem(1, 1, {make_profile({1.0})},
                                     LinearCoupling{Eigen::MatrixXd::Ones(1, 1)}),
                    ValidationError);
    CHECK_THROWS_AS(HyperbolicSystem(1, 1, {make_profile({1.0}), make_profile({2.0})},
                                     LinearCoupling{Eigen::MatrixXd::Ones(2, 2)}),
                    ValidationError);
    // quartic base exceeds the cubic restriction
    CHECK_THROWS_AS(HyperbolicSystem(1, 1,
                                     {make_profile({1.0, 0.0, 0.0, 0.0, 1.0}),
                                      make_profile({2.0})},
                                     LinearCoupling{Eigen::MatrixXd::Ones(1, 1)}),
                    ValidationError);
}
