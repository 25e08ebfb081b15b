#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "hypstab/feedback.hpp"

using namespace hypstab;

namespace {

SpeedProfile make_profile(std::vector<double> coeffs) {
    SpeedProfile p;
    p.base = Polynomial(std::move(coeffs));
    return p;
}

HyperbolicSystem sys_1x2() {
    Eigen::MatrixXd B(1, 2);
    B << 1.0, 2.0;
    return HyperbolicSystem(1, 2,
                            {make_profile({1.0}), make_profile({1.0}), make_profile({2.0})},
                            LinearCoupling{B});
}

} // namespace

TEST_CASE("class membership tests the trailing blocks") {
    SUBCASE("identity 2x2 passes (only i = 1 is in range)") {
        ClassBReport rep = check_class_B(Eigen::MatrixXd::Identity(2, 2), 2, 2);
        CHECK(rep.member);
        REQUIRE(rep.per_index.size() == 1);
        CHECK(rep.per_index[0].first == 1);
    }
    SUBCASE("zero trailing entry fails at i = 1") {
        Eigen::MatrixXd B(2, 2);
        B << 1.0, 1.0, 1.0, 0.0;
        CHECK_FALSE(check_class_B(B, 2, 2).member);
    }
    SUBCASE("1x1 is vacuously a member") {
        CHECK(check_class_B(Eigen::MatrixXd::Zero(1, 1), 1, 1).member);
        CHECK(check_class_B(Eigen::MatrixXd::Zero(1, 1), 1, 1).per_index.empty());
    }
}

TEST_CASE("elimination rows for pinned matrices") {
    SUBCASE("k = 1, m = 2, B = [1 2]") {
        Eigen::MatrixXd B(1, 2);
        B << 1.0, 2.0;
        FeedbackLaw law = synthesize_linear(B, 1, 2);
        REQUIRE(law.linear_row(2).size() == 1);
        CHECK(law.linear_row(2)[0] == doctest::Approx(-0.5).epsilon(1e-14));
    }
    SUBCASE("k = 2, m = 2, B = [[1,1],[1,2]]") {
        Eigen::MatrixXd B(2, 2);
        B << 1.0, 1.0, 1.0, 2.0;
        FeedbackLaw law = synthesize_linear(B, 2, 2);
        CHECK(law.linear_row(2).size() == 0); // bottom map is the zero map
        REQUIRE(law.linear_row(3).size() == 1);
        CHECK(law.linear_row(3)[0] == doctest::Approx(-0.5).epsilon(1e-14));

        // imposing the top map clears the coupled row; full vanishing forces
        // the free component to zero since B is invertible
        Eigen::VectorXd v(2);
        v << 0.7, law.eval_map(3, Eigen::VectorXd::Constant(1, 0.7));
        CHECK(std::abs((B * v)[1]) <= 1e-14);
        CHECK(std::abs(B.determinant()) > 1e-12);
    }
    SUBCASE("k = m = 1 keeps the empty map but needs b != 0") {
        FeedbackLaw law = synthesize_linear(Eigen::MatrixXd::Constant(1, 1, 0.8), 1, 1);
        CHECK(law.linear_row(1).size() == 0);
        CHECK_THROWS_AS(synthesize_linear(Eigen::MatrixXd::Zero(1, 1), 1, 1),
                        SingularSubmatrix);
    }
    SUBCASE("m < k synthesizes down to the zero-map convention") {
        Eigen::MatrixXd B(2, 1);
        B << 1.0, 1.0;
        FeedbackLaw law = synthesize_linear(B, 2, 1);
        CHECK(law.ell() == 2);
        CHECK(law.linear_row(2).size() == 0);
    }
}

TEST_CASE("plug-in consistency over random class members") {
    const std::pair<int, int> shapes[] = {{1, 3}, {2, 2}, {2, 3}, {3, 2}};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    for (auto [k, m] : shapes) {
        const int n = k + m, ell = std::max(k, m);
        int accepted = 0;
        while (accepted < 25) {
            Eigen::MatrixXd B(k, m);
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < m; ++j) B(i, j) = uni(rng);
            FeedbackLaw law;
            try {
                law = synthesize_linear(B, k, m);
            } catch (const SingularSubmatrix&) {
                continue;
            }
            ++accepted;
            for (int depth = 1; depth <= n - ell; ++depth) {
                Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
                for (int idx = 0; idx < (n - depth) - k; ++idx) v[idx] = uni(rng);
                for (int c = n - depth; c < n; ++c) v[c - k] = law.eval_map(c, v.head(c - k));
                double resid = (B * v).tail(depth).cwiseAbs().maxCoeff();
                CHECK(resid <= 1e-9 * std::max(1.0, v.cwiseAbs().maxCoeff()));
            }
        }
    }
}

TEST_CASE("nonlinear synthesis") {
    NonlinearCoupling nc;
    nc.linear.resize(1, 2);
    nc.linear << 1.0, 2.0;
    nc.quad = {{QuadraticTerm{1, 1, 1.0}}}; // B(v) = v1 + 2 v2 + v2^2

    SUBCASE("quadratic-formula oracle: root near zero") {
        FeedbackLaw law = synthesize_nonlinear(nc, 1, 2);
        double got = law.eval_map(2, Eigen::VectorXd::Constant(1, 0.19));
        CHECK(got == doctest::Approx(-0.1).epsilon(1e-10)); // -1 + sqrt(1 - 0.19)
    }
    SUBCASE("zero input maps to exactly zero") {
        FeedbackLaw law = synthesize_nonlinear(nc, 1, 2);
        CHECK(law.eval_map(2, Eigen::VectorXd::Zero(1)) == 0.0);
    }
    SUBCASE("a linear map reproduces the elimination entrywise") {
        NonlinearCoupling lin;
        lin.linear.resize(2, 3);
        lin.linear << 0.3, -1.0, 0.7, 0.2, 0.5, 1.1;
        lin.quad.resize(2);
        FeedbackLaw nl = synthesize_nonlinear(lin, 2, 3);
        FeedbackLaw ref = synthesize_linear(lin.linear, 2, 3);
        for (int c = nl.ell(); c < nl.n(); ++c) {
            for (int idx = 0; idx < c - nl.k; ++idx) {
                Eigen::VectorXd e = Eigen::VectorXd::Zero(c - nl.k);
                e[idx] = 1.0;
                CHECK(nl.eval_map(c, e) ==
                      doctest::Approx(ref.linear_row(c)[idx]).epsilon(1e-12));
            }
        }
    }
    SUBCASE("gradient matches a finite difference") {
        FeedbackLaw law = synthesize_nonlinear(nc, 1, 2);
        Eigen::VectorXd v = Eigen::VectorXd::Constant(1, 0.1);
        double h = 1e-7;
        double fd = (law.eval_map(2, Eigen::VectorXd::Constant(1, 0.1 + h)) -
                     law.eval_map(2, Eigen::VectorXd::Constant(1, 0.1 - h))) /
                    (2.0 * h);
        CHECK(law.map_gradient(2, v)[0] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("ramps: endpoint conditions and the C1 junction") {
    SUBCASE("gate ramp halves at the quarter point") {
        Ramp eta = Ramp::hermite(1.0, 0.0, 0.5); // delta = 1
        CHECK(eta.value(0.0) == doctest::Approx(1.0));
        CHECK(eta.derivative(0.0) == doctest::Approx(0.0));
        CHECK(eta.value(0.25) == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(eta.value(0.5) == 0.0);
        CHECK(eta.value(7.0) == 0.0);
    }
    SUBCASE("one-sided derivatives agree at the junction") {
        Ramp r = Ramp::hermite(0.3, -1.2, 0.37);
        double h = 1e-7;
        double left = (r.value(r.t_end - h) - r.value(r.t_end - 2.0 * h)) / h;
        CHECK(std::abs(left) <= 1e-5);           // slope tends to zero
        CHECK(r.derivative(r.t_end) == 0.0);     // right branch
        double vleft = r.value(r.t_end - 1e-9);
        CHECK(std::abs(vleft) <= 1e-10);         // value continuous
    }
    SUBCASE("build_ramps matches the initial trace at x = 1") {
        HyperbolicSystem sys = sys_1x2();
        StateGrid w0(3, 101);
        for (int p = 0; p < 101; ++p) {
            double x = p / 100.0;
            w0.values(1, p) = x * x;         // value 1, slope 2 at x = 1
            w0.values(2, p) = 0.0;
        }
        auto ramps = build_ramps(w0, sys, 0.4);
        REQUIRE(ramps.size() == 2);
        CHECK(ramps[0].zeta.value(0.0) == doctest::Approx(1.0));
        // d/dt w(t,1) at t = 0 is lambda * dw/dx = 1 * 2
        CHECK(ramps[0].zeta.derivative(0.0) == doctest::Approx(2.0).epsilon(1e-3));
        CHECK(ramps[1].zeta.value(0.0) == 0.0);
        CHECK(ramps[1].zeta.value(0.1) == 0.0); // zero data keeps a zero ramp
        CHECK(ramps[0].eta.value(0.0) == doctest::Approx(1.0));
    }
}

TEST_CASE("compatibility residuals at x = 0") {
    HyperbolicSystem sys = sys_1x2();
    StateGrid w0(3, 101);

    SUBCASE("zero data is compatible") {
        CompatibilityReport rep = check_compatibility(w0, sys);
        CHECK(rep.max_order0() == 0.0);
        CHECK(rep.max_order1() == 0.0);
    }
    SUBCASE("projected data satisfies order zero by construction") {
        for (int p = 0; p < 101; ++p) {
            double x = p / 100.0;
            w0.values(1, p) = 0.3 + x;
            w0.values(2, p) = -0.1 + 0.5 * x;
        }
        for (int p = 0; p < 101; ++p)
            w0.values(0, p) = 0.0;
        Eigen::VectorXd wplus = w0.values.col(0).tail(2);
        w0.values(0, 0) = (sys.coupling_matrix_at_zero() * wplus)[0];
        CompatibilityReport rep = check_compatibility(w0, sys);
        CHECK(rep.max_order0() <= 1e-14);
    }
    SUBCASE("an order-zero defect is reported verbatim") {
        w0.values(0, 0) = 0.1;
        CompatibilityReport rep = check_compatibility(w0, sys);
        CHECK(rep.max_order0() == doctest::Approx(0.1));
    }
}

TEST_CASE("boundary closure") {
    SUBCASE("k = m = 1: the control is identically zero") {
        HyperbolicSystem sys(1, 1, {make_profile({1.0}), make_profile({1.0})},
                             LinearCoupling{Eigen::MatrixXd::Constant(1, 1, 0.8)});
        FeedbackLaw law = synthesize_linear(sys.coupling_matrix_at_zero(), 1, 1);
        law.attach_sample_positions(sys);
        ClosureEvaluator closure(sys, law, ClosureOptions{});
        StateGrid state(2, 51);
        state.values.setRandom();
        Eigen::VectorXd c = closure.evaluate(0.7, state);
        CHECK(c[0] == 0.0);
    }
    SUBCASE("k = 1, m = 2: reads the slower family at the delay position") {
        HyperbolicSystem sys = sys_1x2();
        FeedbackLaw law = synthesize_linear(sys.coupling_matrix_at_zero(), 1, 2);
        law.attach_sample_positions(sys);
        CHECK(law.sample_positions(2)[0] == doctest::Approx(0.5).epsilon(1e-10));

        ClosureEvaluator closure(sys, law, ClosureOptions{});
        StateGrid state(3, 201);
        for (int p = 0; p < 201; ++p) state.values(1, p) = std::sin(M_PI * state.x(p));
        Eigen::VectorXd c = closure.evaluate(0.0, state);
        CHECK(c[0] == 0.0); // uncontrolled slot
        CHECK(c[1] == doctest::Approx(-0.5 * std::sin(M_PI * 0.5)).epsilon(1e-9));
    }
    SUBCASE("ramped closure on the zero state vanishes after delta/2") {
        HyperbolicSystem sys = sys_1x2();
        FeedbackLaw law = synthesize_linear(sys.coupling_matrix_at_zero(), 1, 2);
        law.mode = FeedbackMode::Nonlinear;
        law.attach_sample_positions(sys);
        StateGrid w0(3, 101);
        law.attach_ramps(build_ramps(w0, sys, 0.2), 0.2);

        ClosureOptions opts;
        opts.mode = FeedbackMode::Nonlinear;
        opts.sampling = SamplingMode::Frozen;
        ClosureEvaluator closure(sys, law, opts);
        StateGrid state(3, 101);
        Eigen::VectorXd c = closure.evaluate(0.5, state);
        CHECK(c[0] == 0.0);
        CHECK(c[1] == 0.0);
    }
}
