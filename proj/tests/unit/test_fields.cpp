#include <cmath>

#include "doctest.h"
#include "lamelab/fields.hpp"
#include "lamelab/poly3.hpp"
#include "lamelab/solutions.hpp"

using namespace lamelab;

TEST_SUITE("fields") {

    TEST_CASE("constant and linear displacements carry exact jets") {
        Vec3 c{1.0, -2.0, 0.5};
        DisplacementField u = constant_displacement(c);
        CHECK(norm(u.value({0.3, 0.1, -0.7}) - c) == 0.0);
        CHECK(norm_inf(u.jacobian({0.3, 0.1, -0.7})) == 0.0);

        Mat3 a;
        a(0, 0) = 2.0;
        a(0, 2) = -1.0;
        a(1, 1) = 0.5;
        a(2, 0) = 3.0;
        DisplacementField lin = linear_displacement(a, c);
        Vec3 x{0.4, -0.2, 0.9};
        CHECK(norm(lin.value(x) - (mat_vec(a, x) + c)) < 1e-15);
        CHECK(norm_inf(lin.jacobian(x) - a) == 0.0);
        CHECK(norm_inf(lin.hessians(x)[0]) == 0.0);
    }

    TEST_CASE("add and scale compose jets linearly") {
        DisplacementField u = random_polynomial_displacement(3, 11);
        DisplacementField v = random_polynomial_displacement(3, 12);
        DisplacementField w = add(scale(u, 2.0), v);
        Vec3 x{0.2, 0.5, -0.3};
        CHECK(norm(w.value(x) - (u.value(x) * 2.0 + v.value(x))) < 1e-14);
        CHECK(norm_inf(w.jacobian(x) - (u.jacobian(x) * 2.0 + v.jacobian(x))) < 1e-14);
        CHECK(norm_inf(w.hessians(x)[2] - (u.hessians(x)[2] * 2.0 + v.hessians(x)[2])) < 1e-14);
    }

    TEST_CASE("multiply_scalar expands the product rule exactly") {
        ScalarFieldC2 chi;
        chi.value = [](const Vec3& x) { return std::sin(x.x) * std::cos(x.y); };
        chi.gradient = [](const Vec3& x) {
            return Vec3{std::cos(x.x) * std::cos(x.y), -std::sin(x.x) * std::sin(x.y), 0.0};
        };
        chi.hessian = [](const Vec3& x) {
            Mat3 h;
            h(0, 0) = -std::sin(x.x) * std::cos(x.y);
            h(0, 1) = h(1, 0) = -std::cos(x.x) * std::sin(x.y);
            h(1, 1) = -std::sin(x.x) * std::cos(x.y);
            return h;
        };
        DisplacementField u = random_polynomial_displacement(2, 3);
        DisplacementField cu = multiply_scalar(chi, u);
        std::vector<Vec3> probes = halton_ball_points(BallSpec({}, 1.0), 20);
        DerivativeConsistencyReport rep = derivative_consistency(cu, probes, 1e-5);
        CHECK(rep.max_jacobian_discrepancy < 1e-8);
        CHECK(rep.max_hessian_discrepancy < 1e-4);
    }

    TEST_CASE("wavy coefficients match their formulas and floors") {
        CoefficientPair c = coefficients_wavy();
        Vec3 x{0.7, -0.4, 1.1};
        CHECK(c.mu.value(x) == doctest::Approx(1.0 + 0.2 * std::sin(0.7)).epsilon(1e-15));
        CHECK(c.lambda.value(x) == doctest::Approx(0.5 + 0.1 * (-0.4)).epsilon(1e-15));
        CHECK(c.mu.gradient(x).x == doctest::Approx(0.2 * std::cos(0.7)).epsilon(1e-15));
        CHECK(c.lambda.gradient(x).y == doctest::Approx(0.1).epsilon(1e-15));
        CHECK(c.alpha0 > 0.0);
        CHECK(c.beta0 > 0.0);

        EllipticityReport rep = validate_ellipticity(c, BallSpec({}, 2.0), 2000);
        CHECK(rep.pass);
        CHECK(rep.min_mu >= c.alpha0 - 1e-12);
        CHECK(rep.min_2mu_lambda >= c.beta0 - 1e-12);
        CHECK(rep.samples == 2000);
    }

    TEST_CASE("constant coefficient preconditions") {
        CHECK_THROWS_AS(coefficients_constant(0.0, 1.0), PreconditionError);
        CHECK_THROWS_AS(coefficients_constant(1.0, -2.5), PreconditionError);
        CHECK_NOTHROW(coefficients_constant(1.0, -1.5));
    }

    TEST_CASE("ellipticity validation flags a violated floor") {
        CoefficientPair c =
            coefficients_custom(constant_scalar(0.5), constant_scalar(0.1), 0.8, 0.5);
        EllipticityReport rep = validate_ellipticity(c, BallSpec({}, 1.0), 500);
        CHECK_FALSE(rep.pass);
        CHECK(rep.min_mu == doctest::Approx(0.5));
    }

    TEST_CASE("halton points are deterministic and inside the ball") {
        BallSpec ball({0.5, 0.0, -0.5}, 2.0);
        std::vector<Vec3> a = halton_ball_points(ball, 300);
        std::vector<Vec3> b = halton_ball_points(ball, 300);
        REQUIRE(a.size() == 300);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(norm(a[i] - b[i]) == 0.0);
            CHECK(norm(a[i] - ball.center) <= ball.radius + 1e-12);
        }
    }

    TEST_CASE("derivative consistency accepts exact jets and rejects a wrong jacobian") {
        DisplacementField good = random_polynomial_displacement(3, 5);
        std::vector<Vec3> probes = halton_ball_points(BallSpec({}, 1.0), 25);
        DerivativeConsistencyReport rep = derivative_consistency(good, probes, 1e-5);
        CHECK(rep.max_jacobian_discrepancy < 1e-9);

        DisplacementField bad = good;
        bad.jacobian = [](const Vec3&) { return Mat3{}; };
        DerivativeConsistencyReport rep2 = derivative_consistency(bad, probes, 1e-5);
        CHECK(rep2.max_jacobian_discrepancy > 1e-2);
    }

    TEST_CASE("radial profile field matches its closures") {
        auto g = [](double r) { return r * r; };
        auto dg = [](double r) { return 2.0 * r; };
        auto d2g = [](double) { return 2.0; };
        DisplacementField u = radial_profile_field(g, dg, d2g, {0.0, 1.0, 0.0}, {1.0, 0.0, 0.0});
        Vec3 x{1.0, 0.0, 0.75};
        CHECK(u.value(x).y == doctest::Approx(0.5625).epsilon(1e-14));
        CHECK(u.value(x).x == 0.0);
        std::vector<Vec3> probes{{1.3, 0.2, 0.1}, {0.6, -0.5, 0.4}};
        DerivativeConsistencyReport rep = derivative_consistency(u, probes, 1e-5);
        CHECK(rep.max_jacobian_discrepancy < 1e-8);
        CHECK(rep.max_hessian_discrepancy < 1e-4);
    }

    TEST_CASE("geometry preconditions") {
        CHECK_THROWS_AS(BallSpec({}, 0.0), PreconditionError);
        CHECK_THROWS_AS(AnnulusSpec({}, 0.0, 1.0), PreconditionError);
        CHECK_THROWS_AS(AnnulusSpec({}, 1.0, 0.5), PreconditionError);
        CHECK_THROWS_AS(Grid3({}, 0.0, {4, 4, 4}), PreconditionError);
        CHECK_THROWS_AS(Grid3({}, 0.1, {2, 4, 4}), PreconditionError);
    }
}
