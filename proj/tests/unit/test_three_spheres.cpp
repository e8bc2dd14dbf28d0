#include <cmath>
#include <random>

#include "chain_oracle.hpp"
#include "doctest.h"
#include "lamelab/solutions.hpp"
#include "lamelab/three_spheres.hpp"

using namespace lamelab;

namespace {

DisplacementField grad_xyz() {
    return harmonic_gradient_field(HarmonicGradient{Poly3::monomial(1, 1, 1)});
}

} // namespace

TEST_SUITE("three_spheres") {

    TEST_CASE("radii preconditions") {
        CHECK_THROWS_AS(ThreeRadii(0.5, 0.25, 1.0), PreconditionError);
        CHECK_THROWS_AS(ThreeRadii(0.0, 0.5, 1.0), PreconditionError);
        CHECK_THROWS_AS(ThreeRadii(0.25, 0.5, 0.5), PreconditionError);
    }

    TEST_CASE("homogeneous field sigma_star matches the log-ratio formula") {
        // masses of a degree-k homogeneous field scale like r^(2k+3), so
        // sigma_star = ln(n2/nR) / ln(n1/nR) independently of k
        ProductBallRule rule(6, 8, 16);
        ThreeRadii radii(0.2, 0.45, 1.0);
        double expect = std::log(0.45) / std::log(0.2);
        ThreeSpheresReport rep = verify_three_spheres(grad_xyz(), radii, rule);
        REQUIRE_FALSE(rep.degenerate);
        CHECK(rep.sigma_star == doctest::Approx(expect).epsilon(1e-9));

        Mat3 a;
        a(0, 0) = 1.0;
        a(1, 2) = -2.0;
        ThreeSpheresReport lin = verify_three_spheres(linear_displacement(a, {}), radii, rule);
        CHECK(lin.sigma_star == doctest::Approx(expect).epsilon(1e-9));
    }

    TEST_CASE("geometric radii make the middle mass the exact geometric mean") {
        ProductBallRule rule(5, 8, 16);
        ThreeSpheresReport rep =
            verify_three_spheres(grad_xyz(), ThreeRadii(0.25, 0.5, 1.0), rule);
        REQUIRE_FALSE(rep.degenerate);
        CHECK(std::fabs(rep.sigma_star - 0.5) < 1e-6);
        CHECK(std::fabs(rep.n2 * rep.n2 / (rep.n1 * rep.nR) - 1.0) < 1e-8);
    }

    TEST_CASE("zero field degenerates") {
        ThreeSpheresReport rep = verify_three_spheres(zero_displacement(),
                                                      ThreeRadii(0.25, 0.5, 1.0),
                                                      ProductBallRule(4, 4, 8));
        CHECK(rep.degenerate);
    }

    TEST_CASE("sigma envelope normalizes to C = 1 at the minimal admissible exponent") {
        std::mt19937_64 rng(3);
        auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1p-53; };
        std::vector<ThreeSpheresReport> reports;
        ProductBallRule rule(6, 8, 16);
        for (int i = 0; i < 5; ++i) {
            KelvinSource src;
            double r = 1.2 + 1.5 * unit();
            double cphi = 2.0 * unit() - 1.0;
            double az = 6.283185307179586 * unit();
            double sphi = std::sqrt(std::max(0.0, 1.0 - cphi * cphi));
            src.source_point = {r * sphi * std::cos(az), r * sphi * std::sin(az), r * cphi};
            reports.push_back(
                verify_three_spheres(kelvin_field(src), ThreeRadii(0.25, 0.5, 1.0), rule));
            REQUIRE_FALSE(reports.back().degenerate);
        }
        SigmaCurve curve = fit_sigma_c(reports);
        CHECK(std::fabs(curve.c_at_min_sigma - 1.0) < 1e-10);
        CHECK(curve.min_sigma_star > 0.0);
        CHECK(curve.min_sigma_star < 1.0);
        double prev = 0.0;
        bool monotone = true;
        for (const SigmaCurvePoint& p : curve.points) {
            if (p.sigma >= curve.min_sigma_star) {
                if (p.c < prev - 1e-12) monotone = false;
                prev = p.c;
            }
        }
        CHECK(monotone);
    }

    TEST_CASE("sigma envelope rejects empty input") {
        std::vector<ThreeSpheresReport> all_degenerate(2);
        CHECK_THROWS_AS(fit_sigma_c(all_degenerate), PreconditionError);
        CHECK_THROWS_AS(fit_sigma_c({}, 0), PreconditionError);
    }

    TEST_CASE("worked iteration plan hits the pinned arithmetic") {
        IterationPlan plan = iteration_plan(0.1, 0.5, 1.0, 0.5, 1.0);
        CHECK(plan.theta == 2.0 / 3.0);
        CHECK(plan.n == 21);
        CHECK(plan.sigma == std::pow(2.0, -21));
        CHECK(plan.eta == doctest::Approx(std::exp(22.0 / 21.0)).epsilon(1e-14));
        CHECK(plan.theta1 == doctest::Approx(0.827120393).epsilon(1e-8));
        CHECK(plan.a == doctest::Approx(1.12034029).epsilon(1e-8));
        CHECK(plan.inv_ln_a == doctest::Approx(8.80030123).epsilon(1e-8));
        CHECK(plan.r == 0.05);
        // bracket: r a^(N-1) < r2 <= r a^N
        CHECK(plan.r * std::pow(plan.a, plan.n - 1) < 0.5);
        CHECK(0.5 <= plan.r * std::pow(plan.a, plan.n) * (1.0 + 1e-15));
    }

    TEST_CASE("random admissible inputs satisfy the plan invariants") {
        std::mt19937_64 rng(11);
        auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1p-53; };
        for (int trial = 0; trial < 1000; ++trial) {
            double r_out = 0.5 + 2.0 * unit();
            double r2 = r_out * (0.15 + 0.7 * unit());
            double r1 = r2 * (0.05 + 0.4 * unit());
            double eps = 0.05 + 0.9 * unit();
            double s = 0.25 + 3.0 * unit();
            IterationPlan p = iteration_plan(r1, r2, r_out, eps, s);
            CHECK(p.theta > r2);
            CHECK(p.theta < r_out);
            CHECK(p.theta1 > p.theta);
            CHECK(p.theta1 < r_out);
            CHECK(p.theta2 == doctest::Approx(0.5 * (p.theta + p.theta1)).epsilon(1e-15));
            CHECK(p.a > 1.0);
            CHECK(p.n >= 1);
            CHECK(p.r == doctest::Approx(0.5 * r1).epsilon(1e-15));
            CHECK(p.r * std::pow(p.a, p.n - 1) < r2 * (1.0 + 1e-12));
            CHECK(r2 <= p.r * std::pow(p.a, p.n) * (1.0 + 1e-12));
            CHECK(p.sigma == doctest::Approx(std::pow(eps, p.n)).epsilon(1e-14));
            CHECK(p.sigma > 0.0);
            CHECK(p.sigma < 1.0);
            CHECK(p.eta > 2.0);
            CHECK(p.inv_ln_a == doctest::Approx(1.0 / std::log(p.a)).epsilon(1e-14));
        }
    }

    TEST_CASE("plan preconditions") {
        CHECK_THROWS_AS(iteration_plan(0.5, 0.5, 1.0, 0.5, 1.0), PreconditionError);
        CHECK_THROWS_AS(iteration_plan(0.1, 0.5, 0.4, 0.5, 1.0), PreconditionError);
        CHECK_THROWS_AS(iteration_plan(0.1, 0.5, 1.0, 1.0, 1.0), PreconditionError);
        CHECK_THROWS_AS(iteration_plan(0.1, 0.5, 1.0, 0.5, 0.0), PreconditionError);
    }

    TEST_CASE("chain bound collapses the brute-force recursion") {
        IterationPlan plan = iteration_plan(0.1, 0.5, 1.0, 0.5, 1.0);
        for (double e1 : {0.3, 0.9}) {
            for (double mass : {0.5, 2.0}) {
                double closed = chain_bound(plan, e1, mass);
                double brute = oracle::chain_recursion(e1, mass, plan.eps, plan.n);
                CHECK(std::fabs(closed / brute - 1.0) < 1e-12);
            }
        }
        CHECK(chain_bound(plan, 0.5, 0.0) == 0.0);
        CHECK_THROWS_AS(chain_bound(plan, 0.0, 1.0), PreconditionError);
    }

    TEST_CASE("theta contraction hits the pinned dichotomy values") {
        ThetaContraction lo = theta_contraction(0.02, 1.0, 1.0);
        ThetaContraction hi = theta_contraction(0.05, 1.0, 1.0);
        CHECK(lo.inv_ln_a == doctest::Approx(0.361370953).epsilon(1e-8));
        CHECK(hi.inv_ln_a == doctest::Approx(0.526631273).epsilon(1e-8));
        CHECK(lo.inv_ln_a < 0.5);
        CHECK(hi.inv_ln_a > 0.5);
    }

    TEST_CASE("inv_ln_a grows with theta") {
        double prev = 0.0;
        for (double theta : {0.01, 0.02, 0.05, 0.1, 0.2, 0.4}) {
            ThetaContraction t = theta_contraction(theta, 1.0, 1.0);
            CHECK(t.inv_ln_a > prev);
            prev = t.inv_ln_a;
        }
    }

    TEST_CASE("decay dichotomy reads the factors") {
        std::vector<double> r1s{1e-1, 1e-2, 1e-3, 1e-4};
        DecayLimitReport go = decay_limit_check(0.5, 0.361370953, 1.0, r1s);
        CHECK(go.verdict == "-> 0");
        for (std::size_t i = 1; i < go.decay_factors.size(); ++i)
            CHECK(go.decay_factors[i] < go.decay_factors[i - 1]);
        CHECK(go.decay_factors[0] == doctest::Approx(0.830086).epsilon(1e-5));
        CHECK(go.decay_factors[3] == doctest::Approx(0.61557).epsilon(1e-4));
        // values keep the R1^-4 prefactor as reported
        CHECK(go.values[0] ==
              doctest::Approx(go.decay_factors[0] / std::pow(0.1, 4)).epsilon(1e-12));

        DecayLimitReport stop = decay_limit_check(0.5, 0.526631273, 1.0, r1s);
        CHECK(stop.verdict == "no conclusion");
    }

    TEST_CASE("vanishing profile classifies polynomial order and zero fields") {
        ProductBallRule rule(6, 10, 20);
        std::vector<double> radii;
        for (int i = 1; i <= 8; ++i) radii.push_back(0.05 * i);
        VanishingProfile prof = vanishing_profile(grad_xyz(), {}, radii, rule);
        CHECK(prof.classification == "polynomial order 2");
        CHECK(prof.poly_order == 2);
        CHECK(prof.slope == doctest::Approx(7.0).epsilon(1e-3));
        for (std::size_t i = 1; i < prof.masses.size(); ++i)
            CHECK(prof.masses[i] > prof.masses[i - 1]);

        VanishingProfile zero = vanishing_profile(zero_displacement(), {}, radii, rule);
        CHECK(zero.classification == "identically zero on smallest ball");
    }

    TEST_CASE("nonvanishing fields classify with slope near 3") {
        ProductBallRule rule(6, 10, 20);
        std::vector<double> radii{0.01, 0.02, 0.03, 0.04, 0.05, 0.06};
        VanishingProfile prof = vanishing_profile(kelvin_field(KelvinSource{}), {}, radii, rule);
        CHECK(prof.classification == "nonvanishing");
        CHECK(prof.slope == doctest::Approx(3.0).epsilon(2e-2));
    }
}
