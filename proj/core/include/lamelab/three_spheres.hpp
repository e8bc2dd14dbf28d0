#pragma once

#include <string>
#include <vector>

#include "lamelab/fields.hpp"
#include "lamelab/quadrature.hpp"

namespace lamelab {

struct ThreeRadii {
    double r1 = 0.25;
    double r2 = 0.5;
    double r_out = 1.0;

    ThreeRadii() = default;
    ThreeRadii(double a, double b, double c) : r1(a), r2(b), r_out(c) {
        if (!(r1 > 0.0 && r1 < r2 && r2 < r_out))
            throw PreconditionError("ThreeRadii: need 0 < r1 < r2 < r_out");
    }
};

/// Ball masses n_i = int_{B_{r_i}} |u|^2 and the largest exponent for which
/// n2 <= n1^sigma * nR^(1-sigma) holds with constant 1.
struct ThreeSpheresReport {
    double n1 = 0.0;
    double n2 = 0.0;
    double nR = 0.0;
    double sigma_star = 0.0; // meaningful only when !degenerate
    bool degenerate = true;
};

ThreeSpheresReport verify_three_spheres(const DisplacementField& u, const ThreeRadii& radii,
                                        const ProductBallRule& rule);

struct SigmaCurvePoint {
    double sigma = 0.0;
    double c = 0.0;
};

struct SigmaCurve {
    std::vector<SigmaCurvePoint> points;
    double min_sigma_star = 0.0;
    double c_at_min_sigma = 0.0; // equals 1 by construction, kept as a check
};

/// C(sigma) = max over nondegenerate reports of n2 / (n1^sigma nR^(1-sigma)),
/// sampled at n_sigma interior points of (0,1).  The pair
/// (min sigma_star, 1) is the canonical admissible normalization.
SigmaCurve fit_sigma_c(const std::vector<ThreeSpheresReport>& reports, int n_sigma = 199);

/// Radii bookkeeping for the ball-chain argument: contraction factor a,
/// step count N, composite exponent sigma = eps^N, eta = exp(1/N + 1).
struct IterationPlan {
    // inputs
    double r1 = 0.0;
    double r2 = 0.0;
    double r_out = 0.0;
    double eps = 0.0;
    double s = 0.0;
    // derived
    double r0 = 0.0;       // (r_out + r2) / 2
    double theta = 0.0;    // r2 * r_out / r0
    double theta1 = 0.0;   // sublevel radius of phi at phi_star / 2
    double theta2 = 0.0;   // (theta + theta1) / 2
    double a = 0.0;        // theta2 / theta, > 1
    double r = 0.0;        // r1 / 2
    int n = 0;             // unique N with r a^(N-1) < r2 <= r a^N
    double sigma = 0.0;    // eps^N
    double eta = 0.0;      // exp(1/N + 1), > 2
    double inv_ln_a = 0.0; // 1 / ln a
};

IterationPlan iteration_plan(double r1, double r2, double r_out, double eps, double s);

/// Telescoped chain estimate E1^((1 - eps^N)/(1 - eps)) * mass_r^(eps^N).
double chain_bound(const IterationPlan& plan, double e1, double mass_r);

/// The theta-driven contraction data alone, for geometries where theta is a
/// free parameter rather than pinned by the radii pair.
struct ThetaContraction {
    double theta = 0.0;
    double theta1 = 0.0;
    double theta2 = 0.0;
    double a = 0.0;
    double inv_ln_a = 0.0;
};

ThetaContraction theta_contraction(double theta, double r_out, double s);

struct VanishingProfile {
    std::vector<double> radii;
    std::vector<double> masses;       // m(r) = int_{B_r(x0)} |u|^2
    double slope = 0.0;               // log-log least-squares slope
    double exp_c = 0.0;               // fit of ln m = ln m_max - exp_c * r^(-exp_eps)
    double exp_eps = 0.0;
    bool exp_fit_valid = false;
    int poly_order = -1;              // k when classified polynomial, slope = 2k + 3
    std::string classification;
};

/// Ball-mass profile around x0 with a slope fit and a coarse classification:
/// "nonvanishing", "polynomial order k", "exponential-type", or the
/// zero-mass short circuit "identically zero on smallest ball".
VanishingProfile vanishing_profile(const DisplacementField& u, const Vec3& x0,
                                   const std::vector<double>& radii,
                                   const ProductBallRule& rule);

struct DecayLimitReport {
    double eps = 0.0;
    double inv_ln_a = 0.0;
    double c_tilde = 0.0;
    std::vector<double> r1_list;
    std::vector<double> values;        // (c_tilde / R1^4) * decay_factor
    std::vector<double> decay_factors; // exp(-e^-2 * R1^-(eps - inv_ln_a))
    std::string verdict;               // "-> 0" or "no conclusion"
};

/// Dichotomy for the small-radius limit.  The verdict reads the decay
/// factors: they fall monotonically to 0 exactly when eps > inv_ln_a.  The
/// full values keep the R1^-4 constant in front and are reported as-is; that
/// prefactor swamps the decay until R1 is far below any practical list, so
/// it takes no part in the verdict.
DecayLimitReport decay_limit_check(double eps, double inv_ln_a, double c_tilde,
                                   const std::vector<double>& r1_list);

} // namespace lamelab
