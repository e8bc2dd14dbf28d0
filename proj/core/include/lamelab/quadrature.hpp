#pragma once

#include <functional>
#include <vector>

#include "lamelab/geometry.hpp"

namespace lamelab {

/// One-dimensional Gauss rule on [-1, 1].
struct GaussRule1D {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Legendre rule (weight 1), n >= 1 points.
GaussRule1D gauss_legendre(int n);

/// Gauss rule for the weight (1 + x)^2 on [-1, 1].  Mapped to [0, R] it
/// integrates against rho^2 drho, which is what ball integrals in spherical
/// coordinates need; n points are exact through radial degree 2n - 1.
GaussRule1D gauss_jacobi_r2(int n);

/// Pairwise (tree) summation.  Deterministic for a fixed element order and
/// much tighter than naive left-to-right accumulation on long sums.
double pairwise_sum(std::vector<double>& terms);

struct QuadNode {
    Vec3 point;
    double weight;
};

/// Spherical product rule over a ball: Gauss radial nodes against rho^2,
/// Gauss-Legendre in the polar cosine, uniform azimuthal nodes.
struct ProductBallRule {
    int n_r = 5;
    int n_p = 8;
    int n_a = 16;

    ProductBallRule() = default;
    ProductBallRule(int nr, int np, int na) : n_r(nr), n_p(np), n_a(na) {
        if (nr < 2 || np < 2 || na < 4)
            throw PreconditionError("ProductBallRule: need n_r >= 2, n_p >= 2, n_a >= 4");
    }
};

std::vector<QuadNode> ball_nodes(const BallSpec& ball, const ProductBallRule& rule);

/// Same angular layout with a Gauss-Legendre radial rule on
/// [r_inner, r_outer], rho^2 folded into the weights.
std::vector<QuadNode> annulus_nodes(const AnnulusSpec& ann, const ProductBallRule& rule);

/// Surface rule on the sphere |x - center| = radius; weights sum to the
/// sphere area 4 pi radius^2.
std::vector<QuadNode> sphere_nodes(const Vec3& center, double radius, int n_p, int n_a);

/// Integral of a scalar function over a ball.  Throws EvaluationError naming
/// the node if the integrand comes back non-finite.
double integrate_ball(const std::function<double(const Vec3&)>& f, const BallSpec& ball,
                      const ProductBallRule& rule);

/// Integral of w * g over an annulus.
double weighted_l2_annulus(const std::function<double(const Vec3&)>& g,
                           const std::function<double(const Vec3&)>& w,
                           const AnnulusSpec& ann, const ProductBallRule& rule);

/// Same with the weight supplied as log w, evaluated as a single exponential
/// per node.  Throws OverflowError (advising a log-domain rescale of the
/// whole computation) when the combined exponent leaves double range.
double weighted_l2_annulus_logw(const std::function<double(const Vec3&)>& g,
                                const std::function<double(const Vec3&)>& log_w,
                                const AnnulusSpec& ann, const ProductBallRule& rule);

struct DisplacementField;

/// integral over the ball of |u|^2.
double l2_mass_ball(const DisplacementField& u, const BallSpec& ball,
                    const ProductBallRule& rule);

} // namespace lamelab
