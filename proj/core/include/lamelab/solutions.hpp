#pragma once

#include "lamelab/fields.hpp"
#include "lamelab/poly3.hpp"

namespace lamelab {

/// Kelvin point-force solution for constant coefficients: a singularity at
/// source_point, smooth and divergence-balanced everywhere else.
struct KelvinSource {
    Vec3 source_point{1.5, 0.0, 0.0};
    Vec3 force{1.0, 0.0, 0.0};
    double mu0 = 1.0;
    double lambda0 = 1.0;

    double poisson() const { return lambda0 / (2.0 * (lambda0 + mu0)); }
};

/// Exact-jet field
///   u(x) = c [ (3 - 4 nu) |r|^{-1} b + (b . r) |r|^{-3} r ],  r = x - y,
/// with c = 1 / (16 pi mu0 (1 - nu)).  The field is only meaningful away
/// from the source point; evaluation at it throws.
DisplacementField kelvin_field(const KelvinSource& src);

/// Validates that the source sits strictly outside the study ball.
DisplacementField kelvin_field(const KelvinSource& src, const BallSpec& study_region);

/// u = grad h for a harmonic polynomial h; an exact solution for constant
/// coefficients.  Construction checks lap h = 0 coefficientwise.
struct HarmonicGradient {
    Poly3 potential;
};

DisplacementField harmonic_gradient_field(const HarmonicGradient& hg);

} // namespace lamelab
