#pragma once

#include <functional>
#include <vector>

#include "lamelab/geometry.hpp"
#include "lamelab/vec.hpp"

namespace lamelab {

/// Scalar coefficient with one declared derivative order.
struct ScalarFieldC1 {
    std::function<double(const Vec3&)> value;
    std::function<Vec3(const Vec3&)> gradient;
};

/// Scalar with two declared derivative orders (cutoffs, multipliers).
struct ScalarFieldC2 {
    std::function<double(const Vec3&)> value;
    std::function<Vec3(const Vec3&)> gradient;
    std::function<Mat3(const Vec3&)> hessian;
};

/// Lame pair with declared ellipticity floors: mu >= alpha0 > 0 and
/// 2 mu + lambda >= beta0 > 0 on the domain of use.
struct CoefficientPair {
    ScalarFieldC1 mu;
    ScalarFieldC1 lambda;
    double alpha0 = 0.0;
    double beta0 = 0.0;
};

/// Displacement with exact first and second derivatives.
/// jacobian(i, j) = d u_i / d x_j; hessians[c](i, j) = d2 u_c / dx_i dx_j.
struct DisplacementField {
    std::function<Vec3(const Vec3&)> value;
    std::function<Mat3(const Vec3&)> jacobian;
    std::function<Hess3(const Vec3&)> hessians;
};

// ---- field constructors ----------------------------------------------------

ScalarFieldC1 constant_scalar(double c);
ScalarFieldC2 constant_scalar_c2(double c);
ScalarFieldC1 as_c1(const ScalarFieldC2& f);

DisplacementField zero_displacement();
DisplacementField constant_displacement(const Vec3& c);
/// u(x) = A x + b.
DisplacementField linear_displacement(const Mat3& A, const Vec3& b);

DisplacementField add(const DisplacementField& a, const DisplacementField& b);
DisplacementField scale(const DisplacementField& a, double s);
/// chi * u with the product-rule jets expanded exactly.
DisplacementField multiply_scalar(const ScalarFieldC2& chi, const DisplacementField& u);

/// u(x) = g(|x - center|) * direction, with g given by value and two
/// derivatives.  g must be smooth across |x - center| = 0 or the field only
/// used away from the center.
DisplacementField radial_profile_field(std::function<double(double)> g,
                                       std::function<double(double)> dg,
                                       std::function<double(double)> d2g,
                                       const Vec3& direction, const Vec3& center = {});

// ---- bundled coefficient families -------------------------------------------

/// mu = mu0, lambda = lambda0; requires mu0 > 0 and 2 mu0 + lambda0 > 0.
CoefficientPair coefficients_constant(double mu0, double lambda0);

/// mu = 1 + 0.2 sin x1, lambda = 0.5 + 0.1 x2.  Floors declared for |x| <= 2.
CoefficientPair coefficients_wavy();

/// Caller-supplied closures with declared floors.
CoefficientPair coefficients_custom(ScalarFieldC1 mu, ScalarFieldC1 lambda, double alpha0,
                                    double beta0);

// ---- checks ------------------------------------------------------------------

struct EllipticityReport {
    double min_mu = 0.0;
    double min_2mu_lambda = 0.0;
    Vec3 worst_mu_point{};
    Vec3 worst_2mu_lambda_point{};
    int samples = 0;
    bool pass = false;
};

/// Samples the coefficient pair on a deterministic low-discrepancy point set
/// in the ball and compares against the declared floors.
EllipticityReport validate_ellipticity(const CoefficientPair& coeffs, const BallSpec& region,
                                       int samples);

struct DerivativeConsistencyReport {
    double max_jacobian_discrepancy = 0.0;
    double max_hessian_discrepancy = 0.0;
    Vec3 worst_point{};
};

/// Central-difference check of the declared jacobian and hessians at the
/// probes.  Discrepancies are relative with an absolute floor of one.
DerivativeConsistencyReport derivative_consistency(const DisplacementField& u,
                                                   const std::vector<Vec3>& probes,
                                                   double step);

/// Halton points (bases 2, 3, 5) mapped uniformly into a ball.
std::vector<Vec3> halton_ball_points(const BallSpec& ball, int count);

} // namespace lamelab
