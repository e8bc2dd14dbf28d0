#pragma once

#include <vector>

#include "lamelab/fields.hpp"
#include "lamelab/quadrature.hpp"

namespace lamelab {

/// Radial weight family on the annulus G = {theta < |x| < R}:
///   psi = R^2 - |x|^2,  phi = e^{s psi} - 1,  phi_star = max phi on G.
struct CarlemanWeights {
    double R = 1.0;
    double theta = 0.5;
    double s = 1.0;

    CarlemanWeights(double R_, double theta_, double s_) : R(R_), theta(theta_), s(s_) {
        if (!(theta > 0.0) || !(theta < R))
            throw PreconditionError("CarlemanWeights: need 0 < theta < R");
        if (!(s > 0.0)) throw PreconditionError("CarlemanWeights: need s > 0");
    }

    double psi(const Vec3& x) const { return R * R - dot(x, x); }
    Vec3 grad_psi(const Vec3& x) const { return x * (-2.0); }
    double phi(const Vec3& x) const { return std::exp(s * psi(x)) - 1.0; }
    double phi_star() const { return std::exp(s * (R * R - theta * theta)) - 1.0; }

    AnnulusSpec domain() const { return AnnulusSpec({}, theta, R); }
};

/// Radius of the sublevel boundary: phi(x) > delta exactly on
/// {|x| < sublevel_radius(delta)}.  Requires 0 <= delta <= phi_star.
double sublevel_radius(const CarlemanWeights& w, double delta);

struct CutoffField {
    ScalarFieldC2 chi;
    double r_one = 0.0;    // chi = 1 for |x| <= r_one
    double r_zero = 0.0;   // chi = 0 for |x| >= r_zero
    double grad_max = 0.0; // max |grad chi|, attained mid-transition
};

/// Radial quintic-smoothstep cutoff: 1 on the sublevel set of m (and the
/// inner ball), 0 outside the sublevel set of m/2.  Requires 0 < m < phi_star/2.
CutoffField cutoff_build(const CarlemanWeights& w, double m);

struct CarlemanSides {
    double t1 = 0.0;   // tau^2 s^4 int e^{2 s psi} e^{2 tau phi} |u|^2
    double t2 = 0.0;   // s^2 int e^{2 tau phi} |grad u|^2
    double t3 = 0.0;   // tau^-2 int e^{-2 s psi} e^{2 tau phi} |hess u|^2
    double rhs = 0.0;  // int e^{2 tau phi} |L u|^2 (principal part)
};

/// Weighted sides at one tau.  u must be compactly supported in the open
/// annulus: values and two derivative orders are sampled on both boundary
/// spheres and must stay below 1e-8 in magnitude.
CarlemanSides carleman_sides(const CoefficientPair& coeffs, const DisplacementField& u,
                             const CarlemanWeights& w, const ProductBallRule& rule, double tau);

struct CarlemanScanRow {
    double tau, t1, t2, t3, rhs, ratio;
};

/// Sides over a tau list; ratio = (t1 + t2 + t3) / rhs.
std::vector<CarlemanScanRow> carleman_scan(const CoefficientPair& coeffs,
                                           const DisplacementField& u, const CarlemanWeights& w,
                                           const ProductBallRule& rule,
                                           const std::vector<double>& taus);

/// C2 bump supported exactly on the open annulus (theta, R):
///   u = eta(|x|) direction,  eta = [(rho - theta)(R - rho)]^3, peak-normalized.
DisplacementField bump_displacement(double theta, double R, const Vec3& direction);

} // namespace lamelab
