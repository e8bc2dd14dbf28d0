#include "lamelab/solutions.hpp"

#include <cmath>
#include <sstream>

#include "lamelab/errors.hpp"

namespace lamelab {

DisplacementField kelvin_field(const KelvinSource& src) {
    if (!(src.mu0 > 0.0)) throw PreconditionError("kelvin_field: mu0 must be positive");
    double nu = src.poisson();
    if (!(nu < 0.5)) throw PreconditionError("kelvin_field: Poisson ratio must be < 1/2");

    const double c = 1.0 / (16.0 * M_PI * src.mu0 * (1.0 - nu));
    const double k = 3.0 - 4.0 * nu;
    const Vec3 y = src.source_point;
    const Vec3 b = src.force;

    auto guard = [y](const Vec3& x, double rho) {
        if (rho == 0.0) {
            std::ostringstream os;
            os << "kelvin_field: evaluation at the source point (" << y.x << ", " << y.y
               << ", " << y.z << ")";
            throw EvaluationError(os.str());
        }
        (void)x;
    };

    return {
        [=](const Vec3& x) {
            Vec3 r = x - y;
            double rho = norm(r);
            guard(x, rho);
            double i1 = 1.0 / rho;
            double i3 = i1 * i1 * i1;
            double s = dot(b, r);
            return (b * (k * i1) + r * (s * i3)) * c;
        },
        [=](const Vec3& x) {
            Vec3 r = x - y;
            double rho = norm(r);
            guard(x, rho);
            double i3 = 1.0 / (rho * rho * rho);
            double i5 = i3 / (rho * rho);
            double s = dot(b, r);
            Mat3 J;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    double kron = (i == j) ? 1.0 : 0.0;
                    J(i, j) = c * (-k * b[i] * r[j] * i3 + b[j] * r[i] * i3 + s * kron * i3 -
                                   3.0 * s * r[i] * r[j] * i5);
                }
            return J;
        },
        [=](const Vec3& x) {
            Vec3 r = x - y;
            double rho = norm(r);
            guard(x, rho);
            double i3 = 1.0 / (rho * rho * rho);
            double i5 = i3 / (rho * rho);
            double i7 = i5 / (rho * rho);
            double s = dot(b, r);
            Hess3 H;
            for (int i = 0; i < 3; ++i)
                for (int jj = 0; jj < 3; ++jj)
                    for (int kk = jj; kk < 3; ++kk) {
                        double d_jk = (jj == kk) ? 1.0 : 0.0;
                        double d_ik = (i == kk) ? 1.0 : 0.0;
                        double d_ij = (i == jj) ? 1.0 : 0.0;
                        // d_k d_j u_i; mirrored so the stored hessian is
                        // symmetric to the last bit.
                        double t = -k * b[i] * (d_jk * i3 - 3.0 * r[jj] * r[kk] * i5) +
                                   b[jj] * (d_ik * i3 - 3.0 * r[i] * r[kk] * i5) +
                                   d_ij * (b[kk] * i3 - 3.0 * s * r[kk] * i5) -
                                   3.0 * (b[kk] * r[i] * r[jj] * i5 + s * d_ik * r[jj] * i5 +
                                          s * r[i] * d_jk * i5 - 5.0 * s * r[i] * r[jj] * r[kk] * i7);
                        H[i](kk, jj) = c * t;
                        H[i](jj, kk) = c * t;
                    }
            return H;
        }};
}

DisplacementField kelvin_field(const KelvinSource& src, const BallSpec& study_region) {
    double gap = norm(src.source_point - study_region.center);
    if (!(gap > study_region.radius))
        throw PreconditionError("kelvin_field: source point must lie outside the study ball");
    return kelvin_field(src);
}

DisplacementField harmonic_gradient_field(const HarmonicGradient& hg) {
    Poly3 lap = hg.potential.laplacian();
    if (!lap.is_zero()) {
        auto worst = lap.terms().begin();
        std::ostringstream os;
        os << "harmonic_gradient_field: potential is not harmonic; lap h has term x^"
           << worst->first[0] << " y^" << worst->first[1] << " z^" << worst->first[2]
           << " with coefficient " << worst->second;
        throw PreconditionError(os.str());
    }
    return polynomial_displacement(hg.potential.derivative(0), hg.potential.derivative(1),
                                   hg.potential.derivative(2));
}

} // namespace lamelab
