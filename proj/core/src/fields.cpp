#include "lamelab/fields.hpp"

#include <cmath>

#include "lamelab/errors.hpp"

namespace lamelab {

ScalarFieldC1 constant_scalar(double c) {
    return {[c](const Vec3&) { return c; }, [](const Vec3&) { return Vec3{}; }};
}

ScalarFieldC2 constant_scalar_c2(double c) {
    return {[c](const Vec3&) { return c; }, [](const Vec3&) { return Vec3{}; },
            [](const Vec3&) { return Mat3{}; }};
}

ScalarFieldC1 as_c1(const ScalarFieldC2& f) { return {f.value, f.gradient}; }

DisplacementField zero_displacement() {
    return {[](const Vec3&) { return Vec3{}; }, [](const Vec3&) { return Mat3{}; },
            [](const Vec3&) { return Hess3{}; }};
}

DisplacementField constant_displacement(const Vec3& c) {
    return {[c](const Vec3&) { return c; }, [](const Vec3&) { return Mat3{}; },
            [](const Vec3&) { return Hess3{}; }};
}

DisplacementField linear_displacement(const Mat3& A, const Vec3& b) {
    return {[A, b](const Vec3& x) { return mat_vec(A, x) + b; },
            [A](const Vec3&) { return A; },
            [](const Vec3&) { return Hess3{}; }};
}

DisplacementField add(const DisplacementField& a, const DisplacementField& b) {
    auto av = a.value, bv = b.value;
    auto aj = a.jacobian, bj = b.jacobian;
    auto ah = a.hessians, bh = b.hessians;
    return {[av, bv](const Vec3& x) { return av(x) + bv(x); },
            [aj, bj](const Vec3& x) { return aj(x) + bj(x); },
            [ah, bh](const Vec3& x) {
                Hess3 ha = ah(x), hb = bh(x);
                return Hess3{ha[0] + hb[0], ha[1] + hb[1], ha[2] + hb[2]};
            }};
}

DisplacementField scale(const DisplacementField& a, double s) {
    auto av = a.value;
    auto aj = a.jacobian;
    auto ah = a.hessians;
    return {[av, s](const Vec3& x) { return av(x) * s; },
            [aj, s](const Vec3& x) { return aj(x) * s; },
            [ah, s](const Vec3& x) {
                Hess3 h = ah(x);
                return Hess3{h[0] * s, h[1] * s, h[2] * s};
            }};
}

DisplacementField multiply_scalar(const ScalarFieldC2& chi, const DisplacementField& u) {
    auto cv = chi.value;
    auto cg = chi.gradient;
    auto ch = chi.hessian;
    auto uv = u.value;
    auto uj = u.jacobian;
    auto uh = u.hessians;
    return {
        [cv, uv](const Vec3& x) { return uv(x) * cv(x); },
        [cv, cg, uv, uj](const Vec3& x) {
            double c = cv(x);
            Vec3 g = cg(x);
            Vec3 v = uv(x);
            Mat3 J = uj(x);
            Mat3 r;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) r(i, j) = c * J(i, j) + g[j] * v[i];
            return r;
        },
        [cv, cg, ch, uv, uj, uh](const Vec3& x) {
            double c = cv(x);
            Vec3 g = cg(x);
            Mat3 H = ch(x);
            Vec3 v = uv(x);
            Mat3 J = uj(x);
            Hess3 hu = uh(x);
            Hess3 r;
            for (int comp = 0; comp < 3; ++comp)
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j)
                        r[comp](i, j) = H(i, j) * v[comp] + g[i] * J(comp, j) +
                                        g[j] * J(comp, i) + c * hu[comp](i, j);
            return r;
        }};
}

DisplacementField radial_profile_field(std::function<double(double)> g,
                                       std::function<double(double)> dg,
                                       std::function<double(double)> d2g,
                                       const Vec3& direction, const Vec3& center) {
    auto radial = [center](const Vec3& x) { return norm(x - center); };
    return {
        [g, direction, radial](const Vec3& x) { return direction * g(radial(x)); },
        [dg, direction, center, radial](const Vec3& x) {
            double r = radial(x);
            Mat3 J;
            if (r == 0.0) return J;
            Vec3 n = (x - center) * (1.0 / r);
            double gp = dg(r);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) J(i, j) = direction[i] * gp * n[j];
            return J;
        },
        [dg, d2g, direction, center, radial](const Vec3& x) {
            double r = radial(x);
            Hess3 h;
            if (r == 0.0) return h;
            Vec3 n = (x - center) * (1.0 / r);
            double gp = dg(r);
            double gpp = d2g(r);
            for (int comp = 0; comp < 3; ++comp)
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) {
                        double nn = n[i] * n[j];
                        double kron = (i == j) ? 1.0 : 0.0;
                        h[comp](i, j) = direction[comp] * (gpp * nn + gp * (kron - nn) / r);
                    }
            return h;
        }};
}

CoefficientPair coefficients_constant(double mu0, double lambda0) {
    if (!(mu0 > 0.0)) throw PreconditionError("coefficients_constant: mu0 must be positive");
    if (!(2.0 * mu0 + lambda0 > 0.0))
        throw PreconditionError("coefficients_constant: 2 mu0 + lambda0 must be positive");
    return {constant_scalar(mu0), constant_scalar(lambda0), mu0, 2.0 * mu0 + lambda0};
}

CoefficientPair coefficients_wavy() {
    ScalarFieldC1 mu{[](const Vec3& x) { return 1.0 + 0.2 * std::sin(x.x); },
                     [](const Vec3& x) { return Vec3{0.2 * std::cos(x.x), 0.0, 0.0}; }};
    ScalarFieldC1 lambda{[](const Vec3& x) { return 0.5 + 0.1 * x.y; },
                         [](const Vec3&) { return Vec3{0.0, 0.1, 0.0}; }};
    // floors hold on |x| <= 2: mu >= 0.8, 2 mu + lambda >= 1.6 + 0.3
    return {mu, lambda, 0.8, 1.9};
}

CoefficientPair coefficients_custom(ScalarFieldC1 mu, ScalarFieldC1 lambda, double alpha0,
                                    double beta0) {
    if (!(alpha0 > 0.0) || !(beta0 > 0.0))
        throw PreconditionError("coefficients_custom: floors must be positive");
    return {std::move(mu), std::move(lambda), alpha0, beta0};
}

namespace {

double halton(std::uint64_t index, std::uint64_t base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= static_cast<double>(base);
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

} // namespace

std::vector<Vec3> halton_ball_points(const BallSpec& ball, int count) {
    if (count < 1) throw PreconditionError("halton_ball_points: need count >= 1");
    std::vector<Vec3> pts;
    pts.reserve(count);
    for (int i = 0; i < count; ++i) {
        std::uint64_t n = static_cast<std::uint64_t>(i) + 1;
        double r = ball.radius * std::cbrt(halton(n, 2));
        double u = 2.0 * halton(n, 3) - 1.0;
        double phi = 2.0 * M_PI * halton(n, 5);
        double su = std::sqrt(std::max(0.0, 1.0 - u * u));
        pts.push_back({ball.center.x + r * su * std::cos(phi),
                       ball.center.y + r * su * std::sin(phi), ball.center.z + r * u});
    }
    return pts;
}

EllipticityReport validate_ellipticity(const CoefficientPair& coeffs, const BallSpec& region,
                                       int samples) {
    if (samples < 1) throw PreconditionError("validate_ellipticity: need samples >= 1");
    EllipticityReport rep;
    rep.samples = samples;
    rep.min_mu = std::numeric_limits<double>::infinity();
    rep.min_2mu_lambda = std::numeric_limits<double>::infinity();
    for (const Vec3& p : halton_ball_points(region, samples)) {
        double m = coeffs.mu.value(p);
        double l = coeffs.lambda.value(p);
        if (!std::isfinite(m) || !std::isfinite(l))
            throw EvaluationError("validate_ellipticity: non-finite coefficient sample");
        if (m < rep.min_mu) {
            rep.min_mu = m;
            rep.worst_mu_point = p;
        }
        if (2.0 * m + l < rep.min_2mu_lambda) {
            rep.min_2mu_lambda = 2.0 * m + l;
            rep.worst_2mu_lambda_point = p;
        }
    }
    rep.pass = rep.min_mu >= coeffs.alpha0 && rep.min_2mu_lambda >= coeffs.beta0 &&
               coeffs.alpha0 > 0.0 && coeffs.beta0 > 0.0;
    return rep;
}

DerivativeConsistencyReport derivative_consistency(const DisplacementField& u,
                                                   const std::vector<Vec3>& probes,
                                                   double step) {
    if (!(step > 0.0)) throw PreconditionError("derivative_consistency: step must be positive");
    if (probes.empty()) throw PreconditionError("derivative_consistency: no probes");

    auto rel = [](double got, double want) {
        return std::fabs(got - want) / std::max(1.0, std::fabs(want));
    };

    DerivativeConsistencyReport rep;
    for (const Vec3& p : probes) {
        Mat3 J = u.jacobian(p);
        Hess3 H = u.hessians(p);
        double worst_here = 0.0;

        for (int j = 0; j < 3; ++j) {
            Vec3 e{};
            e[j] = step;
            Vec3 fp = u.value(p + e);
            Vec3 fm = u.value(p - e);
            for (int i = 0; i < 3; ++i) {
                double fd = (fp[i] - fm[i]) / (2.0 * step);
                double d = rel(fd, J(i, j));
                rep.max_jacobian_discrepancy = std::max(rep.max_jacobian_discrepancy, d);
                worst_here = std::max(worst_here, d);
            }
        }

        Vec3 f0 = u.value(p);
        for (int i = 0; i < 3; ++i) {
            for (int j = i; j < 3; ++j) {
                Vec3 fd3;
                if (i == j) {
                    Vec3 e{};
                    e[i] = step;
                    Vec3 fp = u.value(p + e);
                    Vec3 fm = u.value(p - e);
                    for (int c = 0; c < 3; ++c)
                        fd3[c] = (fp[c] - 2.0 * f0[c] + fm[c]) / (step * step);
                } else {
                    Vec3 ei{}, ej{};
                    ei[i] = step;
                    ej[j] = step;
                    Vec3 fpp = u.value(p + ei + ej);
                    Vec3 fpm = u.value(p + ei - ej);
                    Vec3 fmp = u.value(p - ei + ej);
                    Vec3 fmm = u.value(p - ei - ej);
                    for (int c = 0; c < 3; ++c)
                        fd3[c] = (fpp[c] - fpm[c] - fmp[c] + fmm[c]) / (4.0 * step * step);
                }
                for (int c = 0; c < 3; ++c) {
                    double d = rel(fd3[c], H[c](i, j));
                    rep.max_hessian_discrepancy = std::max(rep.max_hessian_discrepancy, d);
                    worst_here = std::max(worst_here, d);
                }
            }
        }

        if (worst_here >= std::max(rep.max_jacobian_discrepancy, rep.max_hessian_discrepancy))
            rep.worst_point = p;
    }
    return rep;
}

} // namespace lamelab
