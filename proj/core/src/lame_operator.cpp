#include "lamelab/lame_operator.hpp"

#include <cmath>

#include "lamelab/errors.hpp"

namespace lamelab {

namespace {

Vec3 laplacian_of(const Hess3& h) {
    return {h[0].trace(), h[1].trace(), h[2].trace()};
}

// (grad div u)_i = sum_j d_i d_j u_j.
Vec3 grad_div_of(const Hess3& h) {
    Vec3 g;
    for (int i = 0; i < 3; ++i) {
        double s = 0.0;
        for (int j = 0; j < 3; ++j) s += h[j](i, j);
        g[i] = s;
    }
    return g;
}

Vec3 curl_of(const Mat3& jac) {
    return {jac(2, 1) - jac(1, 2), jac(0, 2) - jac(2, 0), jac(1, 0) - jac(0, 1)};
}

} // namespace

Vec3 apply_lame_full(const CoefficientPair& coeffs, const DisplacementField& u, const Vec3& x) {
    double mu = coeffs.mu.value(x);
    double lambda = coeffs.lambda.value(x);
    Vec3 gmu = coeffs.mu.gradient(x);
    Vec3 glam = coeffs.lambda.gradient(x);
    Mat3 J = u.jacobian(x);
    Hess3 H = u.hessians(x);

    Vec3 lap = laplacian_of(H);
    Vec3 gdiv = grad_div_of(H);
    double div = J.trace();
    Vec3 strain_gmu = mat_vec(J + J.transpose(), gmu);

    return lap * mu + gdiv * (lambda + mu) + strain_gmu + glam * div;
}

Vec3 apply_lame_principal(const CoefficientPair& coeffs, const DisplacementField& u,
                          const Vec3& x) {
    double mu = coeffs.mu.value(x);
    double lambda = coeffs.lambda.value(x);
    Hess3 H = u.hessians(x);
    return laplacian_of(H) * mu + grad_div_of(H) * (lambda + mu);
}

EllerPair apply_A(const Mat3& jac_u1, const Vec3& grad_u2) {
    return {curl_of(jac_u1) + grad_u2, -jac_u1.trace()};
}

EllerPair apply_A_alpha(const CoefficientPair& coeffs, const Mat3& jac_v1, const Vec3& grad_v2,
                        const Vec3& x) {
    double mu = coeffs.mu.value(x);
    if (mu == 0.0) throw EvaluationError("apply_A_alpha: mu vanishes at the probe");
    double alpha = (2.0 * mu + coeffs.lambda.value(x)) / mu;
    return {curl_of(jac_v1) + grad_v2 * alpha, -jac_v1.trace()};
}

EllerPair factorization_composition(const CoefficientPair& coeffs, const DisplacementField& u,
                                    const Vec3& x) {
    double mu = coeffs.mu.value(x);
    if (mu == 0.0) throw EvaluationError("factorization_composition: mu vanishes at the probe");
    double alpha = (2.0 * mu + coeffs.lambda.value(x)) / mu;

    Hess3 H = u.hessians(x);
    Vec3 gdiv = grad_div_of(H);

    // A(u, 0) = (curl u, -div u); the second factor sees
    //   curl(curl u) = grad div u - lap u   and   grad(-div u) = -gdiv.
    Vec3 curl_curl = gdiv - laplacian_of(H);

    // div curl u, assembled from the stored hessians; cancels exactly when
    // they are symmetric.
    double div_curl = (H[2](0, 1) - H[1](0, 2)) + (H[0](1, 2) - H[2](1, 0)) +
                      (H[1](2, 0) - H[0](2, 1));

    Vec3 first = curl_curl - gdiv * alpha;
    return {first * (-mu), mu * div_curl};
}

FactorizationReport factorization_residual(const CoefficientPair& coeffs,
                                           const DisplacementField& u,
                                           const std::vector<Vec3>& probes) {
    if (probes.empty()) throw PreconditionError("factorization_residual: no probes");
    FactorizationReport rep;
    for (const Vec3& x : probes) {
        Vec3 lhs = apply_lame_principal(coeffs, u, x);
        EllerPair rhs = factorization_composition(coeffs, u, x);
        rep.max_vector_residual = std::max(rep.max_vector_residual, norm_inf(lhs - rhs.first));
        rep.max_second_component = std::max(rep.max_second_component, std::fabs(rhs.second));
    }
    return rep;
}

Vec3 commutator_apply(const CoefficientPair& coeffs, const ScalarFieldC2& chi,
                      const DisplacementField& v, const Vec3& x) {
    double mu = coeffs.mu.value(x);
    double lambda = coeffs.lambda.value(x);
    Vec3 g = chi.gradient(x);
    Mat3 Hchi = chi.hessian(x);
    double lap_chi = Hchi.trace();

    Vec3 val = v.value(x);
    Mat3 J = v.jacobian(x);
    double div = J.trace();

    // [L, chi] v = mu (2 (grad v) grad chi + v lap chi)
    //            + (lambda + mu) ((div v) grad chi + (hess chi) v + (grad v)^T grad chi)
    Vec3 part_mu = (mat_vec(J, g) * 2.0 + val * lap_chi) * mu;
    Vec3 part_lm = (g * div + mat_vec(Hchi, val) + mat_vec(J.transpose(), g)) * (lambda + mu);
    return part_mu + part_lm;
}

} // namespace lamelab
