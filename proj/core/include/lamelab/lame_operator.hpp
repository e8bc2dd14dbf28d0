#pragma once

#include <vector>

#include "lamelab/fields.hpp"

namespace lamelab {

/// Full variable-coefficient operator
///   Lt u = div(mu (grad u + (grad u)^T)) + grad(lambda div u),
/// expanded through the product rule so only u's declared jets and the
/// coefficient gradients are touched.
Vec3 apply_lame_full(const CoefficientPair& coeffs, const DisplacementField& u, const Vec3& x);

/// Principal part L u = mu lap u + (lambda + mu) grad div u.
Vec3 apply_lame_principal(const CoefficientPair& coeffs, const DisplacementField& u,
                          const Vec3& x);

/// First-order pair produced by the first-order factor acting on (u1, u2).
struct EllerPair {
    Vec3 first;
    double second = 0.0;
};

/// A(d)(u1, u2) = (curl u1 + grad u2, -div u1), evaluated from the jacobian
/// of u1 and the gradient of u2.
EllerPair apply_A(const Mat3& jac_u1, const Vec3& grad_u2);

/// A_alpha(x, d)(v1, v2) = (curl v1 + alpha grad v2, -div v1) with
/// alpha = (2 mu + lambda) / mu evaluated pointwise.
EllerPair apply_A_alpha(const CoefficientPair& coeffs, const Mat3& jac_v1, const Vec3& grad_v2,
                        const Vec3& x);

/// Composition -mu A_alpha(A(u, 0)) assembled from u's exact hessians via
/// curl curl = grad div - lap; alpha is not differentiated.
EllerPair factorization_composition(const CoefficientPair& coeffs, const DisplacementField& u,
                                    const Vec3& x);

struct FactorizationReport {
    double max_vector_residual = 0.0;
    double max_second_component = 0.0;
};

/// max over probes of |L u - (-mu A_alpha A(u,0))| and of the second
/// component of the composition (identically zero in exact arithmetic).
FactorizationReport factorization_residual(const CoefficientPair& coeffs,
                                           const DisplacementField& u,
                                           const std::vector<Vec3>& probes);

/// Commutator [L, chi] v = L(chi v) - chi L v, expanded so that only v's
/// values and first derivatives appear (plus two derivatives of chi).
Vec3 commutator_apply(const CoefficientPair& coeffs, const ScalarFieldC2& chi,
                      const DisplacementField& v, const Vec3& x);

} // namespace lamelab
