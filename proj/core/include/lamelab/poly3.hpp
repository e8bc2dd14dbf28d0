#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "lamelab/fields.hpp"

namespace lamelab {

/// Sparse trivariate polynomial with exact evaluation and differentiation.
class Poly3 {
  public:
    using Exponents = std::array<int, 3>;

    Poly3() = default;
    explicit Poly3(double c) { if (c != 0.0) terms_[{0, 0, 0}] = c; }

    static Poly3 monomial(int i, int j, int k, double c = 1.0) {
        Poly3 p;
        if (c != 0.0) p.terms_[{i, j, k}] = c;
        return p;
    }

    void add_term(int i, int j, int k, double c);

    double eval(const Vec3& x) const;
    Poly3 derivative(int axis) const;
    Poly3 laplacian() const;

    Poly3 operator+(const Poly3& o) const;
    Poly3 operator-(const Poly3& o) const;
    Poly3 operator*(const Poly3& o) const;
    Poly3 operator*(double s) const;

    bool is_zero(double tol = 0.0) const;
    int degree() const;
    const std::map<Exponents, double>& terms() const { return terms_; }

  private:
    std::map<Exponents, double> terms_;
};

/// Displacement field with polynomial components; all jets exact.
DisplacementField polynomial_displacement(const Poly3& u1, const Poly3& u2, const Poly3& u3);

/// Seeded random displacement with components of total degree <= max_degree
/// and coefficients uniform in [-1, 1].
DisplacementField random_polynomial_displacement(int max_degree, std::uint64_t seed);

} // namespace lamelab
