#include "lamelab/poly3.hpp"

#include <cmath>
#include <random>

#include "lamelab/errors.hpp"

namespace lamelab {

void Poly3::add_term(int i, int j, int k, double c) {
    if (i < 0 || j < 0 || k < 0) throw PreconditionError("Poly3: negative exponent");
    auto key = Exponents{i, j, k};
    auto it = terms_.find(key);
    if (it == terms_.end()) {
        if (c != 0.0) terms_[key] = c;
    } else {
        it->second += c;
        if (it->second == 0.0) terms_.erase(it);
    }
}

double Poly3::eval(const Vec3& x) const {
    double s = 0.0;
    for (const auto& [e, c] : terms_) {
        double t = c;
        for (int n = 0; n < e[0]; ++n) t *= x.x;
        for (int n = 0; n < e[1]; ++n) t *= x.y;
        for (int n = 0; n < e[2]; ++n) t *= x.z;
        s += t;
    }
    return s;
}

Poly3 Poly3::derivative(int axis) const {
    Poly3 d;
    for (const auto& [e, c] : terms_) {
        if (e[axis] == 0) continue;
        Exponents f = e;
        f[axis] -= 1;
        d.add_term(f[0], f[1], f[2], c * static_cast<double>(e[axis]));
    }
    return d;
}

Poly3 Poly3::laplacian() const {
    Poly3 l;
    for (int axis = 0; axis < 3; ++axis) {
        Poly3 d2 = derivative(axis).derivative(axis);
        l = l + d2;
    }
    return l;
}

Poly3 Poly3::operator+(const Poly3& o) const {
    Poly3 r = *this;
    for (const auto& [e, c] : o.terms_) r.add_term(e[0], e[1], e[2], c);
    return r;
}

Poly3 Poly3::operator-(const Poly3& o) const {
    Poly3 r = *this;
    for (const auto& [e, c] : o.terms_) r.add_term(e[0], e[1], e[2], -c);
    return r;
}

Poly3 Poly3::operator*(const Poly3& o) const {
    Poly3 r;
    for (const auto& [ea, ca] : terms_)
        for (const auto& [eb, cb] : o.terms_)
            r.add_term(ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2], ca * cb);
    return r;
}

Poly3 Poly3::operator*(double s) const {
    Poly3 r;
    if (s == 0.0) return r;
    for (const auto& [e, c] : terms_) r.terms_[e] = c * s;
    return r;
}

bool Poly3::is_zero(double tol) const {
    for (const auto& [e, c] : terms_)
        if (std::fabs(c) > tol) return false;
    return true;
}

int Poly3::degree() const {
    int d = 0;
    for (const auto& [e, c] : terms_) d = std::max(d, e[0] + e[1] + e[2]);
    return d;
}

DisplacementField polynomial_displacement(const Poly3& u1, const Poly3& u2, const Poly3& u3) {
    std::array<Poly3, 3> u{u1, u2, u3};
    std::array<std::array<Poly3, 3>, 3> grad;
    std::array<std::array<std::array<Poly3, 3>, 3>, 3> hess;
    for (int c = 0; c < 3; ++c)
        for (int j = 0; j < 3; ++j) {
            grad[c][j] = u[c].derivative(j);
            for (int i = 0; i < 3; ++i) hess[c][i][j] = grad[c][j].derivative(i);
        }

    return {[u](const Vec3& x) { return Vec3{u[0].eval(x), u[1].eval(x), u[2].eval(x)}; },
            [grad](const Vec3& x) {
                Mat3 J;
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) J(i, j) = grad[i][j].eval(x);
                return J;
            },
            [hess](const Vec3& x) {
                Hess3 H;
                for (int c = 0; c < 3; ++c)
                    for (int i = 0; i < 3; ++i)
                        for (int j = 0; j < 3; ++j) H[c](i, j) = hess[c][i][j].eval(x);
                return H;
            }};
}

DisplacementField random_polynomial_displacement(int max_degree, std::uint64_t seed) {
    if (max_degree < 0) throw PreconditionError("random_polynomial_displacement: bad degree");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::array<Poly3, 3> comps;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i <= max_degree; ++i)
            for (int j = 0; j + i <= max_degree; ++j)
                for (int k = 0; k + i + j <= max_degree; ++k)
                    comps[c].add_term(i, j, k, unit(rng));
    return polynomial_displacement(comps[0], comps[1], comps[2]);
}

} // namespace lamelab
