#pragma once

#include <array>
#include <cmath>

namespace lamelab {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline double norm_inf(const Vec3& v) {
    return std::max({std::fabs(v.x), std::fabs(v.y), std::fabs(v.z)});
}

/// Dense 3x3 matrix, row-major.  For displacement jacobians the convention
/// is m(i, j) = d u_i / d x_j.
struct Mat3 {
    std::array<double, 9> a{};

    double& operator()(int i, int j) { return a[3 * i + j]; }
    double operator()(int i, int j) const { return a[3 * i + j]; }

    Mat3 operator+(const Mat3& o) const {
        Mat3 r;
        for (int k = 0; k < 9; ++k) r.a[k] = a[k] + o.a[k];
        return r;
    }
    Mat3 operator-(const Mat3& o) const {
        Mat3 r;
        for (int k = 0; k < 9; ++k) r.a[k] = a[k] - o.a[k];
        return r;
    }
    Mat3 operator*(double s) const {
        Mat3 r;
        for (int k = 0; k < 9; ++k) r.a[k] = a[k] * s;
        return r;
    }

    Mat3 transpose() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }

    double trace() const { return a[0] + a[4] + a[8]; }
};

inline Vec3 mat_vec(const Mat3& m, const Vec3& v) {
    return {m(0, 0) * v.x + m(0, 1) * v.y + m(0, 2) * v.z,
            m(1, 0) * v.x + m(1, 1) * v.y + m(1, 2) * v.z,
            m(2, 0) * v.x + m(2, 1) * v.y + m(2, 2) * v.z};
}

inline double frob2(const Mat3& m) {
    double s = 0.0;
    for (double e : m.a) s += e * e;
    return s;
}

inline double norm_inf(const Mat3& m) {
    double s = 0.0;
    for (double e : m.a) s = std::max(s, std::fabs(e));
    return s;
}

/// Hessian stack of a vector field: hess[c](i, j) = d2 u_c / dx_i dx_j.
using Hess3 = std::array<Mat3, 3>;

inline double norm_inf(const Hess3& h) {
    return std::max({norm_inf(h[0]), norm_inf(h[1]), norm_inf(h[2])});
}

inline double frob2(const Hess3& h) { return frob2(h[0]) + frob2(h[1]) + frob2(h[2]); }

} // namespace lamelab
