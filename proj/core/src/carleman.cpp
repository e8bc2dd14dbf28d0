#include "lamelab/carleman.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "lamelab/lame_operator.hpp"

namespace lamelab {

double sublevel_radius(const CarlemanWeights& w, double delta) {
    if (!(delta >= 0.0) || !(delta <= w.phi_star()))
        throw PreconditionError("sublevel_radius: delta must lie in [0, phi_star]");
    double rr = w.R * w.R - std::log1p(delta) / w.s;
    return std::sqrt(std::max(0.0, rr));
}

namespace {

// quintic smoothstep and derivatives on [0, 1]
double smooth5(double t) { return t * t * t * (10.0 + t * (-15.0 + 6.0 * t)); }
double smooth5_d(double t) { return 30.0 * t * t * (1.0 - t) * (1.0 - t); }
double smooth5_dd(double t) { return 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t); }

} // namespace

CutoffField cutoff_build(const CarlemanWeights& w, double m) {
    if (!(m > 0.0) || !(m < 0.5 * w.phi_star()))
        throw PreconditionError("cutoff_build: need 0 < m < phi_star / 2");
    const double r1 = sublevel_radius(w, m);       // chi == 1 inside
    const double r0 = sublevel_radius(w, 0.5 * m); // chi == 0 outside, r0 > r1
    const double width = r0 - r1;

    CutoffField out;
    out.r_one = r1;
    out.r_zero = r0;
    out.grad_max = 1.875 / width; // max of smooth5' is 30/16

    auto chi_radial = [r1, r0, width](double r, double& c, double& dc, double& ddc) {
        if (r <= r1) {
            c = 1.0;
            dc = ddc = 0.0;
        } else if (r >= r0) {
            c = dc = ddc = 0.0;
        } else {
            double t = (r - r1) / width;
            c = 1.0 - smooth5(t);
            dc = -smooth5_d(t) / width;
            ddc = -smooth5_dd(t) / (width * width);
        }
    };

    out.chi.value = [chi_radial](const Vec3& x) {
        double c, dc, ddc;
        chi_radial(norm(x), c, dc, ddc);
        return c;
    };
    out.chi.gradient = [chi_radial](const Vec3& x) {
        double r = norm(x);
        double c, dc, ddc;
        chi_radial(r, c, dc, ddc);
        if (r == 0.0 || dc == 0.0) return Vec3{};
        return x * (dc / r);
    };
    out.chi.hessian = [chi_radial](const Vec3& x) {
        double r = norm(x);
        double c, dc, ddc;
        chi_radial(r, c, dc, ddc);
        Mat3 H;
        if (r == 0.0 || (dc == 0.0 && ddc == 0.0)) return H;
        Vec3 n = x * (1.0 / r);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double nn = n[i] * n[j];
                double kron = (i == j) ? 1.0 : 0.0;
                H(i, j) = ddc * nn + dc * (kron - nn) / r;
            }
        return H;
    };
    return out;
}

namespace {

void check_compact_support(const DisplacementField& u, const CarlemanWeights& w) {
    const double tol = 1e-8;
    for (double radius : {w.theta, w.R}) {
        auto samples = sphere_nodes({}, radius, 6, 12);
        for (const auto& qn : samples) {
            double worst = norm_inf(u.value(qn.point));
            worst = std::max(worst, norm_inf(u.jacobian(qn.point)));
            worst = std::max(worst, norm_inf(u.hessians(qn.point)));
            if (worst > tol) {
                std::ostringstream os;
                os << "carleman_sides: field support reaches the annulus boundary |x| = "
                   << radius << " (magnitude " << worst << " at (" << qn.point.x << ", "
                   << qn.point.y << ", " << qn.point.z << "))";
                throw PreconditionError(os.str());
            }
        }
    }
}

} // namespace

CarlemanSides carleman_sides(const CoefficientPair& coeffs, const DisplacementField& u,
                             const CarlemanWeights& w, const ProductBallRule& rule, double tau) {
    if (!(tau > 0.0)) throw PreconditionError("carleman_sides: need tau > 0");
    check_compact_support(u, w);

    AnnulusSpec dom = w.domain();
    const double s = w.s;

    auto log_w_plus = [&w, tau, s](const Vec3& x) {
        double psi = w.psi(x);
        return 2.0 * tau * w.phi(x) + 2.0 * s * psi;
    };
    auto log_w_mid = [&w, tau](const Vec3& x) { return 2.0 * tau * w.phi(x); };
    auto log_w_minus = [&w, tau, s](const Vec3& x) {
        double psi = w.psi(x);
        return 2.0 * tau * w.phi(x) - 2.0 * s * psi;
    };

    CarlemanSides sides;
    sides.t1 = tau * tau * s * s * s * s *
               weighted_l2_annulus_logw(
                   [&u](const Vec3& x) {
                       Vec3 v = u.value(x);
                       return dot(v, v);
                   },
                   log_w_plus, dom, rule);
    sides.t2 = s * s *
               weighted_l2_annulus_logw(
                   [&u](const Vec3& x) { return frob2(u.jacobian(x)); }, log_w_mid, dom, rule);
    sides.t3 = (1.0 / (tau * tau)) *
               weighted_l2_annulus_logw(
                   [&u](const Vec3& x) { return frob2(u.hessians(x)); }, log_w_minus, dom, rule);
    sides.rhs = weighted_l2_annulus_logw(
        [&coeffs, &u](const Vec3& x) {
            Vec3 lu = apply_lame_principal(coeffs, u, x);
            return dot(lu, lu);
        },
        log_w_mid, dom, rule);
    return sides;
}

std::vector<CarlemanScanRow> carleman_scan(const CoefficientPair& coeffs,
                                           const DisplacementField& u, const CarlemanWeights& w,
                                           const ProductBallRule& rule,
                                           const std::vector<double>& taus) {
    if (taus.empty()) throw PreconditionError("carleman_scan: empty tau list");
    std::vector<CarlemanScanRow> rows;
    rows.reserve(taus.size());
    for (double tau : taus) {
        CarlemanSides s = carleman_sides(coeffs, u, w, rule, tau);
        double num = s.t1 + s.t2 + s.t3;
        double ratio = s.rhs > 0.0 ? num / s.rhs : std::numeric_limits<double>::infinity();
        rows.push_back({tau, s.t1, s.t2, s.t3, s.rhs, ratio});
    }
    return rows;
}

DisplacementField bump_displacement(double theta, double R, const Vec3& direction) {
    if (!(theta > 0.0) || !(theta < R))
        throw PreconditionError("bump_displacement: need 0 < theta < R");
    const double c = 1.0 / std::pow(0.5 * (R - theta), 6.0);

    auto val = [theta, R, c](double r) {
        if (r <= theta || r >= R) return 0.0;
        double w1 = r - theta, w2 = R - r;
        return c * w1 * w1 * w1 * w2 * w2 * w2;
    };
    auto d1 = [theta, R, c](double r) {
        if (r <= theta || r >= R) return 0.0;
        double w1 = r - theta, w2 = R - r;
        return 3.0 * c * w1 * w1 * w2 * w2 * (w2 - w1);
    };
    auto d2 = [theta, R, c](double r) {
        if (r <= theta || r >= R) return 0.0;
        double w1 = r - theta, w2 = R - r;
        return 6.0 * c * w1 * w2 * ((w2 - w1) * (w2 - w1) - w1 * w2);
    };
    return radial_profile_field(val, d1, d2, direction);
}

} // namespace lamelab
