#include "lamelab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lamelab/fields.hpp"

namespace lamelab {

namespace {

// Monic three-term recurrence p_{k+1} = (x - a_k) p_k - b_k p_{k-1};
// b[0] holds the total mass of the weight.
struct Recurrence {
    std::vector<double> a, b;
};

Recurrence legendre_recurrence(int n) {
    Recurrence r;
    r.a.assign(n, 0.0);
    r.b.assign(n, 0.0);
    r.b[0] = 2.0;
    for (int k = 1; k < n; ++k) {
        double kk = static_cast<double>(k);
        r.b[k] = kk * kk / (4.0 * kk * kk - 1.0);
    }
    return r;
}

// Jacobi weight (1 - x)^0 (1 + x)^2.
Recurrence jacobi_r2_recurrence(int n) {
    Recurrence r;
    r.a.assign(n, 0.0);
    r.b.assign(n, 0.0);
    for (int k = 0; k < n; ++k) {
        double kk = static_cast<double>(k);
        r.a[k] = 1.0 / ((kk + 1.0) * (kk + 2.0));
    }
    r.b[0] = 8.0 / 3.0;
    for (int k = 1; k < n; ++k) {
        double kk = static_cast<double>(k);
        r.b[k] = kk * kk * (kk + 2.0) * (kk + 2.0) /
                 ((kk + 1.0) * (kk + 1.0) * (2.0 * kk + 1.0) * (2.0 * kk + 3.0));
    }
    return r;
}

// Number of eigenvalues of the Jacobi matrix strictly below sigma
// (Sturm count on the LDL^T recurrence).
int eigen_count_below(const Recurrence& rec, int n, double sigma) {
    int count = 0;
    double q = rec.a[0] - sigma;
    if (q < 0.0) ++count;
    for (int i = 1; i < n; ++i) {
        double denom = q;
        if (denom == 0.0) denom = 1e-300;
        q = (rec.a[i] - sigma) - rec.b[i] / denom;
        if (q < 0.0) ++count;
    }
    return count;
}

GaussRule1D gauss_from_recurrence(const Recurrence& rec, int n) {
    GaussRule1D rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);

    // Gershgorin bounds.
    std::vector<double> off(n, 0.0);
    for (int i = 1; i < n; ++i) off[i] = std::sqrt(rec.b[i]);
    double lo = rec.a[0], hi = rec.a[0];
    for (int i = 0; i < n; ++i) {
        double reach = (i > 0 ? off[i] : 0.0) + (i + 1 < n ? off[i + 1] : 0.0);
        lo = std::min(lo, rec.a[i] - reach);
        hi = std::max(hi, rec.a[i] + reach);
    }
    lo -= 1e-12;
    hi += 1e-12;

    for (int m = 0; m < n; ++m) {
        double a = lo, b = hi;
        // count(a) <= m and count(b) >= m + 1 throughout.
        for (int it = 0; it < 120 && b - a > 1e-16 * std::max(1.0, std::fabs(a) + std::fabs(b)); ++it) {
            double mid = 0.5 * (a + b);
            if (eigen_count_below(rec, n, mid) <= m)
                a = mid;
            else
                b = mid;
        }
        rule.nodes[m] = 0.5 * (a + b);
    }

    // Christoffel numbers from the orthonormal recurrence:
    // w = 1 / sum_k ptilde_k(x)^2.
    for (int m = 0; m < n; ++m) {
        double x = rule.nodes[m];
        double pm1 = 0.0;
        double p0 = 1.0 / std::sqrt(rec.b[0]);
        double s = p0 * p0;
        double prev = p0;
        for (int k = 0; k + 1 < n; ++k) {
            double bk = (k == 0) ? 0.0 : std::sqrt(rec.b[k]);
            double bk1 = std::sqrt(rec.b[k + 1]);
            double next = ((x - rec.a[k]) * prev - bk * pm1) / bk1;
            s += next * next;
            pm1 = prev;
            prev = next;
        }
        rule.weights[m] = 1.0 / s;
    }
    return rule;
}

} // namespace

GaussRule1D gauss_legendre(int n) {
    if (n < 1) throw PreconditionError("gauss_legendre: need n >= 1");
    return gauss_from_recurrence(legendre_recurrence(n), n);
}

GaussRule1D gauss_jacobi_r2(int n) {
    if (n < 1) throw PreconditionError("gauss_jacobi_r2: need n >= 1");
    return gauss_from_recurrence(jacobi_r2_recurrence(n), n);
}

double pairwise_sum(std::vector<double>& terms) {
    if (terms.empty()) return 0.0;
    std::size_t n = terms.size();
    while (n > 1) {
        std::size_t half = n / 2;
        for (std::size_t i = 0; i < half; ++i) terms[i] = terms[2 * i] + terms[2 * i + 1];
        if (n % 2 == 1) {
            terms[half] = terms[n - 1];
            n = half + 1;
        } else {
            n = half;
        }
    }
    return terms[0];
}

namespace {

std::vector<QuadNode> product_nodes(const Vec3& center, const std::vector<double>& radial_nodes,
                                    const std::vector<double>& radial_weights, int n_p, int n_a) {
    GaussRule1D polar = gauss_legendre(n_p);
    const double dphi = 2.0 * M_PI / static_cast<double>(n_a);

    std::vector<QuadNode> nodes;
    nodes.reserve(radial_nodes.size() * static_cast<std::size_t>(n_p) * n_a);
    for (std::size_t ir = 0; ir < radial_nodes.size(); ++ir) {
        double rho = radial_nodes[ir];
        double wr = radial_weights[ir];
        for (int ip = 0; ip < n_p; ++ip) {
            double u = polar.nodes[ip];
            double su = std::sqrt(std::max(0.0, 1.0 - u * u));
            double wu = polar.weights[ip];
            for (int ia = 0; ia < n_a; ++ia) {
                double phi = dphi * static_cast<double>(ia);
                Vec3 p{center.x + rho * su * std::cos(phi),
                       center.y + rho * su * std::sin(phi),
                       center.z + rho * u};
                nodes.push_back({p, wr * wu * dphi});
            }
        }
    }
    return nodes;
}

std::string node_label(const Vec3& p) {
    std::ostringstream os;
    os << "(" << p.x << ", " << p.y << ", " << p.z << ")";
    return os.str();
}

} // namespace

std::vector<QuadNode> ball_nodes(const BallSpec& ball, const ProductBallRule& rule) {
    GaussRule1D radial = gauss_jacobi_r2(rule.n_r);
    const double half = 0.5 * ball.radius;
    std::vector<double> rho(radial.nodes.size()), w(radial.nodes.size());
    for (std::size_t i = 0; i < radial.nodes.size(); ++i) {
        rho[i] = half * (radial.nodes[i] + 1.0);
        w[i] = half * half * half * radial.weights[i];
    }
    return product_nodes(ball.center, rho, w, rule.n_p, rule.n_a);
}

std::vector<QuadNode> annulus_nodes(const AnnulusSpec& ann, const ProductBallRule& rule) {
    GaussRule1D radial = gauss_legendre(rule.n_r);
    const double mid = 0.5 * (ann.r_inner + ann.r_outer);
    const double half = 0.5 * (ann.r_outer - ann.r_inner);
    std::vector<double> rho(radial.nodes.size()), w(radial.nodes.size());
    for (std::size_t i = 0; i < radial.nodes.size(); ++i) {
        rho[i] = mid + half * radial.nodes[i];
        w[i] = half * radial.weights[i] * rho[i] * rho[i];
    }
    return product_nodes(ann.center, rho, w, rule.n_p, rule.n_a);
}

std::vector<QuadNode> sphere_nodes(const Vec3& center, double radius, int n_p, int n_a) {
    if (!(radius > 0.0)) throw PreconditionError("sphere_nodes: radius must be positive");
    if (n_p < 2 || n_a < 4) throw PreconditionError("sphere_nodes: need n_p >= 2, n_a >= 4");
    std::vector<double> rho{radius}, w{radius * radius};
    return product_nodes(center, rho, w, n_p, n_a);
}

namespace {

double sum_nodes(const std::function<double(const Vec3&)>& f, const std::vector<QuadNode>& nodes,
                 const char* what) {
    std::vector<double> terms;
    terms.reserve(nodes.size());
    for (const auto& qn : nodes) {
        double v = f(qn.point);
        if (!std::isfinite(v))
            throw EvaluationError(std::string(what) + ": non-finite integrand at node " +
                                  node_label(qn.point));
        terms.push_back(qn.weight * v);
    }
    return pairwise_sum(terms);
}

} // namespace

double integrate_ball(const std::function<double(const Vec3&)>& f, const BallSpec& ball,
                      const ProductBallRule& rule) {
    return sum_nodes(f, ball_nodes(ball, rule), "integrate_ball");
}

double weighted_l2_annulus(const std::function<double(const Vec3&)>& g,
                           const std::function<double(const Vec3&)>& w,
                           const AnnulusSpec& ann, const ProductBallRule& rule) {
    auto nodes = annulus_nodes(ann, rule);
    std::vector<double> terms;
    terms.reserve(nodes.size());
    for (const auto& qn : nodes) {
        double wv = w(qn.point);
        double gv = g(qn.point);
        if (!std::isfinite(wv) || !std::isfinite(gv)) {
            if (!std::isfinite(wv) && std::isfinite(gv))
                throw OverflowError("weighted_l2_annulus: weight overflow at node " +
                                    node_label(qn.point) +
                                    "; rescale the weight in log domain");
            throw EvaluationError("weighted_l2_annulus: non-finite integrand at node " +
                                  node_label(qn.point));
        }
        terms.push_back(qn.weight * wv * gv);
    }
    return pairwise_sum(terms);
}

double weighted_l2_annulus_logw(const std::function<double(const Vec3&)>& g,
                                const std::function<double(const Vec3&)>& log_w,
                                const AnnulusSpec& ann, const ProductBallRule& rule) {
    auto nodes = annulus_nodes(ann, rule);
    std::vector<double> terms;
    terms.reserve(nodes.size());
    for (const auto& qn : nodes) {
        double e = log_w(qn.point);
        if (!std::isfinite(e))
            throw EvaluationError("weighted_l2_annulus_logw: non-finite exponent at node " +
                                  node_label(qn.point));
        if (e > 700.0)
            throw OverflowError("weighted_l2_annulus_logw: exponent " + std::to_string(e) +
                                " at node " + node_label(qn.point) +
                                " would overflow; rescale the computation in log domain");
        double gv = g(qn.point);
        if (!std::isfinite(gv))
            throw EvaluationError("weighted_l2_annulus_logw: non-finite integrand at node " +
                                  node_label(qn.point));
        terms.push_back(qn.weight * std::exp(e) * gv);
    }
    return pairwise_sum(terms);
}

double l2_mass_ball(const DisplacementField& u, const BallSpec& ball,
                    const ProductBallRule& rule) {
    return integrate_ball([&u](const Vec3& x) {
        Vec3 v = u.value(x);
        return dot(v, v);
    }, ball, rule);
}

} // namespace lamelab
