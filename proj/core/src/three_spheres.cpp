#include "lamelab/three_spheres.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lamelab/carleman.hpp"

namespace lamelab {

namespace {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw EvaluationError("least_squares: abscissae are collinear");
    LineFit fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    return fit;
}

} // namespace

ThreeSpheresReport verify_three_spheres(const DisplacementField& u, const ThreeRadii& radii,
                                        const ProductBallRule& rule) {
    ThreeSpheresReport rep;
    rep.n1 = l2_mass_ball(u, BallSpec({}, radii.r1), rule);
    rep.n2 = l2_mass_ball(u, BallSpec({}, radii.r2), rule);
    rep.nR = l2_mass_ball(u, BallSpec({}, radii.r_out), rule);
    rep.degenerate = !(rep.n1 > 0.0 && rep.n1 < rep.n2 && rep.n2 < rep.nR);
    if (!rep.degenerate) rep.sigma_star = std::log(rep.nR / rep.n2) / std::log(rep.nR / rep.n1);
    return rep;
}

SigmaCurve fit_sigma_c(const std::vector<ThreeSpheresReport>& reports, int n_sigma) {
    if (n_sigma < 1) throw PreconditionError("fit_sigma_c: need n_sigma >= 1");
    std::vector<const ThreeSpheresReport*> live;
    for (const auto& r : reports)
        if (!r.degenerate) live.push_back(&r);
    if (live.empty()) throw PreconditionError("fit_sigma_c: every report is degenerate");

    auto c_at = [&](double sigma) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto* r : live) {
            double log_c = std::log(r->n2) - sigma * std::log(r->n1) - (1.0 - sigma) * std::log(r->nR);
            best = std::max(best, log_c);
        }
        return std::exp(best);
    };

    SigmaCurve curve;
    curve.min_sigma_star = live.front()->sigma_star;
    for (const auto* r : live) curve.min_sigma_star = std::min(curve.min_sigma_star, r->sigma_star);
    curve.points.reserve(static_cast<std::size_t>(n_sigma));
    for (int j = 1; j <= n_sigma; ++j) {
        double sigma = static_cast<double>(j) / (n_sigma + 1);
        curve.points.push_back({sigma, c_at(sigma)});
    }
    curve.c_at_min_sigma = c_at(curve.min_sigma_star);
    return curve;
}

IterationPlan iteration_plan(double r1, double r2, double r_out, double eps, double s) {
    if (!(r1 > 0.0 && r1 < r2 && r2 < r_out))
        throw PreconditionError("iteration_plan: need 0 < R1 < R2 < R_out");
    if (!(eps > 0.0 && eps < 1.0))
        throw PreconditionError("iteration_plan: eps must lie in (0,1); eps = 1 degenerates to sigma = 1");
    if (!(s > 0.0)) throw PreconditionError("iteration_plan: need s > 0");

    IterationPlan p;
    p.r1 = r1;
    p.r2 = r2;
    p.r_out = r_out;
    p.eps = eps;
    p.s = s;

    p.r0 = 0.5 * (r_out + r2);
    p.theta = r2 * r_out / p.r0;

    CarlemanWeights w(r_out, p.theta, s);
    p.theta1 = sublevel_radius(w, 0.5 * w.phi_star());
    p.theta2 = 0.5 * (p.theta + p.theta1);
    p.a = p.theta2 / p.theta;
    p.r = 0.5 * r1;

    double ln_a = std::log(p.a);
    int n = static_cast<int>(std::ceil(std::log(r2 / p.r) / ln_a));
    // pin the bracket r a^(N-1) < r2 <= r a^N against rounding in the ceil
    while (n > 1 && r2 <= p.r * std::pow(p.a, n - 1)) --n;
    while (r2 > p.r * std::pow(p.a, n)) ++n;
    p.n = n;

    p.sigma = std::pow(eps, n);
    p.eta = std::exp(1.0 / n + 1.0);
    p.inv_ln_a = 1.0 / ln_a;
    return p;
}

double chain_bound(const IterationPlan& plan, double e1, double mass_r) {
    if (!(e1 > 0.0)) throw PreconditionError("chain_bound: need E1 > 0");
    if (!(mass_r >= 0.0)) throw PreconditionError("chain_bound: need mass_r >= 0");
    if (mass_r == 0.0) return 0.0;
    double sigma_n = std::pow(plan.eps, plan.n);
    return std::pow(e1, (1.0 - sigma_n) / (1.0 - plan.eps)) * std::pow(mass_r, sigma_n);
}

ThetaContraction theta_contraction(double theta, double r_out, double s) {
    CarlemanWeights w(r_out, theta, s);
    ThetaContraction t;
    t.theta = theta;
    t.theta1 = sublevel_radius(w, 0.5 * w.phi_star());
    t.theta2 = 0.5 * (theta + t.theta1);
    t.a = t.theta2 / theta;
    t.inv_ln_a = 1.0 / std::log(t.a);
    return t;
}

VanishingProfile vanishing_profile(const DisplacementField& u, const Vec3& x0,
                                   const std::vector<double>& radii,
                                   const ProductBallRule& rule) {
    if (radii.size() < 2) throw PreconditionError("vanishing_profile: need at least two radii");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] > 0.0)) throw PreconditionError("vanishing_profile: radii must be positive");
        if (i > 0 && !(radii[i] > radii[i - 1]))
            throw PreconditionError("vanishing_profile: radii must be strictly increasing");
    }

    VanishingProfile prof;
    prof.radii = radii;
    prof.masses.reserve(radii.size());
    for (double r : radii) prof.masses.push_back(l2_mass_ball(u, BallSpec(x0, r), rule));

    for (double m : prof.masses) {
        if (m <= 0.0) {
            prof.classification = "identically zero on smallest ball";
            return prof;
        }
    }

    std::vector<double> lr(radii.size()), lm(radii.size());
    for (std::size_t i = 0; i < radii.size(); ++i) {
        lr[i] = std::log(radii[i]);
        lm[i] = std::log(prof.masses[i]);
    }
    prof.slope = least_squares(lr, lm).slope;

    // local slopes rise without bound toward r = 0 for exponential-type
    // profiles and stay flat for homogeneous ones
    double slope_small = (lm[1] - lm[0]) / (lr[1] - lr[0]);
    double slope_large = (lm.back() - lm[lm.size() - 2]) / (lr.back() - lr[lr.size() - 2]);
    double drift = slope_small - slope_large;

    double m_max = prof.masses.back();
    std::vector<double> ex, ey;
    for (std::size_t i = 0; i + 1 < radii.size(); ++i) {
        double ratio = prof.masses[i] / m_max;
        if (ratio < 0.5) {
            ex.push_back(lr[i]);
            ey.push_back(std::log(-std::log(ratio)));
        }
    }
    if (ex.size() >= 2) {
        LineFit fit = least_squares(ex, ey);
        prof.exp_eps = -fit.slope;
        prof.exp_c = std::exp(fit.intercept);
        prof.exp_fit_valid = true;
    }

    constexpr double drift_tol = 0.75;
    if (drift > drift_tol && prof.exp_fit_valid && prof.exp_eps > 0.0) {
        prof.classification = "exponential-type";
        return prof;
    }
    int k = static_cast<int>(std::lround(0.5 * (prof.slope - 3.0)));
    if (k <= 0) {
        prof.classification = "nonvanishing";
    } else {
        prof.poly_order = k;
        prof.classification = "polynomial order " + std::to_string(k);
    }
    return prof;
}

DecayLimitReport decay_limit_check(double eps, double inv_ln_a, double c_tilde,
                                   const std::vector<double>& r1_list) {
    if (r1_list.empty()) throw PreconditionError("decay_limit_check: empty R1 list");
    for (std::size_t i = 0; i < r1_list.size(); ++i) {
        if (!(r1_list[i] > 0.0))
            throw PreconditionError("decay_limit_check: R1 values must be positive");
        if (i > 0 && !(r1_list[i] < r1_list[i - 1]))
            throw PreconditionError("decay_limit_check: R1 list must be strictly decreasing");
    }

    DecayLimitReport rep;
    rep.eps = eps;
    rep.inv_ln_a = inv_ln_a;
    rep.c_tilde = c_tilde;
    rep.r1_list = r1_list;

    double delta = eps - inv_ln_a;
    for (double r1 : r1_list) {
        double factor = std::exp(-std::exp(-2.0) * std::pow(r1, -delta));
        rep.decay_factors.push_back(factor);
        rep.values.push_back(c_tilde / (r1 * r1 * r1 * r1) * factor);
    }

    bool decreasing = true;
    for (std::size_t i = 1; i < rep.decay_factors.size(); ++i)
        if (!(rep.decay_factors[i] <= rep.decay_factors[i - 1])) decreasing = false;
    rep.verdict = (delta > 0.0 && decreasing) ? "-> 0" : "no conclusion";
    return rep;
}

} // namespace lamelab
