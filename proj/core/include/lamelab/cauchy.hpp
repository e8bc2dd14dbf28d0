#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lamelab/fd_solver.hpp"
#include "lamelab/grid_field.hpp"
#include "lamelab/quadrature.hpp"

namespace lamelab {

/// Cauchy pair on the inner sphere gamma = {|x| = theta}: u-trace f0 and
/// full-gradient trace f1 at the angular quadrature nodes.
struct CauchyData {
    double theta = 0.0;
    std::vector<QuadNode> nodes; // sphere rule, weights sum to 4 pi theta^2
    std::vector<Vec3> f0;
    std::vector<Mat3> f1;
    double noise_level = 0.0;    // zeta_rel as requested
    double zeta0 = 0.0;          // weighted l2(gamma) norm of the injected noise
};

/// Exact traces of u_exact on gamma, then independent uniform noise per
/// sample component with amplitude sqrt(3) * zeta_rel * (per-trace component
/// rms), so the expected relative perturbation is zeta_rel per trace.  A
/// zero trace stays exact (relative scaling of zero).  Deterministic in
/// seed.
CauchyData make_cauchy_data(const DisplacementField& u_exact, double theta, int n_p, int n_a,
                            double zeta_rel, std::uint64_t seed);

/// Quadratic objective pieces; total = pde + beta * data_misfit
/// + beta * 1e-2 * outer.
struct CauchyTerms {
    double total = 0.0;
    double pde = 0.0;         // h^3 sum over interior annulus nodes of |Lt_h u|^2
    double data_misfit = 0.0; // surface-weighted gamma misfit, both traces
    double outer = 0.0;       // soft zero on the outer shell, surface-weighted
};

CauchyTerms cauchy_objective(const CoefficientPair& coeffs, const CauchyData& data, double r_out,
                             double beta, const GridFn& u);

/// Quasi-reversibility continuation: minimize
///   J(u) = |Lt_h u|^2(G) + beta * |traces(u) - data|^2(gamma)
///          + beta * 1e-2 * |u|^2(outer shell)
/// over grid fields supported near the annulus, by preconditioned CG on the
/// normal equations to relative residual tol.  The grid box must pad
/// B_{r_out} by at least one spacing on every side.  Throws SolverError
/// (with a residual-history tail in the message) when the iteration cap is
/// hit.
GridSolution continue_solution(const CoefficientPair& coeffs, const CauchyData& data, double r_out,
                               const Grid3& grid, double beta, double tol);

/// Geometric candidate grid for the discrepancy principle.
struct BetaRule {
    double beta_min = 1.0;
    double beta_max = 1e4;
    int count = 5;
};

struct StabilityReport {
    std::vector<double> zeta_rel; // requested relative noise levels
    std::vector<double> zeta0;    // measured data-perturbation norms
    std::vector<double> errors;   // |u_rec - u_exact|_{l2(omega)}
    std::vector<double> betas;    // discrepancy-selected weights
    double m0 = 0.0;              // discrete H1(G) norm of the exact solution
    double eps_emp = 0.0;         // slope of ln error vs ln zeta0
    double theta = 0.0;           // omega = {theta < |x| < theta1}
    double theta1 = 0.0;
    bool holder_consistent = false;
    std::string verdict;          // "Hoelder-consistent" or "inconclusive"
};

/// Noise sweep: per level, data generation (seed + level index), beta by
/// discrepancy principle (candidate solves on a 2h selection grid when the
/// dims allow exact coarsening), continuation on the given grid, error on
/// the shell omega = {theta < |x| < theta1} with theta1 = sublevel radius
/// of the Carleman weight at phi_star / 2.  Traces use a 12 x 24 sphere
/// rule.  Verdict "Hoelder-consistent" iff eps_emp in (0.05, 1.05] and the
/// errors are nonincreasing in zeta0 up to factor-1.5 local violations.
StabilityReport stability_experiment(const CoefficientPair& coeffs,
                                     const DisplacementField& u_exact, double theta, double r_out,
                                     double s, const std::vector<double>& zeta_list,
                                     const Grid3& grid, const BetaRule& rule, std::uint64_t seed);

} // namespace lamelab
