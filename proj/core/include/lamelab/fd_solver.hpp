#pragma once

#include <string>

#include "lamelab/grid_field.hpp"
#include "lamelab/quadrature.hpp"

namespace lamelab {

/// Discrete Dirichlet solution with solver metadata.
struct GridSolution {
    GridFn values;
    double residual_norm = 0.0;  // relative l2 residual reached by CG
    int iterations = 0;
    double tolerance = 0.0;
    bool converged = false;
};

/// Node samples of the coefficient pair, reused across stencil applications.
struct CoefficientGrid {
    Grid3 grid;
    std::vector<double> mu;
    std::vector<double> lambda;
};

CoefficientGrid sample_coefficients(const CoefficientPair& coeffs, const Grid3& grid);

/// y = A x for the symmetric discrete energy
///   sum_faces h^3 2 mu_f (d_n u_n)^2 / 2-form + shear on edge midpoints
///   + lambda (div u)^2 on cell centers,
/// all coefficients averaged onto the stencil midpoints.  A is SPD after
/// Dirichlet elimination and -A u / h^3 is a second-order flux-form
/// discretization of the full operator at interior nodes.
GridFn apply_energy_op(const CoefficientGrid& cg, const GridFn& x);

/// Exact diagonal of A (for Jacobi preconditioning).
GridFn energy_op_diagonal(const CoefficientGrid& cg);

/// Discrete operator value -A u / h^3 at interior nodes, zero on the
/// boundary layer.
GridFn apply_stencil(const CoefficientGrid& cg, const GridFn& u);

/// Dirichlet solve of Lt u = f on the grid box, u = g on the boundary
/// layer.  Requires lambda >= 0 on the box (checked at the nodes).  CG with
/// Jacobi preconditioning, iteration cap 20 sqrt(#unknowns); throws
/// SolverError carrying the final residual if the cap is hit.
GridSolution solve_dirichlet(const CoefficientPair& coeffs,
                             const std::function<Vec3(const Vec3&)>& f,
                             const std::function<Vec3(const Vec3&)>& g, const Grid3& grid,
                             double tol);

/// H2(B_r) / L2(B_R) with exact jets and the spherical product rule.
double interior_ratio(const DisplacementField& u, const BallSpec& inner, const BallSpec& outer,
                      const ProductBallRule& rule);

/// Same from grid samples via masked central-difference norms.
double interior_ratio(const GridFn& u, const BallSpec& inner, const BallSpec& outer);

/// Little-endian flat binary: int64 dims[3], double spacing, double
/// origin[3], then 3 doubles per node in x-fastest order.  A JSON sidecar
/// (path + ".json") carries the solver metadata.
void save_grid_solution(const GridSolution& sol, const std::string& path);
GridSolution load_grid_solution(const std::string& path);

struct ConvergenceStudy {
    std::vector<double> h_values;
    std::vector<double> l2_errors;
    std::vector<double> ratios;  // ratios[i] = error(h_i) / error(h_{i+1})
};

/// Manufactured Dirichlet study on the axis-aligned box [lo, lo + side]^3:
/// f = Lt u_exact via exact jets, g = u_exact, interior l2 errors per
/// spacing.  divisions lists the cells per axis (so h = side / n).
ConvergenceStudy manufactured_convergence(const CoefficientPair& coeffs,
                                          const DisplacementField& u_exact, const Vec3& lo,
                                          double side, const std::vector<int>& divisions,
                                          double tol);

} // namespace lamelab
