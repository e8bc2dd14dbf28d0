#include "lamelab/fd_solver.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "lamelab/errors.hpp"
#include "lamelab/lame_operator.hpp"
#include "lamelab/version.hpp"

namespace lamelab {

CoefficientGrid sample_coefficients(const CoefficientPair& coeffs, const Grid3& grid) {
    CoefficientGrid cg;
    cg.grid = grid;
    cg.mu.resize(static_cast<std::size_t>(grid.num_nodes()));
    cg.lambda.resize(static_cast<std::size_t>(grid.num_nodes()));
    for (std::int64_t k = 0; k < grid.dims[2]; ++k)
        for (std::int64_t j = 0; j < grid.dims[1]; ++j)
            for (std::int64_t i = 0; i < grid.dims[0]; ++i) {
                Vec3 p = grid.node(i, j, k);
                std::int64_t idx = grid.index(i, j, k);
                cg.mu[idx] = coeffs.mu.value(p);
                cg.lambda[idx] = coeffs.lambda.value(p);
                if (!std::isfinite(cg.mu[idx]) || !std::isfinite(cg.lambda[idx]))
                    throw EvaluationError("sample_coefficients: non-finite coefficient");
            }
    return cg;
}

namespace {

struct Strides {
    std::int64_t s[3];
    explicit Strides(const Grid3& g) : s{1, g.dims[0], g.dims[0] * g.dims[1]} {}
};

} // namespace

GridFn apply_energy_op(const CoefficientGrid& cg, const GridFn& x) {
    const Grid3& g = cg.grid;
    const double h = g.spacing;
    const double w_face = 2.0 * h;        // h^3 * (1/h)^2 * 2
    const double w_edge = h / 4.0;        // h^3 * (1/(2h))^2
    const double w_cell = h / 16.0;       // h^3 * (1/(4h))^2
    Strides st(g);

    GridFn y(g);

    // normal strains on faces: 2 mu_f (d_d u_d)^2
    for (int d = 0; d < 3; ++d) {
        std::int64_t sd = st.s[d];
        std::int64_t lim[3] = {g.dims[0], g.dims[1], g.dims[2]};
        lim[d] -= 1;
        for (std::int64_t k = 0; k < lim[2]; ++k)
            for (std::int64_t j = 0; j < lim[1]; ++j)
                for (std::int64_t i = 0; i < lim[0]; ++i) {
                    std::int64_t p = g.index(i, j, k);
                    double mu_f = 0.5 * (cg.mu[p] + cg.mu[p + sd]);
                    double e = x.data[3 * (p + sd) + d] - x.data[3 * p + d];
                    double t = w_face * mu_f * e;
                    y.data[3 * (p + sd) + d] += t;
                    y.data[3 * p + d] -= t;
                }
    }

    // symmetric shear pairs on in-plane cell centers
    for (int d1 = 0; d1 < 3; ++d1)
        for (int d2 = d1 + 1; d2 < 3; ++d2) {
            std::int64_t s1 = st.s[d1], s2 = st.s[d2];
            std::int64_t lim[3] = {g.dims[0], g.dims[1], g.dims[2]};
            lim[d1] -= 1;
            lim[d2] -= 1;
            for (std::int64_t k = 0; k < lim[2]; ++k)
                for (std::int64_t j = 0; j < lim[1]; ++j)
                    for (std::int64_t i = 0; i < lim[0]; ++i) {
                        std::int64_t p = g.index(i, j, k);
                        double mu_e = 0.25 * (cg.mu[p] + cg.mu[p + s1] + cg.mu[p + s2] +
                                              cg.mu[p + s1 + s2]);
                        // d2-derivative of comp d1 plus d1-derivative of comp d2,
                        // both at the center of the (d1, d2) plaquette
                        double a = (x.data[3 * (p + s2) + d1] + x.data[3 * (p + s1 + s2) + d1] -
                                    x.data[3 * p + d1] - x.data[3 * (p + s1) + d1]);
                        double b = (x.data[3 * (p + s1) + d2] + x.data[3 * (p + s1 + s2) + d2] -
                                    x.data[3 * p + d2] - x.data[3 * (p + s2) + d2]);
                        double t = w_edge * mu_e * (a + b);
                        y.data[3 * (p + s2) + d1] += t;
                        y.data[3 * (p + s1 + s2) + d1] += t;
                        y.data[3 * p + d1] -= t;
                        y.data[3 * (p + s1) + d1] -= t;
                        y.data[3 * (p + s1) + d2] += t;
                        y.data[3 * (p + s1 + s2) + d2] += t;
                        y.data[3 * p + d2] -= t;
                        y.data[3 * (p + s2) + d2] -= t;
                    }
        }

    // lambda (div u)^2 on cell centers
    for (std::int64_t k = 0; k + 1 < g.dims[2]; ++k)
        for (std::int64_t j = 0; j + 1 < g.dims[1]; ++j)
            for (std::int64_t i = 0; i + 1 < g.dims[0]; ++i) {
                std::int64_t p = g.index(i, j, k);
                std::int64_t corner[8];
                double lam = 0.0;
                for (int m = 0; m < 8; ++m) {
                    corner[m] = p + (m & 1 ? st.s[0] : 0) + (m & 2 ? st.s[1] : 0) +
                                (m & 4 ? st.s[2] : 0);
                    lam += cg.lambda[corner[m]];
                }
                lam *= 0.125;

                double div = 0.0;
                for (int m = 0; m < 8; ++m)
                    for (int d = 0; d < 3; ++d) {
                        double sgn = (m & (1 << d)) ? 1.0 : -1.0;
                        div += sgn * x.data[3 * corner[m] + d];
                    }
                double t = w_cell * lam * div;
                for (int m = 0; m < 8; ++m)
                    for (int d = 0; d < 3; ++d) {
                        double sgn = (m & (1 << d)) ? 1.0 : -1.0;
                        y.data[3 * corner[m] + d] += sgn * t;
                    }
            }

    return y;
}

GridFn energy_op_diagonal(const CoefficientGrid& cg) {
    const Grid3& g = cg.grid;
    const double h = g.spacing;
    Strides st(g);
    GridFn diag(g);

    for (int d = 0; d < 3; ++d) {
        std::int64_t sd = st.s[d];
        std::int64_t lim[3] = {g.dims[0], g.dims[1], g.dims[2]};
        lim[d] -= 1;
        for (std::int64_t k = 0; k < lim[2]; ++k)
            for (std::int64_t j = 0; j < lim[1]; ++j)
                for (std::int64_t i = 0; i < lim[0]; ++i) {
                    std::int64_t p = g.index(i, j, k);
                    double mu_f = 0.5 * (cg.mu[p] + cg.mu[p + sd]);
                    diag.data[3 * p + d] += 2.0 * h * mu_f;
                    diag.data[3 * (p + sd) + d] += 2.0 * h * mu_f;
                }
    }

    for (int d1 = 0; d1 < 3; ++d1)
        for (int d2 = d1 + 1; d2 < 3; ++d2) {
            std::int64_t s1 = st.s[d1], s2 = st.s[d2];
            std::int64_t lim[3] = {g.dims[0], g.dims[1], g.dims[2]};
            lim[d1] -= 1;
            lim[d2] -= 1;
            for (std::int64_t k = 0; k < lim[2]; ++k)
                for (std::int64_t j = 0; j < lim[1]; ++j)
                    for (std::int64_t i = 0; i < lim[0]; ++i) {
                        std::int64_t p = g.index(i, j, k);
                        double mu_e = 0.25 * (cg.mu[p] + cg.mu[p + s1] + cg.mu[p + s2] +
                                              cg.mu[p + s1 + s2]);
                        double add = h * mu_e / 4.0;
                        for (std::int64_t q : {p, p + s1, p + s2, p + s1 + s2}) {
                            diag.data[3 * q + d1] += add;
                            diag.data[3 * q + d2] += add;
                        }
                    }
        }

    for (std::int64_t k = 0; k + 1 < g.dims[2]; ++k)
        for (std::int64_t j = 0; j + 1 < g.dims[1]; ++j)
            for (std::int64_t i = 0; i + 1 < g.dims[0]; ++i) {
                std::int64_t p = g.index(i, j, k);
                double lam = 0.0;
                std::int64_t corner[8];
                for (int m = 0; m < 8; ++m) {
                    corner[m] = p + (m & 1 ? st.s[0] : 0) + (m & 2 ? st.s[1] : 0) +
                                (m & 4 ? st.s[2] : 0);
                    lam += cg.lambda[corner[m]];
                }
                lam *= 0.125;
                double add = h * lam / 16.0;
                for (int m = 0; m < 8; ++m)
                    for (int d = 0; d < 3; ++d) diag.data[3 * corner[m] + d] += add;
            }

    return diag;
}

GridFn apply_stencil(const CoefficientGrid& cg, const GridFn& u) {
    const Grid3& g = cg.grid;
    GridFn au = apply_energy_op(cg, u);
    GridFn out(g);
    const double inv_h3 = 1.0 / (g.spacing * g.spacing * g.spacing);
    for (std::int64_t k = 0; k < g.dims[2]; ++k)
        for (std::int64_t j = 0; j < g.dims[1]; ++j)
            for (std::int64_t i = 0; i < g.dims[0]; ++i) {
                if (g.is_boundary(i, j, k)) continue;
                std::int64_t idx = g.index(i, j, k);
                for (int c = 0; c < 3; ++c)
                    out.data[3 * idx + c] = -au.data[3 * idx + c] * inv_h3;
            }
    return out;
}

namespace {

double dot_masked(const std::vector<double>& a, const std::vector<double>& b,
                  const std::vector<std::uint8_t>& free_dof) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (free_dof[i]) s += a[i] * b[i];
    return s;
}

} // namespace

GridSolution solve_dirichlet(const CoefficientPair& coeffs,
                             const std::function<Vec3(const Vec3&)>& f,
                             const std::function<Vec3(const Vec3&)>& g_bc, const Grid3& grid,
                             double tol) {
    if (!(tol > 0.0)) throw PreconditionError("solve_dirichlet: tol must be positive");
    CoefficientGrid cg = sample_coefficients(coeffs, grid);
    for (std::size_t i = 0; i < cg.lambda.size(); ++i) {
        if (!(cg.mu[i] > 0.0))
            throw PreconditionError("solve_dirichlet: mu must be positive on the grid");
        if (cg.lambda[i] < 0.0)
            throw PreconditionError("solve_dirichlet: lambda must be nonnegative on the grid");
    }

    const double h3 = grid.spacing * grid.spacing * grid.spacing;
    const std::int64_t n_nodes = grid.num_nodes();

    GridFn u(grid);
    GridFn b(grid);
    std::vector<std::uint8_t> free_dof(static_cast<std::size_t>(3 * n_nodes), 0);
    std::int64_t n_free = 0;
    for (std::int64_t k = 0; k < grid.dims[2]; ++k)
        for (std::int64_t j = 0; j < grid.dims[1]; ++j)
            for (std::int64_t i = 0; i < grid.dims[0]; ++i) {
                std::int64_t idx = grid.index(i, j, k);
                Vec3 p = grid.node(i, j, k);
                if (grid.is_boundary(i, j, k)) {
                    u.set(idx, g_bc(p));
                } else {
                    b.set(idx, f(p) * (-h3));
                    for (int c = 0; c < 3; ++c) free_dof[3 * idx + c] = 1;
                    n_free += 3;
                }
            }

    GridFn diag = energy_op_diagonal(cg);

    auto residual = [&](const GridFn& uu) {
        GridFn au = apply_energy_op(cg, uu);
        GridFn r(grid);
        for (std::size_t m = 0; m < r.data.size(); ++m)
            if (free_dof[m]) r.data[m] = b.data[m] - au.data[m];
        return r;
    };

    GridFn r = residual(u);
    double r0 = std::sqrt(dot_masked(r.data, r.data, free_dof));
    GridSolution sol;
    sol.tolerance = tol;
    if (r0 == 0.0) {
        sol.values = u;
        sol.converged = true;
        return sol;
    }

    const int cap = static_cast<int>(20.0 * std::sqrt(static_cast<double>(n_free))) + 1;

    GridFn z(grid), p_dir(grid), ap(grid);
    for (std::size_t m = 0; m < z.data.size(); ++m)
        if (free_dof[m]) z.data[m] = r.data[m] / diag.data[m];
    p_dir = z;
    double rz = dot_masked(r.data, z.data, free_dof);
    double rel = 1.0;
    int it = 0;
    for (; it < cap; ++it) {
        rel = std::sqrt(dot_masked(r.data, r.data, free_dof)) / r0;
        if (rel <= tol) break;
        ap = apply_energy_op(cg, p_dir);
        double paq = dot_masked(p_dir.data, ap.data, free_dof);
        if (!(paq > 0.0))
            throw SolverError("solve_dirichlet: CG broke down (non-positive curvature)", rel, it);
        double alpha = rz / paq;
        for (std::size_t m = 0; m < u.data.size(); ++m)
            if (free_dof[m]) {
                u.data[m] += alpha * p_dir.data[m];
                r.data[m] -= alpha * ap.data[m];
            }
        for (std::size_t m = 0; m < z.data.size(); ++m)
            if (free_dof[m]) z.data[m] = r.data[m] / diag.data[m];
        double rz_new = dot_masked(r.data, z.data, free_dof);
        double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t m = 0; m < p_dir.data.size(); ++m)
            if (free_dof[m]) p_dir.data[m] = z.data[m] + beta * p_dir.data[m];
    }

    if (rel > tol)
        throw SolverError("solve_dirichlet: CG did not reach tolerance within the cap", rel, it);

    sol.values = u;
    sol.residual_norm = rel;
    sol.iterations = it;
    sol.converged = true;
    return sol;
}

double interior_ratio(const DisplacementField& u, const BallSpec& inner, const BallSpec& outer,
                      const ProductBallRule& rule) {
    if (!(inner.radius < outer.radius))
        throw PreconditionError("interior_ratio: inner radius must be below outer");
    double h2_sq = integrate_ball(
        [&u](const Vec3& x) {
            Vec3 v = u.value(x);
            Mat3 J = u.jacobian(x);
            Hess3 H = u.hessians(x);
            return dot(v, v) + frob2(J) + frob2(H);
        },
        inner, rule);
    double l2_sq = l2_mass_ball(u, outer, rule);
    if (!(l2_sq > 0.0)) throw EvaluationError("interior_ratio: denominator mass vanishes");
    return std::sqrt(h2_sq) / std::sqrt(l2_sq);
}

double interior_ratio(const GridFn& u, const BallSpec& inner, const BallSpec& outer) {
    if (!(inner.radius < outer.radius))
        throw PreconditionError("interior_ratio: inner radius must be below outer");
    SobolevNorms inner_n = sobolev_norms_grid(u, make_ball_mask(u.grid, inner));
    SobolevNorms outer_n = sobolev_norms_grid(u, make_ball_mask(u.grid, outer));
    double h2 = std::sqrt(inner_n.l2 * inner_n.l2 + inner_n.h1_semi * inner_n.h1_semi +
                          inner_n.h2_semi * inner_n.h2_semi);
    if (!(outer_n.l2 > 0.0)) throw EvaluationError("interior_ratio: denominator mass vanishes");
    return h2 / outer_n.l2;
}

void save_grid_solution(const GridSolution& sol, const std::string& path) {
    static_assert(sizeof(double) == 8 && sizeof(std::int64_t) == 8);
    if constexpr (std::endian::native != std::endian::little)
        throw PreconditionError("save_grid_solution: little-endian host required");

    std::ofstream os(path, std::ios::binary);
    if (!os) throw EvaluationError("save_grid_solution: cannot open " + path);
    const Grid3& g = sol.values.grid;
    os.write(reinterpret_cast<const char*>(g.dims.data()), 3 * sizeof(std::int64_t));
    double header[4] = {g.spacing, g.origin.x, g.origin.y, g.origin.z};
    os.write(reinterpret_cast<const char*>(header), sizeof(header));
    os.write(reinterpret_cast<const char*>(sol.values.data.data()),
             static_cast<std::streamsize>(sol.values.data.size() * sizeof(double)));
    if (!os) throw EvaluationError("save_grid_solution: short write to " + path);
    os.close();

    nlohmann::json meta{{"dims", {g.dims[0], g.dims[1], g.dims[2]}},
                        {"spacing", g.spacing},
                        {"origin", {g.origin.x, g.origin.y, g.origin.z}},
                        {"residual_norm", sol.residual_norm},
                        {"iterations", sol.iterations},
                        {"tolerance", sol.tolerance},
                        {"converged", sol.converged},
                        {"artifact_version", artifact_version()}};
    std::ofstream js(path + ".json");
    if (!js) throw EvaluationError("save_grid_solution: cannot open " + path + ".json");
    js << meta.dump(2) << "\n";
}

GridSolution load_grid_solution(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw EvaluationError("load_grid_solution: cannot open " + path);
    std::array<std::int64_t, 3> dims{};
    is.read(reinterpret_cast<char*>(dims.data()), 3 * sizeof(std::int64_t));
    double header[4];
    is.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!is) throw EvaluationError("load_grid_solution: truncated header in " + path);
    Grid3 grid({header[1], header[2], header[3]}, header[0], dims);
    GridSolution sol;
    sol.values = GridFn(grid);
    is.read(reinterpret_cast<char*>(sol.values.data.data()),
            static_cast<std::streamsize>(sol.values.data.size() * sizeof(double)));
    if (!is) throw EvaluationError("load_grid_solution: truncated payload in " + path);

    std::ifstream js(path + ".json");
    if (js) {
        nlohmann::json meta = nlohmann::json::parse(js, nullptr, false);
        if (!meta.is_discarded()) {
            sol.residual_norm = meta.value("residual_norm", 0.0);
            sol.iterations = meta.value("iterations", 0);
            sol.tolerance = meta.value("tolerance", 0.0);
            sol.converged = meta.value("converged", false);
        }
    }
    return sol;
}

ConvergenceStudy manufactured_convergence(const CoefficientPair& coeffs,
                                          const DisplacementField& u_exact, const Vec3& lo,
                                          double side, const std::vector<int>& divisions,
                                          double tol) {
    if (divisions.empty()) throw PreconditionError("manufactured_convergence: no divisions");
    ConvergenceStudy study;
    auto f = [&coeffs, &u_exact](const Vec3& x) { return apply_lame_full(coeffs, u_exact, x); };
    auto g = [&u_exact](const Vec3& x) { return u_exact.value(x); };

    for (int n : divisions) {
        if (n < 2) throw PreconditionError("manufactured_convergence: divisions must be >= 2");
        double h = side / static_cast<double>(n);
        Grid3 grid(lo, h, {n + 1, n + 1, n + 1});
        GridSolution sol = solve_dirichlet(coeffs, f, g, grid, tol);

        double sum = 0.0;
        for (std::int64_t k = 1; k + 1 < grid.dims[2]; ++k)
            for (std::int64_t j = 1; j + 1 < grid.dims[1]; ++j)
                for (std::int64_t i = 1; i + 1 < grid.dims[0]; ++i) {
                    Vec3 d = sol.values.at(grid.index(i, j, k)) - u_exact.value(grid.node(i, j, k));
                    sum += dot(d, d);
                }
        study.h_values.push_back(h);
        study.l2_errors.push_back(std::sqrt(h * h * h * sum));
    }
    for (std::size_t i = 0; i + 1 < study.l2_errors.size(); ++i)
        study.ratios.push_back(study.l2_errors[i] / study.l2_errors[i + 1]);
    return study;
}

} // namespace lamelab
