#include "lamelab/cauchy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "lamelab/carleman.hpp"

namespace lamelab {

namespace {

double uniform_pm1(std::mt19937_64& rng) {
    // portable mapping, independent of the library's distribution internals
    double unit = static_cast<double>(rng() >> 11) * 0x1p-53;
    return 2.0 * unit - 1.0;
}

struct TraceRow {
    std::vector<std::pair<std::int64_t, double>> entries;
};

struct CellHit {
    std::int64_t i, j, k;
    double fx, fy, fz;
};

CellHit locate_cell(const Grid3& g, const Vec3& p) {
    CellHit c{};
    std::array<std::int64_t*, 3> idx{&c.i, &c.j, &c.k};
    std::array<double*, 3> frac{&c.fx, &c.fy, &c.fz};
    for (int d = 0; d < 3; ++d) {
        double t = (p[d] - g.origin[d]) / g.spacing;
        if (t < -1e-9 || t > static_cast<double>(g.dims[d] - 1) + 1e-9)
            throw PreconditionError("cauchy: gamma node falls outside the grid box");
        auto i0 = static_cast<std::int64_t>(std::floor(t));
        i0 = std::clamp<std::int64_t>(i0, 0, g.dims[d] - 2);
        *idx[d] = i0;
        *frac[d] = t - static_cast<double>(i0);
    }
    return c;
}

struct Workspace {
    Grid3 grid;
    CoefficientGrid cg;
    const CauchyData* data = nullptr;
    double r_out = 0.0;
    double beta = 0.0;
    double beta_out = 0.0;
    double h3 = 0.0;
    double h2 = 0.0;

    GridMask pde;   // interior annulus nodes carrying the residual term
    GridMask outer; // one-spacing shell at |x| = r_out, soft zero
    GridMask free;  // degrees of freedom; everything else is clamped to 0

    std::vector<TraceRow> value_rows;                 // one per gamma node
    std::array<std::vector<TraceRow>, 3> deriv_rows;  // per derivative axis

    // stacked least-squares rows B u ~ c: scaled pde residuals, scaled
    // traces, scaled outer shell.  J(u) = |B u - c|^2 exactly.
    std::vector<std::int64_t> pde_nodes;
    std::vector<std::int64_t> outer_nodes;
    std::vector<double> trace_scale; // sqrt(beta * w_i) per gamma node
    double pde_scale = 0.0;          // h^{-3/2}
    double outer_scale = 0.0;        // sqrt(beta_out * h^2)
    std::size_t rows_total = 0;

    std::vector<double> diag; // Jacobi diagonal of the normal operator
};

void build_trace_rows(Workspace& ws) {
    const Grid3& g = ws.grid;
    double inv2h = 1.0 / (2.0 * g.spacing);
    for (const QuadNode& q : ws.data->nodes) {
        CellHit c = locate_cell(g, q.point);
        TraceRow val;
        std::array<TraceRow, 3> der;
        for (int m = 0; m < 8; ++m) {
            std::int64_t ci = c.i + (m & 1), cj = c.j + ((m >> 1) & 1), ck = c.k + ((m >> 2) & 1);
            double w = ((m & 1) ? c.fx : 1.0 - c.fx) * (((m >> 1) & 1) ? c.fy : 1.0 - c.fy) *
                       (((m >> 2) & 1) ? c.fz : 1.0 - c.fz);
            if (w == 0.0) continue;
            val.entries.push_back({g.index(ci, cj, ck), w});
            if (g.boundary_offset(ci, cj, ck) < 1)
                throw PreconditionError("cauchy: gamma trace stencil reaches the grid boundary");
            der[0].entries.push_back({g.index(ci + 1, cj, ck), w * inv2h});
            der[0].entries.push_back({g.index(ci - 1, cj, ck), -w * inv2h});
            der[1].entries.push_back({g.index(ci, cj + 1, ck), w * inv2h});
            der[1].entries.push_back({g.index(ci, cj - 1, ck), -w * inv2h});
            der[2].entries.push_back({g.index(ci, cj, ck + 1), w * inv2h});
            der[2].entries.push_back({g.index(ci, cj, ck - 1), -w * inv2h});
        }
        ws.value_rows.push_back(std::move(val));
        for (int d = 0; d < 3; ++d) ws.deriv_rows[d].push_back(std::move(der[d]));
    }
}

Workspace build_workspace(const CoefficientPair& coeffs, const CauchyData& data, double r_out,
                          const Grid3& grid, double beta) {
    if (!(beta > 0.0)) throw PreconditionError("cauchy: need beta > 0");
    if (!(data.theta > 0.0 && data.theta < r_out))
        throw PreconditionError("cauchy: need 0 < theta < r_out");
    double h = grid.spacing;
    for (int d = 0; d < 3; ++d) {
        double lo = grid.origin[d];
        double hi = grid.origin[d] + h * static_cast<double>(grid.dims[d] - 1);
        if (lo > -(r_out + h) + 1e-12 || hi < r_out + h - 1e-12)
            throw PreconditionError("cauchy: grid box must pad B_{r_out} by one spacing per side");
    }

    Workspace ws;
    ws.grid = grid;
    ws.cg = sample_coefficients(coeffs, grid);
    ws.data = &data;
    ws.r_out = r_out;
    ws.beta = beta;
    ws.beta_out = beta * 1e-2;
    ws.h3 = h * h * h;
    ws.h2 = h * h;

    for (std::int64_t idx = 0; idx < grid.num_nodes(); ++idx) {
        if (!(ws.cg.mu[idx] > 0.0) || !(ws.cg.lambda[idx] >= 0.0))
            throw PreconditionError("cauchy: coefficients must satisfy mu > 0, lambda >= 0 on the box");
    }

    std::int64_t n = grid.num_nodes();
    ws.pde.assign(n, 0);
    ws.outer.assign(n, 0);
    ws.free.assign(n, 0);
    for (std::int64_t k = 0; k < grid.dims[2]; ++k)
        for (std::int64_t j = 0; j < grid.dims[1]; ++j)
            for (std::int64_t i = 0; i < grid.dims[0]; ++i) {
                std::int64_t idx = grid.index(i, j, k);
                double rho = norm(grid.node(i, j, k));
                if (grid.boundary_offset(i, j, k) >= 1 && rho > data.theta && rho < r_out)
                    ws.pde[idx] = 1;
                if (rho <= r_out && rho >= r_out - h) ws.outer[idx] = 1;
            }

    build_trace_rows(ws);

    // free set: everything the objective can see, one stencil layer around
    // the residual nodes plus the trace and outer-shell supports
    for (std::int64_t k = 0; k < grid.dims[2]; ++k)
        for (std::int64_t j = 0; j < grid.dims[1]; ++j)
            for (std::int64_t i = 0; i < grid.dims[0]; ++i) {
                if (!ws.pde[grid.index(i, j, k)]) continue;
                for (std::int64_t dk = -1; dk <= 1; ++dk)
                    for (std::int64_t dj = -1; dj <= 1; ++dj)
                        for (std::int64_t di = -1; di <= 1; ++di)
                            ws.free[grid.index(i + di, j + dj, k + dk)] = 1;
            }
    auto mark_rows = [&ws](const std::vector<TraceRow>& rows) {
        for (const TraceRow& row : rows)
            for (const auto& e : row.entries) ws.free[e.first] = 1;
    };
    mark_rows(ws.value_rows);
    for (int d = 0; d < 3; ++d) mark_rows(ws.deriv_rows[d]);
    for (std::int64_t idx = 0; idx < n; ++idx)
        if (ws.outer[idx]) ws.free[idx] = 1;
    for (std::int64_t k = 0; k < grid.dims[2]; ++k)
        for (std::int64_t j = 0; j < grid.dims[1]; ++j)
            for (std::int64_t i = 0; i < grid.dims[0]; ++i)
                if (grid.boundary_offset(i, j, k) < 1) ws.free[grid.index(i, j, k)] = 0;

    for (std::int64_t idx = 0; idx < n; ++idx) {
        if (ws.pde[idx]) ws.pde_nodes.push_back(idx);
        if (ws.outer[idx]) ws.outer_nodes.push_back(idx);
    }
    ws.trace_scale.reserve(data.nodes.size());
    for (const QuadNode& q : data.nodes) ws.trace_scale.push_back(std::sqrt(beta * q.weight));
    ws.pde_scale = 1.0 / std::sqrt(ws.h3);
    ws.outer_scale = std::sqrt(ws.beta_out * ws.h2);
    ws.rows_total = 3 * ws.pde_nodes.size() + 12 * data.nodes.size() + 3 * ws.outer_nodes.size();
    return ws;
}

void clamp_non_free(const Workspace& ws, std::vector<double>& v) {
    for (std::int64_t idx = 0; idx < ws.grid.num_nodes(); ++idx)
        if (!ws.free[idx])
            for (int c = 0; c < 3; ++c) v[3 * idx + c] = 0.0;
}

/// row vector of the stacked least-squares system, length ws.rows_total
void forward_apply(const Workspace& ws, const GridFn& u, std::vector<double>& row) {
    std::size_t at = 0;
    GridFn t = apply_energy_op(ws.cg, u);
    for (std::int64_t idx : ws.pde_nodes)
        for (int c = 0; c < 3; ++c) row[at++] = ws.pde_scale * t.data[3 * idx + c];

    for (std::size_t i = 0; i < ws.value_rows.size(); ++i) {
        double sc = ws.trace_scale[i];
        for (int c = 0; c < 3; ++c) {
            double tv = 0.0;
            for (const auto& e : ws.value_rows[i].entries) tv += e.second * u.data[3 * e.first + c];
            row[at++] = sc * tv;
        }
        for (int d = 0; d < 3; ++d) {
            const TraceRow& tr = ws.deriv_rows[d][i];
            for (int c = 0; c < 3; ++c) {
                double tv = 0.0;
                for (const auto& e : tr.entries) tv += e.second * u.data[3 * e.first + c];
                row[at++] = sc * tv;
            }
        }
    }
    for (std::int64_t idx : ws.outer_nodes)
        for (int c = 0; c < 3; ++c) row[at++] = ws.outer_scale * u.data[3 * idx + c];
}

void adjoint_apply(const Workspace& ws, const std::vector<double>& row, GridFn& out) {
    std::fill(out.data.begin(), out.data.end(), 0.0);
    std::size_t at = 0;
    GridFn t(ws.grid);
    for (std::int64_t idx : ws.pde_nodes)
        for (int c = 0; c < 3; ++c) t.data[3 * idx + c] = ws.pde_scale * row[at++];
    out = apply_energy_op(ws.cg, t);

    for (std::size_t i = 0; i < ws.value_rows.size(); ++i) {
        double sc = ws.trace_scale[i];
        for (int c = 0; c < 3; ++c) {
            double rv = sc * row[at++];
            for (const auto& e : ws.value_rows[i].entries) out.data[3 * e.first + c] += e.second * rv;
        }
        for (int d = 0; d < 3; ++d) {
            const TraceRow& tr = ws.deriv_rows[d][i];
            for (int c = 0; c < 3; ++c) {
                double rv = sc * row[at++];
                for (const auto& e : tr.entries) out.data[3 * e.first + c] += e.second * rv;
            }
        }
    }
    for (std::int64_t idx : ws.outer_nodes)
        for (int c = 0; c < 3; ++c) out.data[3 * idx + c] += ws.outer_scale * row[at++];
    clamp_non_free(ws, out.data);
}

std::vector<double> stacked_rhs(const Workspace& ws) {
    std::vector<double> c(ws.rows_total, 0.0);
    std::size_t at = 3 * ws.pde_nodes.size();
    for (std::size_t i = 0; i < ws.value_rows.size(); ++i) {
        double sc = ws.trace_scale[i];
        for (int comp = 0; comp < 3; ++comp) c[at++] = sc * ws.data->f0[i][comp];
        for (int d = 0; d < 3; ++d)
            for (int comp = 0; comp < 3; ++comp) c[at++] = sc * ws.data->f1[i](comp, d);
    }
    return c;
}

void build_diagonal(Workspace& ws) {
    const Grid3& g = ws.grid;
    std::int64_t n3 = 3 * g.num_nodes();
    ws.diag.assign(static_cast<std::size_t>(n3), 0.0);

    // exact PDE-block diagonal: diag(A M A)_q = sum_{p in M} A_pq^2.  The
    // energy stencil reaches one node in the max norm, so unit probes on a
    // stride-3 node coloring never share a row and each masked apply yields
    // whole columns of A at once.
    double inv_h3 = 1.0 / ws.h3;
    GridFn z(g);
    for (int color = 0; color < 27; ++color) {
        std::int64_t ci = color % 3, cj = (color / 3) % 3, ck = color / 9;
        for (int comp = 0; comp < 3; ++comp) {
            std::fill(z.data.begin(), z.data.end(), 0.0);
            for (std::int64_t k = ck; k < g.dims[2]; k += 3)
                for (std::int64_t j = cj; j < g.dims[1]; j += 3)
                    for (std::int64_t i = ci; i < g.dims[0]; i += 3)
                        z.data[3 * g.index(i, j, k) + comp] = 1.0;
            GridFn az = apply_energy_op(ws.cg, z);
            for (std::int64_t idx = 0; idx < g.num_nodes(); ++idx)
                if (!ws.pde[idx])
                    for (int c = 0; c < 3; ++c) az.data[3 * idx + c] = 0.0;
            for (std::int64_t k = ck; k < g.dims[2]; k += 3)
                for (std::int64_t j = cj; j < g.dims[1]; j += 3)
                    for (std::int64_t i = ci; i < g.dims[0]; i += 3) {
                        double acc = 0.0;
                        for (std::int64_t dk = -1; dk <= 1; ++dk)
                            for (std::int64_t dj = -1; dj <= 1; ++dj)
                                for (std::int64_t di = -1; di <= 1; ++di) {
                                    std::int64_t pi = i + di, pj = j + dj, pk = k + dk;
                                    if (pi < 0 || pj < 0 || pk < 0 || pi >= g.dims[0] ||
                                        pj >= g.dims[1] || pk >= g.dims[2])
                                        continue;
                                    std::int64_t p = g.index(pi, pj, pk);
                                    for (int pc = 0; pc < 3; ++pc) {
                                        double a = az.data[3 * p + pc];
                                        acc += a * a;
                                    }
                                }
                        ws.diag[3 * g.index(i, j, k) + comp] += inv_h3 * acc;
                    }
        }
    }

    for (std::size_t i = 0; i < ws.value_rows.size(); ++i) {
        double wq = ws.beta * ws.data->nodes[i].weight;
        for (const auto& e : ws.value_rows[i].entries)
            for (int c = 0; c < 3; ++c) ws.diag[3 * e.first + c] += wq * e.second * e.second;
        for (int d = 0; d < 3; ++d)
            for (const auto& e : ws.deriv_rows[d][i].entries)
                for (int c = 0; c < 3; ++c) ws.diag[3 * e.first + c] += wq * e.second * e.second;
    }
    for (std::int64_t idx = 0; idx < ws.grid.num_nodes(); ++idx)
        if (ws.outer[idx])
            for (int c = 0; c < 3; ++c) ws.diag[3 * idx + c] += ws.beta_out * ws.h2;

    double dmax = 0.0;
    for (double d : ws.diag) dmax = std::max(dmax, d);
    if (dmax == 0.0) dmax = 1.0;
    for (double& d : ws.diag) d = std::max(d, 1e-12 * dmax);
}

double dot_free(const Workspace& ws, const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::int64_t idx = 0; idx < ws.grid.num_nodes(); ++idx)
        if (ws.free[idx])
            for (int c = 0; c < 3; ++c) s += a[3 * idx + c] * b[3 * idx + c];
    return s;
}

/// trilinear interpolation of a coarse-grid field onto a finer grid over the
/// same box, used to seed the solver with a coarse solution
GridFn prolong_to(const GridFn& coarse, const Grid3& fine) {
    GridFn out(fine);
    const Grid3& cg = coarse.grid;
    for (std::int64_t k = 0; k < fine.dims[2]; ++k)
        for (std::int64_t j = 0; j < fine.dims[1]; ++j)
            for (std::int64_t i = 0; i < fine.dims[0]; ++i) {
                CellHit c = locate_cell(cg, fine.node(i, j, k));
                std::int64_t at = 3 * fine.index(i, j, k);
                for (int m = 0; m < 8; ++m) {
                    double w = ((m & 1) ? c.fx : 1.0 - c.fx) *
                               (((m >> 1) & 1) ? c.fy : 1.0 - c.fy) *
                               (((m >> 2) & 1) ? c.fz : 1.0 - c.fz);
                    if (w == 0.0) continue;
                    std::int64_t src =
                        3 * cg.index(c.i + (m & 1), c.j + ((m >> 1) & 1), c.k + ((m >> 2) & 1));
                    for (int comp = 0; comp < 3; ++comp)
                        out.data[at + comp] += w * coarse.data[src + comp];
                }
            }
    return out;
}

/// exact least-squares solve on a low-degree polynomial subspace; the smooth
/// continuation modes live here and converge hopelessly slowly under Krylov
/// iteration alone
GridFn poly_subspace_solve(Workspace& ws, int max_degree) {
    const Grid3& g = ws.grid;
    std::array<double, 3> half{};
    for (int d = 0; d < 3; ++d) {
        double lo = std::fabs(g.origin[d]);
        double hi = std::fabs(g.origin[d] + g.spacing * static_cast<double>(g.dims[d] - 1));
        half[d] = std::max(lo, hi);
    }

    std::vector<std::array<int, 3>> powers;
    for (int t = 0; t <= max_degree; ++t)
        for (int a = t; a >= 0; --a)
            for (int b = t - a; b >= 0; --b) powers.push_back({a, b, t - a - b});

    auto basis_field = [&](std::size_t j) {
        GridFn f(g);
        const auto& pw = powers[j / 3];
        int comp = static_cast<int>(j % 3);
        for (std::int64_t k = 0; k < g.dims[2]; ++k)
            for (std::int64_t jj = 0; jj < g.dims[1]; ++jj)
                for (std::int64_t i = 0; i < g.dims[0]; ++i) {
                    Vec3 x = g.node(i, jj, k);
                    double v = std::pow(x.x / half[0], pw[0]) * std::pow(x.y / half[1], pw[1]) *
                               std::pow(x.z / half[2], pw[2]);
                    f.data[3 * g.index(i, jj, k) + comp] = v;
                }
        clamp_non_free(ws, f.data);
        return f;
    };

    std::size_t nb = 3 * powers.size();
    std::vector<std::vector<double>> cols(nb);
    for (std::size_t j = 0; j < nb; ++j) {
        cols[j].assign(ws.rows_total, 0.0);
        forward_apply(ws, basis_field(j), cols[j]);
    }
    std::vector<double> c0 = stacked_rhs(ws);

    std::vector<double> scale(nb, 0.0);
    for (std::size_t j = 0; j < nb; ++j) {
        double n2 = 0.0;
        for (double v : cols[j]) n2 += v * v;
        scale[j] = n2 > 0.0 ? 1.0 / std::sqrt(n2) : 0.0;
    }
    std::vector<double> gram(nb * nb, 0.0), rhs(nb, 0.0);
    for (std::size_t a = 0; a < nb; ++a) {
        for (std::size_t b = a; b < nb; ++b) {
            double acc = 0.0;
            for (std::size_t m = 0; m < ws.rows_total; ++m) acc += cols[a][m] * cols[b][m];
            gram[a * nb + b] = gram[b * nb + a] = acc * scale[a] * scale[b];
        }
        double acc = 0.0;
        for (std::size_t m = 0; m < ws.rows_total; ++m) acc += cols[a][m] * c0[m];
        rhs[a] = acc * scale[a];
    }
    for (std::size_t a = 0; a < nb; ++a) gram[a * nb + a] += 1e-10;

    // Cholesky; the ridge on the normalized Gram keeps it positive definite
    std::vector<double> chol = gram;
    for (std::size_t a = 0; a < nb; ++a) {
        for (std::size_t b = a; b < nb; ++b) {
            double acc = chol[a * nb + b];
            for (std::size_t m = 0; m < a; ++m) acc -= chol[a * nb + m] * chol[b * nb + m];
            if (a == b)
                chol[a * nb + a] = std::sqrt(std::max(acc, 1e-30));
            else
                chol[b * nb + a] = acc / chol[a * nb + a];
        }
    }
    std::vector<double> y(nb, 0.0);
    for (std::size_t a = 0; a < nb; ++a) {
        double acc = rhs[a];
        for (std::size_t m = 0; m < a; ++m) acc -= chol[a * nb + m] * y[m];
        y[a] = acc / chol[a * nb + a];
    }
    for (std::size_t a = nb; a-- > 0;) {
        double acc = y[a];
        for (std::size_t m = a + 1; m < nb; ++m) acc -= chol[m * nb + a] * y[m];
        y[a] = acc / chol[a * nb + a];
    }

    GridFn u0(g);
    for (std::size_t j = 0; j < nb; ++j) {
        double w = y[j] * scale[j];
        if (w == 0.0) continue;
        GridFn bf = basis_field(j);
        for (std::size_t m = 0; m < u0.data.size(); ++m) u0.data[m] += w * bf.data[m];
    }
    return u0;
}

// CGLS: conjugate gradients on the normal equations of the stacked system,
// applying B and B^T separately so the attainable residual floor scales with
// cond(B) rather than its square.  Relative residual is |B^T(c - Bx)|/|B^T c|.
GridSolution solve_normal(Workspace& ws, double tol, const GridFn* x0 = nullptr,
                          bool throw_on_cap = true, int cap_factor = 40) {
    if (!(tol > 0.0)) throw PreconditionError("cauchy: need tol > 0");
    build_diagonal(ws);
    GridSolution sol;
    sol.values = GridFn(ws.grid);
    sol.tolerance = tol;

    std::int64_t n_free = 0;
    for (auto f : ws.free) n_free += f ? 1 : 0;

    const std::vector<double> c0 = stacked_rhs(ws);
    std::vector<double> r = c0;
    std::vector<double> q(ws.rows_total, 0.0);
    GridFn s(ws.grid), zv(ws.grid), p(ws.grid);
    adjoint_apply(ws, r, s);
    double s0_norm = std::sqrt(dot_free(ws, s.data, s.data));
    if (s0_norm == 0.0) {
        sol.converged = true;
        return sol;
    }
    if (x0) {
        sol.values = *x0;
        clamp_non_free(ws, sol.values.data);
        forward_apply(ws, sol.values, q);
        for (std::size_t m = 0; m < r.size(); ++m) r[m] = c0[m] - q[m];
        adjoint_apply(ws, r, s);
    }

    auto precond = [&ws](const GridFn& in, GridFn& outv) {
        for (std::int64_t idx = 0; idx < ws.grid.num_nodes(); ++idx)
            for (int c = 0; c < 3; ++c) {
                std::size_t m = 3 * idx + c;
                outv.data[m] = ws.free[idx] ? in.data[m] / ws.diag[m] : 0.0;
            }
    };
    double rel = std::sqrt(dot_free(ws, s.data, s.data)) / s0_norm;
    sol.residual_norm = rel;
    if (rel <= tol) {
        sol.converged = true;
        return sol;
    }
    precond(s, zv);
    p = zv;
    double sz = dot_free(ws, s.data, zv.data);
    int cap = static_cast<int>(cap_factor * std::sqrt(static_cast<double>(3 * n_free))) + 100;
    std::vector<double> history;
    for (int it = 1; it <= cap; ++it) {
        forward_apply(ws, p, q);
        double qq = 0.0;
        for (double v : q) qq += v * v;
        if (!(qq > 0.0)) {
            if (!throw_on_cap) return sol;
            std::ostringstream msg;
            msg << "cauchy: least-squares CG met a null direction at iteration " << it;
            throw SolverError(msg.str(), rel, it);
        }
        double alpha = sz / qq;
        for (std::size_t m = 0; m < sol.values.data.size(); ++m)
            sol.values.data[m] += alpha * p.data[m];
        bool refresh = (it % 256 == 0);
        if (refresh) {
            forward_apply(ws, sol.values, q);
            for (std::size_t m = 0; m < r.size(); ++m) r[m] = c0[m] - q[m];
        } else {
            for (std::size_t m = 0; m < r.size(); ++m) r[m] -= alpha * q[m];
        }
        adjoint_apply(ws, r, s);
        rel = std::sqrt(dot_free(ws, s.data, s.data)) / s0_norm;
        history.push_back(rel);
        sol.iterations = it;
        sol.residual_norm = rel;
        if (rel <= tol) {
            sol.converged = true;
            return sol;
        }
        precond(s, zv);
        double sz_next = dot_free(ws, s.data, zv.data);
        double gamma = refresh ? 0.0 : sz_next / sz;
        sz = sz_next;
        for (std::size_t m = 0; m < p.data.size(); ++m) p.data[m] = zv.data[m] + gamma * p.data[m];
    }
    if (!throw_on_cap) return sol;
    std::ostringstream msg;
    msg << "cauchy: CG stopped at relative residual " << rel << " after " << cap
        << " iterations (tol " << tol << "); residual history tail:";
    std::size_t from = history.size() > 8 ? history.size() - 8 : 0;
    for (std::size_t i = from; i < history.size(); ++i) msg << " " << history[i];
    throw SolverError(msg.str(), rel, cap);
}

CauchyTerms objective_terms(const Workspace& ws, const GridFn& u) {
    CauchyTerms t;
    GridFn au = apply_energy_op(ws.cg, u);
    double inv_h3 = 1.0 / ws.h3;
    for (std::int64_t idx = 0; idx < ws.grid.num_nodes(); ++idx)
        if (ws.pde[idx])
            for (int c = 0; c < 3; ++c) {
                double v = au.data[3 * idx + c];
                t.pde += inv_h3 * v * v;
            }
    for (std::size_t i = 0; i < ws.value_rows.size(); ++i) {
        double wq = ws.data->nodes[i].weight;
        for (int c = 0; c < 3; ++c) {
            double tv = -ws.data->f0[i][c];
            for (const auto& e : ws.value_rows[i].entries) tv += e.second * u.data[3 * e.first + c];
            t.data_misfit += wq * tv * tv;
        }
        for (int d = 0; d < 3; ++d)
            for (int c = 0; c < 3; ++c) {
                double tv = -ws.data->f1[i](c, d);
                for (const auto& e : ws.deriv_rows[d][i].entries)
                    tv += e.second * u.data[3 * e.first + c];
                t.data_misfit += wq * tv * tv;
            }
    }
    for (std::int64_t idx = 0; idx < ws.grid.num_nodes(); ++idx)
        if (ws.outer[idx])
            for (int c = 0; c < 3; ++c) {
                double v = u.data[3 * idx + c];
                t.outer += ws.h2 * v * v;
            }
    t.total = t.pde + ws.beta * t.data_misfit + ws.beta_out * t.outer;
    return t;
}

GridSolution cascaded_solve(const CoefficientPair& coeffs, const CauchyData& data, double r_out,
                            const Grid3& grid, double beta, double tol, bool throw_on_cap,
                            int cap_factor = 40) {
    // cascadic warm start: the smooth data-carrying modes converge in a few
    // iterations on coarse grids, leaving the fine solve a well-conditioned
    // high-frequency correction
    std::vector<Grid3> levels{grid};
    while (true) {
        const Grid3& g = levels.back();
        if (g.dims[0] % 2 == 0 || g.dims[1] % 2 == 0 || g.dims[2] % 2 == 0) break;
        if (std::min({g.dims[0], g.dims[1], g.dims[2]}) < 15) break;
        double hc = 2.0 * g.spacing;
        if (hc > 0.5 * data.theta) break;
        bool pad_ok = true;
        for (int d = 0; d < 3; ++d) {
            double lo = g.origin[d];
            double hi = g.origin[d] + g.spacing * static_cast<double>(g.dims[d] - 1);
            if (lo > -(r_out + hc) + 1e-12 || hi < r_out + hc - 1e-12) pad_ok = false;
        }
        if (!pad_ok) break;
        levels.push_back(Grid3(g.origin, hc,
                               {(g.dims[0] + 1) / 2, (g.dims[1] + 1) / 2, (g.dims[2] + 1) / 2}));
    }

    GridSolution sol;
    double coarse_tol = std::max(tol, 1e-4);
    for (std::size_t lvl = levels.size(); lvl-- > 0;) {
        Workspace ws = build_workspace(coeffs, data, r_out, levels[lvl], beta);
        GridFn x0 = lvl + 1 == levels.size() ? poly_subspace_solve(ws, 5)
                                             : prolong_to(sol.values, levels[lvl]);
        sol = solve_normal(ws, lvl == 0 ? tol : coarse_tol, &x0, lvl == 0 && throw_on_cap,
                           cap_factor);
    }
    return sol;
}

Grid3 selection_grid(const Grid3& fine) {
    for (int d = 0; d < 3; ++d)
        if (fine.dims[d] % 2 == 0 || fine.dims[d] < 7) return fine;
    return Grid3(fine.origin, 2.0 * fine.spacing,
                 {(fine.dims[0] + 1) / 2, (fine.dims[1] + 1) / 2, (fine.dims[2] + 1) / 2});
}

double choose_beta(const CoefficientPair& coeffs, const CauchyData& data, double r_out,
                   const Grid3& grid, const BetaRule& rule) {
    if (!(rule.beta_min > 0.0) || !(rule.beta_max >= rule.beta_min) || rule.count < 1)
        throw PreconditionError("cauchy: BetaRule needs 0 < beta_min <= beta_max, count >= 1");
    if (data.zeta0 == 0.0 || rule.count == 1) return std::sqrt(rule.beta_min * rule.beta_max);
    Grid3 sel = selection_grid(grid);
    double best_beta = rule.beta_min;
    double best_gap = std::numeric_limits<double>::infinity();
    for (int j = 0; j < rule.count; ++j) {
        double f = static_cast<double>(j) / (rule.count - 1);
        double beta = rule.beta_min * std::pow(rule.beta_max / rule.beta_min, f);
        GridSolution sol = cascaded_solve(coeffs, data, r_out, sel, beta, 1e-2, false);
        Workspace ws = build_workspace(coeffs, data, r_out, sel, beta);
        double misfit = std::sqrt(objective_terms(ws, sol.values).data_misfit);
        double gap = std::fabs(std::log(std::max(misfit, 1e-300) / data.zeta0));
        if (gap < best_gap) {
            best_gap = gap;
            best_beta = beta;
        }
    }
    return best_beta;
}

} // namespace

CauchyData make_cauchy_data(const DisplacementField& u_exact, double theta, int n_p, int n_a,
                            double zeta_rel, std::uint64_t seed) {
    if (!(theta > 0.0)) throw PreconditionError("make_cauchy_data: need theta > 0");
    if (!(zeta_rel >= 0.0)) throw PreconditionError("make_cauchy_data: need zeta_rel >= 0");
    CauchyData data;
    data.theta = theta;
    data.noise_level = zeta_rel;
    data.nodes = sphere_nodes({}, theta, n_p, n_a);
    data.f0.reserve(data.nodes.size());
    data.f1.reserve(data.nodes.size());

    double area = 0.0, ms0 = 0.0, ms1 = 0.0;
    for (const QuadNode& q : data.nodes) {
        Vec3 v = u_exact.value(q.point);
        Mat3 jm = u_exact.jacobian(q.point);
        data.f0.push_back(v);
        data.f1.push_back(jm);
        area += q.weight;
        ms0 += q.weight * dot(v, v);
        ms1 += q.weight * frob2(jm);
    }
    double amp0 = std::sqrt(3.0) * zeta_rel * std::sqrt(ms0 / (3.0 * area));
    double amp1 = std::sqrt(3.0) * zeta_rel * std::sqrt(ms1 / (9.0 * area));

    std::mt19937_64 rng(seed);
    double zeta_sq = 0.0;
    for (std::size_t i = 0; i < data.nodes.size(); ++i) {
        Vec3 d0{};
        Mat3 d1{};
        for (int c = 0; c < 3; ++c) d0[c] = amp0 * uniform_pm1(rng);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) d1(r, c) = amp1 * uniform_pm1(rng);
        data.f0[i] += d0;
        data.f1[i] = data.f1[i] + d1;
        zeta_sq += data.nodes[i].weight * (dot(d0, d0) + frob2(d1));
    }
    data.zeta0 = std::sqrt(zeta_sq);
    return data;
}

CauchyTerms cauchy_objective(const CoefficientPair& coeffs, const CauchyData& data, double r_out,
                             double beta, const GridFn& u) {
    Workspace ws = build_workspace(coeffs, data, r_out, u.grid, beta);
    return objective_terms(ws, u);
}

GridSolution continue_solution(const CoefficientPair& coeffs, const CauchyData& data, double r_out,
                               const Grid3& grid, double beta, double tol) {
    return cascaded_solve(coeffs, data, r_out, grid, beta, tol, true);
}

StabilityReport stability_experiment(const CoefficientPair& coeffs,
                                     const DisplacementField& u_exact, double theta, double r_out,
                                     double s, const std::vector<double>& zeta_list,
                                     const Grid3& grid, const BetaRule& rule, std::uint64_t seed) {
    if (zeta_list.size() < 3)
        throw PreconditionError("stability_experiment: need at least three noise levels");
    for (std::size_t i = 1; i < zeta_list.size(); ++i)
        if (!(zeta_list[i] < zeta_list[i - 1]))
            throw PreconditionError("stability_experiment: zeta_list must be strictly decreasing");

    CarlemanWeights w(r_out, theta, s);
    StabilityReport rep;
    rep.zeta_rel = zeta_list;
    rep.theta = theta;
    rep.theta1 = sublevel_radius(w, 0.5 * w.phi_star());

    GridFn exact = sample_field(u_exact, grid);
    GridMask domain_mask = make_shell_mask(grid, {}, theta, r_out);
    SobolevNorms sn = sobolev_norms_grid(exact, domain_mask);
    rep.m0 = std::sqrt(sn.l2 * sn.l2 + sn.h1_semi * sn.h1_semi);
    if (!(rep.m0 > 0.0))
        throw PreconditionError("stability_experiment: exact solution vanishes on the annulus (M0 = 0)");

    GridMask omega = make_shell_mask(grid, {}, theta, rep.theta1);
    double h3 = grid.spacing * grid.spacing * grid.spacing;

    for (std::size_t k = 0; k < zeta_list.size(); ++k) {
        CauchyData data =
            make_cauchy_data(u_exact, theta, 12, 24, zeta_list[k], seed + static_cast<std::uint64_t>(k));
        double beta = choose_beta(coeffs, data, r_out, grid, rule);
        GridSolution sol = continue_solution(coeffs, data, r_out, grid, beta, 1e-2);
        double err_sq = 0.0;
        for (std::int64_t idx = 0; idx < grid.num_nodes(); ++idx)
            if (omega[idx]) {
                Vec3 d = sol.values.at(idx) - exact.at(idx);
                err_sq += h3 * dot(d, d);
            }
        rep.zeta0.push_back(data.zeta0);
        rep.betas.push_back(beta);
        rep.errors.push_back(std::sqrt(err_sq));
    }

    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int m = 0;
    for (std::size_t k = 0; k < rep.errors.size(); ++k) {
        if (!(rep.zeta0[k] > 0.0) || !(rep.errors[k] > 0.0)) continue;
        double x = std::log(rep.zeta0[k]), y = std::log(rep.errors[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    if (m < 2) throw EvaluationError("stability_experiment: too few usable levels for a slope fit");
    rep.eps_emp = (m * sxy - sx * sy) / (m * sxx - sx * sx);

    bool nonincreasing = true;
    for (std::size_t k = 1; k < rep.errors.size(); ++k)
        if (rep.errors[k] > 1.5 * rep.errors[k - 1]) nonincreasing = false;
    rep.holder_consistent =
        nonincreasing && rep.eps_emp > 0.05 && rep.eps_emp <= 1.05 && std::isfinite(rep.eps_emp);
    rep.verdict = rep.holder_consistent ? "Hoelder-consistent" : "inconclusive";
    return rep;
}

} // namespace lamelab
