#include "lamelab/grid_field.hpp"

#include <cmath>
#include <memory>

#include "lamelab/errors.hpp"

namespace lamelab {

GridFn sample_field(const DisplacementField& u, const Grid3& grid) {
    GridFn f(grid);
    for (std::int64_t k = 0; k < grid.dims[2]; ++k)
        for (std::int64_t j = 0; j < grid.dims[1]; ++j)
            for (std::int64_t i = 0; i < grid.dims[0]; ++i)
                f.set(grid.index(i, j, k), u.value(grid.node(i, j, k)));
    return f;
}

GridMask make_ball_mask(const Grid3& grid, const BallSpec& ball) {
    GridMask m(static_cast<std::size_t>(grid.num_nodes()), 0);
    for (std::int64_t k = 0; k < grid.dims[2]; ++k)
        for (std::int64_t j = 0; j < grid.dims[1]; ++j)
            for (std::int64_t i = 0; i < grid.dims[0]; ++i)
                if (ball.contains(grid.node(i, j, k))) m[grid.index(i, j, k)] = 1;
    return m;
}

GridMask make_shell_mask(const Grid3& grid, const Vec3& center, double r_inner, double r_outer) {
    if (!(0.0 <= r_inner && r_inner < r_outer))
        throw PreconditionError("make_shell_mask: need 0 <= r_inner < r_outer");
    GridMask m(static_cast<std::size_t>(grid.num_nodes()), 0);
    for (std::int64_t k = 0; k < grid.dims[2]; ++k)
        for (std::int64_t j = 0; j < grid.dims[1]; ++j)
            for (std::int64_t i = 0; i < grid.dims[0]; ++i) {
                double d = norm(grid.node(i, j, k) - center);
                if (d > r_inner && d < r_outer) m[grid.index(i, j, k)] = 1;
            }
    return m;
}

std::int64_t mask_count(const GridMask& mask) {
    std::int64_t n = 0;
    for (auto b : mask) n += (b != 0);
    return n;
}

SobolevNorms sobolev_norms_grid(const GridFn& u, const GridMask& mask) {
    const Grid3& g = u.grid;
    if (mask.size() != static_cast<std::size_t>(g.num_nodes()))
        throw PreconditionError("sobolev_norms_grid: mask size mismatch");
    const double h = g.spacing;
    const double inv2h = 1.0 / (2.0 * h);
    const double invh2 = 1.0 / (h * h);
    const double cell = h * h * h;

    const std::int64_t sx = 1, sy = g.dims[0], sz = g.dims[0] * g.dims[1];
    const std::int64_t stride[3] = {sx, sy, sz};

    double sum_l2 = 0.0, sum_h1 = 0.0, sum_h2 = 0.0;
    for (std::int64_t k = 0; k < g.dims[2]; ++k)
        for (std::int64_t j = 0; j < g.dims[1]; ++j)
            for (std::int64_t i = 0; i < g.dims[0]; ++i) {
                std::int64_t idx = g.index(i, j, k);
                if (!mask[idx]) continue;
                if (g.boundary_offset(i, j, k) < 1)
                    throw PreconditionError(
                        "sobolev_norms_grid: mask touches the grid boundary layer");

                Vec3 v = u.at(idx);
                sum_l2 += dot(v, v);

                for (int c = 0; c < 3; ++c) {
                    double u0 = u.data[3 * idx + c];
                    for (int d = 0; d < 3; ++d) {
                        double up = u.data[3 * (idx + stride[d]) + c];
                        double um = u.data[3 * (idx - stride[d]) + c];
                        double g1 = (up - um) * inv2h;
                        sum_h1 += g1 * g1;
                        double g2 = (up - 2.0 * u0 + um) * invh2;
                        sum_h2 += g2 * g2;
                    }
                    // mixed second differences, both orderings counted once
                    for (int d1 = 0; d1 < 3; ++d1)
                        for (int d2 = d1 + 1; d2 < 3; ++d2) {
                            double vpp = u.data[3 * (idx + stride[d1] + stride[d2]) + c];
                            double vpm = u.data[3 * (idx + stride[d1] - stride[d2]) + c];
                            double vmp = u.data[3 * (idx - stride[d1] + stride[d2]) + c];
                            double vmm = u.data[3 * (idx - stride[d1] - stride[d2]) + c];
                            double g2 = (vpp - vpm - vmp + vmm) * 0.25 * invh2;
                            sum_h2 += 2.0 * g2 * g2;
                        }
                }
            }

    SobolevNorms n;
    n.l2 = std::sqrt(cell * sum_l2);
    n.h1_semi = std::sqrt(cell * sum_h1);
    n.h2_semi = std::sqrt(cell * sum_h2);
    return n;
}

namespace {

struct CellLocation {
    std::int64_t i, j, k;
    double fx, fy, fz;
};

CellLocation locate(const Grid3& g, const Vec3& p, const char* what) {
    double rx = (p.x - g.origin.x) / g.spacing;
    double ry = (p.y - g.origin.y) / g.spacing;
    double rz = (p.z - g.origin.z) / g.spacing;
    std::int64_t i = static_cast<std::int64_t>(std::floor(rx));
    std::int64_t j = static_cast<std::int64_t>(std::floor(ry));
    std::int64_t k = static_cast<std::int64_t>(std::floor(rz));
    i = std::min(std::max(i, std::int64_t(0)), g.dims[0] - 2);
    j = std::min(std::max(j, std::int64_t(0)), g.dims[1] - 2);
    k = std::min(std::max(k, std::int64_t(0)), g.dims[2] - 2);
    double fx = rx - static_cast<double>(i);
    double fy = ry - static_cast<double>(j);
    double fz = rz - static_cast<double>(k);
    if (fx < -1e-9 || fx > 1.0 + 1e-9 || fy < -1e-9 || fy > 1.0 + 1e-9 || fz < -1e-9 ||
        fz > 1.0 + 1e-9)
        throw PreconditionError(std::string(what) + ": point outside the grid");
    return {i, j, k, fx, fy, fz};
}

} // namespace

Vec3 trilinear_value(const GridFn& u, const Vec3& p) {
    const Grid3& g = u.grid;
    CellLocation c = locate(g, p, "trilinear_value");
    Vec3 out{};
    for (int dk = 0; dk < 2; ++dk)
        for (int dj = 0; dj < 2; ++dj)
            for (int di = 0; di < 2; ++di) {
                double w = (di ? c.fx : 1.0 - c.fx) * (dj ? c.fy : 1.0 - c.fy) *
                           (dk ? c.fz : 1.0 - c.fz);
                out += u.at(g.index(c.i + di, c.j + dj, c.k + dk)) * w;
            }
    return out;
}

Mat3 trilinear_jacobian(const GridFn& u, const Vec3& p) {
    const Grid3& g = u.grid;
    CellLocation c = locate(g, p, "trilinear_jacobian");
    const std::int64_t stride[3] = {1, g.dims[0], g.dims[0] * g.dims[1]};
    const double inv2h = 1.0 / (2.0 * g.spacing);
    Mat3 out{};
    for (int dk = 0; dk < 2; ++dk)
        for (int dj = 0; dj < 2; ++dj)
            for (int di = 0; di < 2; ++di) {
                std::int64_t ii = c.i + di, jj = c.j + dj, kk = c.k + dk;
                if (g.boundary_offset(ii, jj, kk) < 1)
                    throw PreconditionError(
                        "trilinear_jacobian: interpolation cell touches the boundary layer");
                double w = (di ? c.fx : 1.0 - c.fx) * (dj ? c.fy : 1.0 - c.fy) *
                           (dk ? c.fz : 1.0 - c.fz);
                std::int64_t idx = g.index(ii, jj, kk);
                for (int comp = 0; comp < 3; ++comp)
                    for (int d = 0; d < 3; ++d) {
                        double der = (u.data[3 * (idx + stride[d]) + comp] -
                                      u.data[3 * (idx - stride[d]) + comp]) *
                                     inv2h;
                        out(comp, d) += w * der;
                    }
            }
    return out;
}

DisplacementField grid_field_view(const GridFn& u) {
    auto shared = std::make_shared<GridFn>(u);
    return {
        [shared](const Vec3& p) { return trilinear_value(*shared, p); },
        [shared](const Vec3& p) { return trilinear_jacobian(*shared, p); },
        [shared](const Vec3& p) {
            const Grid3& g = shared->grid;
            CellLocation c = locate(g, p, "grid_field_view");
            const std::int64_t stride[3] = {1, g.dims[0], g.dims[0] * g.dims[1]};
            const double invh2 = 1.0 / (g.spacing * g.spacing);
            Hess3 out{};
            for (int dk = 0; dk < 2; ++dk)
                for (int dj = 0; dj < 2; ++dj)
                    for (int di = 0; di < 2; ++di) {
                        std::int64_t ii = c.i + di, jj = c.j + dj, kk = c.k + dk;
                        if (g.boundary_offset(ii, jj, kk) < 1)
                            throw PreconditionError(
                                "grid_field_view: hessian cell touches the boundary layer");
                        double w = (di ? c.fx : 1.0 - c.fx) * (dj ? c.fy : 1.0 - c.fy) *
                                   (dk ? c.fz : 1.0 - c.fz);
                        std::int64_t idx = g.index(ii, jj, kk);
                        for (int comp = 0; comp < 3; ++comp) {
                            double u0 = shared->data[3 * idx + comp];
                            for (int d = 0; d < 3; ++d) {
                                double up = shared->data[3 * (idx + stride[d]) + comp];
                                double um = shared->data[3 * (idx - stride[d]) + comp];
                                out[comp](d, d) += w * (up - 2.0 * u0 + um) * invh2;
                            }
                            for (int d1 = 0; d1 < 3; ++d1)
                                for (int d2 = d1 + 1; d2 < 3; ++d2) {
                                    double vpp =
                                        shared->data[3 * (idx + stride[d1] + stride[d2]) + comp];
                                    double vpm =
                                        shared->data[3 * (idx + stride[d1] - stride[d2]) + comp];
                                    double vmp =
                                        shared->data[3 * (idx - stride[d1] + stride[d2]) + comp];
                                    double vmm =
                                        shared->data[3 * (idx - stride[d1] - stride[d2]) + comp];
                                    double m = w * (vpp - vpm - vmp + vmm) * 0.25 * invh2;
                                    out[comp](d1, d2) += m;
                                    out[comp](d2, d1) += m;
                                }
                        }
                    }
            return out;
        }};
}

} // namespace lamelab
