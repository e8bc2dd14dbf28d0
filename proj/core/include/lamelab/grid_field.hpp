#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lamelab/fields.hpp"
#include "lamelab/geometry.hpp"

namespace lamelab {

/// Vector field sampled at grid nodes; three doubles per node, node index
/// x-fastest (the same layout GridSolution uses on disk).
struct GridFn {
    Grid3 grid;
    std::vector<double> data;

    GridFn() = default;
    explicit GridFn(const Grid3& g) : grid(g), data(3 * static_cast<std::size_t>(g.num_nodes()), 0.0) {}

    Vec3 at(std::int64_t idx) const {
        return {data[3 * idx], data[3 * idx + 1], data[3 * idx + 2]};
    }
    void set(std::int64_t idx, const Vec3& v) {
        data[3 * idx] = v.x;
        data[3 * idx + 1] = v.y;
        data[3 * idx + 2] = v.z;
    }
};

/// One byte per node; nonzero marks the node as belonging to the region.
using GridMask = std::vector<std::uint8_t>;

GridFn sample_field(const DisplacementField& u, const Grid3& grid);

GridMask make_ball_mask(const Grid3& grid, const BallSpec& ball);
GridMask make_shell_mask(const Grid3& grid, const Vec3& center, double r_inner, double r_outer);
std::int64_t mask_count(const GridMask& mask);

struct SobolevNorms {
    double l2 = 0.0;       // the norm itself
    double h1_semi = 0.0;  // |grad u|_{L2}
    double h2_semi = 0.0;  // all second differences, Frobenius over components
};

/// Masked midpoint sums with second-order central differences; each node
/// owns an h^3 cell.  Throws if the mask touches the outermost node layer
/// (one-sided differences are excluded by construction).
SobolevNorms sobolev_norms_grid(const GridFn& u, const GridMask& mask);

/// Trilinear interpolation of nodal values at an arbitrary interior point.
Vec3 trilinear_value(const GridFn& u, const Vec3& p);

/// Trilinear interpolation of the central-difference nodal jacobian.  All
/// eight surrounding nodes must be at least one layer from the boundary.
Mat3 trilinear_jacobian(const GridFn& u, const Vec3& p);

/// Displacement view of a grid function: trilinear values, interpolated
/// central-difference jacobians and hessians (O(h^2) away from the mask
/// boundary).  The view keeps a copy of the samples.
DisplacementField grid_field_view(const GridFn& u);

} // namespace lamelab
