#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "lamelab/errors.hpp"
#include "lamelab/vec.hpp"

namespace lamelab {

struct BallSpec {
    Vec3 center{};
    double radius = 1.0;

    BallSpec() = default;
    BallSpec(const Vec3& c, double r) : center(c), radius(r) {
        if (!(r > 0.0)) throw PreconditionError("BallSpec: radius must be positive");
    }

    bool contains(const Vec3& p) const { return norm(p - center) < radius; }
};

struct AnnulusSpec {
    Vec3 center{};
    double r_inner = 0.5;
    double r_outer = 1.0;

    AnnulusSpec() = default;
    AnnulusSpec(const Vec3& c, double ri, double ro) : center(c), r_inner(ri), r_outer(ro) {
        if (!(ri > 0.0) || !(ro > ri))
            throw PreconditionError("AnnulusSpec: need 0 < r_inner < r_outer");
    }

    bool contains(const Vec3& p) const {
        double d = norm(p - center);
        return d > r_inner && d < r_outer;
    }
};

/// Uniform node-centered grid.  Node (i, j, k) sits at origin + h*(i, j, k);
/// linear index is x-fastest, matching the on-disk layout of GridSolution.
struct Grid3 {
    Vec3 origin{};
    double spacing = 1.0;
    std::array<std::int64_t, 3> dims{3, 3, 3};

    Grid3() = default;
    Grid3(const Vec3& o, double h, std::array<std::int64_t, 3> d)
        : origin(o), spacing(h), dims(d) {
        if (!(h > 0.0)) throw PreconditionError("Grid3: spacing must be positive");
        for (auto n : d)
            if (n < 3) throw PreconditionError("Grid3: need at least 3 nodes per axis");
    }

    std::int64_t num_nodes() const { return dims[0] * dims[1] * dims[2]; }

    std::int64_t index(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return i + dims[0] * (j + dims[1] * k);
    }

    Vec3 node(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return {origin.x + spacing * static_cast<double>(i),
                origin.y + spacing * static_cast<double>(j),
                origin.z + spacing * static_cast<double>(k)};
    }

    bool is_boundary(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return i == 0 || j == 0 || k == 0 ||
               i == dims[0] - 1 || j == dims[1] - 1 || k == dims[2] - 1;
    }

    /// Distance (in node layers) to the nearest grid face.
    std::int64_t boundary_offset(std::int64_t i, std::int64_t j, std::int64_t k) const {
        std::int64_t m = i;
        m = std::min(m, j);
        m = std::min(m, k);
        m = std::min(m, dims[0] - 1 - i);
        m = std::min(m, dims[1] - 1 - j);
        m = std::min(m, dims[2] - 1 - k);
        return m;
    }
};

} // namespace lamelab
