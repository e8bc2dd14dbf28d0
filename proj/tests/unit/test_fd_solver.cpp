#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"
#include "lamelab/fd_solver.hpp"
#include "lamelab/lame_operator.hpp"
#include "lamelab/poly3.hpp"
#include "lamelab/solutions.hpp"

using namespace lamelab;

namespace {

double dot_all(const GridFn& a, const GridFn& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

GridFn random_interior(const Grid3& grid, std::uint64_t seed) {
    GridFn x(grid);
    std::mt19937_64 rng(seed);
    for (std::int64_t k = 1; k < grid.dims[2] - 1; ++k)
        for (std::int64_t j = 1; j < grid.dims[1] - 1; ++j)
            for (std::int64_t i = 1; i < grid.dims[0] - 1; ++i) {
                Vec3 v{static_cast<double>(rng() >> 11) * 0x1p-52 - 1.0,
                       static_cast<double>(rng() >> 11) * 0x1p-52 - 1.0,
                       static_cast<double>(rng() >> 11) * 0x1p-52 - 1.0};
                x.set(grid.index(i, j, k), v);
            }
    return x;
}

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_SUITE("fd_solver") {

    TEST_CASE("energy operator is symmetric and positive on interior vectors") {
        Grid3 grid({-0.4, -0.35, -0.3}, 0.11, {7, 7, 7});
        CoefficientGrid cg = sample_coefficients(coefficients_wavy(), grid);
        GridFn x = random_interior(grid, 101);
        GridFn y = random_interior(grid, 202);
        GridFn ax = apply_energy_op(cg, x);
        GridFn ay = apply_energy_op(cg, y);
        double axy = dot_all(ax, y);
        double xay = dot_all(x, ay);
        CHECK(std::fabs(axy - xay) <= 1e-12 * std::max(std::fabs(axy), 1.0));
        CHECK(dot_all(ax, x) > 0.0);
        CHECK(dot_all(ay, y) > 0.0);

        GridFn diag = energy_op_diagonal(cg);
        // diagonal entries match e_i' A e_i on a few probes
        for (std::int64_t probe : {grid.index(2, 3, 2), grid.index(3, 3, 3)}) {
            for (int c = 0; c < 3; ++c) {
                GridFn e(grid);
                e.data[3 * probe + c] = 1.0;
                GridFn ae = apply_energy_op(cg, e);
                CHECK(ae.data[3 * probe + c] ==
                      doctest::Approx(diag.data[3 * probe + c]).epsilon(1e-12));
            }
        }
    }

    TEST_CASE("stencil is second-order consistent with the exact operator") {
        CoefficientPair coeffs = coefficients_wavy();
        DisplacementField u = random_polynomial_displacement(3, 5);
        Vec3 center{0.11, 0.23, -0.07};

        auto max_err = [&](double h, std::int64_t half) {
            std::array<std::int64_t, 3> dims{2 * half + 1, 2 * half + 1, 2 * half + 1};
            Grid3 grid(center - Vec3{h * half, h * half, h * half}, h, dims);
            CoefficientGrid cg = sample_coefficients(coeffs, grid);
            GridFn lu = apply_stencil(cg, sample_field(u, grid));
            double worst = 0.0;
            for (std::int64_t k = 1; k < dims[2] - 1; ++k)
                for (std::int64_t j = 1; j < dims[1] - 1; ++j)
                    for (std::int64_t i = 1; i < dims[0] - 1; ++i) {
                        Vec3 exact = apply_lame_full(coeffs, u, grid.node(i, j, k));
                        Vec3 got = lu.at(grid.index(i, j, k));
                        worst = std::max(worst, norm_inf(got - exact));
                    }
            return worst;
        };

        double e1 = max_err(0.1, 4);
        double e2 = max_err(0.05, 8);
        CHECK(e1 > 0.0);
        CHECK(e2 > 0.0);
        CHECK(e1 / e2 > 3.0);
        CHECK(e1 / e2 < 5.0);
    }

    TEST_CASE("dirichlet solve recovers a harmonic-gradient solution") {
        CoefficientPair coeffs = coefficients_constant(1.0, 1.0);
        DisplacementField u = harmonic_gradient_field(HarmonicGradient{Poly3::monomial(1, 1, 1)});
        Grid3 grid({-0.75, -0.75, -0.75}, 0.125, {13, 13, 13});
        auto f = [](const Vec3&) { return Vec3{}; };
        auto g = [&u](const Vec3& p) { return u.value(p); };
        GridSolution sol = solve_dirichlet(coeffs, f, g, grid, 1e-10);
        CHECK(sol.converged);
        CHECK(sol.residual_norm <= 1e-10);
        CHECK(sol.iterations > 0);

        double num = 0.0;
        double den = 0.0;
        for (std::int64_t k = 0; k < 13; ++k)
            for (std::int64_t j = 0; j < 13; ++j)
                for (std::int64_t i = 0; i < 13; ++i) {
                    Vec3 exact = u.value(grid.node(i, j, k));
                    Vec3 diff = sol.values.at(grid.index(i, j, k)) - exact;
                    num += dot(diff, diff);
                    den += dot(exact, exact);
                }
        CHECK(std::sqrt(num / den) < 2e-3);
    }

    TEST_CASE("dirichlet solve throws when the iteration cap is hit") {
        // node-scale contrast of ~e^18 in mu leaves the Jacobi-preconditioned
        // system too ill-conditioned for CG to reach 1e-14 within the cap
        ScalarFieldC1 mu;
        mu.value = [](const Vec3& p) {
            return std::exp(9.0 * std::sin(37.0 * p[0]) * std::sin(41.0 * p[1]) *
                            std::sin(43.0 * p[2]));
        };
        mu.gradient = [](const Vec3& p) {
            double s1 = std::sin(37.0 * p[0]), c1 = std::cos(37.0 * p[0]);
            double s2 = std::sin(41.0 * p[1]), c2 = std::cos(41.0 * p[1]);
            double s3 = std::sin(43.0 * p[2]), c3 = std::cos(43.0 * p[2]);
            double v = std::exp(9.0 * s1 * s2 * s3);
            return Vec3{9.0 * 37.0 * c1 * s2 * s3 * v, 9.0 * 41.0 * s1 * c2 * s3 * v,
                        9.0 * 43.0 * s1 * s2 * c3 * v};
        };
        CoefficientPair coeffs =
            coefficients_custom(mu, constant_scalar(0.0), std::exp(-9.0), 2.0 * std::exp(-9.0));
        Grid3 grid({-0.5, -0.5, -0.5}, 1.0 / 12.0, {13, 13, 13});
        auto f = [](const Vec3& p) { return Vec3{p[0], -p[1], p[2] * p[0]}; };
        auto g = [](const Vec3&) { return Vec3{}; };
        CHECK_THROWS_AS(solve_dirichlet(coeffs, f, g, grid, 1e-14), SolverError);
    }

    TEST_CASE("dirichlet solve rejects negative lambda") {
        CoefficientPair coeffs =
            coefficients_custom(constant_scalar(1.0), constant_scalar(-0.5), 1.0, 0.1);
        Grid3 grid({-0.5, -0.5, -0.5}, 0.25, {5, 5, 5});
        auto f = [](const Vec3&) { return Vec3{}; };
        CHECK_THROWS_AS(solve_dirichlet(coeffs, f, f, grid, 1e-6), PreconditionError);
    }

    TEST_CASE("grid interior ratio tracks the exact-jet ratio") {
        DisplacementField u = harmonic_gradient_field(HarmonicGradient{Poly3::monomial(1, 1, 1)});
        BallSpec inner({}, 0.3);
        BallSpec outer({}, 0.8);
        double exact = interior_ratio(u, inner, outer, ProductBallRule(8, 12, 24));

        Grid3 grid({-1.0, -1.0, -1.0}, 1.0 / 24.0, {49, 49, 49});
        double grid_ratio = interior_ratio(sample_field(u, grid), inner, outer);
        CHECK(exact > 0.0);
        CHECK(grid_ratio > 0.0);
        CHECK(std::fabs(grid_ratio / exact - 1.0) < 0.2);
    }

    TEST_CASE("grid solution round-trips through disk with the documented layout") {
        Grid3 grid({-0.5, 0.25, 0.0}, 0.125, {3, 4, 5});
        GridSolution sol;
        sol.values = GridFn(grid);
        for (std::size_t i = 0; i < sol.values.data.size(); ++i)
            sol.values.data[i] = 0.25 * static_cast<double>(i) - 7.0;
        sol.residual_norm = 1.25e-9;
        sol.iterations = 42;
        sol.tolerance = 1e-8;
        sol.converged = true;

        std::filesystem::path path = temp_file("lamelab_sol_roundtrip.bin");
        save_grid_solution(sol, path.string());

        // header: int64 dims[3], double spacing, double origin[3]
        std::ifstream in(path, std::ios::binary);
        REQUIRE(in.good());
        std::int64_t dims[3];
        double spacing;
        double origin[3];
        in.read(reinterpret_cast<char*>(dims), 24);
        in.read(reinterpret_cast<char*>(&spacing), 8);
        in.read(reinterpret_cast<char*>(origin), 24);
        REQUIRE(in.good());
        CHECK(dims[0] == 3);
        CHECK(dims[1] == 4);
        CHECK(dims[2] == 5);
        CHECK(spacing == 0.125);
        CHECK(origin[0] == -0.5);
        CHECK(origin[1] == 0.25);
        CHECK(origin[2] == 0.0);
        in.seekg(0, std::ios::end);
        CHECK(static_cast<std::int64_t>(in.tellg()) ==
              56 + 24 * grid.num_nodes());
        in.close();

        GridSolution back = load_grid_solution(path.string());
        CHECK(back.values.grid.dims == grid.dims);
        CHECK(back.values.grid.spacing == grid.spacing);
        CHECK(back.values.grid.origin.x == grid.origin.x);
        CHECK(back.values.data == sol.values.data);
        CHECK(back.residual_norm == sol.residual_norm);
        CHECK(back.iterations == 42);
        CHECK(back.tolerance == sol.tolerance);
        CHECK(back.converged);

        std::ifstream side(path.string() + ".json");
        REQUIRE(side.good());
        std::string text((std::istreambuf_iterator<char>(side)),
                         std::istreambuf_iterator<char>());
        CHECK(text.find("42") != std::string::npos);
        CHECK(text.find("converged") != std::string::npos);

        std::filesystem::remove(path);
        std::filesystem::remove(path.string() + ".json");
    }

    TEST_CASE("grid field view reproduces multilinear fields at the nodes") {
        DisplacementField u = harmonic_gradient_field(HarmonicGradient{Poly3::monomial(1, 1, 1)});
        Grid3 grid({-1.0, -1.0, -1.0}, 0.25, {9, 9, 9});
        GridFn samples = sample_field(u, grid);
        DisplacementField view = grid_field_view(samples);

        for (std::int64_t t : {grid.index(3, 4, 5), grid.index(4, 4, 4), grid.index(2, 6, 3)}) {
            // recover (i, j, k) from the linear index
            std::int64_t i = t % 9, j = (t / 9) % 9, k = t / 81;
            Vec3 p = grid.node(i, j, k);
            CHECK(norm_inf(view.value(p) - u.value(p)) < 1e-13);
            CHECK(norm_inf(view.jacobian(p) - u.jacobian(p)) < 1e-12);
            Hess3 hv = view.hessians(p);
            Hess3 hu = u.hessians(p);
            for (int c = 0; c < 3; ++c) CHECK(norm_inf(hv[c] - hu[c]) < 1e-11);
        }

        // the hessian cell must keep one full layer inside the grid
        CHECK_THROWS_AS(view.hessians(grid.node(0, 4, 4)), PreconditionError);
    }

    TEST_CASE("sample_field stores node values in x-fastest order") {
        DisplacementField u = linear_displacement({}, {1.0, 2.0, 3.0});
        Grid3 grid({0.0, 0.0, 0.0}, 0.5, {3, 3, 3});
        GridFn s = sample_field(u, grid);
        CHECK(s.data.size() == 81);
        CHECK(s.at(grid.index(2, 0, 0)).x == 1.0);
        Mat3 a;
        a(0, 0) = 1.0;
        GridFn t = sample_field(linear_displacement(a, {}), grid);
        CHECK(t.at(grid.index(2, 1, 0)).x == 1.0);
        CHECK(t.at(grid.index(0, 2, 2)).x == 0.0);
    }

    TEST_CASE("manufactured study reports spacings, errors, and ratios coherently") {
        CoefficientPair coeffs = coefficients_wavy();
        DisplacementField u = polynomial_displacement(
            Poly3::monomial(2, 0, 0), Poly3::monomial(0, 1, 1, -0.5), Poly3::monomial(0, 0, 2));
        ConvergenceStudy study =
            manufactured_convergence(coeffs, u, {0.0, 0.0, 0.0}, 1.0, {4, 8}, 1e-10);
        REQUIRE(study.h_values.size() == 2);
        REQUIRE(study.l2_errors.size() == 2);
        REQUIRE(study.ratios.size() == 1);
        CHECK(study.h_values[0] == 0.25);
        CHECK(study.h_values[1] == 0.125);
        CHECK(study.l2_errors[0] > 0.0);
        CHECK(study.l2_errors[1] > 0.0);
        CHECK(study.ratios[0] == study.l2_errors[0] / study.l2_errors[1]);
        CHECK(study.ratios[0] > 1.5);
    }
}
