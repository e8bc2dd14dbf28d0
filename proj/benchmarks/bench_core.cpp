#include <benchmark/benchmark.h>

#include "lamelab/fd_solver.hpp"
#include "lamelab/quadrature.hpp"
#include "lamelab/solutions.hpp"

using namespace lamelab;

namespace {

DisplacementField grad_xyz() {
    return harmonic_gradient_field(HarmonicGradient{Poly3::monomial(1, 1, 1)});
}

Grid3 cube_grid(std::int64_t n, double side) {
    double h = side / static_cast<double>(n - 1);
    return Grid3({-side / 2, -side / 2, -side / 2}, h, {n, n, n});
}

void BM_BallMass(benchmark::State& state) {
    DisplacementField u = grad_xyz();
    BallSpec ball({}, 1.0);
    ProductBallRule rule(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)),
                         2 * static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(l2_mass_ball(u, ball, rule));
    }
    state.SetItemsProcessed(state.iterations() * rule.n_r * rule.n_p * rule.n_a);
}

void BM_StencilApply(benchmark::State& state) {
    Grid3 grid = cube_grid(state.range(0), 2.0);
    CoefficientGrid cg = sample_coefficients(coefficients_wavy(), grid);
    GridFn x = sample_field(grad_xyz(), grid);
    for (auto _ : state) {
        GridFn y = apply_energy_op(cg, x);
        benchmark::DoNotOptimize(y.data.data());
    }
    state.SetItemsProcessed(state.iterations() * grid.num_nodes());
}

void BM_DirichletSolve(benchmark::State& state) {
    CoefficientPair coeffs = coefficients_wavy();
    DisplacementField u = grad_xyz();
    Grid3 grid = cube_grid(state.range(0), 1.5);
    auto f = [](const Vec3&) { return Vec3{}; };
    auto g = [&u](const Vec3& p) { return u.value(p); };
    for (auto _ : state) {
        GridSolution sol = solve_dirichlet(coeffs, f, g, grid, 1e-8);
        benchmark::DoNotOptimize(sol.iterations);
    }
}

void BM_KelvinJet(benchmark::State& state) {
    DisplacementField u = kelvin_field(KelvinSource{});
    Vec3 p{0.3, -0.2, 0.45};
    for (auto _ : state) {
        benchmark::DoNotOptimize(u.value(p));
        benchmark::DoNotOptimize(u.jacobian(p));
        benchmark::DoNotOptimize(u.hessians(p));
    }
}

BENCHMARK(BM_BallMass)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_StencilApply)->Arg(17)->Arg(33)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_DirichletSolve)->Arg(9)->Arg(13)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KelvinJet)->Unit(benchmark::kNanosecond);

} // namespace

BENCHMARK_MAIN();
