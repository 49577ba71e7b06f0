#include <doctest.h>

#include <cmath>

#include "forward.hpp"
#include "optimize.hpp"
#include "rng.hpp"

using namespace srcfit;

namespace {

GridPtr unit_square(int m) {
  const double ext[] = {0.0, 1.0, 0.0, 1.0};
  const int res[] = {m, m};
  return build_grid(ext, res);
}

OperatorF laplacian(int dim) {
  std::vector<double> A(static_cast<size_t>(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i) A[i * dim + i] = 1.0;
  return linear_nondivergence(A, std::vector<double>(dim, 0.0), 0.0, dim);
}

// Small linear test problem: sine solution, identity observation on the
// middle subdomain, mild noise.
ProblemData linear_problem(GridPtr g, double gamma, std::uint64_t seed) {
  ProblemData data;
  data.grid = g;
  data.opF = laplacian(2);
  data.opK = obs_identity(2);
  const double box[] = {0.25, 0.75, 0.25, 0.75};
  data.mset = measurement_subdomain(*g, box);
  ScalarField u0(g);
  for (int i = 0; i < g->node_count(); ++i) {
    const auto c = g->coord(i);
    u0[i] = std::sin(M_PI * c[0]) * std::sin(M_PI * c[1]);
  }
  data.g = u0;
  data.k_meas = synth_data(u0, data.opK, data.mset, gamma, seed);
  return data;
}

RegularisationParams small_params() {
  RegularisationParams p;
  p.alpha = 0.01;
  p.beta = 1e-6;
  p.gamma = 0.01;
  p.p_ladder = {4, 8, 16};
  return p;
}

}  // namespace

TEST_CASE("descent reaches the tolerance on the convex linear case") {
  auto g = unit_square(17);
  auto data = linear_problem(g, 0.01, 7);
  auto params = small_params();
  SolveOptions opts;
  opts.tol = 1e-6;
  opts.max_iter = 4000;
  auto [u, rec] = minimise_fixed_p(g_extension(data), 4.0, params, data, opts);
  CHECK(rec.converged);
  CHECK(rec.grad_sup <= opts.tol);

  // energies nonincreasing across accepted steps
  for (size_t i = 1; i < rec.energy_trace.size(); ++i)
    CHECK(rec.energy_trace[i] <= rec.energy_trace[i - 1] + 1e-15);

  // restarting at the minimiser terminates immediately
  auto [u2, rec2] = minimise_fixed_p(u, 4.0, params, data, opts);
  CHECK(rec2.iterations <= 1);
  CHECK(rec2.energy == doctest::Approx(rec.energy).epsilon(1e-12));
}

TEST_CASE("exhausting the iteration budget returns the best iterate flagged") {
  auto g = unit_square(17);
  auto data = linear_problem(g, 0.01, 5);
  auto params = small_params();
  SolveOptions opts;
  opts.tol = 1e-12;  // unreachable in one step
  opts.max_iter = 1;
  auto [u, rec] = minimise_fixed_p(g_extension(data), 4.0, params, data, opts);
  CHECK_FALSE(rec.converged);
  CHECK(rec.iterations == 1);
  CHECK(std::isfinite(rec.energy));
  CHECK(rec.energy <= rec.energy_trace.front());
}

TEST_CASE("iterate must satisfy the boundary data") {
  auto g = unit_square(9);
  auto data = linear_problem(g, 0.0, 3);
  auto params = small_params();
  SolveOptions opts;
  ScalarField bad(g, 1.0);  // boundary values differ from g
  CHECK_THROWS_AS(minimise_fixed_p(bad, 4.0, params, data, opts),
                  std::invalid_argument);
}

TEST_CASE("p continuation warm starts and shrinks the C2 steps") {
  auto g = unit_square(17);
  auto data = linear_problem(g, 0.01, 11);
  auto params = small_params();
  params.p_ladder = {4, 8, 16, 32};
  const std::vector<double> tols = {1e-5, 1e-5, 1e-6, 1e-6};
  auto result = p_continuation(data, params, tols, 4000);
  REQUIRE(result.completed);
  REQUIRE(result.records.size() == 4);

  CHECK(std::isnan(result.records[0].c2_dist_prev));
  // ladder steps are recorded (non-monotone behaviour is reported, not an
  // error: only subsequential convergence is guaranteed)
  for (size_t k = 1; k < result.records.size(); ++k) {
    CHECK(std::isfinite(result.records[k].c2_dist_prev));
    CHECK(result.records[k].c2_dist_prev >= 0.0);
  }

  // warm-started rung never starts worse than the cold extension
  const ScalarField cold = g_extension(data);
  for (size_t k = 1; k < result.iterates.size(); ++k) {
    const double warm_start_energy =
        energy_p(result.iterates[k - 1], params, data, params.p_ladder[k]);
    const double cold_energy =
        energy_p(cold, params, data, params.p_ladder[k]);
    CHECK(warm_start_energy <= cold_energy + 1e-12);
  }

  // final iterate serves as the sup-norm surrogate
  CHECK(energy_inf(result.iterates.back(), params, data) <=
        energy_inf(cold, params, data));
}

TEST_CASE("single-rung ladder reduces to a fixed-p solve") {
  auto g = unit_square(9);
  auto data = linear_problem(g, 0.005, 13);
  auto params = small_params();
  params.p_ladder = {6};
  auto result = p_continuation(data, params, {1e-6}, 3000);
  REQUIRE(result.completed);

  SolveOptions opts;
  opts.tol = 1e-6;
  opts.max_iter = 3000;
  auto [u, rec] = minimise_fixed_p(g_extension(data), 6.0, params, data, opts);
  CHECK(rec.energy == doctest::Approx(result.records[0].energy).epsilon(1e-12));
  for (int i = 0; i < g->node_count(); ++i)
    CHECK(u[i] == doctest::Approx(result.iterates[0][i]).epsilon(1e-9));
}

TEST_CASE("doubling the iteration budget leaves converged energies in place") {
  auto g = unit_square(9);
  auto data = linear_problem(g, 0.01, 17);
  auto params = small_params();
  params.p_ladder = {4, 8};
  const std::vector<double> tols = {1e-6, 1e-6};
  auto a = p_continuation(data, params, tols, 2000);
  auto b = p_continuation(data, params, tols, 4000);
  REQUIRE(a.completed);
  REQUIRE(b.completed);
  for (size_t k = 0; k < a.records.size(); ++k)
    CHECK(std::abs(a.records[k].energy - b.records[k].energy) <=
          10 * tols[k]);
}

TEST_CASE("g_extension solves the Laplace problem for the boundary trace") {
  auto g = unit_square(17);
  ProblemData data;
  data.grid = g;
  data.opF = laplacian(2);
  data.opK = obs_identity(2);
  const double box[] = {0.25, 0.75, 0.25, 0.75};
  data.mset = measurement_subdomain(*g, box);
  // harmonic polynomial x^2 - y^2: extension must reproduce it exactly
  ScalarField harm(g);
  for (int i = 0; i < g->node_count(); ++i) {
    const auto c = g->coord(i);
    harm[i] = c[0] * c[0] - c[1] * c[1];
  }
  data.g = harm;
  data.k_meas.assign(data.mset.size(), 0.0);
  const ScalarField ext = g_extension(data);
  for (int i = 0; i < g->node_count(); ++i)
    CHECK(ext[i] == doctest::Approx(harm[i]).epsilon(1e-9));
}
