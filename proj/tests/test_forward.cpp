#include <doctest.h>

#include <cmath>

#include "forward.hpp"
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

ScalarField sine_field(GridPtr g) {
  ScalarField u(g);
  for (int i = 0; i < g->node_count(); ++i) {
    const auto c = g->coord(i);
    u[i] = std::sin(M_PI * c[0]) * std::sin(M_PI * c[1]);
  }
  return u;
}

double max_err(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i)
    m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

}  // namespace

TEST_CASE("linear problems converge in one Newton step") {
  auto g = unit_square(17);
  ScalarField f(g, 1.0);
  ScalarField bc(g);
  auto r = solve_dirichlet(laplacian(2), f, bc);
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  CHECK(r.residual < 1e-10);
}

TEST_CASE("zero data yields the zero solution") {
  auto g = unit_square(9);
  const ScalarField zero(g);
  for (auto op : {laplacian(2), fully_nonlinear_eps(0.0, 2)}) {
    auto r = solve_dirichlet(op, zero, zero);
    CHECK(r.converged);
    CHECK(sup_norm(r.u.v) < 1e-12);
  }
}

TEST_CASE("discretely consistent sources are recovered to solver tolerance") {
  // f built with the same stencils makes u0 an exact discrete solution.
  auto g = unit_square(17);
  auto u0 = sine_field(g);
  for (auto op : {laplacian(2), fully_nonlinear_eps(0.25, 2)}) {
    auto f = eval_F(op, u0);
    auto r = solve_dirichlet(op, f, u0, 1e-11, 50);
    CHECK(r.converged);
    CHECK(max_err(r.u, u0) < 1e-9);
  }
}

TEST_CASE("analytic sources are recovered at second order") {
  const double eps = 0.25;
  for (int which = 0; which < 2; ++which) {
    double errs[2];
    int k = 0;
    for (int m : {17, 33}) {
      auto g = unit_square(m);
      auto u0 = sine_field(g);
      // closed-form source for u0 = sin(pi x) sin(pi y)
      ScalarField f(g);
      for (int i = 0; i < g->node_count(); ++i) {
        const auto c = g->coord(i);
        const double ss = std::sin(M_PI * c[0]) * std::sin(M_PI * c[1]);
        const double cc = std::cos(M_PI * c[0]) * std::cos(M_PI * c[1]);
        const double lap = -2.0 * M_PI * M_PI * ss;
        if (which == 0) {
          f[i] = lap;
        } else {
          const double n2 =
              2.0 * std::pow(M_PI * M_PI * ss, 2) +
              2.0 * std::pow(M_PI * M_PI * cc, 2);
          f[i] = lap + eps * std::sqrt(1.0 + n2);
        }
      }
      auto op = which == 0 ? laplacian(2) : fully_nonlinear_eps(eps, 2);
      auto r = solve_dirichlet(op, f, u0, 1e-11, 50);
      CHECK(r.converged);
      errs[k++] = max_err(r.u, u0);
    }
    const double ratio = errs[0] / errs[1];
    CHECK(ratio > 3.0);
    CHECK(ratio < 5.2);
  }
}

TEST_CASE("nonlinear solves take several damped Newton steps and stay monotone") {
  auto g = unit_square(17);
  auto u0 = sine_field(g);
  for (auto& v : u0.v) v *= 3.0;  // larger amplitude to leave the linear regime
  auto op = fully_nonlinear_eps(0.5, 2);
  auto f = eval_F(op, u0);
  auto r = solve_dirichlet(op, f, u0, 1e-10, 50);
  CHECK(r.converged);
  CHECK(max_err(r.u, u0) < 1e-8);
}

TEST_CASE("an indefinite Hessian coefficient aborts the Newton solve") {
  auto g = unit_square(9);
  OperatorF bad;
  bad.name = "indefinite";
  bad.value = [](const PointState& s) { return -s.hess[0] - s.hess[3]; };
  bad.d_r = [](const PointState&) { return 0.0; };
  bad.d_grad = [](const PointState&) { return std::array<double, 2>{}; };
  bad.d_hess = [](const PointState&) {
    return std::array<double, 4>{-1.0, 0.0, 0.0, -1.0};
  };
  ScalarField f(g, 1.0);
  const ScalarField bc(g);
  auto r = solve_dirichlet(bad, f, bc, 1e-10, 10);
  CHECK_FALSE(r.converged);
  CHECK(r.message == "indefinite Hessian coefficient encountered");
}

TEST_CASE("synth_data respects the noise level and the seed") {
  auto g = unit_square(17);
  auto u0 = sine_field(g);
  const double box[] = {0.25, 0.75, 0.25, 0.75};
  auto ms = measurement_subdomain(*g, box);
  auto opk = obs_identity(2);

  auto clean = synth_data(u0, opk, ms, 0.0, 42);
  auto k0 = eval_K(opk, u0, ms);
  for (size_t j = 0; j < clean.size(); ++j)
    CHECK(clean[j] == doctest::Approx(k0[j]));

  const double gamma = 0.05;
  auto noisy = synth_data(u0, opk, ms, gamma, 42);
  double worst = 0.0;
  for (size_t j = 0; j < noisy.size(); ++j)
    worst = std::max(worst, std::abs(noisy[j] - k0[j]));
  CHECK(worst <= gamma);
  CHECK(worst > 0.0);

  auto again = synth_data(u0, opk, ms, gamma, 42);
  CHECK(noisy == again);
  auto other = synth_data(u0, opk, ms, gamma, 43);
  CHECK(noisy != other);
}
