#include "optimize.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <memory>
#include <stdexcept>

#include "forward.hpp"

namespace srcfit {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

struct Pair {
  std::vector<double> s, y;
  double rho;
};

// Seed metric for the quasi-Newton recursion: the factorised Gauss-Newton
// curvature at the rung start. apply() maps a full nodal vector through the
// inverse, leaving boundary entries at zero.
class SeedMetric {
public:
  SeedMetric(const ScalarField& u, const RegularisationParams& params,
             const ProblemData& data, double p) {
    const CurvatureSystem sys = curvature_gn_p(u, params, data, p);
    interior_ = sys.interior;
    const int ni = static_cast<int>(interior_.size());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(sys.val.size() + ni);
    for (size_t k = 0; k < sys.val.size(); ++k)
      trip.emplace_back(sys.row[k], sys.col[k], sys.val[k]);
    Eigen::SparseMatrix<double> M(ni, ni);
    M.setFromTriplets(trip.begin(), trip.end());
    // tiny shift guards against semidefinite corner cases
    double dmax = 0.0;
    for (int i = 0; i < ni; ++i) dmax = std::max(dmax, M.coeff(i, i));
    if (dmax <= 0.0) dmax = 1.0;
    Eigen::SparseMatrix<double> I(ni, ni);
    I.setIdentity();
    M += (1e-13 * dmax) * I;
    ldlt_.compute(M);
    ok_ = ldlt_.info() == Eigen::Success;
  }

  bool ok() const { return ok_; }

  std::vector<double> apply(const std::vector<double>& v) const {
    std::vector<double> out(v.size(), 0.0);
    if (!ok_) {
      out = v;  // fall back to the unpreconditioned metric
      return out;
    }
    Eigen::VectorXd rhs(interior_.size());
    for (size_t k = 0; k < interior_.size(); ++k) rhs[k] = v[interior_[k]];
    const Eigen::VectorXd sol = ldlt_.solve(rhs);
    for (size_t k = 0; k < interior_.size(); ++k) out[interior_[k]] = sol[k];
    return out;
  }

private:
  std::vector<int> interior_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  bool ok_ = false;
};

// Two-loop recursion seeded with the curvature metric, rescaled by the
// latest pair.
std::vector<double> lbfgs_direction(const std::deque<Pair>& mem,
                                    const std::vector<double>& grad,
                                    const SeedMetric& h0) {
  std::vector<double> q = grad;
  std::vector<double> alpha(mem.size());
  for (int i = static_cast<int>(mem.size()) - 1; i >= 0; --i) {
    alpha[i] = mem[i].rho * dot(mem[i].s, q);
    for (size_t k = 0; k < q.size(); ++k) q[k] -= alpha[i] * mem[i].y[k];
  }
  q = h0.apply(q);
  if (!mem.empty()) {
    const auto& last = mem.back();
    const double yh0y = dot(last.y, h0.apply(last.y));
    if (yh0y > 0.0) {
      const double scale = dot(last.s, last.y) / yh0y;
      for (double& v : q) v *= scale;
    }
  }
  for (size_t i = 0; i < mem.size(); ++i) {
    const double beta = mem[i].rho * dot(mem[i].y, q);
    for (size_t k = 0; k < q.size(); ++k)
      q[k] += (alpha[i] - beta) * mem[i].s[k];
  }
  for (double& v : q) v = -v;
  return q;
}

}  // namespace

std::pair<ScalarField, RungRecord> minimise_fixed_p(
    const ScalarField& u0, double p, const RegularisationParams& params,
    const ProblemData& data, const SolveOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid& g = *u0.grid;
  for (int i = 0; i < g.node_count(); ++i) {
    if (g.is_boundary(i) &&
        std::abs(u0[i] - data.g[i]) > 1e-12 * (1.0 + std::abs(data.g[i])))
      throw std::invalid_argument("minimise_fixed_p: iterate violates boundary data");
  }

  RungRecord rec;
  rec.p = p;
  rec.tol = opts.tol;

  ScalarField u = u0;
  double fu = energy_p(u, params, data, p);
  std::vector<double> grad = gradient_p(u, params, data, p);
  double gsup = sup_norm(grad);
  rec.energy_trace.push_back(fu);

  // The seed metric staleness grows with p (the |.|^(p-2) weights move with
  // the iterate), so it is refactorised at the current iterate every few
  // dozen steps.
  const int refresh_period = 30;
  auto h0 = std::make_unique<SeedMetric>(u0, params, data, p);
  std::deque<Pair> mem;
  bool reset_direction = false;
  int stagnant = 0;

  int iter = 0;
  for (; iter < opts.max_iter && gsup > opts.tol; ++iter) {
    if (iter > 0 && iter % refresh_period == 0) {
      h0 = std::make_unique<SeedMetric>(u, params, data, p);
      mem.clear();  // stale pairs mix metrics
    }
    std::vector<double> dir;
    if (mem.empty() || reset_direction) {
      // steepest descent in the seeded metric
      dir = h0->apply(grad);
      for (double& v : dir) v = -v;
      reset_direction = false;
    } else {
      dir = lbfgs_direction(mem, grad, *h0);
    }
    double slope = dot(grad, dir);
    if (!(slope < 0.0)) {
      dir = h0->apply(grad);
      for (double& v : dir) v = -v;
      slope = dot(grad, dir);
      if (!(slope < 0.0)) break;  // zero direction: nothing can move
    }

    // Armijo backtracking, factor 0.5, slope parameter 1e-4.
    double step = 1.0;
    ScalarField trial = u;
    double ftrial = fu;
    bool accepted = false;
    while (step >= 1e-14) {
      for (size_t k = 0; k < u.v.size(); ++k)
        trial.v[k] = u.v[k] + step * dir[k];
      ftrial = energy_p(trial, params, data, p);
      if (ftrial <= fu + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      ++rec.linesearch_failures;
      break;  // stalled
    }
    if (ftrial == fu) {
      // accepted step too small to move the energy at double precision
      if (++stagnant >= 3) {
        ++rec.linesearch_failures;
        break;
      }
    } else {
      stagnant = 0;
    }

    std::vector<double> grad_new = gradient_p(trial, params, data, p);
    Pair pair;
    pair.s.resize(u.v.size());
    pair.y.resize(u.v.size());
    for (size_t k = 0; k < u.v.size(); ++k) {
      pair.s[k] = trial.v[k] - u.v[k];
      pair.y[k] = grad_new[k] - grad[k];
    }
    const double sy = dot(pair.s, pair.y);
    if (sy > 1e-14 * dot(pair.s, pair.s)) {
      pair.rho = 1.0 / sy;
      mem.push_back(std::move(pair));
      if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
    } else {
      reset_direction = true;  // curvature failure
    }

    u = std::move(trial);
    fu = ftrial;
    grad = std::move(grad_new);
    gsup = sup_norm(grad);
    rec.energy_trace.push_back(fu);
    if (std::getenv("SRCFIT_OPT_TRACE") && iter % 100 == 0)
      std::fprintf(stderr, "p=%g iter=%d gsup=%.3e step=%.3e E=%.12f\n", p,
                   iter, gsup, step, fu);
  }

  rec.iterations = iter;
  rec.converged = gsup <= opts.tol;
  rec.energy = fu;
  rec.grad_sup = gsup;
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return {std::move(u), std::move(rec)};
}

double c2_distance(const ScalarField& a, const ScalarField& b) {
  if (a.grid.get() != b.grid.get())
    throw std::invalid_argument("c2_distance: grid mismatch");
  ScalarField d(a.grid);
  for (size_t i = 0; i < d.v.size(); ++i) d.v[i] = a.v[i] - b.v[i];
  double m = sup_norm(d.v);
  for (int k = 1; k <= 2; ++k) {
    const TensorField t = diff(d, k);
    for (const auto& slot : t.value) m = std::max(m, sup_norm(slot));
  }
  return m;
}

ScalarField g_extension(const ProblemData& data) {
  const Grid& g = *data.grid;
  std::vector<double> ident(static_cast<size_t>(g.dim) * g.dim, 0.0);
  for (int i = 0; i < g.dim; ++i) ident[i * g.dim + i] = 1.0;
  std::vector<double> zero(g.dim, 0.0);
  const OperatorF laplace = linear_nondivergence(ident, zero, 0.0, g.dim);
  const ScalarField zero_field(data.grid);
  ForwardResult r =
      solve_dirichlet(laplace, zero_field, data.g, 1e-10, 5);
  if (r.converged) return r.u;
  return data.g;  // nodal extension fallback
}

ContinuationResult p_continuation(const ProblemData& data,
                                  const RegularisationParams& params,
                                  const std::vector<double>& tol_schedule,
                                  int max_iter) {
  params.validate(data.grid->dim);
  if (tol_schedule.empty())
    throw std::invalid_argument("p_continuation: empty tolerance schedule");
  for (double k : data.k_meas)
    if (!std::isfinite(k))
      throw std::invalid_argument("p_continuation: non-finite measurement");
  for (int i = 0; i < data.grid->node_count(); ++i)
    if (data.grid->is_boundary(i) && !std::isfinite(data.g[i]))
      throw std::invalid_argument("p_continuation: non-finite boundary data");

  ContinuationResult out;
  ScalarField u = g_extension(data);
  ScalarField prev = u;
  for (size_t k = 0; k < params.p_ladder.size(); ++k) {
    SolveOptions opts;
    opts.tol = k < tol_schedule.size() ? tol_schedule[k] : tol_schedule.back();
    opts.max_iter = max_iter;
    auto [uk, rec] = minimise_fixed_p(u, params.p_ladder[k], params, data, opts);
    rec.c2_dist_prev = k == 0 ? std::nan("") : c2_distance(uk, prev);
    out.records.push_back(std::move(rec));
    out.iterates.push_back(uk);
    if (!out.records.back().converged) {
      out.failed_rung = static_cast<int>(k);
      return out;
    }
    prev = uk;
    u = std::move(uk);
  }
  out.completed = true;
  return out;
}

}  // namespace srcfit
