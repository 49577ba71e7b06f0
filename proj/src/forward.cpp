#include "forward.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <stdexcept>

#include "rng.hpp"

namespace srcfit {

namespace {

// Interior residual sup-norm of F[u] - f.
double interior_residual(const OperatorF& opF, const ScalarField& u,
                         const ScalarField& f, std::vector<double>* out) {
  const Grid& g = *u.grid;
  const ScalarField fu = eval_F(opF, u);
  double sup = 0.0;
  for (int i = 0; i < g.node_count(); ++i) {
    if (g.is_boundary(i)) continue;
    const double r = fu[i] - f[i];
    if (out) out->push_back(r);
    sup = std::max(sup, std::abs(r));
  }
  return sup;
}

bool hess_positive_definite(const TensorField& hess, int node, int dim) {
  if (dim == 1) return hess.value[0][node] > 0.0;
  const double xx = hess.value[0][node];
  const double xy = hess.value[1][node];
  const double yy = hess.value[2][node];
  return xx > 0.0 && xx * yy - xy * xy > 0.0;
}

// Appends the row of the composed derivative stencil for `slot` at grid node
// (ix, iy), scaled by `scale`, into the triplet list (interior columns only).
void add_slot_row(const Grid& g, std::array<int, 2> slot, int ix, int iy,
                  double scale, int row,
                  const std::vector<int>& interior_id,
                  std::vector<Eigen::Triplet<double>>& trip) {
  const AxisOperator* opx = slot[0] > 0 ? &g.axis_op(0, slot[0]) : nullptr;
  const AxisOperator* opy = slot[1] > 0 ? &g.axis_op(1, slot[1]) : nullptr;

  const int xlen = opx ? opx->len[ix] : 1;
  const int ylen = opy ? opy->len[iy] : 1;
  for (int ky = 0; ky < ylen; ++ky) {
    const int jy = opy ? opy->first[iy] + ky : iy;
    const double cy = opy ? opy->coef[opy->offset[iy] + ky] : 1.0;
    for (int kx = 0; kx < xlen; ++kx) {
      const int jx = opx ? opx->first[ix] + kx : ix;
      const double cx = opx ? opx->coef[opx->offset[ix] + kx] : 1.0;
      const int col = interior_id[g.index(jx, jy)];
      if (col < 0) continue;  // boundary value is fixed
      trip.emplace_back(row, col, scale * cx * cy);
    }
  }
}

}  // namespace

ForwardResult solve_dirichlet(const OperatorF& opF, const ScalarField& f,
                              const ScalarField& g_data, double tol,
                              int max_iter) {
  if (f.grid.get() != g_data.grid.get())
    throw std::invalid_argument("solve_dirichlet: grid mismatch");
  const Grid& g = *f.grid;
  const int n = g.node_count();

  std::vector<int> interior_id(n, -1);
  std::vector<int> interior_nodes;
  for (int i = 0; i < n; ++i) {
    if (!g.is_boundary(i)) {
      interior_id[i] = static_cast<int>(interior_nodes.size());
      interior_nodes.push_back(i);
    }
  }
  const int ni = static_cast<int>(interior_nodes.size());

  ForwardResult res;
  res.u = ScalarField(f.grid);
  for (int i = 0; i < n; ++i) res.u[i] = g.is_boundary(i) ? g_data[i] : 0.0;

  std::vector<double> r;
  r.reserve(ni);
  double sup = interior_residual(opF, res.u, f, &r);

  for (int iter = 0; iter < max_iter; ++iter) {
    if (sup <= tol) {
      res.converged = true;
      res.iterations = iter;
      res.residual = sup;
      return res;
    }

    const FPartials fp = eval_F_partials(opF, res.u);
    for (int k = 0; k < ni; ++k) {
      if (!hess_positive_definite(fp.hess, interior_nodes[k], g.dim)) {
        res.iterations = iter;
        res.residual = sup;
        res.message = "indefinite Hessian coefficient encountered";
        return res;
      }
    }

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(ni) * 16);
    Eigen::VectorXd rhs(ni);
    for (int k = 0; k < ni; ++k) {
      const int node = interior_nodes[k];
      const int ix = node % g.res[0];
      const int iy = node / g.res[0];
      rhs[k] = -r[k];
      trip.emplace_back(k, k, fp.r[node]);
      for (int a = 0; a < g.dim; ++a)
        add_slot_row(g, a == 0 ? std::array<int, 2>{1, 0}
                               : std::array<int, 2>{0, 1},
                     ix, iy, fp.grad[a][node], k, interior_id, trip);
      for (int s = 0; s < fp.hess.slot_count(); ++s)
        add_slot_row(g, fp.hess.slots[s], ix, iy,
                     fp.hess.multiplicity[s] * fp.hess.value[s][node], k,
                     interior_id, trip);
    }

    Eigen::SparseMatrix<double> J(ni, ni);
    J.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success) {
      res.iterations = iter;
      res.residual = sup;
      res.message = "sparse factorisation failed";
      return res;
    }
    const Eigen::VectorXd delta = lu.solve(rhs);

    // Damped update: halve the step until the residual drops.
    double lambda = 1.0;
    ScalarField trial = res.u;
    double trial_sup = sup;
    bool accepted = false;
    while (lambda > 1e-10) {
      for (int k = 0; k < ni; ++k)
        trial[interior_nodes[k]] = res.u[interior_nodes[k]] + lambda * delta[k];
      std::vector<double> trial_r;
      trial_r.reserve(ni);
      trial_sup = interior_residual(opF, trial, f, &trial_r);
      if (trial_sup < sup) {
        res.u = trial;
        r = std::move(trial_r);
        sup = trial_sup;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) {
      res.iterations = iter + 1;
      res.residual = sup;
      res.message = "damping stalled";
      return res;
    }
  }

  res.converged = sup <= tol;
  res.iterations = max_iter;
  res.residual = sup;
  if (!res.converged) res.message = "max iterations reached";
  return res;
}

std::vector<double> synth_data(const ScalarField& u0, const OperatorK& opK,
                               const MeasurementSet& ms, double gamma,
                               std::uint64_t seed) {
  if (!(gamma >= 0.0))
    throw std::invalid_argument("synth_data: gamma must be nonnegative");
  std::vector<double> k = eval_K(opK, u0, ms);
  Rng rng(seed);
  for (double& v : k) v += gamma * rng.next_symmetric();
  return k;
}

}  // namespace srcfit
