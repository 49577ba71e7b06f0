#include "functional.hpp"

#include <cmath>
#include <stdexcept>

namespace srcfit {

void RegularisationParams::validate(int dim) const {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be nonnegative");
  if (p_ladder.empty()) throw std::invalid_argument("p_ladder is empty");
  double prev = dim;
  for (double p : p_ladder) {
    if (!(p > prev))
      throw std::invalid_argument(
          prev == dim ? "p_ladder entries must exceed the dimension"
                      : "p_ladder not increasing");
    prev = p;
  }
}

namespace {

void check_p(double p, int dim) {
  if (!(p > dim))
    throw std::invalid_argument("exponent p must exceed the dimension");
}

std::vector<double> data_residual(const ScalarField& u,
                                  const ProblemData& data) {
  std::vector<double> e = eval_K(data.opK, u, data.mset);
  if (e.size() != data.k_meas.size())
    throw std::invalid_argument("measured data size mismatch");
  for (size_t j = 0; j < e.size(); ++j) e[j] -= data.k_meas[j];
  return e;
}

std::vector<double> softened(std::span<const double> f, double p) {
  std::vector<double> s(f.size());
  for (size_t i = 0; i < f.size(); ++i) s[i] = soft_abs(f[i], p);
  return s;
}

}  // namespace

EnergyTerms energy_p_terms(const ScalarField& u,
                           const RegularisationParams& params,
                           const ProblemData& data, double p) {
  const Grid& g = *u.grid;
  check_p(p, g.dim);
  EnergyTerms out;

  const std::vector<double> e = data_residual(u, data);
  out.data = normalized_lp_norm(softened(e, p), data.mset.weight, p);

  const ScalarField fu = eval_F(data.opF, u);
  out.source =
      params.alpha * normalized_lp_norm(softened(fu.v, p), g.cell_weight, p);

  out.smooth = 0.5 * params.beta * highest_order_seminorm_sq(u);
  return out;
}

double energy_p(const ScalarField& u, const RegularisationParams& params,
                const ProblemData& data, double p) {
  return energy_p_terms(u, params, data, p).total();
}

EnergyTerms energy_inf_terms(const ScalarField& u,
                             const RegularisationParams& params,
                             const ProblemData& data) {
  EnergyTerms out;
  out.data = sup_norm(data_residual(u, data));
  out.source = params.alpha * sup_norm(eval_F(data.opF, u).v);
  out.smooth = 0.5 * params.beta * highest_order_seminorm_sq(u);
  return out;
}

double energy_inf(const ScalarField& u, const RegularisationParams& params,
                  const ProblemData& data) {
  return energy_inf_terms(u, params, data).total();
}

std::vector<double> gradient_p(const ScalarField& u,
                               const RegularisationParams& params,
                               const ProblemData& data, double p) {
  const Grid& g = *u.grid;
  check_p(p, g.dim);
  const int n = g.node_count();
  std::vector<double> grad(n, 0.0);

  // Data term. With e = K[u]-k, s = |e|_(p) and S the normalised p-norm of
  // s, the derivative along phi is
  //   (1/mass) sum_j w_j (s_j/S)^(p-2) (e_j/S) [K_r phi + K_p . Dphi].
  {
    const std::vector<double> e = data_residual(u, data);
    const std::vector<double> s = softened(e, p);
    const double S = normalized_lp_norm(s, data.mset.weight, p);
    const double mass = data.mset.mass();
    const KPartials kp = eval_K_partials(data.opK, u, data.mset);

    ScalarField z0(u.grid);
    std::array<ScalarField, 2> z1{ScalarField(u.grid), ScalarField(u.grid)};
    for (int j = 0; j < data.mset.size(); ++j) {
      const double density =
          std::pow(s[j] / S, p - 2.0) * (e[j] / S) * data.mset.weight[j] / mass;
      const int node = data.mset.nodes[j];
      z0[node] += density * kp.r[j];
      z1[0][node] += density * kp.grad[0][j];
      if (g.dim == 2) z1[1][node] += density * kp.grad[1][j];
    }
    for (int i = 0; i < n; ++i) grad[i] += z0[i];
    for (int a = 0; a < g.dim; ++a) {
      const ScalarField adj = diff_slot_adjoint(z1[a], a == 0
                                                            ? std::array<int, 2>{1, 0}
                                                            : std::array<int, 2>{0, 1});
      for (int i = 0; i < n; ++i) grad[i] += adj[i];
    }
  }

  // Source term, same structure on the whole domain with F partials and the
  // extra Hessian pairing F_X : D^2 phi.
  {
    const ScalarField fu = eval_F(data.opF, u);
    const std::vector<double> s = softened(fu.v, p);
    const double S = normalized_lp_norm(s, g.cell_weight, p);
    const double vol = g.volume();
    const FPartials fp = eval_F_partials(data.opF, u);

    std::vector<double> density(n);
    for (int i = 0; i < n; ++i)
      density[i] = params.alpha * std::pow(s[i] / S, p - 2.0) * (fu[i] / S) *
                   g.cell_weight[i] / vol;

    for (int i = 0; i < n; ++i) grad[i] += density[i] * fp.r[i];
    for (int a = 0; a < g.dim; ++a) {
      ScalarField z(u.grid);
      for (int i = 0; i < n; ++i) z[i] = density[i] * fp.grad[a][i];
      const ScalarField adj = diff_slot_adjoint(z, a == 0
                                                       ? std::array<int, 2>{1, 0}
                                                       : std::array<int, 2>{0, 1});
      for (int i = 0; i < n; ++i) grad[i] += adj[i];
    }
    for (int sidx = 0; sidx < fp.hess.slot_count(); ++sidx) {
      ScalarField z(u.grid);
      const double mult = fp.hess.multiplicity[sidx];
      for (int i = 0; i < n; ++i)
        z[i] = density[i] * mult * fp.hess.value[sidx][i];
      const ScalarField adj = diff_slot_adjoint(z, fp.hess.slots[sidx]);
      for (int i = 0; i < n; ++i) grad[i] += adj[i];
    }
  }

  // Smoothing term: beta * avg(D^m u : D^m phi).
  {
    const TensorField dm = diff(u, g.max_order());
    const double vol = g.volume();
    for (int sidx = 0; sidx < dm.slot_count(); ++sidx) {
      ScalarField z(u.grid);
      const double mult = dm.multiplicity[sidx];
      for (int i = 0; i < n; ++i)
        z[i] = params.beta * mult * dm.value[sidx][i] * g.cell_weight[i] / vol;
      const ScalarField adj = diff_slot_adjoint(z, dm.slots[sidx]);
      for (int i = 0; i < n; ++i) grad[i] += adj[i];
    }
  }

  for (int i = 0; i < n; ++i)
    if (g.is_boundary(i)) grad[i] = 0.0;
  return grad;
}

namespace {

// Collects one stencil row in interior indices, combining duplicate
// columns, and emits the weighted outer product c * J J^T into triplets.
class RowOuter {
public:
  void add(int interior_col, double v) {
    if (interior_col < 0) return;  // boundary column, value held fixed
    for (auto& [c, val] : entries_)
      if (c == interior_col) {
        val += v;
        return;
      }
    entries_.emplace_back(interior_col, v);
  }
  void flush(double c, CurvatureSystem& sys) {
    for (const auto& [ci, vi] : entries_) {
      for (const auto& [cj, vj] : entries_) {
        sys.row.push_back(ci);
        sys.col.push_back(cj);
        sys.val.push_back(c * vi * vj);
      }
    }
    entries_.clear();
  }

private:
  std::vector<std::pair<int, double>> entries_;
};

}  // namespace

CurvatureSystem curvature_gn_p(const ScalarField& u,
                               const RegularisationParams& params,
                               const ProblemData& data, double p) {
  const Grid& g = *u.grid;
  check_p(p, g.dim);
  const int n = g.node_count();

  CurvatureSystem sys;
  std::vector<int> interior_id(n, -1);
  for (int i = 0; i < n; ++i) {
    if (!g.is_boundary(i)) {
      interior_id[i] = static_cast<int>(sys.interior.size());
      sys.interior.push_back(i);
    }
  }

  const std::array<int, 2> d1x{1, 0}, d1y{0, 1};
  RowOuter row;

  // Data block: J^T C J with
  // C_jj = (w_j/mass) (s_j/S)^(p-4) ((p-1) e_j^2 + p^-2) / S^3.
  {
    const std::vector<double> e = data_residual(u, data);
    const std::vector<double> s = softened(e, p);
    const double S = normalized_lp_norm(s, data.mset.weight, p);
    const double mass = data.mset.mass();
    const KPartials kp = eval_K_partials(data.opK, u, data.mset);
    for (int j = 0; j < data.mset.size(); ++j) {
      const int node = data.mset.nodes[j];
      const int ix = node % g.res[0];
      const int iy = node / g.res[0];
      row.add(interior_id[node], kp.r[j]);
      visit_slot_row(g, d1x, ix, iy, [&](int col, double v) {
        row.add(interior_id[col], kp.grad[0][j] * v);
      });
      if (g.dim == 2)
        visit_slot_row(g, d1y, ix, iy, [&](int col, double v) {
          row.add(interior_id[col], kp.grad[1][j] * v);
        });
      const double c = data.mset.weight[j] / mass *
                       std::pow(s[j] / S, p - 4.0) *
                       ((p - 1.0) * e[j] * e[j] + 1.0 / (p * p)) / (S * S * S);
      row.flush(c, sys);
    }
  }

  // Source block, same structure with the Hessian pairing included.
  {
    const ScalarField fu = eval_F(data.opF, u);
    const std::vector<double> s = softened(fu.v, p);
    const double S = normalized_lp_norm(s, g.cell_weight, p);
    const double vol = g.volume();
    const FPartials fp = eval_F_partials(data.opF, u);
    for (int node = 0; node < n; ++node) {
      const int ix = node % g.res[0];
      const int iy = node / g.res[0];
      row.add(interior_id[node], fp.r[node]);
      visit_slot_row(g, d1x, ix, iy, [&](int col, double v) {
        row.add(interior_id[col], fp.grad[0][node] * v);
      });
      if (g.dim == 2)
        visit_slot_row(g, d1y, ix, iy, [&](int col, double v) {
          row.add(interior_id[col], fp.grad[1][node] * v);
        });
      for (int s2 = 0; s2 < fp.hess.slot_count(); ++s2) {
        const double fx = fp.hess.multiplicity[s2] * fp.hess.value[s2][node];
        visit_slot_row(g, fp.hess.slots[s2], ix, iy, [&](int col, double v) {
          row.add(interior_id[col], fx * v);
        });
      }
      const double c = params.alpha * g.cell_weight[node] / vol *
                       std::pow(s[node] / S, p - 4.0) *
                       ((p - 1.0) * fu[node] * fu[node] + 1.0 / (p * p)) /
                       (S * S * S);
      row.flush(c, sys);
    }
  }

  // Smoothing block: exact, (beta/vol) sum_s mult D_s^T W D_s.
  {
    const int m = g.max_order();
    const auto slots = tensor_slots(g.dim, m);
    const double vol = g.volume();
    for (const auto& slot : slots) {
      const double mult = slot_multiplicity(slot);
      for (int node = 0; node < n; ++node) {
        const int ix = node % g.res[0];
        const int iy = node / g.res[0];
        visit_slot_row(g, slot, ix, iy, [&](int col, double v) {
          row.add(interior_id[col], v);
        });
        row.flush(params.beta * mult * g.cell_weight[node] / vol, sys);
      }
    }
  }
  return sys;
}

}  // namespace srcfit
