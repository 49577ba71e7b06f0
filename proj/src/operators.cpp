#include "operators.hpp"

#include <cmath>
#include <stdexcept>

#include "rng.hpp"

namespace srcfit {

namespace {

// Gathers per-node states from u and its derivative tensors.
class StateSweep {
public:
  explicit StateSweep(const ScalarField& u)
      : grid_(*u.grid), u_(u), d1_(diff(u, 1)), d2_(diff(u, 2)) {}

  PointState at(int node) const {
    PointState s;
    s.dim = grid_.dim;
    s.x = grid_.coord(node);
    s.r = u_[node];
    s.grad[0] = d1_.value[0][node];
    if (grid_.dim == 2) s.grad[1] = d1_.value[1][node];
    if (grid_.dim == 1) {
      s.hess[0] = d2_.value[0][node];
    } else {
      const double xx = d2_.value[0][node];
      const double xy = d2_.value[1][node];
      const double yy = d2_.value[2][node];
      s.hess = {xx, xy, xy, yy};
    }
    return s;
  }

  const Grid& grid() const { return grid_; }

private:
  const Grid& grid_;
  const ScalarField& u_;
  TensorField d1_;
  TensorField d2_;
};

void require_spd(std::span<const double> A, int dim) {
  if (A.size() != static_cast<size_t>(dim * dim))
    throw std::invalid_argument("coefficient matrix has wrong size");
  if (dim == 2 && std::abs(A[1] - A[2]) > 1e-14 * (1.0 + std::abs(A[1])))
    throw std::invalid_argument("coefficient matrix must be symmetric");
  const double det = dim == 1 ? A[0] : A[0] * A[3] - A[1] * A[2];
  if (!(A[0] > 0.0) || !(det > 0.0))
    throw std::invalid_argument("coefficient matrix must be positive definite");
}

double mat_dot(const std::array<double, 4>& a, const std::array<double, 4>& b,
               int dim) {
  double acc = 0.0;
  for (int i = 0; i < dim * dim; ++i) acc += a[i] * b[i];
  return acc;
}

OperatorF make_linear(std::string name, std::span<const double> A,
                      std::span<const double> b, double c, int dim) {
  require_spd(A, dim);
  if (b.size() != static_cast<size_t>(dim))
    throw std::invalid_argument("coefficient vector has wrong size");
  std::array<double, 4> Am{};
  std::array<double, 2> bv{};
  for (int i = 0; i < dim * dim; ++i) Am[i] = A[i];
  for (int i = 0; i < dim; ++i) bv[i] = b[i];

  OperatorF op;
  op.name = std::move(name);
  op.value = [Am, bv, c](const PointState& s) {
    double acc = c * s.r;
    for (int i = 0; i < s.dim; ++i) acc += bv[i] * s.grad[i];
    return acc + mat_dot(Am, s.hess, s.dim);
  };
  op.d_r = [c](const PointState&) { return c; };
  op.d_grad = [bv](const PointState&) { return bv; };
  op.d_hess = [Am](const PointState&) { return Am; };
  return op;
}

}  // namespace

ScalarField eval_F(const OperatorF& op, const ScalarField& u) {
  StateSweep sweep(u);
  ScalarField out(u.grid);
  for (int i = 0; i < sweep.grid().node_count(); ++i)
    out[i] = op.value(sweep.at(i));
  return out;
}

FPartials eval_F_partials(const OperatorF& op, const ScalarField& u) {
  StateSweep sweep(u);
  const Grid& g = sweep.grid();
  FPartials out;
  out.r = ScalarField(u.grid);
  out.grad[0] = ScalarField(u.grid);
  if (g.dim == 2) out.grad[1] = ScalarField(u.grid);
  out.hess.grid = u.grid;
  out.hess.order = 2;
  out.hess.slots = tensor_slots(g.dim, 2);
  for (auto s : out.hess.slots) {
    out.hess.multiplicity.push_back(slot_multiplicity(s));
    out.hess.value.emplace_back(g.node_count(), 0.0);
  }
  for (int i = 0; i < g.node_count(); ++i) {
    const PointState s = sweep.at(i);
    out.r[i] = op.d_r(s);
    const auto dp = op.d_grad(s);
    out.grad[0][i] = dp[0];
    if (g.dim == 2) out.grad[1][i] = dp[1];
    const auto dX = op.d_hess(s);
    if (g.dim == 1) {
      out.hess.value[0][i] = dX[0];
    } else {
      out.hess.value[0][i] = dX[0];  // slot xx
      out.hess.value[1][i] = dX[1];  // slot xy (stored once)
      out.hess.value[2][i] = dX[3];  // slot yy
    }
  }
  return out;
}

std::vector<double> eval_K(const OperatorK& op, const ScalarField& u,
                           const MeasurementSet& ms) {
  const Grid& g = *u.grid;
  const TensorField d1 = diff(u, 1);
  std::vector<double> out(ms.size());
  for (int j = 0; j < ms.size(); ++j) {
    const int node = ms.nodes[j];
    if (node < 0 || node >= g.node_count())
      throw std::invalid_argument("eval_K: measurement node outside the grid");
    PointState s;
    s.dim = g.dim;
    s.x = g.coord(node);
    s.r = u[node];
    s.grad[0] = d1.value[0][node];
    if (g.dim == 2) s.grad[1] = d1.value[1][node];
    out[j] = op.value(s);
  }
  return out;
}

KPartials eval_K_partials(const OperatorK& op, const ScalarField& u,
                          const MeasurementSet& ms) {
  const Grid& g = *u.grid;
  const TensorField d1 = diff(u, 1);
  KPartials out;
  out.r.resize(ms.size());
  out.grad[0].resize(ms.size());
  if (g.dim == 2) out.grad[1].resize(ms.size());
  for (int j = 0; j < ms.size(); ++j) {
    const int node = ms.nodes[j];
    PointState s;
    s.dim = g.dim;
    s.x = g.coord(node);
    s.r = u[node];
    s.grad[0] = d1.value[0][node];
    if (g.dim == 2) s.grad[1] = d1.value[1][node];
    out.r[j] = op.d_r(s);
    const auto dp = op.d_grad(s);
    out.grad[0][j] = dp[0];
    if (g.dim == 2) out.grad[1][j] = dp[1];
  }
  return out;
}

OperatorF linear_divergence(std::span<const double> A,
                            std::span<const double> b, double c, int dim) {
  return make_linear("linear_divergence", A, b, c, dim);
}

OperatorF linear_nondivergence(std::span<const double> A,
                               std::span<const double> b, double c, int dim) {
  return make_linear("linear_nondivergence", A, b, c, dim);
}

OperatorF fully_nonlinear_eps(double eps, int dim) {
  if (!(eps >= 0.0) || eps >= 1.0)
    throw std::invalid_argument("fully_nonlinear_eps: eps must be in [0, 1)");
  OperatorF op;
  op.name = "fully_nonlinear_eps";
  op.value = [eps](const PointState& s) {
    double tr = s.hess[0];
    if (s.dim == 2) tr += s.hess[3];
    double n2 = 0.0;
    for (int i = 0; i < s.dim * s.dim; ++i) n2 += s.hess[i] * s.hess[i];
    return tr + eps * std::sqrt(1.0 + n2);
  };
  op.d_r = [](const PointState&) { return 0.0; };
  op.d_grad = [](const PointState&) { return std::array<double, 2>{}; };
  op.d_hess = [eps](const PointState& s) {
    double n2 = 0.0;
    for (int i = 0; i < s.dim * s.dim; ++i) n2 += s.hess[i] * s.hess[i];
    const double scale = eps / std::sqrt(1.0 + n2);
    std::array<double, 4> out{};
    for (int i = 0; i < s.dim * s.dim; ++i) out[i] = scale * s.hess[i];
    out[0] += 1.0;
    if (s.dim == 2) out[3] += 1.0;
    return out;
  };
  return op;
}

OperatorK obs_identity(int dim) {
  (void)dim;
  OperatorK op;
  op.name = "identity";
  op.value = [](const PointState& s) { return s.r; };
  op.d_r = [](const PointState&) { return 1.0; };
  op.d_grad = [](const PointState&) { return std::array<double, 2>{}; };
  return op;
}

OperatorK obs_flux(std::span<const double> b, int dim) {
  if (b.size() != static_cast<size_t>(dim))
    throw std::invalid_argument("obs_flux: coefficient vector has wrong size");
  std::array<double, 2> bv{};
  for (int i = 0; i < dim; ++i) bv[i] = b[i];
  OperatorK op;
  op.name = "flux";
  op.value = [bv](const PointState& s) {
    double acc = s.r;
    for (int i = 0; i < s.dim; ++i) acc += bv[i] * s.grad[i];
    return acc;
  };
  op.d_r = [](const PointState&) { return 1.0; };
  op.d_grad = [bv](const PointState&) { return bv; };
  return op;
}

namespace {

PointState random_state(Rng& rng, int dim) {
  PointState s;
  s.dim = dim;
  for (int i = 0; i < dim; ++i) s.x[i] = rng.next_unit();
  s.r = 2.0 * rng.next_symmetric();
  for (int i = 0; i < dim; ++i) s.grad[i] = 2.0 * rng.next_symmetric();
  if (dim == 1) {
    s.hess[0] = 2.0 * rng.next_symmetric();
  } else {
    const double xx = 2.0 * rng.next_symmetric();
    const double xy = 2.0 * rng.next_symmetric();
    const double yy = 2.0 * rng.next_symmetric();
    s.hess = {xx, xy, xy, yy};
  }
  return s;
}

double rel_err(double got, double want, double scale) {
  return std::abs(got - want) / std::max(scale, 1.0);
}

}  // namespace

double check_partials_F(const OperatorF& op, int dim, int n_states,
                        std::uint64_t seed) {
  Rng rng(seed);
  const double step = 1e-6;
  double worst = 0.0;
  for (int t = 0; t < n_states; ++t) {
    PointState s = random_state(rng, dim);
    const double scale = std::abs(op.value(s)) + 1.0;

    PointState sp = s, sm = s;
    sp.r += step;
    sm.r -= step;
    worst = std::max(worst, rel_err(op.d_r(s),
                                    (op.value(sp) - op.value(sm)) / (2 * step),
                                    scale));
    for (int i = 0; i < dim; ++i) {
      sp = sm = s;
      sp.grad[i] += step;
      sm.grad[i] -= step;
      worst = std::max(
          worst, rel_err(op.d_grad(s)[i],
                         (op.value(sp) - op.value(sm)) / (2 * step), scale));
    }
    // Perturb symmetric entries jointly so the finite difference matches the
    // directional derivative sum dX[i][j] + dX[j][i] off the diagonal.
    for (int i = 0; i < dim; ++i) {
      for (int j = i; j < dim; ++j) {
        sp = sm = s;
        sp.hess[i * dim + j] += step;
        sm.hess[i * dim + j] -= step;
        if (i != j) {
          sp.hess[j * dim + i] += step;
          sm.hess[j * dim + i] -= step;
        }
        const double fd = (op.value(sp) - op.value(sm)) / (2 * step);
        const auto dX = op.d_hess(s);
        const double analytic =
            i == j ? dX[i * dim + i] : dX[i * dim + j] + dX[j * dim + i];
        worst = std::max(worst, rel_err(analytic, fd, scale));
      }
    }
  }
  return worst;
}

double check_partials_K(const OperatorK& op, int dim, int n_states,
                        std::uint64_t seed) {
  Rng rng(seed);
  const double step = 1e-6;
  double worst = 0.0;
  for (int t = 0; t < n_states; ++t) {
    PointState s = random_state(rng, dim);
    const double scale = std::abs(op.value(s)) + 1.0;
    PointState sp = s, sm = s;
    sp.r += step;
    sm.r -= step;
    worst = std::max(worst, rel_err(op.d_r(s),
                                    (op.value(sp) - op.value(sm)) / (2 * step),
                                    scale));
    for (int i = 0; i < dim; ++i) {
      sp = sm = s;
      sp.grad[i] += step;
      sm.grad[i] -= step;
      worst = std::max(
          worst, rel_err(op.d_grad(s)[i],
                         (op.value(sp) - op.value(sm)) / (2 * step), scale));
    }
  }
  return worst;
}

}  // namespace srcfit
