#include "measures.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rng.hpp"

namespace srcfit {

namespace {

std::vector<double> residual_on_mset(const ScalarField& u,
                                     const ProblemData& data) {
  std::vector<double> e = eval_K(data.opK, u, data.mset);
  for (size_t j = 0; j < e.size(); ++j) e[j] -= data.k_meas[j];
  return e;
}

// density_j = (s_j / S)^(p-2) * (f_j / S) with s = |f|_(p).
std::vector<double> concentration_density(std::span<const double> f,
                                          std::span<const double> w, double p,
                                          double* soft_norm_out) {
  std::vector<double> s(f.size());
  for (size_t i = 0; i < f.size(); ++i) s[i] = soft_abs(f[i], p);
  const double S = normalized_lp_norm(s, w, p);
  std::vector<double> d(f.size());
  for (size_t i = 0; i < f.size(); ++i)
    d[i] = std::pow(s[i] / S, p - 2.0) * (f[i] / S);
  *soft_norm_out = S;
  return d;
}

}  // namespace

DiscreteMeasure data_residual_measure(const ScalarField& u,
                                      const ProblemData& data, double p) {
  DiscreteMeasure m;
  m.carrier = DiscreteMeasure::Carrier::Measurement;
  m.nodes = data.mset.nodes;
  m.weight = data.mset.weight;
  m.mass = data.mset.mass();
  m.p = p;
  const std::vector<double> e = residual_on_mset(u, data);
  m.density = concentration_density(e, m.weight, p, &m.soft_norm);
  return m;
}

DiscreteMeasure source_residual_measure(const ScalarField& u,
                                        const ProblemData& data, double p) {
  const Grid& g = *u.grid;
  DiscreteMeasure m;
  m.carrier = DiscreteMeasure::Carrier::Domain;
  m.nodes.resize(g.node_count());
  for (int i = 0; i < g.node_count(); ++i) m.nodes[i] = i;
  m.weight = g.cell_weight;
  m.mass = g.volume();
  m.p = p;
  const ScalarField fu = eval_F(data.opF, u);
  m.density = concentration_density(fu.v, m.weight, p, &m.soft_norm);
  return m;
}

double total_variation(const DiscreteMeasure& m) {
  double acc = 0.0;
  for (size_t i = 0; i < m.density.size(); ++i)
    acc += m.weight[i] * std::abs(m.density[i]);
  return acc / m.mass;
}

double essential_limsup(std::span<const double> f,
                        std::span<const double> weight,
                        std::span<const std::array<double, 2>> coords,
                        std::array<double, 2> x,
                        std::span<const double> eps_ladder) {
  if (f.size() != weight.size() || f.size() != coords.size())
    throw std::invalid_argument("essential_limsup: carrier size mismatch");
  if (eps_ladder.empty())
    throw std::invalid_argument("essential_limsup: empty ladder");
  for (size_t i = 1; i < eps_ladder.size(); ++i)
    if (!(eps_ladder[i] < eps_ladder[i - 1]))
      throw std::invalid_argument("essential_limsup: ladder not decreasing");

  bool found_any = false;
  double best = 0.0;
  for (double eps : eps_ladder) {
    bool found = false;
    double m = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < f.size(); ++i) {
      if (weight[i] <= 0.0) continue;  // null atoms are invisible
      const double dx = coords[i][0] - x[0];
      const double dy = coords[i][1] - x[1];
      if (dx * dx + dy * dy < eps * eps) {
        found = true;
        m = std::max(m, f[i]);
      }
    }
    if (found) {
      found_any = true;
      best = m;  // smallest nonempty ball wins
    }
  }
  if (!found_any)
    throw std::invalid_argument("essential_limsup: no carrier point in any ball");
  return best;
}

double concentration_fraction(const DiscreteMeasure& m,
                              std::span<const double> errfield, double delta) {
  if (errfield.size() != m.density.size())
    throw std::invalid_argument("concentration_fraction: field size mismatch");
  double emax = 0.0;
  for (double e : errfield) emax = std::max(emax, e);
  double total = 0.0, top = 0.0;
  for (size_t i = 0; i < m.density.size(); ++i) {
    const double mass = m.weight[i] * std::abs(m.density[i]);
    total += mass;
    if (errfield[i] >= (1.0 - delta) * emax) top += mass;
  }
  return total > 0.0 ? top / total : 1.0;
}

std::vector<ScalarField> make_test_functions(GridPtr grid, int count,
                                             std::uint64_t seed) {
  const Grid& g = *grid;
  const int collar = 2;
  std::vector<ScalarField> out;
  Rng rng(seed);

  // Bump coordinates: map [lo + collar*h, hi - collar*h] onto [0, 1].
  auto unit = [&](int axis, double x) {
    const double l = g.lo[axis] + collar * g.h[axis];
    const double r = g.hi[axis] - collar * g.h[axis];
    return (x - l) / (r - l);
  };
  auto bump = [](double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double q = t * (1.0 - t);
    return 16.0 * q * q;  // max 1 at t = 1/2
  };

  for (int k = 0; k < count; ++k) {
    ScalarField phi(grid);
    // waves fixed per test function; k = 0 is the plain polynomial bump
    const int wx = k == 0 ? 0 : 1 + static_cast<int>(rng.next_below(4));
    const int wy = k == 0 ? 0 : 1 + static_cast<int>(rng.next_below(4));
    const double amp = k == 0 ? 1.0 : rng.next_symmetric();
    for (int i = 0; i < g.node_count(); ++i) {
      const int ix = i % g.res[0];
      const int iy = i / g.res[0];
      if (ix < collar || ix >= g.res[0] - collar) continue;
      if (g.dim == 2 && (iy < collar || iy >= g.res[1] - collar)) continue;
      const auto c = g.coord(i);
      const double tx = unit(0, c[0]);
      double v = bump(tx);
      if (wx > 0) v *= std::sin(wx * M_PI * tx);
      if (g.dim == 2) {
        const double ty = unit(1, c[1]);
        v *= bump(ty);
        if (wy > 0) v *= std::sin(wy * M_PI * ty);
      }
      phi[i] = (k == 0 ? 1.0 : amp) * v;
    }
    out.push_back(std::move(phi));
  }
  return out;
}

double el_pairing(const ScalarField& u, const DiscreteMeasure& mu,
                  const DiscreteMeasure& nu, const RegularisationParams& params,
                  const ProblemData& data, const ScalarField& phi) {
  const Grid& g = *u.grid;
  if (nu.nodes.size() != static_cast<size_t>(data.mset.size()))
    throw std::invalid_argument("el_pairing: measurement measure does not match the carrier");
  if (mu.nodes.size() != static_cast<size_t>(g.node_count()))
    throw std::invalid_argument("el_pairing: domain measure does not match the grid");
  double acc = 0.0;

  // Measurement pairing: avg of (K_r phi + K_p . Dphi) against nu.
  {
    const KPartials kp = eval_K_partials(data.opK, u, data.mset);
    const TensorField dphi = diff(phi, 1);
    double term = 0.0;
    for (int j = 0; j < data.mset.size(); ++j) {
      const int node = nu.nodes[j];
      double pairing = kp.r[j] * phi[node] + kp.grad[0][j] * dphi.value[0][node];
      if (g.dim == 2) pairing += kp.grad[1][j] * dphi.value[1][node];
      term += nu.weight[j] * nu.density[j] * pairing;
    }
    acc += term / nu.mass;
  }

  // Domain pairing: alpha * avg of (F_r phi + F_p . Dphi + F_X : D2phi)
  // against mu.
  {
    const FPartials fp = eval_F_partials(data.opF, u);
    const TensorField dphi = diff(phi, 1);
    const TensorField d2phi = diff(phi, 2);
    double term = 0.0;
    for (int i = 0; i < g.node_count(); ++i) {
      double pairing = fp.r[i] * phi[i];
      for (int a = 0; a < g.dim; ++a)
        pairing += fp.grad[a][i] * dphi.value[a][i];
      for (int s = 0; s < fp.hess.slot_count(); ++s)
        pairing += fp.hess.multiplicity[s] * fp.hess.value[s][i] *
                   d2phi.value[s][i];
      term += mu.weight[i] * mu.density[i] * pairing;
    }
    acc += params.alpha * term / mu.mass;
  }

  // Smoothing pairing: beta * avg(D^m u : D^m phi).
  {
    const int m = g.max_order();
    const ScalarField dots = tensor_dot(diff(u, m), diff(phi, m));
    double term = 0.0;
    for (int i = 0; i < g.node_count(); ++i)
      term += g.cell_weight[i] * dots[i];
    acc += params.beta * term / g.volume();
  }
  return acc;
}

double el_residual(const ScalarField& u, const DiscreteMeasure& mu,
                   const DiscreteMeasure& nu,
                   const RegularisationParams& params, const ProblemData& data,
                   std::span<const ScalarField> test_set) {
  const Grid& g = *u.grid;
  const int collar = 2;
  double worst = 0.0;
  for (const ScalarField& phi : test_set) {
    double l1 = 0.0;
    for (int i = 0; i < g.node_count(); ++i) {
      const int ix = i % g.res[0];
      const int iy = i / g.res[0];
      const bool in_collar = ix < collar || ix >= g.res[0] - collar ||
                             (g.dim == 2 &&
                              (iy < collar || iy >= g.res[1] - collar));
      if (in_collar && phi[i] != 0.0)
        throw std::invalid_argument(
            "el_residual: test function does not vanish on the collar");
      l1 += std::abs(phi[i]);
    }
    if (l1 == 0.0) continue;  // zero test function pairs to zero
    worst = std::max(worst, std::abs(el_pairing(u, mu, nu, params, data, phi)) / l1);
  }
  return worst;
}

}  // namespace srcfit
