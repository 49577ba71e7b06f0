#include "grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace srcfit {

namespace {

std::string axis_label(int axis) { return axis == 0 ? "x" : "y"; }

// Trapezoid weights on a uniform axis: h/2 at the ends, h inside.
std::vector<double> trapezoid_weights(int m, double h) {
  std::vector<double> w(m, h);
  w.front() = 0.5 * h;
  w.back() = 0.5 * h;
  return w;
}

}  // namespace

std::vector<double> fd_weights(std::span<const double> x, double z, int der) {
  const int n = static_cast<int>(x.size()) - 1;
  if (n < der)
    throw std::invalid_argument("fd_weights: stencil too short for order");
  // Fornberg's recursion, specialised to a single derivative order on output.
  std::vector<std::vector<double>> c(n + 1,
                                     std::vector<double>(der + 1, 0.0));
  double c1 = 1.0;
  double c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, der);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n + 1);
  for (int j = 0; j <= n; ++j) w[j] = c[j][der];
  return w;
}

namespace {

AxisOperator build_axis_operator(int m, double h, int order) {
  AxisOperator op;
  op.size = m;
  op.order = order;
  op.spacing = h;
  op.first.resize(m);
  op.len.resize(m);
  op.offset.resize(m);

  const int half = (order + 1) / 2;        // central half-width
  const int wide = std::min(order + 2, m); // one-sided width, 2nd order

  std::vector<double> xs(m);
  for (int i = 0; i < m; ++i) xs[i] = i * h;

  for (int i = 0; i < m; ++i) {
    int first, len;
    if (i - half >= 0 && i + half <= m - 1) {
      first = i - half;
      len = 2 * half + 1;
    } else {
      len = wide;
      first = std::clamp(i - half, 0, m - len);
    }
    auto w = fd_weights(std::span(xs).subspan(first, len), xs[i], order);
    op.first[i] = first;
    op.len[i] = len;
    op.offset[i] = static_cast<int>(op.coef.size());
    op.coef.insert(op.coef.end(), w.begin(), w.end());
  }
  return op;
}

}  // namespace

void AxisOperator::apply(const double* in, double* out, int stride) const {
  for (int i = 0; i < size; ++i) {
    const double* c = coef.data() + offset[i];
    const double* base = in + static_cast<long>(first[i]) * stride;
    double acc = 0.0;
    for (int k = 0; k < len[i]; ++k) acc += c[k] * base[static_cast<long>(k) * stride];
    out[static_cast<long>(i) * stride] = acc;
  }
}

void AxisOperator::apply_transpose(const double* in, double* out,
                                   int stride) const {
  for (int i = 0; i < size; ++i) {
    const double* c = coef.data() + offset[i];
    const double s = in[static_cast<long>(i) * stride];
    double* base = out + static_cast<long>(first[i]) * stride;
    for (int k = 0; k < len[i]; ++k) base[static_cast<long>(k) * stride] += c[k] * s;
  }
}

double Grid::volume() const {
  double vol = hi[0] - lo[0];
  if (dim == 2) vol *= hi[1] - lo[1];
  return vol;
}

const AxisOperator& Grid::axis_op(int axis, int order) const {
  if (axis < 0 || axis >= dim)
    throw std::invalid_argument("axis_op: axis out of range");
  if (order < 1 || order > max_order())
    throw std::invalid_argument("axis_op: derivative order out of range");
  return ops_[axis][order - 1];
}

GridPtr build_grid(std::span<const double> extents,
                   std::span<const int> resolution) {
  const int dim = static_cast<int>(resolution.size());
  if (dim != 1 && dim != 2)
    throw std::invalid_argument("build_grid: dimension must be 1 or 2");
  if (extents.size() != static_cast<size_t>(2 * dim))
    throw std::invalid_argument("build_grid: extents need 2 entries per axis");

  auto g = std::make_shared<Grid>();
  g->dim = dim;
  g->res = {resolution[0], dim == 2 ? resolution[1] : 1};
  for (int a = 0; a < dim; ++a) {
    g->lo[a] = extents[2 * a];
    g->hi[a] = extents[2 * a + 1];
    if (!(g->hi[a] > g->lo[a]))
      throw std::invalid_argument("build_grid: empty extent on axis " +
                                  axis_label(a));
    if (resolution[a] < 5) {
      char msg[128];
      std::snprintf(msg, sizeof(msg),
                    "build_grid: resolution %d on axis %s is below the "
                    "5-node stencil width",
                    resolution[a], axis_label(a).c_str());
      throw std::invalid_argument(msg);
    }
    g->h[a] = (g->hi[a] - g->lo[a]) / (resolution[a] - 1);
  }

  const int mx = g->res[0];
  const int my = g->res[1];
  const auto wx = trapezoid_weights(mx, g->h[0]);
  const auto wy = dim == 2 ? trapezoid_weights(my, g->h[1])
                           : std::vector<double>{1.0};
  g->cell_weight.resize(g->node_count());
  g->boundary.resize(g->node_count());
  for (int iy = 0; iy < my; ++iy) {
    for (int ix = 0; ix < mx; ++ix) {
      const int id = g->index(ix, iy);
      g->cell_weight[id] = wx[ix] * wy[dim == 2 ? iy : 0];
      const bool bx = ix == 0 || ix == mx - 1;
      const bool by = dim == 2 && (iy == 0 || iy == my - 1);
      g->boundary[id] = (bx || by) ? 1 : 0;
    }
  }

  for (int a = 0; a < dim; ++a) {
    g->ops_[a].reserve(g->max_order());
    for (int d = 1; d <= g->max_order(); ++d)
      g->ops_[a].push_back(build_axis_operator(g->res[a], g->h[a], d));
  }
  return g;
}

double MeasurementSet::mass() const {
  double m = 0.0;
  for (double w : weight) m += w;
  return m;
}

std::vector<std::array<int, 2>> tensor_slots(int dim, int order) {
  std::vector<std::array<int, 2>> slots;
  if (dim == 1) {
    slots.push_back({order, 0});
  } else {
    for (int jy = 0; jy <= order; ++jy) slots.push_back({order - jy, jy});
  }
  return slots;
}

double slot_multiplicity(std::array<int, 2> slot) {
  // Number of index permutations collapsing onto the sorted multi-index:
  // binomial(jx+jy, jy).
  const int k = slot[0] + slot[1];
  double c = 1.0;
  for (int i = 1; i <= slot[1]; ++i) c = c * (k - slot[1] + i) / i;
  return c;
}

namespace {

void apply_axis_order(const Grid& g, int axis, int order,
                      const std::vector<double>& in,
                      std::vector<double>& out) {
  const auto& op = g.axis_op(axis, order);
  const int mx = g.res[0];
  const int my = g.res[1];
  if (axis == 0) {
    for (int iy = 0; iy < my; ++iy)
      op.apply(in.data() + static_cast<long>(iy) * mx,
               out.data() + static_cast<long>(iy) * mx, 1);
  } else {
    for (int ix = 0; ix < mx; ++ix) op.apply(in.data() + ix, out.data() + ix, mx);
  }
}

void apply_axis_order_transpose(const Grid& g, int axis, int order,
                                const std::vector<double>& in,
                                std::vector<double>& out) {
  const auto& op = g.axis_op(axis, order);
  const int mx = g.res[0];
  const int my = g.res[1];
  std::fill(out.begin(), out.end(), 0.0);
  if (axis == 0) {
    for (int iy = 0; iy < my; ++iy)
      op.apply_transpose(in.data() + static_cast<long>(iy) * mx,
                         out.data() + static_cast<long>(iy) * mx, 1);
  } else {
    for (int ix = 0; ix < mx; ++ix)
      op.apply_transpose(in.data() + ix, out.data() + ix, mx);
  }
}

}  // namespace

ScalarField diff_slot(const ScalarField& u, std::array<int, 2> slot) {
  const Grid& g = *u.grid;
  ScalarField out(u.grid);
  if (slot[0] == 0 && slot[1] == 0) {
    out.v = u.v;
    return out;
  }
  std::vector<double> cur = u.v;
  std::vector<double> tmp(cur.size());
  if (slot[0] > 0) {
    apply_axis_order(g, 0, slot[0], cur, tmp);
    cur.swap(tmp);
  }
  if (slot[1] > 0) {
    apply_axis_order(g, 1, slot[1], cur, tmp);
    cur.swap(tmp);
  }
  out.v = std::move(cur);
  return out;
}

ScalarField diff_slot_adjoint(const ScalarField& density,
                              std::array<int, 2> slot) {
  const Grid& g = *density.grid;
  ScalarField out(density.grid);
  if (slot[0] == 0 && slot[1] == 0) {
    out.v = density.v;
    return out;
  }
  // diff_slot applies x then y, so the transpose applies y^T then x^T.
  std::vector<double> cur = density.v;
  std::vector<double> tmp(cur.size());
  if (slot[1] > 0) {
    apply_axis_order_transpose(g, 1, slot[1], cur, tmp);
    cur.swap(tmp);
  }
  if (slot[0] > 0) {
    apply_axis_order_transpose(g, 0, slot[0], cur, tmp);
    cur.swap(tmp);
  }
  out.v = std::move(cur);
  return out;
}

TensorField diff(const ScalarField& u, int order) {
  const Grid& g = *u.grid;
  if (order < 1 || order > g.max_order())
    throw std::invalid_argument("diff: derivative order out of range");
  TensorField t;
  t.grid = u.grid;
  t.order = order;
  t.slots = tensor_slots(g.dim, order);
  for (auto s : t.slots) {
    t.multiplicity.push_back(slot_multiplicity(s));
    t.value.push_back(diff_slot(u, s).v);
  }
  return t;
}

ScalarField tensor_dot(const TensorField& a, const TensorField& b) {
  if (a.grid.get() != b.grid.get())
    throw std::invalid_argument("tensor_dot: grid mismatch");
  if (a.order != b.order)
    throw std::invalid_argument("tensor_dot: order mismatch");
  ScalarField out(a.grid);
  for (int s = 0; s < a.slot_count(); ++s) {
    const double m = a.multiplicity[s];
    const auto& av = a.value[s];
    const auto& bv = b.value[s];
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += m * av[i] * bv[i];
  }
  return out;
}

double soft_abs(double a, double p) {
  if (!(p > 0)) throw std::invalid_argument("soft_abs: p must be positive");
  return std::sqrt(a * a + 1.0 / (p * p));
}

double normalized_lp_norm(std::span<const double> values,
                          std::span<const double> weights, double p) {
  if (values.empty()) throw std::invalid_argument("normalized_lp_norm: empty carrier");
  if (values.size() != weights.size())
    throw std::invalid_argument("normalized_lp_norm: carrier/weight size mismatch");
  if (!(p >= 1)) throw std::invalid_argument("normalized_lp_norm: p must be >= 1");
  double vmax = 0.0;
  for (double v : values) vmax = std::max(vmax, std::abs(v));
  if (vmax == 0.0) return 0.0;
  // Factor out the max so |v/vmax|^p cannot overflow or fatally underflow.
  double acc = 0.0, wsum = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    acc += weights[i] * std::pow(std::abs(values[i]) / vmax, p);
    wsum += weights[i];
  }
  return vmax * std::pow(acc / wsum, 1.0 / p);
}

double sup_norm(std::span<const double> values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double highest_order_seminorm_sq(const ScalarField& u) {
  const Grid& g = *u.grid;
  const TensorField d = diff(u, g.max_order());
  double acc = 0.0;
  for (int s = 0; s < d.slot_count(); ++s) {
    const double m = d.multiplicity[s];
    const auto& dv = d.value[s];
    for (int i = 0; i < g.node_count(); ++i)
      acc += g.cell_weight[i] * m * dv[i] * dv[i];
  }
  return acc / g.volume();
}

namespace {

int snap_axis(const Grid& g, int axis, double x) {
  const int i = static_cast<int>(std::lround((x - g.lo[axis]) / g.h[axis]));
  return std::clamp(i, 0, g.res[axis] - 1);
}

int snap_node(const Grid& g, std::array<double, 2> pt) {
  const int ix = snap_axis(g, 0, pt[0]);
  const int iy = g.dim == 2 ? snap_axis(g, 1, pt[1]) : 0;
  return g.index(ix, iy);
}

void check_nonempty(const MeasurementSet& m, const char* kind) {
  if (m.nodes.empty())
    throw std::invalid_argument(std::string("measurement set '") + kind +
                                "' is empty");
}

}  // namespace

MeasurementSet measurement_points(const Grid& g,
                                  std::span<const std::array<double, 2>> pts) {
  MeasurementSet m;
  m.kappa = 0.0;
  for (auto p : pts) {
    const int node = snap_node(g, p);
    if (std::find(m.nodes.begin(), m.nodes.end(), node) == m.nodes.end()) {
      m.nodes.push_back(node);
      m.weight.push_back(1.0);  // counting measure
    }
  }
  check_nonempty(m, "points");
  return m;
}

MeasurementSet measurement_line(const Grid& g, std::array<double, 2> a,
                                std::array<double, 2> b) {
  if (g.dim != 2)
    throw std::invalid_argument("measurement_line: needs a 2D grid");
  const int axis = std::abs(b[0] - a[0]) >= std::abs(b[1] - a[1]) ? 0 : 1;
  const int other = 1 - axis;
  if (std::abs(b[other] - a[other]) > 1e-12 * (g.hi[other] - g.lo[other]))
    throw std::invalid_argument("measurement_line: segment must be axis-aligned");

  const int fixed = snap_axis(g, other, a[other]);
  int i0 = snap_axis(g, axis, std::min(a[axis], b[axis]));
  int i1 = snap_axis(g, axis, std::max(a[axis], b[axis]));
  MeasurementSet m;
  m.kappa = 1.0;
  for (int i = i0; i <= i1; ++i) {
    m.nodes.push_back(axis == 0 ? g.index(i, fixed) : g.index(fixed, i));
    double w = g.h[axis];
    if (i == i0 || i == i1) w *= 0.5;
    m.weight.push_back(w);
  }
  if (i0 == i1)
    throw std::invalid_argument("measurement_line: segment spans no grid cell");
  check_nonempty(m, "line");
  return m;
}

MeasurementSet measurement_subdomain(const Grid& g,
                                     std::span<const double> box) {
  if (box.size() != static_cast<size_t>(2 * g.dim))
    throw std::invalid_argument("measurement_subdomain: box needs 2 entries per axis");
  std::array<int, 2> i0{0, 0}, i1{0, 0};
  for (int a = 0; a < g.dim; ++a) {
    i0[a] = snap_axis(g, a, std::min(box[2 * a], box[2 * a + 1]));
    i1[a] = snap_axis(g, a, std::max(box[2 * a], box[2 * a + 1]));
    if (i0[a] >= i1[a])
      throw std::invalid_argument("measurement_subdomain: box spans no grid cell");
  }
  MeasurementSet m;
  m.kappa = static_cast<double>(g.dim);
  const int ylo = g.dim == 2 ? i0[1] : 0;
  const int yhi = g.dim == 2 ? i1[1] : 0;
  for (int iy = ylo; iy <= yhi; ++iy) {
    for (int ix = i0[0]; ix <= i1[0]; ++ix) {
      double w = g.h[0];
      if (ix == i0[0] || ix == i1[0]) w *= 0.5;
      if (g.dim == 2) {
        double wy = g.h[1];
        if (iy == ylo || iy == yhi) wy *= 0.5;
        w *= wy;
      }
      m.nodes.push_back(g.index(ix, iy));
      m.weight.push_back(w);
    }
  }
  check_nonempty(m, "subdomain");
  return m;
}

}  // namespace srcfit
