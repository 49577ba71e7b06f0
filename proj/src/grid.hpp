#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace srcfit {

// Banded derivative operator along one axis of a uniform grid. Interior rows
// carry central stencils, rows within half a stencil width of an end switch
// to one-sided stencils of the same accuracy order.
struct AxisOperator {
  int size = 0;        // number of nodes along the axis
  int order = 0;       // derivative order
  double spacing = 0.0;
  std::vector<int> first;     // first column touched by each row
  std::vector<int> len;       // row lengths
  std::vector<double> coef;   // rows packed back to back
  std::vector<int> offset;    // start of each row inside coef

  // out[i] = sum_k coef[i][k] * in[first[i]+k], both strided.
  void apply(const double* in, double* out, int stride) const;
  // out[first[i]+k] += coef[i][k] * in[i]; caller zeroes out beforehand.
  void apply_transpose(const double* in, double* out, int stride) const;
};

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

// Uniform tensor grid on a rectangle (1D interval or 2D box), x index fastest.
class Grid {
public:
  int dim = 1;
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{1.0, 1.0};
  std::array<int, 2> res{0, 1};       // nodes per axis; res[1] == 1 in 1D
  std::array<double, 2> h{0.0, 0.0};

  std::vector<double> cell_weight;    // trapezoid cell weights, sums to volume
  std::vector<std::uint8_t> boundary; // 1 on boundary nodes

  int node_count() const { return res[0] * res[1]; }
  int index(int ix, int iy) const { return ix + res[0] * iy; }
  std::array<double, 2> coord(int node) const {
    const int ix = node % res[0];
    const int iy = node / res[0];
    return {lo[0] + ix * h[0], dim == 2 ? lo[1] + iy * h[1] : 0.0};
  }
  double volume() const;
  bool is_boundary(int node) const { return boundary[node] != 0; }

  // Highest derivative order carried by the smoothing seminorm: [dim/2] + 3.
  int max_order() const { return dim / 2 + 3; }

  const AxisOperator& axis_op(int axis, int order) const;

private:
  friend GridPtr build_grid(std::span<const double> extents,
                            std::span<const int> resolution);
  // ops[axis][order-1], built once for orders 1..max_order().
  std::array<std::vector<AxisOperator>, 2> ops_;
};

// extents = {a1,b1} or {a1,b1,a2,b2}; resolution = nodes per axis, >= 5.
GridPtr build_grid(std::span<const double> extents,
                   std::span<const int> resolution);

struct ScalarField {
  GridPtr grid;
  std::vector<double> v;

  ScalarField() = default;
  explicit ScalarField(GridPtr g, double fill = 0.0)
      : grid(std::move(g)), v(grid->node_count(), fill) {}
  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }
  int size() const { return static_cast<int>(v.size()); }
};

// Fully symmetric k-th order derivative tensor: one value array per distinct
// sorted multi-index, plus the multinomial multiplicity of that slot.
struct TensorField {
  GridPtr grid;
  int order = 0;
  std::vector<std::array<int, 2>> slots;  // derivative count per axis
  std::vector<double> multiplicity;
  std::vector<std::vector<double>> value; // [slot][node]

  int slot_count() const { return static_cast<int>(slots.size()); }
};

// Discrete carrier of the measurement set: grid nodes, quadrature weights
// approximating the Hausdorff measure of dimension kappa, total mass = sum w.
struct MeasurementSet {
  std::vector<int> nodes;
  std::vector<double> weight;
  double kappa = 0.0;

  int size() const { return static_cast<int>(nodes.size()); }
  double mass() const;
};

// Stencil weights for the der-th derivative at point z from arbitrary nodes
// (Fornberg recursion); exact on polynomials of degree < x.size().
std::vector<double> fd_weights(std::span<const double> x, double z, int der);

// Visits the nonzero entries of the composed derivative stencil row for
// `slot` at node (ix, iy): fn(column_node, coefficient). Columns may repeat
// across calls but not within one (ky, kx) sweep.
template <typename Fn>
void visit_slot_row(const Grid& g, std::array<int, 2> slot, int ix, int iy,
                    Fn&& fn) {
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
      fn(g.index(jx, jy), cx * cy);
    }
  }
}

// Slot layout shared by diff and the adjoint assembly.
std::vector<std::array<int, 2>> tensor_slots(int dim, int order);
double slot_multiplicity(std::array<int, 2> slot);

ScalarField diff_slot(const ScalarField& u, std::array<int, 2> slot);
// Adjoint of diff_slot as a linear map on nodal values:
// <diff_slot(u), d> = <u, diff_slot_adjoint(d)> for all u, d.
ScalarField diff_slot_adjoint(const ScalarField& density,
                              std::array<int, 2> slot);

TensorField diff(const ScalarField& u, int order);
ScalarField tensor_dot(const TensorField& a, const TensorField& b);

// sqrt(a^2 + p^-2), the smooth positive regularisation of |a|.
double soft_abs(double a, double p);

// ((sum_j w_j |f_j|^p) / (sum_j w_j))^(1/p), max-factored so large p stays
// in floating range.
double normalized_lp_norm(std::span<const double> values,
                          std::span<const double> weights, double p);

double sup_norm(std::span<const double> values);

// Average of D^m u : D^m u over the domain, m = grid->max_order().
double highest_order_seminorm_sq(const ScalarField& u);

// Measurement set builders. Coordinates snap to the nearest grid node.
MeasurementSet measurement_points(const Grid& g,
                                  std::span<const std::array<double, 2>> pts);
// Axis-aligned segment from a to b, arclength trapezoid weights, kappa = 1.
MeasurementSet measurement_line(const Grid& g, std::array<double, 2> a,
                                std::array<double, 2> b);
// Sub-rectangle {x in [box[0],box[1]], y in [box[2],box[3]]}, cell weights.
MeasurementSet measurement_subdomain(const Grid& g,
                                     std::span<const double> box);

}  // namespace srcfit
