#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "grid.hpp"

namespace srcfit {

// Pointwise state (x, r, p, X) an operator is evaluated at. hess is row-major
// with dim*dim entries used and kept symmetric by construction.
struct PointState {
  std::array<double, 2> x{};
  double r = 0.0;
  std::array<double, 2> grad{};
  std::array<double, 4> hess{};
  int dim = 1;
};

// Second order operator F(x, r, p, X) with analytic partials.
struct OperatorF {
  std::string name;
  std::function<double(const PointState&)> value;
  std::function<double(const PointState&)> d_r;
  std::function<std::array<double, 2>(const PointState&)> d_grad;
  std::function<std::array<double, 4>(const PointState&)> d_hess;
};

// First order observation operator K(x, r, p) with analytic partials.
struct OperatorK {
  std::string name;
  std::function<double(const PointState&)> value;
  std::function<double(const PointState&)> d_r;
  std::function<std::array<double, 2>(const PointState&)> d_grad;
};

// Nodal field F(., u, Du, D^2 u).
ScalarField eval_F(const OperatorF& op, const ScalarField& u);

struct FPartials {
  ScalarField r;                      // F_r along u
  std::array<ScalarField, 2> grad;    // F_p components
  TensorField hess;                   // F_X on symmetric slots
};
FPartials eval_F_partials(const OperatorF& op, const ScalarField& u);

std::vector<double> eval_K(const OperatorK& op, const ScalarField& u,
                           const MeasurementSet& ms);

struct KPartials {
  std::vector<double> r;
  std::array<std::vector<double>, 2> grad;
};
KPartials eval_K_partials(const OperatorK& op, const ScalarField& u,
                          const MeasurementSet& ms);

// A : X + b . p + c r with constant coefficients; A must be symmetric
// positive definite. The divergence and non-divergence forms coincide for
// constant A and are kept as separate named constructors.
OperatorF linear_divergence(std::span<const double> A,
                            std::span<const double> b, double c, int dim);
OperatorF linear_nondivergence(std::span<const double> A,
                               std::span<const double> b, double c, int dim);

// tr(X) + eps * sqrt(1 + |X|^2): smooth and uniformly elliptic for eps < 1,
// genuinely nonlinear in the Hessian for eps > 0.
OperatorF fully_nonlinear_eps(double eps, int dim);

OperatorK obs_identity(int dim);
OperatorK obs_flux(std::span<const double> b, int dim);

// Compares analytic partials with central finite differences of the
// evaluator at seeded random states. Returns the worst relative error.
double check_partials_F(const OperatorF& op, int dim, int n_states,
                        std::uint64_t seed);
double check_partials_K(const OperatorK& op, int dim, int n_states,
                        std::uint64_t seed);

}  // namespace srcfit
