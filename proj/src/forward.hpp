#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grid.hpp"
#include "operators.hpp"

namespace srcfit {

struct ForwardResult {
  ScalarField u;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  std::string message;
};

// Newton solve of F[u] = f in the interior with u = g on the boundary.
// Each step linearises F and solves the sparse system with a direct
// factorisation; steps are damped by halving until the residual decreases.
// Requires F_X positive definite along the iteration (checked per iterate).
ForwardResult solve_dirichlet(const OperatorF& opF, const ScalarField& f,
                              const ScalarField& g, double tol = 1e-10,
                              int max_iter = 30);

// Clean data K[u0] on the measurement set plus seeded uniform noise in
// [-gamma, gamma], so the sup distance to the clean data never exceeds gamma.
std::vector<double> synth_data(const ScalarField& u0, const OperatorK& opK,
                               const MeasurementSet& ms, double gamma,
                               std::uint64_t seed);

}  // namespace srcfit
