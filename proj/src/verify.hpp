#pragma once

#include <vector>

#include "functional.hpp"

namespace srcfit {

// Right-hand sides of the recovery error bounds, evaluated at an exact
// solution u0: 2*gamma + alpha*||F[u0]||_{L^p or L^inf} + (beta/2)*seminorm.
double bound_rhs_p(const ScalarField& u0, const RegularisationParams& params,
                   const ProblemData& data, double p);
double bound_rhs_inf(const ScalarField& u0, const RegularisationParams& params,
                     const ProblemData& data);

struct BoundCheck {
  double p = 0.0;
  double lhs_lp = 0.0;    // ||K[u_p] - K[u0]||_{L^p} on the measurement set
  double rhs_p = 0.0;
  bool pass = false;
  double energy_up = 0.0;   // E_p at the computed minimiser
  double energy_u0 = 0.0;   // E_p at the exact solution
  bool minimal = false;     // energy_up <= energy_u0 (relative slack 1e-10)
};

struct VerifyReport {
  std::vector<BoundCheck> rungs;
  double lhs_sup_final = 0.0;  // sup error at the largest p
  double rhs_inf = 0.0;
  bool pass_sup = false;
  double tol_discr = 0.05;     // relative discretisation slack on the RHS
  bool all_pass = false;
};

// Checks the per-rung L^p error bounds, the sup-norm bound at the final
// rung, and the minimality certificate E_p(u_p) <= E_p(u0). u0 must be an
// exact solution consistent with the clean data K[u0].
VerifyReport verify_bounds(std::span<const ScalarField> trajectory,
                           const ScalarField& u0,
                           const RegularisationParams& params,
                           const ProblemData& data, double tol_discr = 0.05);

}  // namespace srcfit
