#pragma once

#include <vector>

#include "grid.hpp"
#include "operators.hpp"

namespace srcfit {

struct RegularisationParams {
  double alpha = 0.0;   // source-norm weight, > 0
  double beta = 0.0;    // smoothing weight, > 0
  double gamma = 0.0;   // noise level, >= 0 (reporting and bounds)
  std::vector<double> p_ladder;  // strictly increasing, entries > dim

  void validate(int dim) const;
};

struct ProblemData {
  GridPtr grid;
  OperatorF opF;
  OperatorK opK;
  MeasurementSet mset;
  ScalarField g;                 // boundary values (full field, trace used)
  std::vector<double> k_meas;    // measured data on the measurement set
};

struct EnergyTerms {
  double data = 0.0;     // softened p-norm of K[u] - k on the measurement set
  double source = 0.0;   // alpha * softened p-norm of F[u] on the domain
  double smooth = 0.0;   // (beta/2) * averaged squared highest derivative
  double total() const { return data + source + smooth; }
};

EnergyTerms energy_p_terms(const ScalarField& u,
                           const RegularisationParams& params,
                           const ProblemData& data, double p);
double energy_p(const ScalarField& u, const RegularisationParams& params,
                const ProblemData& data, double p);

// Sup-norm functional (unsoftened maxima); report-only, no descent path.
EnergyTerms energy_inf_terms(const ScalarField& u,
                             const RegularisationParams& params,
                             const ProblemData& data);
double energy_inf(const ScalarField& u, const RegularisationParams& params,
                  const ProblemData& data);

// Exact nodal gradient of energy_p: entry i is the derivative of the
// discrete energy along the nodal basis direction e_i. Assembled by
// transposing the difference stencils onto the residual densities, so it
// agrees with directional finite differences to rounding. Boundary entries
// are zero (boundary values are held by g).
std::vector<double> gradient_p(const ScalarField& u,
                               const RegularisationParams& params,
                               const ProblemData& data, double p);

// Gauss-Newton curvature of energy_p at u, restricted to interior nodes.
// The smoothing block is exact; the data and source blocks keep the
// positive semidefinite J^T C J part and drop the negative norm cross term,
// so the system is positive definite. The optimizer factorises it once per
// rung as its quasi-Newton seed metric, which the stiff highest-order term
// makes indispensable.
struct CurvatureSystem {
  std::vector<int> interior;  // grid node per interior index
  // COO triplets over interior indices; duplicates accumulate.
  std::vector<int> row;
  std::vector<int> col;
  std::vector<double> val;
};
CurvatureSystem curvature_gn_p(const ScalarField& u,
                               const RegularisationParams& params,
                               const ProblemData& data, double p);

}  // namespace srcfit
