#pragma once

#include <vector>

#include "functional.hpp"

namespace srcfit {

struct RungRecord {
  double p = 0.0;
  int iterations = 0;
  bool converged = false;
  double energy = 0.0;
  double grad_sup = 0.0;
  int linesearch_failures = 0;
  double tol = 0.0;
  double c2_dist_prev = 0.0;  // distance to the previous ladder iterate
  double wall_seconds = 0.0;
  std::vector<double> energy_trace;  // energies at accepted steps
};

struct SolveOptions {
  double tol = 1e-6;      // sup-norm gradient tolerance
  int max_iter = 5000;
  int memory = 10;        // quasi-Newton history length
};

// Limited-memory quasi-Newton descent with Armijo backtracking (factor 0.5,
// slope 1e-4). Directions fall back to steepest descent when the curvature
// pair is unusable. Boundary nodes of u0 are held fixed throughout.
std::pair<ScalarField, RungRecord> minimise_fixed_p(
    const ScalarField& u0, double p, const RegularisationParams& params,
    const ProblemData& data, const SolveOptions& opts);

// Max over nodes and slots of |a-b|, |D(a-b)|, |D^2(a-b)|.
double c2_distance(const ScalarField& a, const ScalarField& b);

// Initial iterate: harmonic-type extension of the boundary data (Laplace
// solve with zero source); falls back to the g field itself if that fails.
ScalarField g_extension(const ProblemData& data);

struct ContinuationResult {
  std::vector<ScalarField> iterates;  // one per completed rung
  std::vector<RungRecord> records;
  bool completed = false;
  int failed_rung = -1;  // first non-converged rung, -1 if none
};

// Minimises along the p-ladder, warm-starting each rung from the previous
// minimiser. A non-converged rung aborts the ladder with partial results.
ContinuationResult p_continuation(const ProblemData& data,
                                  const RegularisationParams& params,
                                  const std::vector<double>& tol_schedule,
                                  int max_iter);

}  // namespace srcfit
