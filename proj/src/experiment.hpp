#pragma once

#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "measures.hpp"
#include "optimize.hpp"
#include "verify.hpp"

namespace srcfit {

// One row of results.csv, in column order.
struct RungRow {
  double p = 0.0;
  int iterations = 0;
  double energy_p = 0.0;
  double energy_inf = 0.0;
  double sup_error_on_K = 0.0;   // sup |K[u_p] - k| on the measurement set
  double lp_error_on_K = 0.0;    // recovery error vs K[u0] when u0 is known
  double sup_F = 0.0;            // sup |F[u_p]| (the recovered source)
  double tv_nu = 0.0;
  double tv_mu = 0.0;
  double concentration_fraction = 0.0;
  double el_residual = 0.0;
  double bound_rhs_p = 0.0;      // nan when no exact solution is available
  int bound_pass = -1;           // 1/0, -1 when not applicable
  double c2_dist_prev_rung = 0.0;
};

struct ExperimentResult {
  Config cfg;
  bool ok = false;
  std::string failed_stage;  // empty on success
  std::string error;

  ProblemData data;
  bool has_u0 = false;
  ScalarField u0;
  std::vector<double> snap_distances;  // external mode only

  ContinuationResult continuation;
  std::vector<RungRow> rows;
  std::optional<VerifyReport> verify;
  std::uint64_t test_fn_seed = 0;
};

// Runs the full pipeline: data synthesis, p-continuation, concentration
// measures, certificates. Does not touch the filesystem.
ExperimentResult run_experiment(const Config& cfg);

// Writes results.csv, report.json, config_echo.cfg and fields/ into
// cfg.out_dir. Failed stages still produce report.json with the stage label.
void write_outputs(const ExperimentResult& result);

// parse + run + write; overrides are applied before running.
ExperimentResult run_experiment_file(
    const std::string& config_path,
    const std::optional<std::string>& out_dir_override = std::nullopt,
    const std::optional<std::uint64_t>& seed_override = std::nullopt);

// Builds the discrete problem (grid, operators, measurement carrier, data)
// from a validated config. Exposed for tests and the acceptance suite.
struct BuiltProblem {
  ProblemData data;
  bool has_u0 = false;
  ScalarField u0;
  std::vector<double> snap_distances;
};
BuiltProblem build_problem(const Config& cfg);

// Manufactured solution catalog: zero, sine, cubic, quartic, gaussian.
ScalarField manufactured_field(GridPtr grid, const std::string& name);

}  // namespace srcfit
