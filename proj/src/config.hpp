#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace srcfit {

// Parsed and validated experiment configuration. Key names follow the
// config file layout: section.key, vector values comma separated.
struct Config {
  // [domain]
  int dim = 2;
  std::vector<double> extents;      // a1,b1[,a2,b2]
  std::vector<int> resolution;      // nodes per axis

  // [operators]
  std::string f_name = "linear_nondivergence";
  std::vector<double> f_params;     // A (row upper triangle), b, c
  std::string k_name = "identity";
  std::vector<double> k_params;

  // [measurement]
  std::string meas_kind = "subdomain";
  std::vector<double> meas_spec;
  double kappa = -1.0;              // derived from kind when negative

  // [regularisation]
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  std::vector<double> p_ladder;

  // [optimizer]
  std::vector<double> tol_schedule;
  int max_iter = 5000;

  // [data]
  std::string data_mode = "manufactured";
  std::string u0_name = "sine";
  std::string g_name = "zero";      // boundary data in external mode
  std::string external_path;
  std::uint64_t seed = 1234;

  // [output]
  std::string out_dir;

  // [diagnostics]
  int test_functions = 10;
  double conc_delta = 0.05;
};

// Parses and validates; throws std::invalid_argument naming the offending
// key. Defaults are filled for optional keys; alpha, beta and gamma are
// required.
Config parse_config_text(const std::string& text,
                         const std::string& default_out_dir);
Config parse_config_file(const std::string& path);

// Renders the effective configuration in the input format.
std::string render_config(const Config& cfg);

}  // namespace srcfit
