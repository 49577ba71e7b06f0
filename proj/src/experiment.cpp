#include "experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "forward.hpp"

namespace srcfit {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

OperatorF build_operator_f(const Config& cfg) {
  const int d = cfg.dim;
  if (cfg.f_name == "fully_nonlinear_eps")
    return fully_nonlinear_eps(cfg.f_params[0], d);
  // params: upper triangle of A, then b, then c
  std::vector<double> A(static_cast<size_t>(d) * d);
  std::vector<double> b(d);
  double c;
  if (d == 1) {
    A[0] = cfg.f_params[0];
    b[0] = cfg.f_params[1];
    c = cfg.f_params[2];
  } else {
    A = {cfg.f_params[0], cfg.f_params[1], cfg.f_params[1], cfg.f_params[2]};
    b = {cfg.f_params[3], cfg.f_params[4]};
    c = cfg.f_params[5];
  }
  return cfg.f_name == "linear_divergence" ? linear_divergence(A, b, c, d)
                                           : linear_nondivergence(A, b, c, d);
}

OperatorK build_operator_k(const Config& cfg) {
  if (cfg.k_name == "flux") return obs_flux(cfg.k_params, cfg.dim);
  return obs_identity(cfg.dim);
}

MeasurementSet build_measurement(const Config& cfg, const Grid& g) {
  if (cfg.meas_kind == "points") {
    std::vector<std::array<double, 2>> pts;
    for (size_t i = 0; i + cfg.dim <= cfg.meas_spec.size(); i += cfg.dim) {
      std::array<double, 2> p{cfg.meas_spec[i], 0.0};
      if (cfg.dim == 2) p[1] = cfg.meas_spec[i + 1];
      pts.push_back(p);
    }
    return measurement_points(g, pts);
  }
  if (cfg.meas_kind == "line") {
    return measurement_line(g, {cfg.meas_spec[0], cfg.meas_spec[1]},
                            {cfg.meas_spec[2], cfg.meas_spec[3]});
  }
  return measurement_subdomain(g, cfg.meas_spec);
}

struct ExternalData {
  MeasurementSet mset;
  std::vector<double> values;
  std::vector<double> snap_distances;
};

// CSV rows: x[,y],value. Coordinates snap to the nearest grid node;
// duplicate snaps are averaged.
ExternalData load_external(const std::string& path, const Grid& g) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open measurement file: " + path);
  struct Atom {
    double sum = 0.0;
    int count = 0;
    double snap = 0.0;
  };
  std::map<int, Atom> atoms;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> vals;
    std::string tok;
    try {
      while (std::getline(ls, tok, ',')) vals.push_back(std::stod(tok));
    } catch (...) {
      throw std::invalid_argument("measurement file line " +
                                  std::to_string(lineno) +
                                  ": cannot parse '" + tok + "' as a number");
    }
    if (vals.size() != static_cast<size_t>(g.dim + 1))
      throw std::invalid_argument("measurement file line " +
                                  std::to_string(lineno) +
                                  ": expected coordinates and a value");
    std::array<double, 2> pt{vals[0], g.dim == 2 ? vals[1] : 0.0};
    int ix = static_cast<int>(std::lround((pt[0] - g.lo[0]) / g.h[0]));
    ix = std::clamp(ix, 0, g.res[0] - 1);
    int iy = 0;
    if (g.dim == 2) {
      iy = static_cast<int>(std::lround((pt[1] - g.lo[1]) / g.h[1]));
      iy = std::clamp(iy, 0, g.res[1] - 1);
    }
    const int node = g.index(ix, iy);
    const auto c = g.coord(node);
    const double dx = c[0] - pt[0];
    const double dy = g.dim == 2 ? c[1] - pt[1] : 0.0;
    Atom& a = atoms[node];
    a.sum += vals[g.dim];
    a.count += 1;
    a.snap = std::max(a.snap, std::sqrt(dx * dx + dy * dy));
  }
  if (atoms.empty())
    throw std::invalid_argument("measurement file is empty: " + path);
  ExternalData out;
  out.mset.kappa = 0.0;
  for (const auto& [node, a] : atoms) {
    out.mset.nodes.push_back(node);
    out.mset.weight.push_back(1.0);
    out.values.push_back(a.sum / a.count);
    out.snap_distances.push_back(a.snap);
  }
  return out;
}

std::string csv_header() {
  return "p,iterations,energy_p,energy_inf,sup_error_on_K,lp_error_on_K,"
         "sup_F,TV_nu,TV_mu,concentration_fraction,el_residual,bound_rhs_p,"
         "bound_pass,c2_dist_prev_rung";
}

std::string csv_row(const RungRow& r) {
  std::ostringstream out;
  out << fmt(r.p) << "," << r.iterations << "," << fmt(r.energy_p) << ","
      << fmt(r.energy_inf) << "," << fmt(r.sup_error_on_K) << ","
      << fmt(r.lp_error_on_K) << "," << fmt(r.sup_F) << "," << fmt(r.tv_nu)
      << "," << fmt(r.tv_mu) << "," << fmt(r.concentration_fraction) << ","
      << fmt(r.el_residual) << "," << fmt(r.bound_rhs_p) << ","
      << (r.bound_pass < 0 ? std::string("na") : std::to_string(r.bound_pass))
      << "," << fmt(r.c2_dist_prev_rung);
  return out.str();
}

void write_field_grid(const fs::path& path, const Grid& g,
                      std::span<const double> v) {
  std::ofstream out(path);
  out << "# " << g.dim << " " << g.res[0] << " " << g.res[1] << "\n";
  for (int iy = 0; iy < g.res[1]; ++iy) {
    for (int ix = 0; ix < g.res[0]; ++ix) {
      if (ix) out << ",";
      out << fmt(v[g.index(ix, iy)]);
    }
    out << "\n";
  }
}

void write_measure_csv(const fs::path& path, const Grid& g,
                       const DiscreteMeasure& m) {
  std::ofstream out(path);
  out << "node,x,y,weight,density\n";
  for (size_t j = 0; j < m.nodes.size(); ++j) {
    const auto c = g.coord(m.nodes[j]);
    out << m.nodes[j] << "," << fmt(c[0]) << "," << fmt(c[1]) << ","
        << fmt(m.weight[j]) << "," << fmt(m.density[j]) << "\n";
  }
}

}  // namespace

ScalarField manufactured_field(GridPtr grid, const std::string& name) {
  const Grid& g = *grid;
  ScalarField u(grid);
  for (int i = 0; i < g.node_count(); ++i) {
    const auto c = g.coord(i);
    const double x = c[0], y = c[1];
    double v = 0.0;
    if (name == "zero") {
      v = 0.0;
    } else if (name == "sine") {
      v = g.dim == 1 ? std::sin(M_PI * x)
                     : std::sin(M_PI * x) * std::sin(M_PI * y);
    } else if (name == "cubic") {
      v = g.dim == 1 ? x * x * x : x * x * x + y * y * y;
    } else if (name == "quartic") {
      v = g.dim == 1 ? x * x * x * x : x * x * x * x + y * y * y * y;
    } else if (name == "gaussian") {
      const double cx = 0.5 * (g.lo[0] + g.hi[0]);
      const double cy = 0.5 * (g.lo[1] + g.hi[1]);
      const double sx = 0.25 * (g.hi[0] - g.lo[0]);
      double q = (x - cx) * (x - cx) / (sx * sx);
      if (g.dim == 2) {
        const double sy = 0.25 * (g.hi[1] - g.lo[1]);
        q += (y - cy) * (y - cy) / (sy * sy);
      }
      v = std::exp(-q);
    } else {
      throw std::invalid_argument("unknown manufactured field: " + name);
    }
    u[i] = v;
  }
  return u;
}

BuiltProblem build_problem(const Config& cfg) {
  BuiltProblem out;
  out.data.grid = build_grid(cfg.extents, cfg.resolution);
  out.data.opF = build_operator_f(cfg);
  out.data.opK = build_operator_k(cfg);

  if (cfg.data_mode == "manufactured") {
    out.data.mset = build_measurement(cfg, *out.data.grid);
    out.u0 = manufactured_field(out.data.grid, cfg.u0_name);
    out.has_u0 = true;
    out.data.g = out.u0;  // boundary trace of the exact solution
    out.data.k_meas =
        synth_data(out.u0, out.data.opK, out.data.mset, cfg.gamma, cfg.seed);
  } else {
    ExternalData ext = load_external(cfg.external_path, *out.data.grid);
    out.data.mset = std::move(ext.mset);
    out.data.k_meas = std::move(ext.values);
    out.snap_distances = std::move(ext.snap_distances);
    out.data.g = manufactured_field(out.data.grid, cfg.g_name);
    out.has_u0 = false;
  }
  return out;
}

ExperimentResult run_experiment(const Config& cfg) {
  ExperimentResult res;
  res.cfg = cfg;
  res.test_fn_seed = cfg.seed ^ 0x5eedf00dULL;

  RegularisationParams params;
  params.alpha = cfg.alpha;
  params.beta = cfg.beta;
  params.gamma = cfg.gamma;
  params.p_ladder = cfg.p_ladder;

  std::string stage = "build";
  try {
    BuiltProblem built = build_problem(cfg);
    res.data = std::move(built.data);
    res.has_u0 = built.has_u0;
    res.u0 = std::move(built.u0);
    res.snap_distances = std::move(built.snap_distances);

    stage = "continuation";
    res.continuation =
        p_continuation(res.data, params, cfg.tol_schedule, cfg.max_iter);

    stage = "measures";
    const auto test_fns =
        make_test_functions(res.data.grid, cfg.test_functions, res.test_fn_seed);
    std::vector<double> k0;
    if (res.has_u0) k0 = eval_K(res.data.opK, res.u0, res.data.mset);

    for (size_t k = 0; k < res.continuation.iterates.size(); ++k) {
      const ScalarField& up = res.continuation.iterates[k];
      const double p = cfg.p_ladder[k];
      RungRow row;
      row.p = p;
      row.iterations = res.continuation.records[k].iterations;
      row.energy_p = res.continuation.records[k].energy;
      row.energy_inf = energy_inf(up, params, res.data);
      row.c2_dist_prev_rung = res.continuation.records[k].c2_dist_prev;

      std::vector<double> misfit = eval_K(res.data.opK, up, res.data.mset);
      for (size_t j = 0; j < misfit.size(); ++j)
        misfit[j] -= res.data.k_meas[j];
      row.sup_error_on_K = sup_norm(misfit);
      if (res.has_u0) {
        std::vector<double> rec_err = eval_K(res.data.opK, up, res.data.mset);
        for (size_t j = 0; j < rec_err.size(); ++j) rec_err[j] -= k0[j];
        row.lp_error_on_K = normalized_lp_norm(rec_err, res.data.mset.weight, p);
      } else {
        std::vector<double> abs_misfit = misfit;
        row.lp_error_on_K =
            normalized_lp_norm(abs_misfit, res.data.mset.weight, p);
      }
      row.sup_F = sup_norm(eval_F(res.data.opF, up).v);

      const DiscreteMeasure nu = data_residual_measure(up, res.data, p);
      const DiscreteMeasure mu = source_residual_measure(up, res.data, p);
      row.tv_nu = total_variation(nu);
      row.tv_mu = total_variation(mu);
      std::vector<double> abs_err(misfit.size());
      for (size_t j = 0; j < misfit.size(); ++j) abs_err[j] = std::abs(misfit[j]);
      row.concentration_fraction =
          concentration_fraction(nu, abs_err, cfg.conc_delta);
      row.el_residual = el_residual(up, mu, nu, params, res.data, test_fns);
      row.bound_rhs_p = std::nan("");
      res.rows.push_back(row);
    }

    stage = "verify";
    if (res.has_u0 && !res.continuation.iterates.empty()) {
      res.verify = verify_bounds(res.continuation.iterates, res.u0, params,
                                 res.data);
      for (size_t k = 0; k < res.verify->rungs.size(); ++k) {
        res.rows[k].bound_rhs_p = res.verify->rungs[k].rhs_p;
        bool pass = res.verify->rungs[k].pass;
        if (k + 1 == res.verify->rungs.size()) pass = pass && res.verify->pass_sup;
        res.rows[k].bound_pass = pass ? 1 : 0;
      }
    }

    if (!res.continuation.completed) {
      res.failed_stage = "continuation";
      res.error = "ladder aborted: rung " +
                  std::to_string(res.continuation.failed_rung) +
                  " did not converge";
      return res;
    }
    res.ok = true;
  } catch (const std::exception& e) {
    res.failed_stage = stage;
    res.error = e.what();
  }
  return res;
}

void write_outputs(const ExperimentResult& res) {
  const fs::path dir(res.cfg.out_dir);
  fs::create_directories(dir / "fields");

  {
    std::ofstream out(dir / "config_echo.cfg");
    out << render_config(res.cfg);
  }

  {
    std::ofstream out(dir / "results.csv");
    out << csv_header() << "\n";
    for (const auto& row : res.rows) out << csv_row(row) << "\n";
  }

  json rep;
  rep["version"] = kVersion;
  rep["ok"] = res.ok;
  if (!res.ok) {
    rep["failed_stage"] = res.failed_stage;
    rep["error"] = res.error;
  }
  {
    json c;
    c["domain"] = {{"n", res.cfg.dim},
                   {"extents", res.cfg.extents},
                   {"resolution", res.cfg.resolution}};
    c["operators"] = {{"F.name", res.cfg.f_name},
                      {"F.params", res.cfg.f_params},
                      {"K.name", res.cfg.k_name},
                      {"K.params", res.cfg.k_params}};
    c["measurement"] = {{"kind", res.cfg.meas_kind},
                        {"spec", res.cfg.meas_spec},
                        {"kappa", res.cfg.kappa}};
    c["regularisation"] = {{"alpha", res.cfg.alpha},
                           {"beta", res.cfg.beta},
                           {"gamma", res.cfg.gamma},
                           {"p_ladder", res.cfg.p_ladder}};
    c["optimizer"] = {{"tol_schedule", res.cfg.tol_schedule},
                      {"max_iter", res.cfg.max_iter}};
    c["data"] = {{"mode", res.cfg.data_mode},
                 {"u0.name", res.cfg.u0_name},
                 {"seed", res.cfg.seed}};
    if (!res.cfg.external_path.empty()) {
      c["data"]["file"] = res.cfg.external_path;
      c["data"]["g.name"] = res.cfg.g_name;
    }
    c["output"] = {{"dir", res.cfg.out_dir}};
    c["diagnostics"] = {{"test_functions", res.cfg.test_functions},
                        {"conc_delta", res.cfg.conc_delta}};
    rep["config"] = c;
  }
  rep["test_function_seed"] = res.test_fn_seed;
  if (!res.snap_distances.empty()) {
    double worst = 0.0;
    for (double d : res.snap_distances) worst = std::max(worst, d);
    rep["snap_distance_max"] = worst;
    rep["snap_distances"] = res.snap_distances;
  }

  json rungs = json::array();
  for (size_t k = 0; k < res.rows.size(); ++k) {
    const auto& row = res.rows[k];
    const auto& rec = res.continuation.records[k];
    json r;
    r["p"] = row.p;
    r["iterations"] = row.iterations;
    r["converged"] = rec.converged;
    r["tol"] = rec.tol;
    r["energy_p"] = row.energy_p;
    r["energy_inf"] = row.energy_inf;
    r["grad_sup"] = rec.grad_sup;
    r["linesearch_failures"] = rec.linesearch_failures;
    r["wall_seconds"] = rec.wall_seconds;
    r["sup_error_on_K"] = row.sup_error_on_K;
    r["lp_error_on_K"] = row.lp_error_on_K;
    r["sup_F"] = row.sup_F;
    r["TV_nu"] = row.tv_nu;
    r["TV_mu"] = row.tv_mu;
    r["concentration_fraction"] = row.concentration_fraction;
    r["el_residual"] = row.el_residual;
    if (!std::isnan(row.bound_rhs_p)) r["bound_rhs_p"] = row.bound_rhs_p;
    r["bound_pass"] = row.bound_pass;
    if (!std::isnan(row.c2_dist_prev_rung))
      r["c2_dist_prev_rung"] = row.c2_dist_prev_rung;
    rungs.push_back(r);
  }
  rep["rungs"] = rungs;

  if (res.verify) {
    json v;
    v["tol_discr"] = res.verify->tol_discr;
    v["all_pass"] = res.verify->all_pass;
    v["lhs_sup_final"] = res.verify->lhs_sup_final;
    v["rhs_inf"] = res.verify->rhs_inf;
    v["pass_sup"] = res.verify->pass_sup;
    json chks = json::array();
    for (const auto& c : res.verify->rungs) {
      json j;
      j["p"] = c.p;
      j["lhs_lp"] = c.lhs_lp;
      j["rhs_p"] = c.rhs_p;
      j["pass"] = c.pass;
      j["energy_up"] = c.energy_up;
      j["energy_u0"] = c.energy_u0;
      j["minimal"] = c.minimal;
      chks.push_back(j);
    }
    v["rungs"] = chks;
    rep["verify"] = v;
  }

  {
    std::ofstream out(dir / "report.json");
    out << rep.dump(2) << "\n";
  }

  const Grid& g = *res.data.grid;
  for (size_t k = 0; k < res.continuation.iterates.size(); ++k) {
    const std::string tag = "p" + fmt(res.cfg.p_ladder[k]);
    write_field_grid(dir / "fields" / ("u_" + tag + ".csv"), g,
                     res.continuation.iterates[k].v);
    const DiscreteMeasure nu =
        data_residual_measure(res.continuation.iterates[k], res.data,
                              res.cfg.p_ladder[k]);
    const DiscreteMeasure mu =
        source_residual_measure(res.continuation.iterates[k], res.data,
                                res.cfg.p_ladder[k]);
    write_measure_csv(dir / "fields" / ("nu_" + tag + ".csv"), g, nu);
    write_field_grid(dir / "fields" / ("mu_" + tag + ".csv"), g, mu.density);
  }
}

ExperimentResult run_experiment_file(
    const std::string& config_path,
    const std::optional<std::string>& out_dir_override,
    const std::optional<std::uint64_t>& seed_override) {
  Config cfg = parse_config_file(config_path);
  if (out_dir_override) cfg.out_dir = *out_dir_override;
  if (seed_override) cfg.seed = *seed_override;
  ExperimentResult res = run_experiment(cfg);
  write_outputs(res);
  return res;
}

}  // namespace srcfit
