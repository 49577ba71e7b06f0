#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace srcfit {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

struct KvStore {
  std::map<std::string, std::string> kv;
  std::set<std::string> consumed;

  std::optional<std::string> get(const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    consumed.insert(key);
    return it->second;
  }

  void check_all_consumed() const {
    for (const auto& [key, _] : kv)
      if (!consumed.count(key)) fail("unknown config key: " + key);
  }
};

KvStore tokenize(const std::string& text) {
  KvStore store;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        fail("config line " + std::to_string(lineno) + ": malformed section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    store.kv[key] = trim(line.substr(eq + 1));
  }
  return store;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (...) {
    fail("key " + key + ": cannot parse '" + v + "' as a number");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(d);
  } catch (...) {
    fail("key " + key + ": cannot parse '" + v + "' as an integer");
  }
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& key,
                                      const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(parse_double(key, item));
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& item : split_list(v)) out.push_back(parse_int(key, item));
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt(v[i]);
  }
  return out;
}

std::string join_int(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

Config parse_config_text(const std::string& text,
                         const std::string& default_out_dir) {
  KvStore store = tokenize(text);
  Config cfg;

  if (auto v = store.get("domain.n")) cfg.dim = parse_int("domain.n", *v);
  if (cfg.dim != 1 && cfg.dim != 2) fail("key domain.n: must be 1 or 2");

  cfg.extents = {0.0, 1.0};
  if (cfg.dim == 2) cfg.extents = {0.0, 1.0, 0.0, 1.0};
  if (auto v = store.get("domain.extents"))
    cfg.extents = parse_double_list("domain.extents", *v);
  if (cfg.extents.size() != static_cast<size_t>(2 * cfg.dim))
    fail("key domain.extents: needs 2 entries per axis");
  for (int a = 0; a < cfg.dim; ++a)
    if (!(cfg.extents[2 * a + 1] > cfg.extents[2 * a]))
      fail("key domain.extents: upper bound not above lower bound");

  cfg.resolution.assign(cfg.dim, 33);
  if (auto v = store.get("domain.resolution"))
    cfg.resolution = parse_int_list("domain.resolution", *v);
  if (cfg.resolution.size() == 1 && cfg.dim == 2)
    cfg.resolution.push_back(cfg.resolution[0]);
  if (cfg.resolution.size() != static_cast<size_t>(cfg.dim))
    fail("key domain.resolution: needs one entry per axis");
  for (int r : cfg.resolution)
    if (r < 5) fail("key domain.resolution: must be at least 5 per axis");

  if (auto v = store.get("operators.F.name")) cfg.f_name = *v;
  static const std::set<std::string> f_names = {
      "linear_divergence", "linear_nondivergence", "fully_nonlinear_eps"};
  if (!f_names.count(cfg.f_name))
    fail("key operators.F.name: unknown operator '" + cfg.f_name + "'");
  if (auto v = store.get("operators.F.params"))
    cfg.f_params = parse_double_list("operators.F.params", *v);
  if (cfg.f_params.empty()) {
    if (cfg.f_name == "fully_nonlinear_eps") {
      cfg.f_params = {0.25};
    } else {
      // identity A, zero b, zero c
      cfg.f_params = cfg.dim == 1 ? std::vector<double>{1, 0, 0}
                                  : std::vector<double>{1, 0, 1, 0, 0, 0};
    }
  }
  const size_t linear_len = cfg.dim == 1 ? 3 : 6;  // a11[,a12,a22],b,c
  if (cfg.f_name == "fully_nonlinear_eps") {
    if (cfg.f_params.size() != 1)
      fail("key operators.F.params: fully_nonlinear_eps takes one value (eps)");
    if (!(cfg.f_params[0] >= 0.0) || cfg.f_params[0] >= 1.0)
      fail("key operators.F.params: eps must be in [0, 1)");
  } else if (cfg.f_params.size() != linear_len) {
    fail("key operators.F.params: linear operators take " +
         std::to_string(linear_len) +
         " values (upper-triangular A, then b, then c)");
  }

  if (auto v = store.get("operators.K.name")) cfg.k_name = *v;
  if (cfg.k_name != "identity" && cfg.k_name != "flux")
    fail("key operators.K.name: unknown operator '" + cfg.k_name + "'");
  if (auto v = store.get("operators.K.params"))
    cfg.k_params = parse_double_list("operators.K.params", *v);
  if (cfg.k_name == "flux") {
    if (cfg.k_params.empty()) cfg.k_params.assign(cfg.dim, 0.0);
    if (cfg.k_params.size() != static_cast<size_t>(cfg.dim))
      fail("key operators.K.params: flux takes one value per axis");
  } else if (!cfg.k_params.empty()) {
    fail("key operators.K.params: identity takes no parameters");
  }

  if (auto v = store.get("measurement.kind")) cfg.meas_kind = *v;
  static const std::set<std::string> kinds = {"points", "line", "subdomain"};
  if (!kinds.count(cfg.meas_kind))
    fail("key measurement.kind: must be points, line or subdomain");
  if (cfg.meas_kind == "line" && cfg.dim != 2)
    fail("key measurement.kind: line requires n = 2");
  if (auto v = store.get("measurement.spec"))
    cfg.meas_spec = parse_double_list("measurement.spec", *v);
  if (cfg.meas_spec.empty()) {
    if (cfg.meas_kind == "subdomain") {
      cfg.meas_spec = cfg.dim == 1 ? std::vector<double>{0.25, 0.75}
                                   : std::vector<double>{0.25, 0.75, 0.25, 0.75};
    } else if (cfg.meas_kind != "points") {
      fail("key measurement.spec: required for kind " + cfg.meas_kind);
    }
  }
  const double kind_kappa = cfg.meas_kind == "points" ? 0.0
                            : cfg.meas_kind == "line" ? 1.0
                                                      : cfg.dim;
  cfg.kappa = kind_kappa;
  if (auto v = store.get("measurement.kappa")) {
    cfg.kappa = parse_double("measurement.kappa", *v);
    if (cfg.kappa != kind_kappa)
      fail("key measurement.kappa: inconsistent with kind " + cfg.meas_kind);
  }

  bool have_alpha = false, have_beta = false, have_gamma = false;
  if (auto v = store.get("regularisation.alpha")) {
    cfg.alpha = parse_double("regularisation.alpha", *v);
    have_alpha = true;
  }
  if (auto v = store.get("regularisation.beta")) {
    cfg.beta = parse_double("regularisation.beta", *v);
    have_beta = true;
  }
  if (auto v = store.get("regularisation.gamma")) {
    cfg.gamma = parse_double("regularisation.gamma", *v);
    have_gamma = true;
  }
  if (!have_alpha) fail("missing required key: regularisation.alpha");
  if (!have_beta) fail("missing required key: regularisation.beta");
  if (!have_gamma) fail("missing required key: regularisation.gamma");
  if (!(cfg.alpha > 0.0)) fail("key regularisation.alpha: must be positive");
  if (!(cfg.beta > 0.0)) fail("key regularisation.beta: must be positive");
  if (!(cfg.gamma >= 0.0)) fail("key regularisation.gamma: must be nonnegative");

  cfg.p_ladder = {4, 8, 16, 32, 64};
  if (auto v = store.get("regularisation.p_ladder"))
    cfg.p_ladder = parse_double_list("regularisation.p_ladder", *v);
  if (cfg.p_ladder.empty()) fail("key regularisation.p_ladder: empty");
  double prev = cfg.dim;
  for (double p : cfg.p_ladder) {
    if (!(p > cfg.dim))
      fail("key regularisation.p_ladder: entries must exceed n");
    if (!(p > prev) && prev != cfg.dim)
      fail("key regularisation.p_ladder: ladder not increasing");
    prev = p;
  }

  if (auto v = store.get("optimizer.tol_schedule"))
    cfg.tol_schedule = parse_double_list("optimizer.tol_schedule", *v);
  if (cfg.tol_schedule.empty()) {
    // geometric tightening from 1e-4 to 1e-7 over the ladder
    const size_t n = cfg.p_ladder.size();
    for (size_t i = 0; i < n; ++i) {
      const double t = n == 1 ? 1.0 : static_cast<double>(i) / (n - 1);
      cfg.tol_schedule.push_back(1e-4 * std::pow(1e-3, t));
    }
  }
  for (double t : cfg.tol_schedule)
    if (!(t > 0.0)) fail("key optimizer.tol_schedule: entries must be positive");
  if (auto v = store.get("optimizer.max_iter"))
    cfg.max_iter = parse_int("optimizer.max_iter", *v);
  if (cfg.max_iter < 1) fail("key optimizer.max_iter: must be positive");

  if (auto v = store.get("data.mode")) cfg.data_mode = *v;
  if (cfg.data_mode != "manufactured" && cfg.data_mode != "external")
    fail("key data.mode: must be manufactured or external");
  if (auto v = store.get("data.u0.name")) cfg.u0_name = *v;
  static const std::set<std::string> u0_names = {"zero", "sine", "cubic",
                                                 "quartic", "gaussian"};
  if (!u0_names.count(cfg.u0_name))
    fail("key data.u0.name: unknown manufactured solution '" + cfg.u0_name +
         "'");
  if (auto v = store.get("data.g.name")) cfg.g_name = *v;
  if (!u0_names.count(cfg.g_name))
    fail("key data.g.name: unknown boundary field '" + cfg.g_name + "'");
  if (auto v = store.get("data.file")) cfg.external_path = *v;
  if (cfg.data_mode == "external" && cfg.external_path.empty())
    fail("missing required key: data.file (external mode)");
  if (auto v = store.get("data.seed")) {
    const long s = std::stol(*v);
    if (s < 0) fail("key data.seed: must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(s);
  }

  cfg.out_dir = default_out_dir;
  if (auto v = store.get("output.dir")) cfg.out_dir = *v;
  if (cfg.out_dir.empty()) fail("missing required key: output.dir");

  if (auto v = store.get("diagnostics.test_functions"))
    cfg.test_functions = parse_int("diagnostics.test_functions", *v);
  if (cfg.test_functions < 1)
    fail("key diagnostics.test_functions: must be positive");
  if (auto v = store.get("diagnostics.conc_delta"))
    cfg.conc_delta = parse_double("diagnostics.conc_delta", *v);
  if (!(cfg.conc_delta > 0.0) || !(cfg.conc_delta < 1.0))
    fail("key diagnostics.conc_delta: must be in (0, 1)");

  store.check_all_consumed();

  if (cfg.meas_kind == "points" && cfg.data_mode == "manufactured" &&
      cfg.meas_spec.empty())
    fail("key measurement.spec: required for kind points");
  if (cfg.meas_kind == "points" && cfg.meas_spec.size() % cfg.dim != 0)
    fail("key measurement.spec: points need n coordinates each");
  if (cfg.meas_kind == "line" && cfg.meas_spec.size() != 4)
    fail("key measurement.spec: line needs x1,y1,x2,y2");
  if (cfg.meas_kind == "subdomain" &&
      cfg.meas_spec.size() != static_cast<size_t>(2 * cfg.dim))
    fail("key measurement.spec: subdomain needs 2 entries per axis");

  return cfg;
}

Config parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string stem = std::filesystem::path(path).stem().string();
  return parse_config_text(buf.str(), "runs/" + stem);
}

std::string render_config(const Config& cfg) {
  std::ostringstream out;
  out << "[domain]\n";
  out << "n = " << cfg.dim << "\n";
  out << "extents = " << join(cfg.extents) << "\n";
  out << "resolution = " << join_int(cfg.resolution) << "\n\n";
  out << "[operators]\n";
  out << "F.name = " << cfg.f_name << "\n";
  out << "F.params = " << join(cfg.f_params) << "\n";
  out << "K.name = " << cfg.k_name << "\n";
  if (!cfg.k_params.empty()) out << "K.params = " << join(cfg.k_params) << "\n";
  out << "\n[measurement]\n";
  out << "kind = " << cfg.meas_kind << "\n";
  if (!cfg.meas_spec.empty()) out << "spec = " << join(cfg.meas_spec) << "\n";
  out << "kappa = " << fmt(cfg.kappa) << "\n\n";
  out << "[regularisation]\n";
  out << "alpha = " << fmt(cfg.alpha) << "\n";
  out << "beta = " << fmt(cfg.beta) << "\n";
  out << "gamma = " << fmt(cfg.gamma) << "\n";
  out << "p_ladder = " << join(cfg.p_ladder) << "\n\n";
  out << "[optimizer]\n";
  out << "tol_schedule = " << join(cfg.tol_schedule) << "\n";
  out << "max_iter = " << cfg.max_iter << "\n\n";
  out << "[data]\n";
  out << "mode = " << cfg.data_mode << "\n";
  if (cfg.data_mode == "manufactured") {
    out << "u0.name = " << cfg.u0_name << "\n";
  } else {
    out << "file = " << cfg.external_path << "\n";
    out << "g.name = " << cfg.g_name << "\n";
  }
  out << "seed = " << cfg.seed << "\n\n";
  out << "[output]\n";
  out << "dir = " << cfg.out_dir << "\n\n";
  out << "[diagnostics]\n";
  out << "test_functions = " << cfg.test_functions << "\n";
  out << "conc_delta = " << fmt(cfg.conc_delta) << "\n";
  return out.str();
}

}  // namespace srcfit
