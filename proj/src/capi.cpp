#include "srcfit.h"

#include <cstring>
#include <string>

#include "experiment.hpp"

using namespace srcfit;

struct srcfit_experiment {
  Config cfg;
  ExperimentResult result;
  bool ran = false;
  std::string last_error;
};

namespace {

void copy_message(const std::string& msg, char* err, size_t err_len) {
  if (!err || err_len == 0) return;
  const size_t n = std::min(msg.size(), err_len - 1);
  std::memcpy(err, msg.data(), n);
  err[n] = '\0';
}

}  // namespace

extern "C" {

const char* srcfit_version(void) { return "0.1.0"; }

srcfit_status srcfit_validate_config(const char* config_path, char* err,
                                     size_t err_len) {
  if (!config_path) return SRCFIT_ERR_ARGUMENT;
  try {
    parse_config_file(config_path);
    return SRCFIT_OK;
  } catch (const std::exception& e) {
    copy_message(e.what(), err, err_len);
    const std::string what = e.what();
    return what.rfind("cannot open", 0) == 0 ? SRCFIT_ERR_IO
                                             : SRCFIT_ERR_CONFIG;
  } catch (...) {
    return SRCFIT_ERR_INTERNAL;
  }
}

srcfit_status srcfit_render_config(const char* config_path, char* buf,
                                   size_t buf_len, size_t* required) {
  if (!config_path) return SRCFIT_ERR_ARGUMENT;
  try {
    const std::string text = render_config(parse_config_file(config_path));
    if (required) *required = text.size();
    copy_message(text, buf, buf_len);
    return SRCFIT_OK;
  } catch (const std::exception& e) {
    copy_message(e.what(), buf, buf_len);
    return SRCFIT_ERR_CONFIG;
  } catch (...) {
    return SRCFIT_ERR_INTERNAL;
  }
}

srcfit_status srcfit_experiment_open(const char* config_path,
                                     srcfit_experiment** out, char* err,
                                     size_t err_len) {
  if (!config_path || !out) return SRCFIT_ERR_ARGUMENT;
  *out = nullptr;
  try {
    auto* exp = new srcfit_experiment;
    exp->cfg = parse_config_file(config_path);
    *out = exp;
    return SRCFIT_OK;
  } catch (const std::exception& e) {
    copy_message(e.what(), err, err_len);
    const std::string what = e.what();
    return what.rfind("cannot open", 0) == 0 ? SRCFIT_ERR_IO
                                             : SRCFIT_ERR_CONFIG;
  } catch (...) {
    return SRCFIT_ERR_INTERNAL;
  }
}

srcfit_status srcfit_experiment_set_output_dir(srcfit_experiment* exp,
                                               const char* dir) {
  if (!exp || !dir || exp->ran) return SRCFIT_ERR_ARGUMENT;
  exp->cfg.out_dir = dir;
  return SRCFIT_OK;
}

srcfit_status srcfit_experiment_set_seed(srcfit_experiment* exp,
                                         uint64_t seed) {
  if (!exp || exp->ran) return SRCFIT_ERR_ARGUMENT;
  exp->cfg.seed = seed;
  return SRCFIT_OK;
}

srcfit_status srcfit_experiment_run(srcfit_experiment* exp) {
  if (!exp || exp->ran) return SRCFIT_ERR_ARGUMENT;
  try {
    exp->result = run_experiment(exp->cfg);
    write_outputs(exp->result);
    exp->ran = true;
    if (!exp->result.ok) {
      exp->last_error =
          exp->result.failed_stage + ": " + exp->result.error;
      return SRCFIT_ERR_RUN;
    }
    return SRCFIT_OK;
  } catch (const std::exception& e) {
    exp->last_error = e.what();
    exp->ran = true;
    return SRCFIT_ERR_IO;
  } catch (...) {
    exp->last_error = "unknown failure";
    exp->ran = true;
    return SRCFIT_ERR_INTERNAL;
  }
}

const char* srcfit_experiment_last_error(const srcfit_experiment* exp) {
  return exp ? exp->last_error.c_str() : "";
}

const char* srcfit_experiment_output_dir(const srcfit_experiment* exp) {
  return exp ? exp->cfg.out_dir.c_str() : "";
}

int srcfit_experiment_rung_count(const srcfit_experiment* exp) {
  if (!exp || !exp->ran) return 0;
  return static_cast<int>(exp->result.rows.size());
}

srcfit_status srcfit_experiment_rung_stats(const srcfit_experiment* exp,
                                           int rung,
                                           srcfit_rung_stats* out) {
  if (!exp || !out || !exp->ran) return SRCFIT_ERR_ARGUMENT;
  if (rung < 0 || rung >= static_cast<int>(exp->result.rows.size()))
    return SRCFIT_ERR_ARGUMENT;
  const RungRow& r = exp->result.rows[rung];
  const RungRecord& rec = exp->result.continuation.records[rung];
  out->p = r.p;
  out->iterations = r.iterations;
  out->converged = rec.converged ? 1 : 0;
  out->energy_p = r.energy_p;
  out->energy_inf = r.energy_inf;
  out->grad_sup = rec.grad_sup;
  out->sup_error_on_K = r.sup_error_on_K;
  out->lp_error_on_K = r.lp_error_on_K;
  out->sup_F = r.sup_F;
  out->tv_nu = r.tv_nu;
  out->tv_mu = r.tv_mu;
  out->concentration_fraction = r.concentration_fraction;
  out->el_residual = r.el_residual;
  out->bound_rhs_p = r.bound_rhs_p;
  out->bound_pass = r.bound_pass;
  out->c2_dist_prev_rung = r.c2_dist_prev_rung;
  return SRCFIT_OK;
}

void srcfit_experiment_close(srcfit_experiment* exp) { delete exp; }

}  // extern "C"
