// Command line front end. Talks to the library exclusively through the C
// API in srcfit.h.

#include <cinttypes>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "srcfit.h"

namespace {

struct RunOutcome {
  std::string config;
  int status = 0;
  std::string message;
  std::string summary;  // per-rung table, printed after the run finishes
};

void append(std::string& s, const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  s += buf;
}

int run_one(const std::string& config, const std::string& out_dir,
            bool have_seed, std::uint64_t seed, RunOutcome& outcome) {
  outcome.config = config;
  char err[512] = {0};
  srcfit_experiment* exp = nullptr;
  srcfit_status st =
      srcfit_experiment_open(config.c_str(), &exp, err, sizeof(err));
  if (st != SRCFIT_OK) {
    outcome.status = st;
    outcome.message = err;
    return 1;
  }
  if (!out_dir.empty()) srcfit_experiment_set_output_dir(exp, out_dir.c_str());
  if (have_seed) srcfit_experiment_set_seed(exp, seed);

  st = srcfit_experiment_run(exp);
  if (st != SRCFIT_OK) {
    outcome.status = st;
    outcome.message = srcfit_experiment_last_error(exp);
    srcfit_experiment_close(exp);
    return 1;
  }

  append(outcome.summary, "%s:\n", config.c_str());
  append(outcome.summary, "  %6s %6s %12s %12s %10s %8s %8s %6s\n", "p",
         "iters", "energy_p", "energy_inf", "sup_err_K", "TV_nu", "conc",
         "bound");
  const int n = srcfit_experiment_rung_count(exp);
  for (int i = 0; i < n; ++i) {
    srcfit_rung_stats s;
    srcfit_experiment_rung_stats(exp, i, &s);
    const char* bound =
        s.bound_pass < 0 ? "na" : (s.bound_pass ? "pass" : "FAIL");
    append(outcome.summary, "  %6g %6d %12.5g %12.5g %10.4g %8.5f %8.5f %6s\n",
           s.p, s.iterations, s.energy_p, s.energy_inf, s.sup_error_on_K,
           s.tv_nu, s.concentration_fraction, bound);
  }
  append(outcome.summary, "  outputs: %s\n",
         srcfit_experiment_output_dir(exp));
  srcfit_experiment_close(exp);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"inverse source identification by p-continuation"};
  app.set_version_flag("--version", srcfit_version());
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run experiments from config files");
  std::vector<std::string> configs;
  std::string out_dir;
  std::uint64_t seed = 0;
  int jobs = 1;
  run->add_option("configs", configs, "configuration files")->required();
  run->add_option("--output-dir", out_dir,
                  "override the output directory (single config only)");
  auto* seed_opt = run->add_option("--seed", seed, "override the noise seed");
  run->add_option("--jobs", jobs, "run configs concurrently")
      ->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "validate a config file");
  std::string vconfig;
  validate->add_option("config", vconfig, "configuration file")->required();

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) {
    char buf[8192] = {0};
    size_t required = 0;
    const srcfit_status st =
        srcfit_render_config(vconfig.c_str(), buf, sizeof(buf), &required);
    if (st != SRCFIT_OK) {
      std::fprintf(stderr, "invalid config: %s\n", buf);
      return 1;
    }
    std::printf("%s", buf);
    return 0;
  }

  if (!out_dir.empty() && configs.size() > 1) {
    std::fprintf(stderr,
                 "--output-dir cannot be combined with multiple configs\n");
    return 1;
  }

  std::vector<RunOutcome> outcomes(configs.size());
  int failures = 0;
  if (jobs <= 1 || configs.size() == 1) {
    for (size_t i = 0; i < configs.size(); ++i)
      failures +=
          run_one(configs[i], out_dir, seed_opt->count() > 0, seed, outcomes[i]);
  } else {
    std::vector<std::thread> pool;
    std::mutex next_mutex;
    std::size_t next = 0;
    std::vector<int> worker_failures(configs.size(), 0);
    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(jobs), configs.size());
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&]() {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lk(next_mutex);
            if (next >= configs.size()) return;
            i = next++;
          }
          worker_failures[i] = run_one(configs[i], "", seed_opt->count() > 0,
                                       seed, outcomes[i]);
        }
      });
    }
    for (auto& t : pool) t.join();
    for (int f : worker_failures) failures += f;
  }

  for (const auto& o : outcomes) {
    if (!o.summary.empty()) std::printf("%s", o.summary.c_str());
    if (o.status != 0)
      std::fprintf(stderr, "%s failed (status %d): %s\n", o.config.c_str(),
                   o.status, o.message.c_str());
  }
  return failures == 0 ? 0 : 1;
}
