#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "config.hpp"
#include "experiment.hpp"

using namespace srcfit;

namespace {

const char* kMinimal = R"(
[regularisation]
alpha = 0.01
beta = 1e-6
gamma = 0.01
)";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("minimal config fills documented defaults") {
  Config cfg = parse_config_text(kMinimal, "runs/test");
  CHECK(cfg.dim == 2);
  CHECK(cfg.resolution == std::vector<int>{33, 33});
  CHECK(cfg.f_name == "linear_nondivergence");
  CHECK(cfg.f_params == std::vector<double>{1, 0, 1, 0, 0, 0});
  CHECK(cfg.k_name == "identity");
  CHECK(cfg.meas_kind == "subdomain");
  CHECK(cfg.kappa == 2.0);
  CHECK(cfg.p_ladder == std::vector<double>{4, 8, 16, 32, 64});
  CHECK(cfg.tol_schedule.size() == 5);
  CHECK(cfg.tol_schedule.front() == doctest::Approx(1e-4));
  CHECK(cfg.tol_schedule.back() == doctest::Approx(1e-7));
  CHECK(cfg.u0_name == "sine");
  CHECK(cfg.seed == 1234);
  CHECK(cfg.out_dir == "runs/test");

  // the echo parses back to the same effective configuration
  Config again = parse_config_text(render_config(cfg), "unused");
  CHECK(again.dim == cfg.dim);
  CHECK(again.p_ladder == cfg.p_ladder);
  CHECK(again.tol_schedule == cfg.tol_schedule);
  CHECK(again.out_dir == cfg.out_dir);
}

TEST_CASE("missing and invalid keys are rejected by name") {
  CHECK_THROWS_WITH_AS(
      parse_config_text("[regularisation]\nalpha=0.1\ngamma=0.01\n", "d"),
      doctest::Contains("beta"), std::invalid_argument);

  CHECK_THROWS_WITH_AS(
      parse_config_text(std::string(kMinimal) + "\n[optimizer]\nfoo = 1\n",
                        "d"),
      doctest::Contains("unknown config key: optimizer.foo"),
      std::invalid_argument);

  CHECK_THROWS_WITH_AS(
      parse_config_text(std::string(kMinimal) +
                            "\n[regularisation]\np_ladder = 8,4\n",
                        "d"),
      doctest::Contains("not increasing"), std::invalid_argument);

  // alpha <= 0 rejected
  CHECK_THROWS_WITH_AS(
      parse_config_text(
          "[regularisation]\nalpha=0\nbeta=1e-6\ngamma=0.01\n", "d"),
      doctest::Contains("alpha"), std::invalid_argument);

  // ladder entries must exceed the dimension
  CHECK_THROWS_WITH_AS(
      parse_config_text(std::string(kMinimal) +
                            "\n[regularisation]\np_ladder = 2,8\n",
                        "d"),
      doctest::Contains("exceed"), std::invalid_argument);

  // kappa inconsistent with the carrier kind
  CHECK_THROWS_WITH_AS(
      parse_config_text(std::string(kMinimal) +
                            "\n[measurement]\nkind = subdomain\nkappa = 1\n",
                        "d"),
      doctest::Contains("kappa"), std::invalid_argument);
}

TEST_CASE("duplicate section reuse and comments parse cleanly") {
  const char* text = R"(
# experiment
[domain]
n = 1
resolution = 17   ; nodes
[regularisation]
alpha = 0.5
beta = 0.001
gamma = 0
p_ladder = 3,6
)";
  Config cfg = parse_config_text(text, "d");
  CHECK(cfg.dim == 1);
  CHECK(cfg.resolution == std::vector<int>{17});
  CHECK(cfg.p_ladder == std::vector<double>{3, 6});
  CHECK(cfg.meas_spec == std::vector<double>{0.25, 0.75});
}

TEST_CASE("manufactured field catalog") {
  const double ext[] = {0.0, 1.0, 0.0, 1.0};
  const int res[] = {9, 9};
  auto g = build_grid(ext, res);
  auto sine = manufactured_field(g, "sine");
  CHECK(sine[g->index(4, 4)] == doctest::Approx(1.0));
  auto zero = manufactured_field(g, "zero");
  CHECK(sup_norm(zero.v) == 0.0);
  auto quart = manufactured_field(g, "quartic");
  CHECK(quart[g->index(8, 0)] == doctest::Approx(1.0));
  CHECK_THROWS_AS(manufactured_field(g, "bogus"), std::invalid_argument);
}

TEST_CASE("external measurements snap to grid nodes and merge duplicates") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "srcfit_test_ext";
  fs::create_directories(dir);
  const fs::path file = dir / "meas.csv";
  {
    std::ofstream out(file);
    out << "# x,y,value\n";
    out << "0.26,0.26,1.0\n";      // snaps to (0.25, 0.25) on a 17x17 grid
    out << "0.24,0.24,3.0\n";      // same node: averaged to 2.0
    out << "0.5,0.5,0.7\n";
  }

  Config cfg = parse_config_text(std::string(kMinimal) +
                                     "\n[domain]\nresolution = 17\n"
                                     "[data]\nmode = external\nfile = " +
                                     file.string() + "\n",
                                 "d");
  auto built = build_problem(cfg);
  CHECK_FALSE(built.has_u0);
  REQUIRE(built.data.mset.size() == 2);
  CHECK(built.data.k_meas[0] == doctest::Approx(2.0));
  CHECK(built.data.k_meas[1] == doctest::Approx(0.7));
  CHECK(built.snap_distances.size() == 2);
  for (double d : built.snap_distances) CHECK(d <= 0.02);
  fs::remove_all(dir);
}

TEST_CASE("line and point measurement kinds run through the pipeline") {
  std::string base = R"(
[domain]
resolution = 17
[regularisation]
alpha = 0.01
beta = 1e-6
gamma = 0.005
p_ladder = 4,8
[optimizer]
tol_schedule = 1e-4,1e-5
max_iter = 2000
)";
  {
    Config cfg = parse_config_text(
        base + "[measurement]\nkind = line\nspec = 0.25,0.5,0.75,0.5\n", "d");
    auto res = run_experiment(cfg);
    REQUIRE(res.ok);
    CHECK(res.data.mset.kappa == 1.0);
    CHECK(res.rows.back().tv_nu <= 1.0 + 1e-12);
    CHECK(res.verify->all_pass);
  }
  {
    Config cfg = parse_config_text(
        base + "[measurement]\nkind = points\n"
               "spec = 0.25,0.25, 0.5,0.5, 0.75,0.25, 0.4,0.7\n",
        "d");
    auto res = run_experiment(cfg);
    REQUIRE(res.ok);
    CHECK(res.data.mset.kappa == 0.0);
    CHECK(res.data.mset.size() == 4);
    CHECK(res.rows.back().tv_nu <= 1.0 + 1e-12);
  }
}

TEST_CASE("experiment writes the run directory with stable artefacts") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "srcfit_test_run";
  fs::remove_all(dir);

  // tiny fast configuration
  std::string text = R"(
[domain]
resolution = 9
[regularisation]
alpha = 0.01
beta = 1e-6
gamma = 0.01
p_ladder = 4,8
[optimizer]
tol_schedule = 1e-4,1e-4
max_iter = 500
[output]
dir = )" + (dir / "a").string() +
                     "\n";

  Config cfg = parse_config_text(text, "unused");
  auto res = run_experiment(cfg);
  REQUIRE(res.ok);
  write_outputs(res);
  CHECK(fs::exists(dir / "a" / "results.csv"));
  CHECK(fs::exists(dir / "a" / "report.json"));
  CHECK(fs::exists(dir / "a" / "config_echo.cfg"));
  CHECK(fs::exists(dir / "a" / "fields" / "u_p4.csv"));
  CHECK(fs::exists(dir / "a" / "fields" / "nu_p8.csv"));
  CHECK(fs::exists(dir / "a" / "fields" / "mu_p8.csv"));

  // determinism: a second run into another directory is byte-identical
  cfg.out_dir = (dir / "b").string();
  auto res2 = run_experiment(cfg);
  REQUIRE(res2.ok);
  write_outputs(res2);
  CHECK(slurp(dir / "a" / "results.csv") == slurp(dir / "b" / "results.csv"));

  // a different seed changes the noise and thus the results
  cfg.out_dir = (dir / "c").string();
  cfg.seed = 99;
  auto res3 = run_experiment(cfg);
  REQUIRE(res3.ok);
  write_outputs(res3);
  CHECK(slurp(dir / "a" / "results.csv") != slurp(dir / "c" / "results.csv"));

  // rows carry the ladder and certificates
  REQUIRE(res.rows.size() == 2);
  CHECK(res.rows[0].p == 4.0);
  CHECK(res.rows[1].p == 8.0);
  CHECK(res.rows[0].tv_nu <= 1.0 + 1e-12);
  CHECK(res.rows[0].tv_mu <= 1.0 + 1e-12);
  CHECK(res.rows[0].bound_pass == 1);
  REQUIRE(res.verify.has_value());
  CHECK(res.verify->all_pass);
  fs::remove_all(dir);
}
