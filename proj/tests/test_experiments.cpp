#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fouport/experiments.hpp"

using namespace fouport;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

lab::ExperimentConfig tiny_config(const std::string& out_dir) {
  lab::ExperimentConfig cfg;
  cfg.eps_list = {0.1};
  cfg.n_paths = 2000;
  cfg.n_omegas = 1;
  cfg.dt = 0.01;
  cfg.out_dir = out_dir;
  return cfg;
}

}  // namespace

TEST_CASE("config json round trip and validation") {
  lab::ExperimentConfig cfg;
  cfg.seed = 777;
  cfg.eps_list = {0.5, 0.05};
  const auto j = lab::config_to_json(cfg);
  const lab::ExperimentConfig back = lab::config_from_json(j);
  CHECK(lab::config_hash(back) == lab::config_hash(cfg));
  CHECK(back.seed == 777);
  CHECK(back.eps_list == cfg.eps_list);

  auto j2 = j;
  j2["no_such_knob"] = 1;
  CHECK_THROWS_WITH_AS(lab::config_from_json(j2), "config: unknown key 'no_such_knob'",
                       std::invalid_argument);
  auto j3 = j;
  j3["gamma"] = 1.0;
  CHECK_THROWS_AS(lab::config_from_json(j3), std::invalid_argument);
  auto j4 = j;
  j4["H"] = 0.4;
  CHECK_THROWS_AS(lab::config_from_json(j4), std::invalid_argument);
  auto j5 = j;
  j5["history_policy"] = "whatever";
  CHECK_THROWS_AS(lab::config_from_json(j5), std::invalid_argument);

  lab::ExperimentConfig other = cfg;
  other.seed = 778;
  CHECK(lab::config_hash(other) != lab::config_hash(cfg));
}

TEST_CASE("paper-scale preset") {
  lab::ExperimentConfig cfg;
  cfg.paper_scale = true;
  const lab::ExperimentConfig eff = cfg.effective();
  CHECK(eff.dt == doctest::Approx(1e-3));
  CHECK(eff.n_paths == 500000);
  CHECK(eff.history_policy == "paper");
  // the paper history rule gives (T/dt)^{1.5} time units of history
  const fou::SimGrid grid = lab::table_grid(eff, 1.0);
  CHECK(grid.history_len == doctest::Approx(std::pow(1000.0, 1.5) / 1e-3).epsilon(1e-6));
}

TEST_CASE("table1 emits provenance and deterministic bytes across threads") {
  lab::ExperimentConfig cfg = tiny_config("out_test_a");
  cfg.threads = 1;
  const auto res1 = lab::run_table1(cfg);
  const std::string bytes1 = slurp(res1.csv_path);
  cfg.out_dir = "out_test_b";
  cfg.threads = 2;
  const auto res2 = lab::run_table1(cfg);
  std::string bytes2 = slurp(res2.csv_path);
  // the config (and so the header) differs only in threads/out_dir; strip the
  // two header lines before comparing the numeric payload
  const auto body = [](const std::string& s) {
    std::size_t p = s.find('\n');
    p = s.find('\n', p + 1);
    return s.substr(p + 1);
  };
  CHECK(body(bytes1) == body(bytes2));
  CHECK(bytes1.rfind("# config_hash=", 0) == 0);
  CHECK(bytes1.find("\"n_paths\":2000") != std::string::npos);
  REQUIRE(res1.rows.size() == 1);
  CHECK(res1.rows[0].triple.optimal.n_paths == 2000);

  // identical full config implies identical bytes
  cfg.out_dir = "out_test_a";
  cfg.threads = 1;
  const auto res3 = lab::run_table1(cfg);
  CHECK(slurp(res3.csv_path) == bytes1);
}

TEST_CASE("grid_for_eps refines dt and sizes history") {
  mclab::GridPolicy policy;
  policy.dt_max = 2e-3;
  policy.eps_per_dt = 20.0;
  const fou::FouParams coarse{1.0, 0.6, 0.5};
  const fou::SimGrid g1 = mclab::grid_for_eps(coarse, 1.0, policy);
  CHECK(g1.dt == doctest::Approx(2e-3));
  const fou::FouParams fine{1.0, 0.6, 0.01};
  const fou::SimGrid g2 = mclab::grid_for_eps(fine, 1.0, policy);
  CHECK(g2.dt == doctest::Approx(5e-4));
  CHECK(g2.dt * g2.n_steps == doctest::Approx(1.0));
  CHECK(fou::history_tail_variance(fine, g2) <= 1.0001e-3 * fine.sigma_ou_sq());
}

TEST_CASE("property checks pass on the default model") {
  lab::ExperimentConfig cfg;
  const auto failures = lab::run_property_checks(cfg);
  for (const auto& f : failures) MESSAGE(f);
  CHECK(failures.empty());
}

TEST_CASE("constant-lambda config flows through table1") {
  lab::ExperimentConfig cfg = tiny_config("out_test_const");
  cfg.model_id = "constant-lambda";
  cfg.n_paths = 4000;
  const auto res = lab::run_table1(cfg);
  REQUIRE(res.rows.size() == 1);
  const auto& r = res.rows[0].triple;
  // pi0 and the practical rule are both exactly optimal here; allow the
  // O(1/n) small-sample remainder of the q-power and control variates
  CHECK(std::abs(r.gap_pi0) < 4.0 * r.gap_pi0_se + 1.0 / double(cfg.n_paths));
  CHECK(std::abs(r.gap_practical) < 4.0 * r.gap_practical_se + 1.0 / double(cfg.n_paths));
  const double exact = std::exp(0.75 * 0.49) / 0.6;
  CHECK(std::abs(r.optimal.estimate - exact) < 4.0 * r.optimal.std_error + 5e-3);
}
