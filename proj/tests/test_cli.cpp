#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "mg1/scenario.hpp"

using namespace mg1;
using nlohmann::json;

namespace {

json inline_model() {
  return json::parse(R"({
    "states": [
      {"id": 0, "sojourn": {"kind": "deterministic", "value": 0.25},
       "kernel": [{"to": -1, "p": 1.0}], "preemptible": true, "holding_cost": 1.0},
      {"id": 1, "sojourn": {"kind": "deterministic", "value": 0.25},
       "kernel": [{"to": 0, "p": 1.0}], "preemptible": true, "holding_cost": 1.0}
    ],
    "batches": [{"p": 0.5, "initial": [0]}, {"p": 0.5, "initial": [1]}],
    "arrival_rate": 0.5
  })");
}

json base_config(const std::string& out) {
  json cfg;
  cfg["name"] = "cli-test";
  cfg["model"] = inline_model();
  cfg["horizon"] = 400.0;
  cfg["warmup"] = 40.0;
  cfg["seeds"] = {1, 2};
  cfg["out"] = out;
  return cfg;
}

std::string write_tmp(const json& j, const std::string& path) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(MG1SIM_PATH) + " " + args;
  int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return (rc >> 8) & 0xff;
}

}  // namespace

TEST_CASE("config round-trips through its canonical form") {
  ScenarioConfig c1 = parse_config(base_config("/tmp/mg1_cli_rt"));
  json canon = config_to_json(c1);
  ScenarioConfig c2 = parse_config(canon);
  CHECK(config_to_json(c2) == canon);
  CHECK(c1.name == "cli-test");
  CHECK(c1.policies == std::vector<std::string>{"gittins"});  // default
  CHECK(c1.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(c1.out_dir == "/tmp/mg1_cli_rt");
}

TEST_CASE("config invariants are enforced at parse time") {
  auto expect_throw = [](json j) {
    CHECK_THROWS_AS((void)parse_config(j), std::invalid_argument);
  };
  json ok = base_config("/tmp/x");

  json j = ok;
  j["horizon"] = 0.0;
  expect_throw(j);
  j = ok;
  j["warmup"] = 400.0;  // == horizon
  expect_throw(j);
  j = ok;
  j["seeds"] = json::array();
  expect_throw(j);
  j = ok;
  j["seeds"] = {1, 0};
  expect_throw(j);
  j = ok;
  j["policies"] = json::array();
  expect_throw(j);
  j = ok;
  j.erase("model");
  expect_throw(j);  // neither inline model nor path
  j = ok;
  j["r_grid"] = {{"min", 0.0}, {"max", 10.0}};
  expect_throw(j);
  j = ok;
  j["r_grid"] = {{"min", 0.1}};  // max missing
  expect_throw(j);
  j = ok;
  j["r_grid"] = {{"min", 0.1}, {"max", 10.0}, {"points", 1}};
  expect_throw(j);
  j = ok;
  j["r_grid"] = {{"min", 0.1}, {"max", 10.0}, {"spacing", "linear"}};
  expect_throw(j);
}

TEST_CASE("rank subcommand emits the rank table as csv") {
  std::string dir = "/tmp/mg1_cli_rank";
  std::filesystem::remove_all(dir);
  ScenarioConfig cfg = parse_config(base_config(dir));
  REQUIRE(cmd_rank(cfg, true) == 0);

  std::ifstream in(dir + "/rank.csv");
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "state_id,preemptible,holding_cost,rank,index");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string f[5];
    for (auto& x : f) std::getline(ss, x, ',');
    double rank = std::stod(f[3]);
    double remaining = 0.25 * (std::stoi(f[0]) + 1);
    CHECK(std::abs(rank - remaining) <= 1e-9 * remaining);
    CHECK(f[1] == "1");
    ++rows;
  }
  CHECK(rows == 2);
}

TEST_CASE("simulate writes deterministic csv outputs") {
  std::string d1 = "/tmp/mg1_cli_sim1", d2 = "/tmp/mg1_cli_sim2";
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
  REQUIRE(cmd_simulate(parse_config(base_config(d1)), 0, true) == 0);
  REQUIRE(cmd_simulate(parse_config(base_config(d2)), 0, true) == 0);

  std::string m1 = slurp(d1 + "/metrics.csv");
  CHECK(m1 == slurp(d2 + "/metrics.csv"));
  CHECK(slurp(d1 + "/rwork.csv") == slurp(d2 + "/rwork.csv"));

  std::istringstream ss(m1);
  std::string header;
  std::getline(ss, header);
  CHECK(header ==
        "policy,scenario,seed,mean_H,ci_H,mean_HP,mean_HNP,mean_N,mean_T,"
        "integral_HP,rel_err_integral");
  int rows = 0;
  for (std::string line; std::getline(ss, line);) ++rows;
  CHECK(rows == 2);  // one per seed
}

TEST_CASE("seed offset shifts the effective seeds") {
  std::string d1 = "/tmp/mg1_cli_off1", d2 = "/tmp/mg1_cli_off2";
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
  json cfg1 = base_config(d1);
  cfg1["seeds"] = {5};
  json cfg2 = base_config(d2);
  cfg2["seeds"] = {3};
  REQUIRE(cmd_simulate(parse_config(cfg1), 0, true) == 0);
  REQUIRE(cmd_simulate(parse_config(cfg2), 2, true) == 0);  // 3 + 2 = 5
  CHECK(slurp(d1 + "/metrics.csv") == slurp(d2 + "/metrics.csv"));
}

TEST_CASE("compare needs at least two policies and a gittins baseline") {
  json j = base_config("/tmp/mg1_cli_cmp_bad");
  CHECK(cmd_compare(parse_config(j), 0, true) == 2);  // single policy
  j["policies"] = {"fcfs", "las"};
  CHECK(cmd_compare(parse_config(j), 0, true) == 2);  // no gittins baseline
}

TEST_CASE("compare runs the fixture and writes the verdict table") {
  std::string dir = "/tmp/mg1_cli_cmp";
  std::filesystem::remove_all(dir);
  json j = base_config(dir);
  j["policies"] = {"gittins", "fcfs"};
  REQUIRE(cmd_compare(parse_config(j), 0, true) == 0);
  std::string csv = slurp(dir + "/compare.csv");
  CHECK(csv.find("policy,mean_H,ci_H,mean_HP,mean_HNP,ci_HNP") == 0);
  CHECK(csv.find("gittins") != std::string::npos);
  CHECK(csv.find("fcfs") != std::string::npos);
}

TEST_CASE("binary maps outcomes onto the exit-code contract") {
  std::string dir = "/tmp/mg1_cli_bin";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_tmp(base_config(dir + "/out"), dir + "/good.json");

  CHECK(run_cli("rank --config " + dir + "/good.json --quiet") == 0);
  CHECK(run_cli("--help > /dev/null") == 0);

  // invalid input: 2
  CHECK(run_cli("rank --config " + dir + "/missing.json 2> /dev/null") == 2);
  CHECK(run_cli("frobnicate --config " + dir + "/good.json 2> /dev/null") == 2);
  CHECK(run_cli("rank 2> /dev/null") == 2);               // --config required
  CHECK(run_cli("2> /dev/null") == 2);                    // subcommand required
  CHECK(run_cli("rank --config " + dir + "/good.json --bogus 2> /dev/null") == 2);

  json broken = base_config(dir + "/out");
  broken["model"]["states"][0]["kernel"][0]["p"] = 0.9;  // row mass violation
  write_tmp(broken, dir + "/broken.json");
  CHECK(run_cli("rank --config " + dir + "/broken.json 2> " + dir + "/err.txt") == 2);
  std::string err = slurp(dir + "/err.txt");
  CHECK(err.find("does not sum to 1") != std::string::npos);

  json one_policy = base_config(dir + "/out");
  write_tmp(one_policy, dir + "/one.json");
  CHECK(run_cli("compare --config " + dir + "/one.json 2> /dev/null") == 2);

  json grid0 = base_config(dir + "/out");
  grid0["r_grid"] = {{"min", 0.0}, {"max", 10.0}};
  write_tmp(grid0, dir + "/grid0.json");
  CHECK(run_cli("verify --config " + dir + "/grid0.json 2> /dev/null") == 2);

  // --out overrides the configured directory
  CHECK(run_cli("rank --config " + dir + "/good.json --out " + dir + "/alt --quiet") == 0);
  CHECK(std::filesystem::exists(dir + "/alt/rank.csv"));
}

TEST_CASE("verify passes on the fixture end to end") {
  std::string dir = "/tmp/mg1_cli_verify";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  json j = base_config(dir + "/out");
  j["horizon"] = 2000.0;
  j["warmup"] = 200.0;
  write_tmp(j, dir + "/cfg.json");
  CHECK(run_cli("verify --config " + dir + "/cfg.json --quiet") == 0);
}
