#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "mg1/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Gittins scheduling for single-server queues with Markov-process jobs"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed_offset = 0;
  bool quiet = false;
  CLI::App* subs[] = {
      app.add_subcommand("rank", "write the per-state rank/index table"),
      app.add_subcommand("simulate", "run the policy/seed matrix into metrics.csv, rwork.csv"),
      app.add_subcommand("compare", "policy comparison with dominance/invariance verdicts"),
      app.add_subcommand("verify",
                         "game shape, integral identity, recycle-at-zero, Little's law"),
  };
  for (CLI::App* sub : subs) {
    sub->add_option("--config", config_path, "scenario config JSON")->required();
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--seed-offset", seed_offset, "added to every configured seed");
    sub->add_flag("--quiet", quiet, "suppress informational output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // pinned exit codes: 2 means invalid input
  }

  try {
    mg1::ScenarioConfig cfg = mg1::load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (app.got_subcommand("rank")) return mg1::cmd_rank(cfg, quiet);
    if (app.got_subcommand("simulate")) return mg1::cmd_simulate(cfg, seed_offset, quiet);
    if (app.got_subcommand("compare")) return mg1::cmd_compare(cfg, seed_offset, quiet);
    return mg1::cmd_verify(cfg, seed_offset, quiet);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
