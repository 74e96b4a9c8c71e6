#include "mg1/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <utility>

#include "mg1/gittins.hpp"
#include "mg1/metrics.hpp"
#include "mg1/model_io.hpp"
#include "mg1/policies.hpp"
#include "mg1/simulation.hpp"

namespace mg1 {

ScenarioConfig parse_config(const nlohmann::json& j) {
  ScenarioConfig c;
  c.name = j.value("name", std::string("scenario"));
  if (j.contains("model")) c.model_json = j.at("model");
  c.model_path = j.value("model_path", std::string());
  if (c.model_json.is_null() && c.model_path.empty())
    throw std::invalid_argument("config: provide a model inline or a model_path");
  c.arrival_rate = j.value("arrival_rate", -1.0);
  if (j.contains("policies")) {
    c.policies = j.at("policies").get<std::vector<std::string>>();
    if (c.policies.empty()) throw std::invalid_argument("config: policies must be nonempty");
  }
  c.horizon = j.value("horizon", 1e5);
  if (!(c.horizon > 0)) throw std::invalid_argument("config: horizon must be positive");
  c.warmup = j.value("warmup", -1.0);
  if (c.warmup >= c.horizon)
    throw std::invalid_argument("config: horizon must exceed warmup");
  if (j.contains("seeds")) {
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (c.seeds.empty()) throw std::invalid_argument("config: seeds must be nonempty");
    for (std::uint64_t s : c.seeds)
      if (s == 0) throw std::invalid_argument("config: seed 0 is reserved");
  }
  if (j.contains("r_grid")) {
    const nlohmann::json& g = j.at("r_grid");
    if (g.contains("min") != g.contains("max"))
      throw std::invalid_argument("config: r_grid needs both min and max");
    if (g.contains("min")) {
      c.r_grid.min = g.at("min").get<double>();
      c.r_grid.max = g.at("max").get<double>();
      if (!(c.r_grid.min > 0))
        throw std::invalid_argument("config: r_grid min must be positive");
      if (!(c.r_grid.max > c.r_grid.min))
        throw std::invalid_argument("config: r_grid max must exceed min");
    }
    c.r_grid.points = g.value("points", 200);
    if (c.r_grid.points < 2)
      throw std::invalid_argument("config: r_grid needs at least 2 points");
    c.r_grid.spacing = g.value("spacing", std::string("log"));
    if (c.r_grid.spacing != "log")
      throw std::invalid_argument("config: only log spacing is supported");
  }
  c.out_dir = j.value("out", std::string("."));
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return parse_config(nlohmann::json::parse(in));
}

nlohmann::json config_to_json(const ScenarioConfig& c) {
  nlohmann::json g;
  if (c.r_grid.min > 0) {
    g["min"] = c.r_grid.min;
    g["max"] = c.r_grid.max;
  }
  g["points"] = c.r_grid.points;
  g["spacing"] = c.r_grid.spacing;
  nlohmann::json j{{"name", c.name},       {"arrival_rate", c.arrival_rate},
                   {"policies", c.policies}, {"horizon", c.horizon},
                   {"warmup", c.warmup},   {"seeds", c.seeds},
                   {"r_grid", std::move(g)}, {"out", c.out_dir}};
  if (!c.model_json.is_null()) j["model"] = c.model_json;
  if (!c.model_path.empty()) j["model_path"] = c.model_path;
  return j;
}

namespace {

template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

JobChain resolve_model(const ScenarioConfig& cfg) {
  JobChain m = cfg.model_json.is_null() ? load_model(cfg.model_path)
                                        : model_from_json(cfg.model_json);
  ValidationReport v = validate(m);
  if (!v.ok) {
    std::string msg = "invalid model:";
    for (const std::string& s : v.violations) msg += "\n  " + s;
    throw std::invalid_argument(msg);
  }
  return m;
}

RankTable make_table(const JobChain& m, const RGridSpec& s) {
  if (s.min > 0) {
    std::vector<double> g(s.points);
    double lo = std::log(s.min), hi = std::log(s.max);
    for (int i = 0; i < s.points; ++i)
      g[i] = std::exp(lo + (hi - lo) * i / (s.points - 1));
    g.front() = s.min;
    g.back() = s.max;
    return compute_rank_table(m, std::move(g));
  }
  RankTable t = compute_rank_table(m);
  if (s.points != static_cast<int>(t.r_grid.size()))
    t = compute_rank_table(m, default_r_grid(t.rank, s.points));
  return t;
}

std::string num(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.12g", v);
  return b;
}

std::ofstream open_out(const ScenarioConfig& cfg, const std::string& file,
                       std::string* path_out) {
  std::filesystem::create_directories(cfg.out_dir);
  std::string path = cfg.out_dir + "/" + file;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (path_out) *path_out = path;
  return out;
}

struct PolicyRuns {
  std::string policy;
  std::vector<std::uint64_t> seeds;
  std::vector<MetricsReport> runs;
  MetricsReport pooled;
};

std::vector<PolicyRuns> run_matrix(const JobChain& m, const RankTable& t,
                                   const ScenarioConfig& cfg, std::uint64_t off,
                                   bool quiet) {
  std::vector<PolicyRuns> all;
  for (const std::string& pname : cfg.policies) {
    PolicyRuns pr;
    pr.policy = pname;
    for (std::uint64_t s : cfg.seeds) {
      std::uint64_t seed = s + off;
      std::unique_ptr<Policy> pol = make_policy(pname, m, seed);
      RunOptions o;
      o.horizon = cfg.horizon;
      o.warmup = cfg.warmup;
      o.seed = seed;
      o.arrival_rate = cfg.arrival_rate;
      o.quiet = quiet;
      pr.seeds.push_back(seed);
      pr.runs.push_back(run(m, *pol, t, o));
    }
    pr.pooled = pool_reports(pr.runs);
    all.push_back(std::move(pr));
  }
  return all;
}

void write_metrics_csv(const ScenarioConfig& cfg, const std::vector<PolicyRuns>& all,
                       bool quiet) {
  std::string path;
  std::ofstream out = open_out(cfg, "metrics.csv", &path);
  out << "policy,scenario,seed,mean_H,ci_H,mean_HP,mean_HNP,mean_N,mean_T,integral_HP,"
         "rel_err_integral\n";
  for (const PolicyRuns& pr : all)
    for (std::size_t i = 0; i < pr.runs.size(); ++i) {
      const MetricsReport& r = pr.runs[i];
      out << pr.policy << ',' << cfg.name << ',' << pr.seeds[i] << ',' << num(r.mean_H)
          << ',' << num(r.ci_H) << ',' << num(r.mean_HP) << ',' << num(r.mean_HNP) << ','
          << num(r.mean_N) << ',' << num(r.mean_T) << ',' << num(r.integral_HP) << ','
          << num(r.rel_err_integral) << '\n';
    }
  if (!quiet) std::printf("wrote %s\n", path.c_str());
}

void write_rwork_csv(const ScenarioConfig& cfg, const std::vector<PolicyRuns>& all,
                     bool quiet) {
  std::string path;
  std::ofstream out = open_out(cfg, "rwork.csv", &path);
  out << "policy,r,mean_WP,ci,mean_WNP\n";
  for (const PolicyRuns& pr : all)
    for (const CurvePoint& p : pr.pooled.WP_curve)
      out << pr.policy << ',' << num(p.r) << ',' << num(p.mean_WP) << ',' << num(p.ci_WP)
          << ',' << num(p.mean_WNP) << '\n';
  if (!quiet) std::printf("wrote %s\n", path.c_str());
}

}  // namespace

int cmd_rank(const ScenarioConfig& cfg, bool quiet) {
  return guarded([&] {
    JobChain m = resolve_model(cfg);
    RankTable t = make_table(m, cfg.r_grid);
    std::string path;
    std::ofstream out = open_out(cfg, "rank.csv", &path);
    out << "state_id,preemptible,holding_cost,rank,index\n";
    for (int x = 0; x < m.num_states(); ++x)
      out << x << ',' << (m.preemptible[x] ? 1 : 0) << ',' << num(m.holding_cost[x])
          << ',' << num(t.rank[x]) << ',' << num(t.index[x]) << '\n';
    if (!quiet) std::printf("wrote %s\n", path.c_str());
    return 0;
  });
}

int cmd_simulate(const ScenarioConfig& cfg, std::uint64_t seed_offset, bool quiet) {
  return guarded([&] {
    JobChain m = resolve_model(cfg);
    RankTable t = make_table(m, cfg.r_grid);
    std::vector<PolicyRuns> all = run_matrix(m, t, cfg, seed_offset, quiet);
    write_metrics_csv(cfg, all, quiet);
    write_rwork_csv(cfg, all, quiet);
    return 0;
  });
}

int cmd_compare(const ScenarioConfig& cfg, std::uint64_t seed_offset, bool quiet) {
  return guarded([&] {
    if (cfg.policies.size() < 2)
      throw std::invalid_argument("compare: need at least two policies");
    if (std::find(cfg.policies.begin(), cfg.policies.end(), "gittins") ==
        cfg.policies.end())
      throw std::invalid_argument("compare: the policy list must include gittins");

    JobChain m = resolve_model(cfg);
    RankTable t = make_table(m, cfg.r_grid);
    std::vector<PolicyRuns> all = run_matrix(m, t, cfg, seed_offset, quiet);

    const PolicyRuns* git = nullptr;
    for (const PolicyRuns& pr : all)
      if (pr.policy == "gittins") git = &pr;

    bool dom_ok = true;
    std::vector<std::string> dom_failures;
    for (const PolicyRuns& pr : all) {
      if (&pr == git) continue;
      if (git->pooled.mean_H > pr.pooled.mean_H + pr.pooled.ci_H) {
        dom_ok = false;
        dom_failures.push_back("E[H] vs " + pr.policy);
      }
      // The W comparison uses the sampled curve: the expected-form moments
      // overstate jobs paused mid-segment, by policy-dependent amounts on
      // chains with deterministic sojourns.
      for (std::size_t g = 0; g < git->pooled.WP_curve.size(); ++g) {
        MeanCI a = sampled_rwork_ci(git->pooled, static_cast<int>(g));
        MeanCI b = sampled_rwork_ci(pr.pooled, static_cast<int>(g));
        if (a.mean > b.mean + b.ci) {
          dom_ok = false;
          char buf[96];
          std::snprintf(buf, sizeof buf, "E[W(r=%.6g)] vs %s", git->pooled.WP_curve[g].r,
                        pr.policy.c_str());
          dom_failures.push_back(buf);
          break;  // one failing grid point per policy is enough detail
        }
      }
    }

    std::vector<MetricsReport> pooled;
    std::vector<std::string> names;
    for (const PolicyRuns& pr : all) {
      pooled.push_back(pr.pooled);
      names.push_back(pr.policy);
    }
    InvarianceReport inv = invariance_checks(pooled, names);

    std::string path;
    std::ofstream out = open_out(cfg, "compare.csv", &path);
    out << "policy,mean_H,ci_H,mean_HP,mean_HNP,ci_HNP\n";
    for (const PolicyRuns& pr : all)
      out << pr.policy << ',' << num(pr.pooled.mean_H) << ',' << num(pr.pooled.ci_H) << ','
          << num(pr.pooled.mean_HP) << ',' << num(pr.pooled.mean_HNP) << ','
          << num(pr.pooled.ci_HNP) << '\n';

    if (!quiet) {
      std::printf("%-14s %14s %12s %14s\n", "policy", "mean_H", "ci_H", "mean_HNP");
      for (const PolicyRuns& pr : all)
        std::printf("%-14s %14.6g %12.4g %14.6g\n", pr.policy.c_str(), pr.pooled.mean_H,
                    pr.pooled.ci_H, pr.pooled.mean_HNP);
      std::printf("dominance (gittins E[H], E[W(r)] vs 95%% upper bounds): %s\n",
                  dom_ok ? "PASS" : "FAIL");
      for (const std::string& s : dom_failures) std::printf("  exceeded: %s\n", s.c_str());
      std::printf("invariance (E[H_NP], E[W_NP(r)] across policies): %s\n",
                  inv.ok ? "PASS" : "FAIL");
      for (const InvarianceFailure& f : inv.failures)
        std::printf("  %s: %s %.6g+-%.4g vs %s %.6g+-%.4g\n", f.quantity.c_str(),
                    f.a.c_str(), f.mean_a, f.ci_a, f.b.c_str(), f.mean_b, f.ci_b);
      std::printf("wrote %s\n", path.c_str());
    }
    return dom_ok && inv.ok ? 0 : 1;
  });
}

int cmd_verify(const ScenarioConfig& cfg, std::uint64_t seed_offset, bool quiet) {
  return guarded([&] {
    JobChain m = resolve_model(cfg);
    RankTable t = make_table(m, cfg.r_grid);
    const int n = m.num_states();
    const int G = t.grid_size();
    bool all_ok = true;
    auto report = [&](const char* name, bool ok, const std::string& detail) {
      std::printf("%s: %s (%s)\n", name, ok ? "PASS" : "FAIL", detail.c_str());
      all_ok = all_ok && ok;
    };

    {  // game properties: V(x,.) nondecreasing and concave, give-up sets nested
      std::vector<GameSolution> sols;
      sols.reserve(G);
      for (double r : t.r_grid) sols.push_back(solve_game(m, r));
      double worst_mono = 0, worst_conc = 0;
      long long nest_bad = 0;
      for (int g = 0; g + 1 < G; ++g) {
        for (int x = 0; x < n; ++x) {
          double dv = sols[g + 1].cost_to_go[x] - sols[g].cost_to_go[x];
          worst_mono = std::max(worst_mono, -dv);
          if (sols[g + 1].give_up[x] && !sols[g].give_up[x]) ++nest_bad;
        }
      }
      for (int g = 0; g + 2 < G; ++g) {
        double d1 = t.r_grid[g + 1] - t.r_grid[g];
        double d2 = t.r_grid[g + 2] - t.r_grid[g + 1];
        for (int x = 0; x < n; ++x) {
          double s1 = (sols[g + 1].cost_to_go[x] - sols[g].cost_to_go[x]) / d1;
          double s2 = (sols[g + 2].cost_to_go[x] - sols[g + 1].cost_to_go[x]) / d2;
          worst_conc = std::max(worst_conc, s2 - s1);
        }
      }
      bool ok = worst_mono <= 1e-9 && worst_conc <= 1e-9 && nest_bad == 0;
      char buf[128];
      std::snprintf(buf, sizeof buf,
                    "monotone slack %.3g, concavity slack %.3g, nesting breaks %lld",
                    worst_mono, worst_conc, nest_bad);
      report("game-properties", ok, buf);
    }

    double worst_integral = 0, worst_little = 0;
    long long violations = 0;
    for (std::uint64_t s : cfg.seeds) {
      std::unique_ptr<Policy> pol = make_policy("gittins", m, s + seed_offset);
      RunOptions o;
      o.horizon = cfg.horizon;
      o.warmup = cfg.warmup;
      o.seed = s + seed_offset;
      o.arrival_rate = cfg.arrival_rate;
      o.quiet = quiet;
      MetricsReport r = run(m, *pol, t, o);
      worst_integral = std::max(worst_integral, r.rel_err_integral);
      violations += r.recycle_violations;
      LittleCheck lc = little_law_check(r);
      if (lc.applicable) worst_little = std::max(worst_little, lc.z);
    }
    report("integral-identity", worst_integral <= 0.05,
           "max rel err " + num(worst_integral));
    report("recycle-at-zero", violations == 0,
           std::to_string(violations) + " violations under gittins");
    report("littles-law", worst_little <= 3.0, "max |z| " + num(worst_little));

    return all_ok ? 0 : 1;
  });
}

}  // namespace mg1
