#include <cmath>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "mg1/gittins.hpp"
#include "mg1/job_chain.hpp"
#include "mg1/metrics.hpp"
#include "mg1/policies.hpp"
#include "mg1/simulation.hpp"

using namespace mg1;

namespace {

// 0: preemptible cost 1; 1: preemptible cost 2; 2: nonpreemptible cost 3.
JobChain mixed_three() {
  JobChain m;
  m.sojourn.assign(3, {SojournKind::Exponential, 1.0});
  m.kernel.assign(3, {{JobChain::kDone, 1.0}});
  m.preemptible = {true, true, false};
  m.holding_cost = {1.0, 2.0, 3.0};
  m.batches = {{1.0, {0}}};
  return m;
}

JobChain two_state() {
  JobChain m;
  m.sojourn = {{SojournKind::Exponential, 1.0}};
  m.kernel = {{{JobChain::kDone, 1.0}}};
  m.preemptible = {true};
  m.holding_cost = {2.0};
  m.batches = {{1.0, {0}}};
  m.arrival_rate = 0.5;
  return m;
}

// A: preemptible Exp(1) cost 1 -> {M w.p. 1/2, done}; M: nonpreemptible
// Exp(2) cost 3 -> B; B: preemptible Exp(3/2) cost 2 -> done.
JobChain klimov() {
  JobChain m;
  m.sojourn = {{SojournKind::Exponential, 1.0},
               {SojournKind::Exponential, 2.0},
               {SojournKind::Exponential, 1.5}};
  m.kernel = {{{1, 0.5}, {JobChain::kDone, 0.5}}, {{2, 1.0}}, {{JobChain::kDone, 1.0}}};
  m.preemptible = {true, false, true};
  m.holding_cost = {1.0, 3.0, 2.0};
  m.batches = {{1.0, {0}}};
  m.arrival_rate = 0.4;
  return m;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  double du = std::log(hi / lo) / (n - 1);
  for (int i = 0; i < n; ++i) g[i] = lo * std::exp(i * du);
  g.back() = hi;
  return g;
}

MetricsReport run_two_state(std::uint64_t seed, const RankTable& t, const JobChain& m) {
  RunOptions opt;
  opt.horizon = 2000;
  opt.warmup = 200;
  opt.seed = seed;
  auto pol = make_policy("gittins", m, seed);
  return run(m, *pol, t, opt);
}

}  // namespace

TEST_CASE("holding cost snapshot splits by preemptibility and sums exactly") {
  JobChain m = mixed_three();
  SystemState s;
  s.jobs = {{0, 0, 0, 0, 0}, {1, 1, 0, 0, 0}};
  auto [H, HP, HNP] = holding_cost_snapshot(s, m);
  CHECK(H == 3.0);
  CHECK(HP == 3.0);
  CHECK(HNP == 0.0);

  s.jobs = {{0, 0, 0, 0, 0}, {1, 2, 0, 0, 0}, {2, 2, 0, 0, 0}};
  auto [H2, HP2, HNP2] = holding_cost_snapshot(s, m);
  CHECK(H2 == 7.0);
  CHECK(HP2 == 1.0);
  CHECK(HNP2 == 6.0);
}

TEST_CASE("r-work snapshot uses tabulated moments at grid penalties") {
  JobChain m;
  m.sojourn = {{SojournKind::Exponential, 1.0}, {SojournKind::Exponential, 2.0}};
  m.kernel = {{{JobChain::kDone, 1.0}}, {{JobChain::kDone, 1.0}}};
  m.preemptible = {true, false};
  m.holding_cost = {2.0, 1.0};
  m.batches = {{1.0, {0}}};
  RankTable t = compute_rank_table(m, {0.25, 1.0});

  SystemState s;
  s.jobs = {{0, 0, 0, 0, 0}, {1, 1, 0, 0, 0}};
  // rank(0) = 1/2: below it the preemptible job would give up, so no r-work;
  // the nonpreemptible job always carries its remaining service
  auto [w_lo, wp_lo, wnp_lo] = rwork_snapshot(s, m, t, 0.25);
  CHECK(wp_lo == doctest::Approx(0.0));
  CHECK(wnp_lo == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(w_lo == doctest::Approx(0.5).epsilon(1e-10));
  auto [w_hi, wp_hi, wnp_hi] = rwork_snapshot(s, m, t, 1.0);
  CHECK(wp_hi == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(wnp_hi == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(w_hi == doctest::Approx(1.5).epsilon(1e-10));

  CHECK_THROWS_AS((void)rwork_snapshot(s, m, t, 0.3), std::invalid_argument);
}

TEST_CASE("quadrature recovers the integral of a rank step within grid error") {
  // W(r) = [r > 1/2]: integral of W/r^2 is exactly 2
  auto eval = [](int points) {
    std::vector<double> r = log_grid(0.05, 50.0, points);
    std::vector<double> W(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) W[i] = r[i] > 0.5 ? 1.0 : 0.0;
    return rwork_integral(r, W);
  };
  CHECK(std::abs(eval(200) - 2.0) <= 0.02 * 2.0);
  CHECK(std::abs(eval(2000) - 2.0) <= 0.003 * 2.0);
}

TEST_CASE("quadrature head and tail terms") {
  // constant W: head W/r0 + trapezoid of 1/r + tail W/rmax
  std::vector<double> r = log_grid(1.0, 4.0, 3);
  double total = rwork_integral(r, {1.0, 1.0, 1.0});
  // trapezoid in u = log r of f = 1/r: du * (f0/2 + f1 + f2/2)
  double du = std::log(2.0);
  double expected = 1.0 + du * (0.5 + 0.5 + 0.125) + 0.25;
  CHECK(total == doctest::Approx(expected).epsilon(1e-12));

  CHECK(rwork_integral(r, {0.0, 0.0, 0.0}) == 0.0);
  CHECK_THROWS_AS((void)rwork_integral({0.0, 1.0}, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS((void)rwork_integral({2.0, 1.0}, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS((void)rwork_integral({1.0, 2.0}, {1.0}), std::invalid_argument);
}

TEST_CASE("student-t batch-means interval") {
  MeanCI r = mean_ci({1.0, 2.0, 3.0});
  CHECK(r.mean == doctest::Approx(2.0));
  CHECK(r.n == 3);
  CHECK(r.se == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
  // t(0.975, 2) = 4.30265273
  CHECK(r.ci == doctest::Approx(2.4841377).epsilon(1e-6));
  CHECK(mean_ci({5.0}).ci == 0.0);
  CHECK(mean_ci({}).n == 0);
}

TEST_CASE("analytic nonpreemptible cost rate") {
  JobChain m = klimov();
  // per batch: only M accrues while nonpreemptible, reached w.p. 1/2,
  // held for 1/2 at rate 3 => 3/4 per batch
  CHECK(analytic_mean_HNP(m, 0.8) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(analytic_mean_HNP(two_state(), 0.8) == doctest::Approx(0.0));
}

TEST_CASE("little's law check flags a synthetic mismatch") {
  MetricsReport rep;
  rep.window = 30;
  rep.completions = 15;
  rep.completion_rate = 0.5;
  rep.mean_N = 2.0;
  rep.mean_T = 2.0;
  rep.bm_N = {2.0, 2.1, 1.9};
  rep.bm_T = {2.0, 2.0, 2.0};
  rep.bm_T_count = {5.0, 5.0, 5.0};
  LittleCheck c = little_law_check(rep);
  REQUIRE(c.applicable);
  CHECK(c.rel_error == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(c.z == doctest::Approx(std::sqrt(3.0) / 0.1).epsilon(1e-6));  // 17.3

  rep.mean_N = 1.0;
  rep.bm_N = {1.0, 1.05, 0.95};
  LittleCheck ok = little_law_check(rep);
  CHECK(ok.rel_error == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(std::abs(ok.z) <= 1e-9);

  rep.completions = 0;
  CHECK(!little_law_check(rep).applicable);
}

TEST_CASE("invariance check compares interval overlap pairwise") {
  auto make = [](double h, double ci) {
    MetricsReport r;
    r.mean_HNP = h;
    r.ci_HNP = ci;
    for (double rr : {1.0, 2.0, 3.0, 4.0}) r.WP_curve.push_back({rr, 0, 0, 1.0, 0.2});
    return r;
  };
  std::vector<MetricsReport> reps{make(1.0, 0.1), make(1.05, 0.1), make(2.0, 0.1)};
  InvarianceReport inv = invariance_checks(reps, {"a", "b", "c"});
  CHECK(!inv.ok);
  REQUIRE(!inv.failures.empty());
  for (const auto& f : inv.failures) {
    CHECK(f.quantity == "H_NP");
    CHECK(f.b == "c");
  }
  InvarianceReport good = invariance_checks({reps[0], reps[1]}, {"a", "b"});
  CHECK(good.ok);

  MetricsReport other = make(1.0, 0.1);
  other.WP_curve.pop_back();
  CHECK_THROWS_AS((void)invariance_checks({reps[0], other}, {"a", "d"}), std::invalid_argument);
}

TEST_CASE("simulation reports pool across seeds by concatenating windows") {
  JobChain m = two_state();
  RankTable t = compute_rank_table(m);
  MetricsReport r1 = run_two_state(1, t, m);
  MetricsReport r2 = run_two_state(2, t, m);
  MetricsReport pooled = pool_reports({r1, r2});

  CHECK(pooled.bm_H.size() == r1.bm_H.size() + r2.bm_H.size());
  CHECK(pooled.bm_WS.size() == r1.bm_WS.size() + r2.bm_WS.size());
  CHECK(pooled.window == doctest::Approx(r1.window + r2.window));
  CHECK(pooled.completions == r1.completions + r2.completions);
  CHECK(pooled.events.total() == r1.events.total() + r2.events.total());
  // equal-length windows: pooled mean is the grand mean
  CHECK(pooled.mean_H == doctest::Approx(0.5 * (r1.mean_H + r2.mean_H)).epsilon(1e-12));
  CHECK(pooled.mean_H == doctest::Approx(pooled.mean_HP + pooled.mean_HNP).epsilon(1e-12));
  // more windows, tighter interval
  CHECK(pooled.ci_H < std::max(r1.ci_H, r2.ci_H));

  REQUIRE(pooled.WP_curve.size() == r1.WP_curve.size());
  for (std::size_t g = 1; g < pooled.WP_curve.size(); ++g) {
    CHECK(pooled.WP_curve[g].r == r1.WP_curve[g].r);
    // expected-form r-work grows with the penalty
    CHECK(pooled.WP_curve[g].mean_WP >= pooled.WP_curve[g - 1].mean_WP - 1e-12);
  }
  CHECK(pooled.rel_err_integral <= 0.05);

  // the sampled curve pools the same way and tracks the expected form here
  // (single exponential state: both estimate the same mean workload)
  {
    int top = static_cast<int>(pooled.WP_curve.size()) - 1;
    MeanCI s = sampled_rwork_ci(pooled, top);
    CHECK(s.n == static_cast<int>(pooled.bm_WS.size()));
    CHECK(std::abs(s.mean - pooled.WP_curve[top].mean_WP) <=
          s.ci + pooled.WP_curve[top].ci_WP);
  }

  CHECK_THROWS_AS((void)pool_reports({}), std::invalid_argument);
}

TEST_CASE("per-run identity: mean cost splits exactly and integral matches") {
  JobChain m = klimov();
  RankTable t = compute_rank_table(m);
  RunOptions opt;
  opt.horizon = 5000;
  opt.warmup = 500;
  opt.seed = 3;
  auto pol = make_policy("gittins", m, 3);
  MetricsReport rep = run(m, *pol, t, opt);
  CHECK(rep.mean_H == doctest::Approx(rep.mean_HP + rep.mean_HNP).epsilon(1e-12));
  CHECK(rep.mean_HNP > 0.0);
  CHECK(rep.rel_err_integral <= 0.05);
  CHECK(integral_identity_check(rep.WP_curve, rep.mean_HP) ==
        doctest::Approx(rep.rel_err_integral));
}
