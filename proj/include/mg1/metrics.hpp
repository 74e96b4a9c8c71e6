#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "mg1/gittins.hpp"
#include "mg1/job_chain.hpp"
#include "mg1/system_state.hpp"

namespace mg1 {

struct CurvePoint {
  double r = 0.0;
  double mean_WP = 0.0, ci_WP = 0.0;
  double mean_WNP = 0.0, ci_WNP = 0.0;
};

struct EventCounts {
  long long batches = 0, arrivals = 0, transitions = 0, completions = 0, decisions = 0,
            recycles = 0;
  long long total() const {
    return batches + arrivals + transitions + completions + decisions + recycles;
  }
};

// One simulation run's estimates. All time averages are over the measurement
// window [warmup, horizon]; CIs are 95% batch-means (Student-t) half-widths.
// Per-window batch means are retained so runs can be pooled across seeds.
struct MetricsReport {
  double mean_H = 0, ci_H = 0;
  double mean_HP = 0, ci_HP = 0;
  double mean_HNP = 0, ci_HNP = 0;
  double mean_N = 0, ci_N = 0;
  double mean_T = 0, ci_T = 0;  // response time of jobs completing in the window

  std::vector<CurvePoint> WP_curve;        // expected-form r-work, per grid point
  std::vector<long long> recycle_count;    // per grid point, measurement window
  long long recycle_violations = 0;        // nonzero preemptible r-work at a recycle
  double integral_HP = 0;                  // quadrature of mean_WP / r^2
  double rel_err_integral = 0;             // |integral_HP - mean_HP| / mean_HP

  double window = 0;
  double completions = 0;      // completions inside the window
  double completion_rate = 0;  // completions / window
  double busy_time = 0;        // server-busy time inside the window
  double rho = 0;              // offered load lambda_B * E[batch work]
  bool overloaded = false;
  EventCounts events;

  // arrival snapshots of N at batch epochs (PASTA material)
  double arrival_avg_N = 0, arrival_avg_se = 0, time_avg_N_se = 0;

  // batch means: one entry per measurement sub-window
  std::vector<double> bm_H, bm_HP, bm_HNP, bm_N;
  std::vector<double> bm_T, bm_T_count;            // per-window response mean / completions
  std::vector<std::vector<double>> bm_WP, bm_WNP;  // [window][grid]
  // Sampled total r-work: each job contributes the service its presampled path
  // still needs before first reaching rank >= r or completing. Unbiased for
  // E[W(r)] at every instant; the expected-form moments above are exact only at
  // segment boundaries, which skews policy comparisons on deterministic chains.
  std::vector<std::vector<double>> bm_WS;  // [window][grid]
};

// Instantaneous holding-cost split (H, H_P, H_NP); H = H_P + H_NP exactly.
std::tuple<double, double, double> holding_cost_snapshot(const SystemState& state,
                                                         const JobChain& model);

// Expected-form r-work split (W, W_P, W_NP) at a tabulated grid value r:
// per-job randomness is integrated out analytically via the moments t(x,r).
std::tuple<double, double, double> rwork_snapshot(const SystemState& state,
                                                  const JobChain& model,
                                                  const RankTable& table, double r);

// Integral of W(r)/r^2 over (0, inf) from samples on a positive sorted grid:
// trapezoid in log space, a quadratic-through-origin head below the first
// point (contributing W_1/r_1; zero whenever W_1 is), and a frozen tail
// W_max/r_max above the last point.
double rwork_integral(const std::vector<double>& r, const std::vector<double>& W);

// Relative error of the identity E[H_P] = integral of E[W_P(r)]/r^2.
double integral_identity_check(const std::vector<CurvePoint>& curve, double mean_HP);

struct MeanCI {
  double mean = 0, ci = 0, se = 0;
  int n = 0;
};
// Mean with 95% Student-t half-width over a sample of batch means.
MeanCI mean_ci(const std::vector<double>& xs);

// Mean and 95% CI of the sampled total r-work at grid index g.
MeanCI sampled_rwork_ci(const MetricsReport& report, int g);

// Merges independent runs of one (model, policy) pair by concatenating their
// batch means and recomputing every aggregate. Runs must share the r grid.
MetricsReport pool_reports(const std::vector<MetricsReport>& runs);

struct InvarianceFailure {
  std::string a, b;      // policy names
  std::string quantity;  // "H_NP" or "W_NP(r=...)"
  double mean_a, ci_a, mean_b, ci_b;
};
struct InvarianceReport {
  bool ok = true;
  std::vector<InvarianceFailure> failures;
};

// Flags pairs of runs whose E[H_NP] or E[W_NP(r)] 95% CIs fail to overlap.
// grid_points selects which r indices to test; empty means quartile points.
InvarianceReport invariance_checks(const std::vector<MetricsReport>& reports,
                                   const std::vector<std::string>& names,
                                   std::vector<int> grid_points = {});

struct LittleCheck {
  bool applicable = false;
  double rel_error = 0;  // |E[N] - lambda E[T]| / E[N] with measured lambda
  double z = 0;          // batch-means z-score of the defect
};
LittleCheck little_law_check(const MetricsReport& report);

// lambda_B * E[holding cost accrued in nonpreemptible states per batch]:
// the policy-invariant value of E[H_NP].
double analytic_mean_HNP(const JobChain& model, double batch_rate);

}  // namespace mg1
