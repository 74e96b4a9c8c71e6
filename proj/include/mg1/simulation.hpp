#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mg1/gittins.hpp"
#include "mg1/job_chain.hpp"
#include "mg1/metrics.hpp"
#include "mg1/policies.hpp"

namespace mg1 {

struct RunOptions {
  double horizon = 1e5;
  double warmup = -1.0;  // < 0: 10% of horizon
  std::uint64_t seed = 1;  // must be nonzero; 0 is reserved
  double arrival_rate = -1.0;  // batch rate; < 0: model.arrival_rate
  int num_windows = 30;  // batch-means windows over [warmup, horizon]
  std::vector<int> initial_jobs;  // preemptible states of jobs present at t = 0
  std::string event_log;  // NDJSON path; empty disables logging
  bool quiet = false;  // suppress the overload warning
};

// Preempt-resume single-server run. Job futures are presampled per job id
// from a seed-derived substream, so two policies with the same seed face the
// same arrivals and the same service paths. policy.decide is invoked at every
// event at which the in-service job is preemptible or absent; a policy that
// idles with jobs present, or picks an absent job, raises logic_error.
MetricsReport run(const JobChain& model, Policy& policy, const RankTable& table,
                  const RunOptions& opts);

// One draw from the batch law: the initial states of the arriving jobs.
std::vector<int> generate_batch(const std::vector<BatchEntry>& law, std::mt19937_64& rng);

// Grid penalties r at which a job moving from `from` to `to` recycles r-work:
// from r-bad (preemptible with rank >= r) to r-good (nonpreemptible or rank
// < r). Completion never recycles. `to` may be JobChain::kDone.
std::vector<double> detect_recycles(const RankTable& table, const JobChain& model,
                                    int from, int to);

}  // namespace mg1
