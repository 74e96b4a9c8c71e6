#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

namespace mg1 {

enum class SojournKind { Deterministic, Exponential };

struct Sojourn {
  SojournKind kind = SojournKind::Deterministic;
  double value = 1.0;  // duration if Deterministic, rate if Exponential

  double mean() const { return kind == SojournKind::Deterministic ? value : 1.0 / value; }
};

struct KernelEntry {
  int to;  // successor state, or JobChain::kDone
  double p;
};

struct BatchEntry {
  double p;
  std::vector<int> initial;  // states of the batch's jobs, in arrival order
};

// Finite service-time law: (duration, probability) pairs.
using ServiceDist = std::vector<std::pair<double, double>>;

// Finite absorbing Markov job model. States 0..n-1 are the non-done states;
// kDone marks absorption and carries zero holding cost. Immutable by
// convention once built, so tables and simulations may share it freely.
struct JobChain {
  static constexpr int kDone = -1;

  std::vector<Sojourn> sojourn;                // per state
  std::vector<std::vector<KernelEntry>> kernel;  // per state; rows sum to 1
  std::vector<bool> preemptible;
  std::vector<double> holding_cost;
  std::vector<BatchEntry> batches;  // batch law; jobs within a batch may be correlated
  double arrival_rate = 0.0;        // batch arrival rate

  int num_states() const { return static_cast<int>(sojourn.size()); }
};

struct ValidationReport {
  bool ok = false;
  // E[time to absorption] per state; empty when the chain is not absorbing.
  std::vector<double> mean_service_per_state;
  std::vector<std::string> violations;
};

// Checks all JobChain invariants: kernel rows and batch probabilities sum to 1
// (1e-12), absorption is certain (sub-kernel spectral radius < 1, threshold
// 1e-10), batch initial states are preemptible, preemptible holding costs are
// positive, sojourn parameters are positive. Structural problems (indices out
// of range, size mismatches) throw instead of being reported.
ValidationReport validate(const JobChain& model);

// E[time to absorption] per state; throws if the chain is not absorbing.
std::vector<double> mean_absorption_times(const JobChain& model);

// Remaining-service-level chain: state = remaining service, deterministic
// grid_step sojourns, unit holding cost. With per_size_states the levels are
// kept separate per support point, so a state pins down the original size.
JobChain build_known_service_time(const ServiceDist& service_dist, double grid_step,
                                  bool per_size_states = false);

// Attained-service chain: state = attained service, jumps to done with the
// conditional hazard of the given law, single initial state 0, unit cost.
JobChain build_attained_service(const ServiceDist& service_dist, double grid_step);

struct FeedbackClass {
  double completion_rate;
  double holding_cost;
  std::vector<double> feedback;  // subprobability over classes; residual mass completes
};

// One exponential state per class. arrival_probs weights the (singleton)
// batch law; uniform when empty.
JobChain build_multiclass_feedback(const std::vector<FeedbackClass>& classes,
                                   const std::vector<double>& arrival_probs = {});

// Replaces holding_cost(x) with E[1/S | job reached x], where S is the job's
// total service time. 1/S must be determined by the current and future
// states, so the transform requires deterministic sojourns and a unique
// elapsed time per reachable state; anything else is rejected because the
// expectation is not computable from the state. Dynamics are untouched.
JobChain transform_slowdown_costs(const JobChain& model);

// One sampled service path: (state, sojourn duration) for each visited state,
// in visit order, ending with the state that jumps to done.
std::vector<std::pair<int, double>> sample_path(const JobChain& model, int start,
                                                std::mt19937_64& rng);

}  // namespace mg1
