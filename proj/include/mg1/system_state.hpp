#pragma once

#include <optional>
#include <vector>

namespace mg1 {

struct Job {
  int id = 0;
  int state = 0;          // current chain state
  double arrival = 0.0;
  double attained = 0.0;  // service received so far
  int batch = 0;          // arrival batch id
};

// Scheduler-visible snapshot: identities, current states, arrival order, and
// the server assignment. Sampled futures are deliberately not representable
// here, which is what keeps every policy nonclairvoyant.
struct SystemState {
  std::vector<Job> jobs;
  std::optional<int> in_service;  // job id
  double clock = 0.0;
};

struct PolicyDecision {
  std::optional<int> chosen;  // job id; empty means idle
};

}  // namespace mg1
