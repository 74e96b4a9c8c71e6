#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mg1/gittins.hpp"
#include "mg1/job_chain.hpp"
#include "mg1/system_state.hpp"

namespace mg1 {

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string_view name() const = 0;
  // Called at decision epochs only; the simulator guarantees the in-service
  // job, if any, is preemptible. Must pick a present job unless none exist.
  virtual PolicyDecision decide(const SystemState& state, const RankTable& table) = 0;
};

// name: gittins | srpt | fcfs | las | priority | antigittins | random.
// Throws on unknown names and on srpt for models without deterministic
// remaining-time semantics.
std::unique_ptr<Policy> make_policy(const std::string& name, const JobChain& model,
                                    std::uint64_t master_seed);

// Remaining service per state when it is deterministic: every state must have
// a deterministic sojourn and a single successor. Throws otherwise.
std::vector<double> deterministic_remaining(const JobChain& model);

}  // namespace mg1
