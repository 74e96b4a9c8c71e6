#include "mg1/policies.hpp"

#include <cmath>
#include <stdexcept>

#include "mg1/rng.hpp"

namespace mg1 {

namespace {

// Shared selection shape: minimal key, ties by earliest arrival, then lowest
// id. Every deterministic policy is a key function over the visible job.
template <typename Key>
PolicyDecision pick_min(const SystemState& s, Key key) {
  PolicyDecision d;
  const Job* best = nullptr;
  double best_key = 0.0;
  for (const Job& j : s.jobs) {
    double k = key(j);
    if (!best || k < best_key ||
        (k == best_key && (j.arrival < best->arrival ||
                           (j.arrival == best->arrival && j.id < best->id)))) {
      best = &j;
      best_key = k;
    }
  }
  if (best) d.chosen = best->id;
  return d;
}

class GittinsPolicy final : public Policy {
 public:
  std::string_view name() const override { return "gittins"; }
  PolicyDecision decide(const SystemState& s, const RankTable& t) override {
    return pick_min(s, [&](const Job& j) { return t.rank[j.state]; });
  }
};

class AntiGittinsPolicy final : public Policy {
 public:
  std::string_view name() const override { return "antigittins"; }
  PolicyDecision decide(const SystemState& s, const RankTable& t) override {
    return pick_min(s, [&](const Job& j) { return -t.rank[j.state]; });
  }
};

class SrptPolicy final : public Policy {
 public:
  explicit SrptPolicy(const JobChain& model) : remaining_(deterministic_remaining(model)) {}
  std::string_view name() const override { return "srpt"; }
  PolicyDecision decide(const SystemState& s, const RankTable&) override {
    return pick_min(s, [&](const Job& j) { return remaining_[j.state]; });
  }

 private:
  std::vector<double> remaining_;
};

class FcfsPolicy final : public Policy {
 public:
  std::string_view name() const override { return "fcfs"; }
  PolicyDecision decide(const SystemState& s, const RankTable&) override {
    // Nonpreemptive in effect: an incomplete job is never switched off.
    if (s.in_service) return {*s.in_service};
    return pick_min(s, [](const Job&) { return 0.0; });
  }
};

class LasPolicy final : public Policy {
 public:
  std::string_view name() const override { return "las"; }
  PolicyDecision decide(const SystemState& s, const RankTable&) override {
    return pick_min(s, [](const Job& j) { return j.attained; });
  }
};

class StaticPriorityPolicy final : public Policy {
 public:
  std::string_view name() const override { return "priority"; }
  PolicyDecision decide(const SystemState& s, const RankTable&) override {
    // Fixed class order = state index order.
    return pick_min(s, [](const Job& j) { return static_cast<double>(j.state); });
  }
};

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t master_seed)
      : rng_(substream(master_seed, Stream::Policy)) {}
  std::string_view name() const override { return "random"; }
  PolicyDecision decide(const SystemState& s, const RankTable&) override {
    PolicyDecision d;
    if (s.jobs.empty()) return d;
    std::size_t i = static_cast<std::size_t>(uniform01(rng_) * s.jobs.size());
    if (i >= s.jobs.size()) i = s.jobs.size() - 1;
    d.chosen = s.jobs[i].id;
    return d;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

std::vector<double> deterministic_remaining(const JobChain& model) {
  const int n = model.num_states();
  std::vector<double> rem(n, -1.0);
  for (int x = 0; x < n; ++x) {
    if (model.sojourn[x].kind != SojournKind::Deterministic)
      throw std::invalid_argument(
          "srpt requires deterministic remaining-time semantics (exponential sojourn found)");
    int succ = -2;
    for (const KernelEntry& e : model.kernel[x])
      if (e.p > 0.0) {
        if (succ != -2) succ = -3;
        else succ = e.to;
      }
    if (succ == -3 || succ == -2)
      throw std::invalid_argument(
          "srpt requires deterministic remaining-time semantics (branching state found)");
  }
  // Unique successors: follow each chain, memoized; cycles cannot absorb and
  // are rejected.
  std::vector<int> visiting(n, 0);
  auto walk = [&](auto&& self, int x) -> double {
    if (rem[x] >= 0.0) return rem[x];
    if (visiting[x])
      throw std::invalid_argument("srpt: remaining time undefined on a cyclic chain");
    visiting[x] = 1;
    int succ = JobChain::kDone;
    for (const KernelEntry& e : model.kernel[x])
      if (e.p > 0.0) succ = e.to;
    double r = model.sojourn[x].value +
               (succ == JobChain::kDone ? 0.0 : self(self, succ));
    visiting[x] = 0;
    rem[x] = r;
    return r;
  };
  for (int x = 0; x < n; ++x) walk(walk, x);
  return rem;
}

std::unique_ptr<Policy> make_policy(const std::string& name, const JobChain& model,
                                    std::uint64_t master_seed) {
  if (name == "gittins") return std::make_unique<GittinsPolicy>();
  if (name == "antigittins") return std::make_unique<AntiGittinsPolicy>();
  if (name == "srpt") return std::make_unique<SrptPolicy>(model);
  if (name == "fcfs") return std::make_unique<FcfsPolicy>();
  if (name == "las") return std::make_unique<LasPolicy>();
  if (name == "priority") return std::make_unique<StaticPriorityPolicy>();
  if (name == "random") return std::make_unique<RandomPolicy>(master_seed);
  throw std::invalid_argument("unknown policy: " + name);
}

}  // namespace mg1
