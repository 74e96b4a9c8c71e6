#include "mg1/model_io.hpp"

#include <fstream>
#include <stdexcept>
#include <vector>

namespace mg1 {

namespace {

Sojourn sojourn_from_json(const nlohmann::json& j) {
  Sojourn s;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "deterministic")
    s.kind = SojournKind::Deterministic;
  else if (kind == "exponential")
    s.kind = SojournKind::Exponential;
  else
    throw std::invalid_argument("unknown sojourn kind: " + kind);
  s.value = j.at("value").get<double>();
  return s;
}

}  // namespace

JobChain model_from_json(const nlohmann::json& j) {
  const nlohmann::json& states = j.at("states");
  if (!states.is_array() || states.empty())
    throw std::invalid_argument("model: states must be a nonempty array");
  int n = static_cast<int>(states.size());

  JobChain m;
  m.sojourn.resize(n);
  m.kernel.resize(n);
  m.preemptible.resize(n);
  m.holding_cost.resize(n);
  std::vector<bool> seen(n, false);
  for (const nlohmann::json& s : states) {
    int id = s.at("id").get<int>();
    if (id < 0 || id >= n || seen[id])
      throw std::invalid_argument("model: state ids must form 0..n-1");
    seen[id] = true;
    m.sojourn[id] = sojourn_from_json(s.at("sojourn"));
    for (const nlohmann::json& e : s.at("kernel")) {
      int to = e.at("to").get<int>();
      if (to != JobChain::kDone && (to < 0 || to >= n))
        throw std::invalid_argument("model: kernel target out of range");
      m.kernel[id].push_back({to, e.at("p").get<double>()});
    }
    m.preemptible[id] = s.at("preemptible").get<bool>();
    m.holding_cost[id] = s.at("holding_cost").get<double>();
  }
  for (const nlohmann::json& b : j.at("batches")) {
    BatchEntry be;
    be.p = b.at("p").get<double>();
    for (const nlohmann::json& x : b.at("initial")) {
      int id = x.get<int>();
      if (id < 0 || id >= n)
        throw std::invalid_argument("model: batch initial state out of range");
      be.initial.push_back(id);
    }
    m.batches.push_back(std::move(be));
  }
  m.arrival_rate = j.at("arrival_rate").get<double>();
  return m;
}

nlohmann::json model_to_json(const JobChain& m) {
  nlohmann::json states = nlohmann::json::array();
  for (int x = 0; x < m.num_states(); ++x) {
    nlohmann::json kernel = nlohmann::json::array();
    for (const KernelEntry& e : m.kernel[x]) kernel.push_back({{"to", e.to}, {"p", e.p}});
    states.push_back({
        {"id", x},
        {"sojourn",
         {{"kind", m.sojourn[x].kind == SojournKind::Deterministic ? "deterministic"
                                                                   : "exponential"},
          {"value", m.sojourn[x].value}}},
        {"kernel", std::move(kernel)},
        {"preemptible", static_cast<bool>(m.preemptible[x])},
        {"holding_cost", m.holding_cost[x]},
    });
  }
  nlohmann::json batches = nlohmann::json::array();
  for (const BatchEntry& b : m.batches)
    batches.push_back({{"p", b.p}, {"initial", b.initial}});
  return {{"states", std::move(states)},
          {"batches", std::move(batches)},
          {"arrival_rate", m.arrival_rate}};
}

JobChain load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  return model_from_json(nlohmann::json::parse(in));
}

}  // namespace mg1
