#pragma once

#include <string>

#include <json.hpp>

#include "mg1/job_chain.hpp"

namespace mg1 {

// Document shape: {"states": [{id, sojourn: {kind, value}, kernel: [{to, p}],
// preemptible, holding_cost}], "batches": [{p, initial: [ids]}],
// "arrival_rate": batch rate}. State ids must form 0..n-1 (any order); "to"
// -1 means done; kind is "deterministic" or "exponential".
JobChain model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const JobChain& model);

JobChain load_model(const std::string& path);

}  // namespace mg1
