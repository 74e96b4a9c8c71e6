#include "mg1/job_chain.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "mg1/rng.hpp"

namespace mg1 {

namespace {

constexpr double kRowTol = 1e-12;       // kernel rows / batch probabilities sum to 1
constexpr double kSpectralTol = 1e-10;  // absorbing iff spectral radius < 1 - this

std::string state_str(int x) { return std::to_string(x); }

void check_structure(const JobChain& m) {
  const int n = m.num_states();
  if (static_cast<int>(m.kernel.size()) != n || static_cast<int>(m.preemptible.size()) != n ||
      static_cast<int>(m.holding_cost.size()) != n)
    throw std::invalid_argument("JobChain: per-state arrays disagree in length");
  for (int x = 0; x < n; ++x)
    for (const KernelEntry& e : m.kernel[x])
      if (e.to != JobChain::kDone && (e.to < 0 || e.to >= n))
        throw std::invalid_argument("JobChain: kernel target out of range at state " +
                                    state_str(x));
  for (const BatchEntry& b : m.batches)
    for (int s : b.initial)
      if (s < 0 || s >= n)
        throw std::invalid_argument("JobChain: batch initial state out of range");
}

struct Topology {
  bool is_dag = false;
  std::vector<int> order;  // topological over states; edges point forward
};

// Kahn's algorithm over the transient transition graph (edges with p > 0,
// excluding done).
Topology topology(const JobChain& m) {
  const int n = m.num_states();
  std::vector<int> indeg(n, 0);
  for (int x = 0; x < n; ++x)
    for (const KernelEntry& e : m.kernel[x])
      if (e.to != JobChain::kDone && e.p > 0.0) ++indeg[e.to];
  Topology t;
  t.order.reserve(n);
  std::vector<int> stack;
  for (int x = 0; x < n; ++x)
    if (indeg[x] == 0) stack.push_back(x);
  while (!stack.empty()) {
    int x = stack.back();
    stack.pop_back();
    t.order.push_back(x);
    for (const KernelEntry& e : m.kernel[x])
      if (e.to != JobChain::kDone && e.p > 0.0 && --indeg[e.to] == 0) stack.push_back(e.to);
  }
  t.is_dag = static_cast<int>(t.order.size()) == n;
  return t;
}

double spectral_radius(const JobChain& m) {
  const int n = m.num_states();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (int x = 0; x < n; ++x)
    for (const KernelEntry& e : m.kernel[x])
      if (e.to != JobChain::kDone) P(x, e.to) += e.p;
  double rho = 0.0;
  for (const auto& ev : P.eigenvalues()) rho = std::max(rho, std::abs(ev));
  return rho;
}

// Solves t(x) = E[sojourn(x)] + sum_y kernel(x,y) t(y) with t(done) = 0.
std::vector<double> absorption_means(const JobChain& m, const Topology& topo) {
  const int n = m.num_states();
  std::vector<double> t(n, 0.0);
  if (topo.is_dag) {
    for (int i = n - 1; i >= 0; --i) {
      int x = topo.order[i];
      double v = m.sojourn[x].mean();
      for (const KernelEntry& e : m.kernel[x])
        if (e.to != JobChain::kDone) v += e.p * t[e.to];
      t[x] = v;
    }
    return t;
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b(n);
  for (int x = 0; x < n; ++x) {
    b(x) = m.sojourn[x].mean();
    for (const KernelEntry& e : m.kernel[x])
      if (e.to != JobChain::kDone) A(x, e.to) -= e.p;
  }
  Eigen::VectorXd sol = A.partialPivLu().solve(b);
  for (int x = 0; x < n; ++x) t[x] = sol(x);
  return t;
}

int level_of(double s, double grid_step, const char* what) {
  double k = s / grid_step;
  long kk = std::lround(k);
  if (s <= 0.0 || kk < 1 || std::abs(kk * grid_step - s) > 1e-9 * std::max(1.0, s))
    throw std::invalid_argument(std::string(what) + ": support point " + std::to_string(s) +
                                " is not a positive multiple of the grid step");
  return static_cast<int>(kk);
}

// Sorted, merged, positivity-checked copy of a service distribution.
ServiceDist normalize_dist(const ServiceDist& dist) {
  std::map<double, double> acc;
  double total = 0.0;
  for (const auto& [s, p] : dist) {
    if (p < 0.0) throw std::invalid_argument("service distribution: negative probability");
    if (p == 0.0) continue;
    if (s <= 0.0) throw std::invalid_argument("service distribution: nonpositive duration");
    acc[s] += p;
    total += p;
  }
  if (acc.empty() || std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("service distribution: probabilities must sum to 1");
  return ServiceDist(acc.begin(), acc.end());
}

}  // namespace

ValidationReport validate(const JobChain& model) {
  check_structure(model);
  ValidationReport rep;
  const int n = model.num_states();

  for (int x = 0; x < n; ++x) {
    if (model.sojourn[x].value <= 0.0)
      rep.violations.push_back("nonpositive sojourn parameter at state " + state_str(x));
    double sum = 0.0;
    bool neg = false;
    for (const KernelEntry& e : model.kernel[x]) {
      if (e.p < 0.0) neg = true;
      sum += e.p;
    }
    if (neg) rep.violations.push_back("negative kernel probability at state " + state_str(x));
    if (std::abs(sum - 1.0) > kRowTol)
      rep.violations.push_back("kernel row does not sum to 1 at state " + state_str(x));
    if (model.preemptible[x] && model.holding_cost[x] <= 0.0)
      rep.violations.push_back("nonpositive holding cost at preemptible state " + state_str(x));
  }

  if (model.batches.empty()) {
    rep.violations.push_back("empty batch law");
  } else {
    double psum = 0.0;
    for (const BatchEntry& b : model.batches) {
      if (b.p < 0.0) rep.violations.push_back("negative batch probability");
      psum += b.p;
      if (b.initial.empty()) rep.violations.push_back("batch entry with no jobs");
      for (int s : b.initial)
        if (!model.preemptible[s])
          rep.violations.push_back("initial state " + state_str(s) + " not preemptible");
    }
    if (std::abs(psum - 1.0) > kRowTol)
      rep.violations.push_back("batch probabilities do not sum to 1");
  }

  Topology topo = topology(model);
  bool absorbing = topo.is_dag || (n > 0 && spectral_radius(model) < 1.0 - kSpectralTol);
  if (!absorbing) rep.violations.push_back("not absorbing");
  if (absorbing && n > 0) rep.mean_service_per_state = absorption_means(model, topo);

  rep.ok = rep.violations.empty();
  return rep;
}

std::vector<double> mean_absorption_times(const JobChain& model) {
  check_structure(model);
  Topology topo = topology(model);
  if (!topo.is_dag && spectral_radius(model) >= 1.0 - kSpectralTol)
    throw std::invalid_argument("mean_absorption_times: chain is not absorbing");
  return absorption_means(model, topo);
}

JobChain build_known_service_time(const ServiceDist& service_dist, double grid_step,
                                  bool per_size_states) {
  if (grid_step <= 0.0) throw std::invalid_argument("build_known_service_time: grid_step <= 0");
  ServiceDist dist = normalize_dist(service_dist);

  JobChain m;
  if (!per_size_states) {
    // Shared remaining-service levels: state k-1 has remaining (k)*grid_step.
    int levels = 0;
    for (const auto& [s, p] : dist)
      levels = std::max(levels, level_of(s, grid_step, "build_known_service_time"));
    m.sojourn.assign(levels, {SojournKind::Deterministic, grid_step});
    m.preemptible.assign(levels, true);
    m.holding_cost.assign(levels, 1.0);
    m.kernel.resize(levels);
    for (int k = 0; k < levels; ++k)
      m.kernel[k] = {{k == 0 ? JobChain::kDone : k - 1, 1.0}};
    for (const auto& [s, p] : dist)
      m.batches.push_back({p, {level_of(s, grid_step, "build_known_service_time") - 1}});
    return m;
  }

  // One descending chain per support point; a state identifies (size, remaining).
  for (const auto& [s, p] : dist) {
    int levels = level_of(s, grid_step, "build_known_service_time");
    int base = m.num_states();
    for (int k = 0; k < levels; ++k) {
      m.sojourn.push_back({SojournKind::Deterministic, grid_step});
      m.preemptible.push_back(true);
      m.holding_cost.push_back(1.0);
      m.kernel.push_back({{k == 0 ? JobChain::kDone : base + k - 1, 1.0}});
    }
    m.batches.push_back({p, {base + levels - 1}});
  }
  return m;
}

JobChain build_attained_service(const ServiceDist& service_dist, double grid_step) {
  if (grid_step <= 0.0) throw std::invalid_argument("build_attained_service: grid_step <= 0");
  ServiceDist dist = normalize_dist(service_dist);

  int levels = 0;
  for (const auto& [s, p] : dist)
    levels = std::max(levels, level_of(s, grid_step, "build_attained_service"));

  // Mass completing exactly at level k*grid_step, and survival past it.
  std::vector<double> mass(levels + 1, 0.0);
  for (const auto& [s, p] : dist) mass[level_of(s, grid_step, "build_attained_service")] += p;

  JobChain m;
  m.sojourn.assign(levels, {SojournKind::Deterministic, grid_step});
  m.preemptible.assign(levels, true);
  m.holding_cost.assign(levels, 1.0);
  m.kernel.resize(levels);
  double surv = 1.0;  // P(S > i*grid_step)
  for (int i = 0; i < levels; ++i) {
    double hazard = mass[i + 1] / surv;
    hazard = std::min(hazard, 1.0);
    if (i == levels - 1) hazard = 1.0;  // past the last support point completion is certain
    std::vector<KernelEntry> row;
    if (hazard > 0.0) row.push_back({JobChain::kDone, hazard});
    if (hazard < 1.0) row.push_back({i + 1, 1.0 - hazard});
    m.kernel[i] = std::move(row);
    surv -= mass[i + 1];
  }
  m.batches.push_back({1.0, {0}});
  return m;
}

JobChain build_multiclass_feedback(const std::vector<FeedbackClass>& classes,
                                   const std::vector<double>& arrival_probs) {
  const int n = static_cast<int>(classes.size());
  if (n == 0) throw std::invalid_argument("build_multiclass_feedback: no classes");
  if (!arrival_probs.empty() && static_cast<int>(arrival_probs.size()) != n)
    throw std::invalid_argument("build_multiclass_feedback: arrival_probs size mismatch");

  JobChain m;
  for (int i = 0; i < n; ++i) {
    const FeedbackClass& c = classes[i];
    if (c.completion_rate <= 0.0)
      throw std::invalid_argument("build_multiclass_feedback: completion_rate <= 0");
    if (c.holding_cost <= 0.0)
      throw std::invalid_argument("build_multiclass_feedback: holding_cost <= 0");
    if (static_cast<int>(c.feedback.size()) != n)
      throw std::invalid_argument("build_multiclass_feedback: feedback row size mismatch");
    double sum = 0.0;
    for (double p : c.feedback) {
      if (p < 0.0) throw std::invalid_argument("build_multiclass_feedback: negative feedback");
      sum += p;
    }
    if (sum > 1.0 + kRowTol)
      throw std::invalid_argument("build_multiclass_feedback: feedback row mass > 1");
    m.sojourn.push_back({SojournKind::Exponential, c.completion_rate});
    m.preemptible.push_back(true);
    m.holding_cost.push_back(c.holding_cost);
    std::vector<KernelEntry> row;
    for (int j = 0; j < n; ++j)
      if (c.feedback[j] > 0.0) row.push_back({j, c.feedback[j]});
    double done_mass = std::max(0.0, 1.0 - sum);
    if (done_mass > 0.0) row.push_back({JobChain::kDone, done_mass});
    m.kernel.push_back(std::move(row));
  }
  for (int i = 0; i < n; ++i) {
    double p = arrival_probs.empty() ? 1.0 / n : arrival_probs[i];
    if (p < 0.0) throw std::invalid_argument("build_multiclass_feedback: negative arrival prob");
    if (p > 0.0) m.batches.push_back({p, {i}});
  }
  double psum = 0.0;
  for (const BatchEntry& b : m.batches) psum += b.p;
  if (std::abs(psum - 1.0) > 1e-9)
    throw std::invalid_argument("build_multiclass_feedback: arrival probs must sum to 1");
  return m;
}

JobChain transform_slowdown_costs(const JobChain& model) {
  check_structure(model);
  const int n = model.num_states();
  constexpr double kUnset = -1.0;
  std::vector<double> elapsed(n, kUnset);

  // Forward pass from the batch law: 1/S is a function of the state only if
  // every path reaching a state has spent the same time so far.
  std::vector<int> frontier;
  for (const BatchEntry& b : model.batches)
    for (int s : b.initial)
      if (elapsed[s] == kUnset) {
        elapsed[s] = 0.0;
        frontier.push_back(s);
      }
  if (frontier.empty())
    throw std::invalid_argument("transform_slowdown_costs: empty batch law, nothing reachable");

  std::vector<int> visit_order;
  while (!frontier.empty()) {
    int x = frontier.back();
    frontier.pop_back();
    visit_order.push_back(x);
    if (model.sojourn[x].kind != SojournKind::Deterministic)
      throw std::invalid_argument(
          "transform_slowdown_costs: expectation not computable with exponential sojourns");
    double next = elapsed[x] + model.sojourn[x].value;
    for (const KernelEntry& e : model.kernel[x]) {
      if (e.to == JobChain::kDone || e.p <= 0.0) continue;
      if (elapsed[e.to] == kUnset) {
        elapsed[e.to] = next;
        frontier.push_back(e.to);
      } else if (std::abs(elapsed[e.to] - next) > 1e-9 * std::max(1.0, next)) {
        throw std::invalid_argument(
            "transform_slowdown_costs: elapsed time is not unique at state " + state_str(e.to) +
            "; 1/S is not a function of the state");
      }
    }
  }
  // Unique elapsed times with positive durations rule out cycles (a cycle
  // would force two elapsed values on its states), so the reachable subgraph
  // is a DAG and decreasing elapsed time is a reverse topological order.
  std::vector<int> order(visit_order);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return elapsed[a] < elapsed[b]; });
  std::vector<double> cost(n, 0.0);
  for (int i = static_cast<int>(order.size()) - 1; i >= 0; --i) {
    int x = order[i];
    double total = elapsed[x] + model.sojourn[x].value;  // S if the job completes now
    double v = 0.0;
    for (const KernelEntry& e : model.kernel[x]) {
      if (e.p <= 0.0) continue;
      v += e.p * (e.to == JobChain::kDone ? 1.0 / total : cost[e.to]);
    }
    cost[x] = v;
  }

  JobChain out = model;
  for (int x : visit_order) out.holding_cost[x] = cost[x];
  return out;
}

std::vector<std::pair<int, double>> sample_path(const JobChain& model, int start,
                                                std::mt19937_64& rng) {
  if (start < 0 || start >= model.num_states())
    throw std::invalid_argument("sample_path: start state out of range");
  std::vector<std::pair<int, double>> path;
  int x = start;
  for (long guard = 0; guard < 10'000'000; ++guard) {
    const Sojourn& s = model.sojourn[x];
    double d = s.kind == SojournKind::Deterministic ? s.value : exponential(rng, s.value);
    path.emplace_back(x, d);
    double u = uniform01(rng);
    double acc = 0.0;
    int next = JobChain::kDone;
    const auto& row = model.kernel[x];
    for (std::size_t i = 0; i < row.size(); ++i) {
      acc += row[i].p;
      if (u <= acc || i + 1 == row.size()) {
        next = row[i].to;
        break;
      }
    }
    if (next == JobChain::kDone) return path;
    x = next;
  }
  throw std::runtime_error("sample_path: no absorption after 1e7 steps; chain not absorbing?");
}

}  // namespace mg1
