#include "mg1/gittins.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mg1 {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Topology {
  bool is_dag = false;
  std::vector<int> order;
};

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

bool in_give_up(double r, double hx, double v) {
  return r * hx - v <= kGiveUpTol * std::max(1.0, r * hx);
}

// t(x,Y) and h(x,Y): absorption expectations with the states of `stop` frozen
// at (0, holding_cost). Backward pass on DAGs, one LU solve otherwise.
void serve_hold(const JobChain& m, const std::vector<bool>& stop, const Topology& topo,
                std::vector<double>& t, std::vector<double>& h) {
  const int n = m.num_states();
  t.assign(n, 0.0);
  h.assign(n, 0.0);
  if (topo.is_dag) {
    for (int i = n - 1; i >= 0; --i) {
      int x = topo.order[i];
      if (stop[x]) {
        t[x] = 0.0;
        h[x] = m.holding_cost[x];
        continue;
      }
      double tv = m.sojourn[x].mean(), hv = 0.0;
      for (const KernelEntry& e : m.kernel[x]) {
        if (e.to == JobChain::kDone) continue;
        tv += e.p * t[e.to];
        hv += e.p * h[e.to];
      }
      t[x] = tv;
      h[x] = hv;
    }
    return;
  }

  std::vector<int> active;  // states solved by the linear system
  std::vector<int> pos(n, -1);
  for (int x = 0; x < n; ++x)
    if (!stop[x]) {
      pos[x] = static_cast<int>(active.size());
      active.push_back(x);
    } else {
      h[x] = m.holding_cost[x];
    }
  const int k = static_cast<int>(active.size());
  if (k == 0) return;
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(k, k);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k, 2);
  for (int i = 0; i < k; ++i) {
    int x = active[i];
    b(i, 0) = m.sojourn[x].mean();
    for (const KernelEntry& e : m.kernel[x]) {
      if (e.to == JobChain::kDone) continue;
      if (stop[e.to])
        b(i, 1) += e.p * m.holding_cost[e.to];
      else
        A(i, pos[e.to]) -= e.p;
    }
  }
  Eigen::MatrixXd sol = A.partialPivLu().solve(b);
  for (int i = 0; i < k; ++i) {
    t[active[i]] = sol(i, 0);
    h[active[i]] = sol(i, 1);
  }
}

void classify(const JobChain& m, double r, const std::vector<double>& v,
              std::vector<bool>& member) {
  const int n = m.num_states();
  member.assign(n, false);
  for (int x = 0; x < n; ++x)
    if (m.preemptible[x] && in_give_up(r, m.holding_cost[x], v[x])) member[x] = true;
}

}  // namespace

double game_cost(const JobChain& model, int x, double r, const std::vector<int>& give_up) {
  const int n = model.num_states();
  if (x < 0 || x >= n) throw std::invalid_argument("game_cost: state out of range");
  if (r < 0.0) throw std::invalid_argument("game_cost: negative penalty");
  std::vector<bool> stop(n, false);
  for (int y : give_up) {
    if (y < 0 || y >= n) throw std::invalid_argument("game_cost: give-up state out of range");
    if (!model.preemptible[y])
      throw std::invalid_argument("game_cost: give-up set contains a nonpreemptible state");
    stop[y] = true;
  }
  Topology topo = topology(model);
  std::vector<double> t, h;
  serve_hold(model, stop, topo, t, h);
  return t[x] + r * h[x];
}

GameSolution solve_game(const JobChain& model, double r) {
  if (r < 0.0) throw std::invalid_argument("solve_game: negative penalty");
  const int n = model.num_states();
  Topology topo = topology(model);

  GameSolution g;
  g.penalty = r;
  g.give_up.assign(n, false);

  if (topo.is_dag) {
    // Single exact pass: the Bellman recursion only needs sojourn means.
    g.cost_to_go.assign(n, 0.0);
    g.serve_moment.assign(n, 0.0);
    g.hold_moment.assign(n, 0.0);
    for (int i = n - 1; i >= 0; --i) {
      int x = topo.order[i];
      double tc = model.sojourn[x].mean(), hc = 0.0;
      for (const KernelEntry& e : model.kernel[x]) {
        if (e.to == JobChain::kDone) continue;
        tc += e.p * g.serve_moment[e.to];
        hc += e.p * g.hold_moment[e.to];
      }
      double cont = tc + r * hc;
      if (model.preemptible[x] && in_give_up(r, model.holding_cost[x], cont)) {
        g.give_up[x] = true;
        g.serve_moment[x] = 0.0;
        g.hold_moment[x] = model.holding_cost[x];
        g.cost_to_go[x] = r * model.holding_cost[x];
      } else {
        g.serve_moment[x] = tc;
        g.hold_moment[x] = hc;
        g.cost_to_go[x] = cont;
      }
    }
    return g;
  }

  // Cyclic transient graph: value-iterate from zero (monotone convergence to
  // the least fixed point), then polish with exact solves under the
  // classified set until the classification is stable.
  std::vector<double> v(n, 0.0), vn(n, 0.0);
  bool converged = false;
  for (long it = 0; it < 1'000'000; ++it) {
    double delta = 0.0;
    for (int x = 0; x < n; ++x) {
      double cont = model.sojourn[x].mean();
      for (const KernelEntry& e : model.kernel[x])
        if (e.to != JobChain::kDone) cont += e.p * v[e.to];
      double val = cont;
      if (model.preemptible[x]) val = std::min(val, r * model.holding_cost[x]);
      vn[x] = val;
      delta = std::max(delta, std::abs(val - v[x]));
    }
    v.swap(vn);
    if (delta < 1e-12) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw std::runtime_error(
        "solve_game: value iteration did not converge; is the chain absorbing?");

  std::vector<bool> member;
  classify(model, r, v, member);
  std::vector<double> t, h;
  for (int pass = 0; pass < 5; ++pass) {
    serve_hold(model, member, topo, t, h);
    for (int x = 0; x < n; ++x) v[x] = t[x] + r * h[x];
    std::vector<bool> again;
    classify(model, r, v, again);
    if (again == member) break;
    member.swap(again);
  }
  g.give_up = member;
  g.serve_moment = std::move(t);
  g.hold_moment = std::move(h);
  g.cost_to_go = std::move(v);
  return g;
}

std::vector<double> default_r_grid(const std::vector<double>& ranks, int points) {
  if (points < 1) throw std::invalid_argument("default_r_grid: need at least one point");
  double lo = kInf, hi = 0.0;
  for (double r : ranks)
    if (std::isfinite(r) && r > 0.0) {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  if (!std::isfinite(lo)) {  // no finite ranks to anchor on
    lo = 0.1;
    hi = 10.0;
  }
  lo /= 10.0;
  hi *= 10.0;
  std::vector<double> grid(points);
  if (points == 1) {
    grid[0] = std::sqrt(lo * hi);
    return grid;
  }
  double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < points; ++i)
    grid[i] = std::exp(llo + (lhi - llo) * i / (points - 1));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

RankTable compute_rank_table(const JobChain& model, std::vector<double> r_grid,
                             double tolerance) {
  if (tolerance <= 0.0) throw std::invalid_argument("compute_rank_table: tolerance <= 0");
  const int n = model.num_states();
  RankTable tab;
  tab.serve_to_done = mean_absorption_times(model);
  tab.rank.assign(n, kInf);
  tab.index.assign(n, 0.0);

  double max_inv_cost = 0.0;  // over preemptible states
  for (int x = 0; x < n; ++x)
    if (model.preemptible[x] && model.holding_cost[x] > 0.0)
      max_inv_cost = std::max(max_inv_cost, 1.0 / model.holding_cost[x]);

  for (int x = 0; x < n; ++x) {
    double hx = model.holding_cost[x];
    if (hx <= 0.0) continue;  // nonpreemptible, never worth stopping for: rank +inf

    // rank(x) = max{r : r*h(x) <= V(x,r)}; the give-up bound rank <= t(x,{})/h(x)
    // holds for every state, so extend the preemptible-cost bracket with it.
    double hi = tab.serve_to_done[x] * std::max(max_inv_cost, 1.0 / hx);
    hi = hi * (1.0 + 1e-6) + 1e-12;
    double lo = 0.0;
    GameSolution at_hi = solve_game(model, hi);
    for (int guard = 0; guard < 8 && in_give_up(hi, hx, at_hi.cost_to_go[x]); ++guard) {
      hi *= 2.0;  // bracket slack defeated by rounding; widen
      at_hi = solve_game(model, hi);
    }
    if (in_give_up(hi, hx, at_hi.cost_to_go[x]))
      throw std::runtime_error("compute_rank_table: bisection bracket failure");

    for (int it = 0; it < 200 && hi - lo > tolerance * hi; ++it) {
      double mid = 0.5 * (lo + hi);
      GameSolution sol = solve_game(model, mid);
      if (in_give_up(mid, hx, sol.cost_to_go[x])) {
        lo = mid;
      } else {
        hi = mid;
        at_hi = std::move(sol);
      }
    }

    // Just above the breakpoint x has left the give-up set, so t and h at hi
    // are continuation moments and the crossing r*h(x) = t + r*h is exact.
    // The membership tie rule keeps x in the give-up set for a band of width
    // kGiveUpTol*max(1, r*h(x))/denom past the true breakpoint, so lo settles
    // that far above it; the acceptance window must reach below lo by as much.
    double rank = 0.5 * (lo + hi);
    double denom = hx - at_hi.hold_moment[x];
    if (denom > 0.0) {
      double exact = at_hi.serve_moment[x] / denom;
      double band = kGiveUpTol * std::max(1.0, lo * hx) / denom;
      if (exact >= lo - band - tolerance * hi && exact <= hi + tolerance * hi)
        rank = std::min(std::max(exact, lo - band), hi);
    }
    tab.rank[x] = rank;
    tab.index[x] = 1.0 / rank;
  }

  if (r_grid.empty()) r_grid = default_r_grid(tab.rank);
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (r_grid[i] <= 0.0) throw std::invalid_argument("compute_rank_table: grid must be positive");
    if (i > 0 && r_grid[i] <= r_grid[i - 1])
      throw std::invalid_argument("compute_rank_table: grid must be strictly increasing");
  }
  tab.r_grid = std::move(r_grid);

  const int G = tab.grid_size();
  tab.serve_moments.assign(n, std::vector<double>(G, 0.0));
  tab.hold_moments.assign(n, std::vector<double>(G, 0.0));
  for (int g = 0; g < G; ++g) {
    GameSolution sol = solve_game(model, tab.r_grid[g]);
    for (int x = 0; x < n; ++x) {
      tab.serve_moments[x][g] = sol.serve_moment[x];
      tab.hold_moments[x][g] = sol.hold_moment[x];
    }
  }
  tab.first_positive.assign(n, G);
  for (int x = 0; x < n; ++x)
    for (int g = 0; g < G; ++g)
      if (tab.serve_moments[x][g] > 0.0) {
        tab.first_positive[x] = g;
        break;
      }
  return tab;
}

namespace {

// Common layout for the closed-form indices: tail of the law past level x and
// the expected service to reach each candidate threshold.
struct Tail {
  std::vector<double> s;  // support points > x
  std::vector<double> p;
  double past_x;  // P(S > x), unnormalized conditioning mass
};

Tail tail_past(const ServiceDist& dist, double x) {
  ServiceDist sorted = dist;
  std::sort(sorted.begin(), sorted.end());
  Tail t;
  t.past_x = 0.0;
  for (const auto& [s, p] : sorted) {
    if (p <= 0.0) continue;
    if (s > x + 1e-12 * std::max(1.0, std::abs(x))) {
      t.s.push_back(s);
      t.p.push_back(p);
      t.past_x += p;
    }
  }
  if (t.s.empty() || t.past_x <= 0.0)
    throw std::invalid_argument("index: level at or beyond the maximum support point");
  return t;
}

// sup over thresholds y of reward(y) / E[min(S,y) - x | S > x]; the
// conditioning mass cancels, so unnormalized sums suffice.
double threshold_sup(const Tail& t, double x, const std::vector<double>& reward_at) {
  double best = 0.0;
  for (std::size_t j = 0; j < t.s.size(); ++j) {
    double y = t.s[j];
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < t.s.size(); ++i) {
      den += t.p[i] * (std::min(t.s[i], y) - x);
      if (t.s[i] <= y) num += t.p[i] * reward_at[i];
    }
    best = std::max(best, num / den);
  }
  return best;
}

}  // namespace

double attained_service_index(const ServiceDist& service_dist, double x) {
  Tail t = tail_past(service_dist, x);
  std::vector<double> reward(t.s.size(), 1.0);  // completion counts once
  return threshold_sup(t, x, reward);
}

double slowdown_index(const ServiceDist& service_dist, double x) {
  Tail t = tail_past(service_dist, x);
  std::vector<double> reward(t.s.size());
  for (std::size_t i = 0; i < t.s.size(); ++i) reward[i] = 1.0 / t.s[i];  // completion pays 1/S
  return threshold_sup(t, x, reward);
}

std::vector<std::pair<double, double>> cost_to_go_curve(const JobChain& model, int x,
                                                        const std::vector<double>& r_grid) {
  if (x < 0 || x >= model.num_states())
    throw std::invalid_argument("cost_to_go_curve: state out of range");
  for (std::size_t i = 1; i < r_grid.size(); ++i)
    if (r_grid[i] < r_grid[i - 1])
      throw std::invalid_argument("cost_to_go_curve: grid must be sorted");
  std::vector<std::pair<double, double>> curve;
  curve.reserve(r_grid.size());
  for (double r : r_grid) curve.emplace_back(r, solve_game(model, r).cost_to_go[x]);
  return curve;
}

}  // namespace mg1
