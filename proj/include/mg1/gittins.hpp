#pragma once

#include <utility>
#include <vector>

#include "mg1/job_chain.hpp"

namespace mg1 {

// Give-up membership tie tolerance: x joins the optimal give-up set at penalty
// r iff r*h(x) - V(x,r) <= kGiveUpTol * max(1, r*h(x)). Ties resolve toward
// giving up, so the set at a breakpoint is the largest optimal one.
inline constexpr double kGiveUpTol = 1e-9;

// Optimal-stopping solution for one penalty value.
struct GameSolution {
  double penalty = 0.0;            // r
  std::vector<double> cost_to_go;  // V(x,r) = serve_moment + r * hold_moment
  std::vector<bool> give_up;       // membership in Y*(r); always false when nonpreemptible
  std::vector<double> serve_moment;  // t(x, Y*(r)): expected service until done or give-up
  std::vector<double> hold_moment;   // h(x, Y*(r)): expected holding rate at stopping
};

struct RankTable {
  std::vector<double> rank;   // +inf only for nonpreemptible states with cost <= 0
  std::vector<double> index;  // 1/rank; 0 where rank is +inf
  std::vector<double> r_grid;
  // moments[x][g]: state-major for the simulator's per-job access pattern
  std::vector<std::vector<double>> serve_moments;
  std::vector<std::vector<double>> hold_moments;
  std::vector<double> serve_to_done;  // t(x, {}) = expected remaining absorption time
  std::vector<int> first_positive;    // first g with serve_moments[x][g] > 0; grid size if none

  int grid_size() const { return static_cast<int>(r_grid.size()); }
};

// t(x,Y) + r*h(x,Y) for an explicit give-up set (list of preemptible states).
double game_cost(const JobChain& model, int x, double r, const std::vector<int>& give_up);

// V(x,r) with its optimal give-up set and the serve/hold moments under it.
// Exact backward induction when the transient graph is acyclic; otherwise
// value iteration (sup-norm change < 1e-12, capped at 1e6 sweeps) polished by
// an exact linear solve under the classified set.
GameSolution solve_game(const JobChain& model, double r);

// 200 log-spaced penalties spanning [min finite rank / 10, max finite rank * 10].
std::vector<double> default_r_grid(const std::vector<double>& ranks, int points = 200);

// Per-state ranks by bisection on give-up membership, refined to the exact
// breakpoint t(x,Y)/(h(x)-h(x,Y)) of the crossing; moments tabulated on the
// grid (the default grid is derived from the ranks once they are known).
RankTable compute_rank_table(const JobChain& model, std::vector<double> r_grid = {},
                             double tolerance = 1e-10);

// Closed-form indices for a job with the given size law at attained service x,
// by enumerating give-up thresholds over the support. Independent of the
// chain/game machinery, which is what makes them useful as cross-checks.
double attained_service_index(const ServiceDist& service_dist, double x);
double slowdown_index(const ServiceDist& service_dist, double x);

// (r, V(x,r)) along a sorted penalty grid.
std::vector<std::pair<double, double>> cost_to_go_curve(const JobChain& model, int x,
                                                        const std::vector<double>& r_grid);

}  // namespace mg1
