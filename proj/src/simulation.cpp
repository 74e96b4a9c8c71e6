#include "mg1/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>

#include "mg1/rng.hpp"

namespace mg1 {

std::vector<int> generate_batch(const std::vector<BatchEntry>& law, std::mt19937_64& rng) {
  if (law.empty()) throw std::invalid_argument("generate_batch: empty batch law");
  double u = uniform01(rng);
  double cum = 0;
  for (const BatchEntry& e : law) {
    cum += e.p;
    if (u <= cum) return e.initial;
  }
  return law.back().initial;  // cum can round to just below 1
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Grid index range [lo, hi) recycled by a transition from -> to. Through the
// give-up tie rule, t(x, r_g) > 0 iff rank(x) < r_g, so first_positive marks
// exactly where a preemptible state stops being r-bad.
std::pair<int, int> recycle_range(const RankTable& table, const JobChain& model, int from,
                                  int to) {
  if (!model.preemptible[from]) return {0, 0};  // nonpreemptible is never r-bad
  int hi = table.first_positive[from];
  if (to == JobChain::kDone) return {0, 0};  // done is not r-good
  int lo = model.preemptible[to] ? table.first_positive[to] : 0;
  return lo < hi ? std::pair{lo, hi} : std::pair{0, 0};
}

struct SimJob {
  int id = 0;
  int state = 0;
  double arrival = 0;
  double attained = 0;
  int batch = 0;
  std::vector<std::pair<int, double>> path;  // presampled (state, duration) to done
  std::vector<double> entry;                 // attained service at which each segment
                                             // begins; one extra slot for the total
  std::size_t seg = 0;
  double seg_left = 0;
};

class EventLogger {
 public:
  explicit EventLogger(const std::string& path) {
    if (path.empty()) return;
    f_ = std::fopen(path.c_str(), "w");
    if (!f_) throw std::runtime_error("cannot open event log: " + path);
  }
  ~EventLogger() {
    if (f_) std::fclose(f_);
  }
  EventLogger(const EventLogger&) = delete;
  EventLogger& operator=(const EventLogger&) = delete;

  bool on() const { return f_ != nullptr; }

  void arrival(double t, const std::vector<int>& ids, const std::vector<int>& states) {
    std::fprintf(f_, "{\"t\":%.17g,\"kind\":\"BatchArrival\",\"jobs\":", t);
    ints(ids);
    std::fputs(",\"states\":", f_);
    ints(states);
    std::fputs("}\n", f_);
  }
  void transition(double t, int job, int from, int to) {
    std::fprintf(f_, "{\"t\":%.17g,\"kind\":\"Transition\",\"job\":%d,\"from\":%d,\"to\":%d}\n",
                 t, job, from, to);
  }
  void completion(double t, int job, int from) {
    std::fprintf(f_, "{\"t\":%.17g,\"kind\":\"Completion\",\"job\":%d,\"from\":%d}\n", t, job,
                 from);
  }
  void recycle(double t, int job, double r) {
    std::fprintf(f_, "{\"t\":%.17g,\"kind\":\"Recycle\",\"job\":%d,\"r\":%.17g}\n", t, job, r);
  }
  void decision(double t, const std::optional<int>& job) {
    if (job)
      std::fprintf(f_, "{\"t\":%.17g,\"kind\":\"Decision\",\"job\":%d}\n", t, *job);
    else
      std::fprintf(f_, "{\"t\":%.17g,\"kind\":\"Decision\",\"job\":null}\n", t);
  }

 private:
  void ints(const std::vector<int>& xs) {
    std::fputc('[', f_);
    for (std::size_t i = 0; i < xs.size(); ++i)
      std::fprintf(f_, i ? ",%d" : "%d", xs[i]);
    std::fputc(']', f_);
  }
  std::FILE* f_ = nullptr;
};

}  // namespace

std::vector<double> detect_recycles(const RankTable& table, const JobChain& model, int from,
                                    int to) {
  int n = model.num_states();
  if (from < 0 || from >= n)
    throw std::invalid_argument("detect_recycles: from-state out of range");
  if (to != JobChain::kDone && (to < 0 || to >= n))
    throw std::invalid_argument("detect_recycles: to-state out of range");
  auto [lo, hi] = recycle_range(table, model, from, to);
  std::vector<double> out;
  out.reserve(hi - lo);
  for (int g = lo; g < hi; ++g) out.push_back(table.r_grid[g]);
  return out;
}

MetricsReport run(const JobChain& model, Policy& policy, const RankTable& table,
                  const RunOptions& opts) {
  if (opts.seed == 0) throw std::invalid_argument("run: seed must be nonzero");
  if (!(opts.horizon > 0)) throw std::invalid_argument("run: horizon must be positive");
  const double warmup = opts.warmup < 0 ? 0.1 * opts.horizon : opts.warmup;
  if (warmup >= opts.horizon) throw std::invalid_argument("run: horizon must exceed warmup");
  if (opts.num_windows < 1) throw std::invalid_argument("run: need at least one window");
  const double rate = opts.arrival_rate < 0 ? model.arrival_rate : opts.arrival_rate;
  if (!(rate >= 0)) throw std::invalid_argument("run: arrival rate must be nonnegative");
  if (rate > 0 && model.batches.empty())
    throw std::invalid_argument("run: positive arrival rate with an empty batch law");

  const int n = model.num_states();
  const int G = table.grid_size();
  if (static_cast<int>(table.serve_moments.size()) != n ||
      static_cast<int>(table.first_positive.size()) != n)
    throw std::invalid_argument("run: rank table does not match the model");
  for (int x : opts.initial_jobs) {
    if (x < 0 || x >= n) throw std::invalid_argument("run: initial state out of range");
    if (!model.preemptible[x])
      throw std::invalid_argument("run: initial jobs must start in preemptible states");
  }

  MetricsReport rep;
  rep.recycle_count.assign(G, 0);

  double work_per_batch = 0;
  for (const BatchEntry& b : model.batches) {
    double w = 0;
    for (int x : b.initial) w += table.serve_to_done[x];
    work_per_batch += b.p * w;
  }
  rep.rho = rate * work_per_batch;
  rep.overloaded = rep.rho >= 1.0;
  if (rep.overloaded && !opts.quiet)
    std::fprintf(stderr, "warning: offered load rho = %.6g >= 1, no steady state\n", rep.rho);

  std::mt19937_64 arrivals_rng = substream(opts.seed, Stream::Arrivals);
  std::mt19937_64 mix_rng = substream(opts.seed, Stream::BatchMix);
  EventLogger log(opts.event_log);

  std::vector<SimJob> jobs;
  int srv = -1;  // in-service job id
  double now = 0;
  int next_id = 0, batch_no = 0;

  // Instantaneous values, updated only when some job's state changes. The
  // integer count per grid point backs the exact recycle-at-zero check.
  double curHP = 0, curHNP = 0;
  std::vector<double> curWP(G, 0.0), curWNP(G, 0.0);
  std::vector<int> cntWP(G, 0);

  // Sampled total r-work: sum over jobs of the service their presampled paths
  // still need before first reaching rank >= r_g or completing. Unlike the
  // expected-form curves it drains continuously while the server works below
  // the threshold, so it stays unbiased for jobs paused mid-segment.
  std::vector<double> curWS(G, 0.0);
  int depl_from = G;  // first grid index draining while the current job is served

  const int K = opts.num_windows;
  const double window = opts.horizon - warmup;
  const double wlen = window / K;
  int win = 0;
  double aHP = 0, aHNP = 0, aN = 0, aBusy = 0, aT = 0, arrN = 0;
  long long aTn = 0, arrCnt = 0;
  std::vector<double> aWP(G, 0.0), aWNP(G, 0.0), aWS(G, 0.0);
  double totT = 0;
  long long totTn = 0;
  std::vector<double> bmArrMean;  // per-window arrival-sampled N, windows with arrivals

  auto flush_window = [&](double len) {
    rep.bm_HP.push_back(aHP / len);
    rep.bm_HNP.push_back(aHNP / len);
    rep.bm_H.push_back((aHP + aHNP) / len);
    rep.bm_N.push_back(aN / len);
    rep.bm_T.push_back(aTn > 0 ? aT / aTn : 0.0);
    rep.bm_T_count.push_back(static_cast<double>(aTn));
    std::vector<double> wp(G), wnp(G), ws(G);
    for (int g = 0; g < G; ++g) wp[g] = aWP[g] / len;
    for (int g = 0; g < G; ++g) wnp[g] = aWNP[g] / len;
    for (int g = 0; g < G; ++g) ws[g] = aWS[g] / len;
    rep.bm_WP.push_back(std::move(wp));
    rep.bm_WNP.push_back(std::move(wnp));
    rep.bm_WS.push_back(std::move(ws));
    if (arrCnt > 0) bmArrMean.push_back(arrN / arrCnt);
    rep.busy_time += aBusy;
    totT += aT;
    totTn += aTn;
    rep.arrival_avg_N += arrN;  // reused as a sum until the end
    rep.arrival_avg_se += arrCnt;
    aHP = aHNP = aN = aBusy = aT = arrN = 0;
    aTn = arrCnt = 0;
    std::fill(aWP.begin(), aWP.end(), 0.0);
    std::fill(aWNP.begin(), aWNP.end(), 0.0);
    std::fill(aWS.begin(), aWS.end(), 0.0);
  };

  // The sampled curve drains at unit rate for g >= depl_from even outside the
  // measurement window, so every chunk updates it; the linear decrease makes
  // the time integral curWS * tau - tau^2 / 2 per chunk.
  auto advance_to = [&](double to) {
    while (now < to) {
      bool measured = now >= warmup && win < K;
      double t2, start = 0, edge = 0;
      if (now < warmup) {
        t2 = std::min(to, warmup);
      } else if (win >= K) {
        t2 = to;
      } else {
        start = warmup + win * wlen;
        edge = win == K - 1 ? opts.horizon : start + wlen;
        t2 = std::min(to, edge);
      }
      double tau = t2 - now;
      if (tau > 0) {
        if (measured) {
          aHP += curHP * tau;
          aHNP += curHNP * tau;
          aN += static_cast<double>(jobs.size()) * tau;
          if (srv >= 0) aBusy += tau;
          for (int g = 0; g < G; ++g) aWP[g] += curWP[g] * tau;
          for (int g = 0; g < G; ++g) aWNP[g] += curWNP[g] * tau;
          for (int g = 0; g < G; ++g) aWS[g] += curWS[g] * tau;
          for (int g = depl_from; g < G; ++g) aWS[g] -= 0.5 * tau * tau;
        }
        for (int g = depl_from; g < G; ++g) curWS[g] -= tau;
      }
      now = t2;
      if (measured && now == edge) {
        flush_window(edge - start);
        ++win;
      }
    }
  };

  auto add_contrib = [&](int x) {
    const std::vector<double>& t = table.serve_moments[x];
    if (model.preemptible[x]) {
      curHP += model.holding_cost[x];
      for (int g = table.first_positive[x]; g < G; ++g) {
        curWP[g] += t[g];
        ++cntWP[g];
      }
    } else {
      curHNP += model.holding_cost[x];
      for (int g = table.first_positive[x]; g < G; ++g) curWNP[g] += t[g];
    }
  };
  auto remove_contrib = [&](int x) {
    const std::vector<double>& t = table.serve_moments[x];
    if (model.preemptible[x]) {
      curHP -= model.holding_cost[x];
      for (int g = table.first_positive[x]; g < G; ++g) {
        curWP[g] -= t[g];
        --cntWP[g];
      }
    } else {
      curHNP -= model.holding_cost[x];
      for (int g = table.first_positive[x]; g < G; ++g) curWNP[g] -= t[g];
    }
  };

  auto find_job = [&](int id) -> int {
    for (std::size_t i = 0; i < jobs.size(); ++i)
      if (jobs[i].id == id) return static_cast<int>(i);
    return -1;
  };

  // Sampled r-work of a fresh job: the entry time of its first visit to a
  // state of rank >= r_g, or its whole duration when no visit exists. The
  // first qualifying segment index is nondecreasing in g, hence one cursor.
  auto add_sampled = [&](const SimJob& j) {
    std::size_t i = 0;
    for (int g = 0; g < G; ++g) {
      while (i < j.path.size() && table.first_positive[j.path[i].first] <= g) ++i;
      curWS[g] += i < j.path.size() ? j.entry[i] : j.entry.back();
    }
  };

  auto decide_now = [&]() {
    SystemState st;
    st.clock = now;
    st.jobs.reserve(jobs.size());
    for (const SimJob& j : jobs)
      st.jobs.push_back(Job{j.id, j.state, j.arrival, j.attained, j.batch});
    if (srv >= 0) st.in_service = srv;
    PolicyDecision d = policy.decide(st, table);
    ++rep.events.decisions;
    if (log.on()) log.decision(now, d.chosen);
    if (!d.chosen) {
      if (!jobs.empty()) throw std::logic_error("policy idled with jobs present");
      srv = -1;
      return;
    }
    if (find_job(*d.chosen) < 0)
      throw std::logic_error("policy chose a job that is not present");
    srv = *d.chosen;
  };

  auto spawn = [&](int state, double t, int batch) -> SimJob {
    SimJob j;
    j.id = next_id++;
    j.state = state;
    j.arrival = t;
    j.batch = batch;
    std::mt19937_64 prng =
        substream(opts.seed, Stream::JobPath, static_cast<std::uint64_t>(j.id));
    j.path = sample_path(model, state, prng);
    j.seg_left = j.path[0].second;
    j.entry.resize(j.path.size() + 1);
    j.entry[0] = 0;
    for (std::size_t i = 0; i < j.path.size(); ++i)
      j.entry[i + 1] = j.entry[i] + j.path[i].second;
    return j;
  };

  if (!opts.initial_jobs.empty()) {
    std::vector<int> ids;
    for (int x : opts.initial_jobs) {
      SimJob j = spawn(x, 0.0, batch_no);
      add_contrib(x);
      add_sampled(j);
      ids.push_back(j.id);
      jobs.push_back(std::move(j));
    }
    ++batch_no;
    rep.events.batches += 1;
    rep.events.arrivals += static_cast<long long>(opts.initial_jobs.size());
    if (log.on()) log.arrival(0.0, ids, opts.initial_jobs);
    decide_now();
  }
  double next_batch = rate > 0 ? exponential(arrivals_rng, rate) : kInf;

  while (true) {
    int sidx = srv >= 0 ? find_job(srv) : -1;
    depl_from = sidx >= 0 ? table.first_positive[jobs[sidx].state] : G;
    double t_seg = sidx >= 0 ? now + jobs[sidx].seg_left : kInf;
    double t_next = std::min(t_seg, next_batch);
    if (t_next >= opts.horizon) {
      advance_to(opts.horizon);
      break;
    }
    double t_prev = now;
    advance_to(t_next);
    if (sidx >= 0) {
      jobs[sidx].attained += now - t_prev;
      jobs[sidx].seg_left -= now - t_prev;
    }

    if (t_seg <= next_batch) {  // ties: the service segment ends first
      SimJob& j = jobs[sidx];
      int from = j.state;
      j.seg_left = 0;
      ++j.seg;
      remove_contrib(from);
      if (j.seg == j.path.size()) {
        ++rep.events.completions;
        if (log.on()) log.completion(now, j.id, from);
        if (now >= warmup) {
          aT += now - j.arrival;
          ++aTn;
        }
        jobs[sidx] = std::move(jobs.back());
        jobs.pop_back();
        srv = -1;
        decide_now();
      } else {
        int to = j.path[j.seg].first;
        ++rep.events.transitions;
        if (log.on()) log.transition(now, j.id, from, to);
        auto [lo, hi] = recycle_range(table, model, from, to);
        if (lo < hi) {
          ++rep.events.recycles;
          // The job re-enters the below-threshold region for these g: its
          // sampled r-work jumps from zero to the service left before the
          // next rank >= r_g visit, as at birth but net of attained service.
          std::size_t nx = j.seg + 1;
          for (int g = lo; g < hi; ++g) {
            ++rep.recycle_count[g];
            if (cntWP[g] > 0) ++rep.recycle_violations;
            while (nx < j.path.size() && table.first_positive[j.path[nx].first] <= g) ++nx;
            curWS[g] += (nx < j.path.size() ? j.entry[nx] : j.entry.back()) - j.attained;
            if (log.on()) log.recycle(now, j.id, table.r_grid[g]);
          }
        }
        j.state = to;
        j.seg_left = j.path[j.seg].second;
        add_contrib(to);
        if (model.preemptible[to]) decide_now();
      }
    } else {  // batch arrival
      if (now >= warmup) {  // sampled before admission (PASTA material)
        arrN += static_cast<double>(jobs.size());
        ++arrCnt;
      }
      std::vector<int> born = generate_batch(model.batches, mix_rng);
      ++rep.events.batches;
      std::vector<int> ids;
      ids.reserve(born.size());
      for (int x : born) {
        SimJob j = spawn(x, now, batch_no);
        add_contrib(x);
        add_sampled(j);
        ids.push_back(j.id);
        jobs.push_back(std::move(j));
        ++rep.events.arrivals;
      }
      ++batch_no;
      if (log.on()) log.arrival(now, ids, born);
      next_batch = now + exponential(arrivals_rng, rate);
      int cur = srv >= 0 ? find_job(srv) : -1;
      if (cur < 0 || model.preemptible[jobs[cur].state]) decide_now();
    }
  }

  // ---- report assembly
  MeanCI m;
  m = mean_ci(rep.bm_H);
  rep.mean_H = m.mean;
  rep.ci_H = m.ci;
  m = mean_ci(rep.bm_HP);
  rep.mean_HP = m.mean;
  rep.ci_HP = m.ci;
  m = mean_ci(rep.bm_HNP);
  rep.mean_HNP = m.mean;
  rep.ci_HNP = m.ci;
  m = mean_ci(rep.bm_N);
  rep.mean_N = m.mean;
  rep.ci_N = m.ci;
  rep.time_avg_N_se = m.se;

  rep.window = window;
  rep.completions = static_cast<double>(totTn);
  rep.completion_rate = totTn / window;
  rep.mean_T = totTn > 0 ? totT / totTn : 0.0;
  std::vector<double> t_means;
  for (std::size_t k = 0; k < rep.bm_T.size(); ++k)
    if (rep.bm_T_count[k] > 0) t_means.push_back(rep.bm_T[k]);
  rep.ci_T = mean_ci(t_means).ci;

  double arr_total = rep.arrival_avg_N, arr_count = rep.arrival_avg_se;
  rep.arrival_avg_N = arr_count > 0 ? arr_total / arr_count : 0.0;
  rep.arrival_avg_se = mean_ci(bmArrMean).se;

  rep.WP_curve.resize(G);
  std::vector<double> col(rep.bm_WP.size());
  for (int g = 0; g < G; ++g) {
    CurvePoint& p = rep.WP_curve[g];
    p.r = table.r_grid[g];
    for (std::size_t k = 0; k < rep.bm_WP.size(); ++k) col[k] = rep.bm_WP[k][g];
    m = mean_ci(col);
    p.mean_WP = m.mean;
    p.ci_WP = m.ci;
    for (std::size_t k = 0; k < rep.bm_WNP.size(); ++k) col[k] = rep.bm_WNP[k][g];
    m = mean_ci(col);
    p.mean_WNP = m.mean;
    p.ci_WNP = m.ci;
  }
  if (G > 0) {
    rep.integral_HP = rwork_integral(table.r_grid, [&] {
      std::vector<double> w(G);
      for (int g = 0; g < G; ++g) w[g] = rep.WP_curve[g].mean_WP;
      return w;
    }());
    rep.rel_err_integral = integral_identity_check(rep.WP_curve, rep.mean_HP);
  }
  return rep;
}

}  // namespace mg1
