#include "mg1/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

namespace mg1 {

std::tuple<double, double, double> holding_cost_snapshot(const SystemState& state,
                                                         const JobChain& model) {
  double hp = 0, hnp = 0;
  for (const Job& j : state.jobs) {
    if (model.preemptible[j.state])
      hp += model.holding_cost[j.state];
    else
      hnp += model.holding_cost[j.state];
  }
  return {hp + hnp, hp, hnp};
}

std::tuple<double, double, double> rwork_snapshot(const SystemState& state,
                                                  const JobChain& model,
                                                  const RankTable& table, double r) {
  int g = -1;
  for (size_t i = 0; i < table.r_grid.size(); ++i) {
    if (std::abs(table.r_grid[i] - r) <= 1e-9 * std::max(1.0, r)) {
      g = static_cast<int>(i);
      break;
    }
  }
  if (g < 0) throw std::invalid_argument("rwork_snapshot: r is not a grid value");
  double wp = 0, wnp = 0;
  for (const Job& j : state.jobs) {
    double t = table.serve_moments[j.state][g];
    if (model.preemptible[j.state])
      wp += t;
    else
      wnp += t;
  }
  return {wp + wnp, wp, wnp};
}

double rwork_integral(const std::vector<double>& r, const std::vector<double>& W) {
  if (r.empty() || r.size() != W.size())
    throw std::invalid_argument("rwork_integral: mismatched grid and values");
  if (r.front() <= 0.0) throw std::invalid_argument("rwork_integral: grid must be positive");
  for (size_t i = 1; i < r.size(); ++i)
    if (r[i] <= r[i - 1])
      throw std::invalid_argument("rwork_integral: grid must be strictly increasing");

  // Head: W grows at least quadratically from the origin, so fit W_1 (r/r_1)^2
  // below the first sample; its integral against 1/r^2 is W_1 / r_1.
  double total = W.front() / r.front();
  // Interior: substitute u = ln r, giving the integrand W(r)/r on a uniform-ish
  // log grid; trapezoid there.
  for (size_t i = 1; i < r.size(); ++i) {
    double du = std::log(r[i]) - std::log(r[i - 1]);
    total += 0.5 * du * (W[i] / r[i] + W[i - 1] / r[i - 1]);
  }
  // Tail: W(r) is nondecreasing and bounded by total work, freeze it at W_max.
  total += W.back() / r.back();
  return total;
}

double integral_identity_check(const std::vector<CurvePoint>& curve, double mean_HP) {
  if (curve.empty()) throw std::invalid_argument("integral_identity_check: empty curve");
  std::vector<double> r, w;
  r.reserve(curve.size());
  w.reserve(curve.size());
  for (const CurvePoint& p : curve) {
    r.push_back(p.r);
    w.push_back(p.mean_WP);
  }
  double integral = rwork_integral(r, w);
  if (mean_HP == 0.0)
    return integral == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(integral - mean_HP) / mean_HP;
}

MeanCI mean_ci(const std::vector<double>& xs) {
  MeanCI out;
  out.n = static_cast<int>(xs.size());
  if (xs.empty()) return out;
  double sum = 0;
  for (double x : xs) sum += x;
  out.mean = sum / out.n;
  if (out.n < 2) return out;
  double ss = 0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  double var = ss / (out.n - 1);
  out.se = std::sqrt(var / out.n);
  boost::math::students_t dist(out.n - 1);
  out.ci = boost::math::quantile(dist, 0.975) * out.se;
  return out;
}

MeanCI sampled_rwork_ci(const MetricsReport& report, int g) {
  std::vector<double> w(report.bm_WS.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = report.bm_WS[k][g];
  return mean_ci(w);
}

MetricsReport pool_reports(const std::vector<MetricsReport>& runs) {
  if (runs.empty()) throw std::invalid_argument("pool_reports: no runs");
  if (runs.size() == 1) return runs.front();
  const std::size_t G = runs.front().WP_curve.size();
  for (const MetricsReport& r : runs) {
    if (r.WP_curve.size() != G)
      throw std::invalid_argument("pool_reports: r grids differ across runs");
    for (std::size_t g = 0; g < G; ++g)
      if (r.WP_curve[g].r != runs.front().WP_curve[g].r)
        throw std::invalid_argument("pool_reports: r grids differ across runs");
  }

  MetricsReport out;
  out.recycle_count.assign(G, 0);
  out.rho = runs.front().rho;
  for (const MetricsReport& r : runs) {
    auto app = [](std::vector<double>& dst, const std::vector<double>& src) {
      dst.insert(dst.end(), src.begin(), src.end());
    };
    app(out.bm_H, r.bm_H);
    app(out.bm_HP, r.bm_HP);
    app(out.bm_HNP, r.bm_HNP);
    app(out.bm_N, r.bm_N);
    app(out.bm_T, r.bm_T);
    app(out.bm_T_count, r.bm_T_count);
    out.bm_WP.insert(out.bm_WP.end(), r.bm_WP.begin(), r.bm_WP.end());
    out.bm_WNP.insert(out.bm_WNP.end(), r.bm_WNP.begin(), r.bm_WNP.end());
    out.bm_WS.insert(out.bm_WS.end(), r.bm_WS.begin(), r.bm_WS.end());
    out.window += r.window;
    out.completions += r.completions;
    out.busy_time += r.busy_time;
    out.overloaded = out.overloaded || r.overloaded;
    out.recycle_violations += r.recycle_violations;
    for (std::size_t g = 0; g < G; ++g) out.recycle_count[g] += r.recycle_count[g];
    out.events.batches += r.events.batches;
    out.events.arrivals += r.events.arrivals;
    out.events.transitions += r.events.transitions;
    out.events.completions += r.events.completions;
    out.events.decisions += r.events.decisions;
    out.events.recycles += r.events.recycles;
  }

  MeanCI m = mean_ci(out.bm_H);
  out.mean_H = m.mean;
  out.ci_H = m.ci;
  m = mean_ci(out.bm_HP);
  out.mean_HP = m.mean;
  out.ci_HP = m.ci;
  m = mean_ci(out.bm_HNP);
  out.mean_HNP = m.mean;
  out.ci_HNP = m.ci;
  m = mean_ci(out.bm_N);
  out.mean_N = m.mean;
  out.ci_N = m.ci;
  out.time_avg_N_se = m.se;

  out.completion_rate = out.window > 0 ? out.completions / out.window : 0.0;
  double t_sum = 0, t_cnt = 0;
  std::vector<double> t_means;
  for (std::size_t k = 0; k < out.bm_T.size(); ++k) {
    t_sum += out.bm_T[k] * out.bm_T_count[k];
    t_cnt += out.bm_T_count[k];
    if (out.bm_T_count[k] > 0) t_means.push_back(out.bm_T[k]);
  }
  out.mean_T = t_cnt > 0 ? t_sum / t_cnt : 0.0;
  out.ci_T = mean_ci(t_means).ci;

  {  // equal-weight combination of per-run arrival snapshots
    double s = 0, var = 0;
    for (const MetricsReport& r : runs) {
      s += r.arrival_avg_N;
      var += r.arrival_avg_se * r.arrival_avg_se;
    }
    out.arrival_avg_N = s / runs.size();
    out.arrival_avg_se = std::sqrt(var) / runs.size();
  }

  out.WP_curve.resize(G);
  std::vector<double> col(out.bm_WP.size());
  for (std::size_t g = 0; g < G; ++g) {
    CurvePoint& p = out.WP_curve[g];
    p.r = runs.front().WP_curve[g].r;
    for (std::size_t k = 0; k < out.bm_WP.size(); ++k) col[k] = out.bm_WP[k][g];
    m = mean_ci(col);
    p.mean_WP = m.mean;
    p.ci_WP = m.ci;
    for (std::size_t k = 0; k < out.bm_WNP.size(); ++k) col[k] = out.bm_WNP[k][g];
    m = mean_ci(col);
    p.mean_WNP = m.mean;
    p.ci_WNP = m.ci;
  }
  if (G > 0) {
    out.integral_HP = 0;
    std::vector<double> r(G), w(G);
    for (std::size_t g = 0; g < G; ++g) {
      r[g] = out.WP_curve[g].r;
      w[g] = out.WP_curve[g].mean_WP;
    }
    out.integral_HP = rwork_integral(r, w);
    out.rel_err_integral = integral_identity_check(out.WP_curve, out.mean_HP);
  }
  return out;
}

namespace {

bool overlaps(double ma, double ca, double mb, double cb) {
  return std::abs(ma - mb) <= ca + cb;
}

}  // namespace

InvarianceReport invariance_checks(const std::vector<MetricsReport>& reports,
                                   const std::vector<std::string>& names,
                                   std::vector<int> grid_points) {
  if (reports.size() != names.size())
    throw std::invalid_argument("invariance_checks: reports and names differ in length");
  InvarianceReport out;
  if (reports.size() < 2) return out;

  size_t G = reports.front().WP_curve.size();
  for (const MetricsReport& rep : reports) {
    if (rep.WP_curve.size() != G)
      throw std::invalid_argument("invariance_checks: r grids differ across reports");
    for (size_t g = 0; g < G; ++g)
      if (rep.WP_curve[g].r != reports.front().WP_curve[g].r)
        throw std::invalid_argument("invariance_checks: r grids differ across reports");
  }
  if (grid_points.empty() && G > 0) {
    int quarter = static_cast<int>(G) / 4;
    grid_points = {quarter, static_cast<int>(G) / 2, 3 * quarter};
    std::sort(grid_points.begin(), grid_points.end());
    grid_points.erase(std::unique(grid_points.begin(), grid_points.end()), grid_points.end());
  }
  for (int g : grid_points)
    if (g < 0 || g >= static_cast<int>(G))
      throw std::invalid_argument("invariance_checks: grid point out of range");

  for (size_t i = 0; i < reports.size(); ++i) {
    for (size_t j = i + 1; j < reports.size(); ++j) {
      const MetricsReport& a = reports[i];
      const MetricsReport& b = reports[j];
      if (!overlaps(a.mean_HNP, a.ci_HNP, b.mean_HNP, b.ci_HNP)) {
        out.failures.push_back(
            {names[i], names[j], "H_NP", a.mean_HNP, a.ci_HNP, b.mean_HNP, b.ci_HNP});
      }
      for (int g : grid_points) {
        const CurvePoint& pa = a.WP_curve[g];
        const CurvePoint& pb = b.WP_curve[g];
        if (!overlaps(pa.mean_WNP, pa.ci_WNP, pb.mean_WNP, pb.ci_WNP)) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "W_NP(r=%.6g)", pa.r);
          out.failures.push_back(
              {names[i], names[j], buf, pa.mean_WNP, pa.ci_WNP, pb.mean_WNP, pb.ci_WNP});
        }
      }
    }
  }
  out.ok = out.failures.empty();
  return out;
}

LittleCheck little_law_check(const MetricsReport& report) {
  LittleCheck out;
  size_t n = report.bm_N.size();
  if (n < 2 || n != report.bm_T.size() || n != report.bm_T_count.size() ||
      report.completions <= 0 || report.window <= 0 || report.mean_N <= 0)
    return out;
  out.applicable = true;
  out.rel_error =
      std::abs(report.mean_N - report.completion_rate * report.mean_T) / report.mean_N;

  // Per-window defect D_k = N_k - lambda_k T_k; under Little's law E[D] = 0.
  double wlen = report.window / static_cast<double>(n);
  std::vector<double> d(n);
  for (size_t k = 0; k < n; ++k) {
    double lam_k = report.bm_T_count[k] / wlen;
    d[k] = report.bm_N[k] - lam_k * report.bm_T[k];
  }
  MeanCI mc = mean_ci(d);
  out.z = mc.se > 0 ? std::abs(mc.mean) / mc.se : 0.0;
  return out;
}

double analytic_mean_HNP(const JobChain& model, double batch_rate) {
  int n = model.num_states();
  // c(x) = expected nonpreemptible holding cost accrued by one job started in x:
  // c = b + P c with b(x) = [x nonpreemptible] h(x) m(x).
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b(n);
  for (int x = 0; x < n; ++x) {
    b(x) = model.preemptible[x] ? 0.0 : model.holding_cost[x] * model.sojourn[x].mean();
    for (const KernelEntry& e : model.kernel[x])
      if (e.to != JobChain::kDone) A(x, e.to) -= e.p;
  }
  Eigen::VectorXd c = A.partialPivLu().solve(b);
  double per_batch = 0;
  for (const BatchEntry& be : model.batches) {
    double s = 0;
    for (int x0 : be.initial) s += c(x0);
    per_batch += be.p * s;
  }
  return batch_rate * per_batch;
}

}  // namespace mg1
