#pragma once

// Episode metrics recomputed from step records, interquartile mean, percentile
// bootstrap intervals and batch summaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rta/errors.hpp"
#include "rta/trace.hpp"

namespace rta {

// Mean of the middle half of the probability mass. Sorted sample i owns the
// interval [4i, 4i+4) on a 4n scale; the band is [n, 3n).
inline double iqm(std::vector<double> xs) {
  if (xs.empty()) throw EmptySample("iqm: empty sample");
  std::sort(xs.begin(), xs.end());
  const auto n = static_cast<long long>(xs.size());
  double sum = 0.0;
  for (long long i = 0; i < n; ++i) {
    const long long c = std::min(4 * i + 4, 3 * n) - std::max(4 * i, n);
    if (c > 0) sum += static_cast<double>(c) * xs[static_cast<std::size_t>(i)];
  }
  return sum / static_cast<double>(2 * n);
}

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw EmptySample("mean: empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw EmptySample("quantile: empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
};

inline ConfidenceInterval bootstrap_ci(const std::vector<double>& xs, double confidence = 0.95,
                                       int resamples = 10000, std::uint64_t seed = 0) {
  if (xs.empty()) throw EmptySample("bootstrap_ci: empty sample");
  if (!(confidence > 0.0 && confidence < 1.0) || resamples < 1) {
    throw ConfigError("bootstrap_ci: confidence must lie in (0, 1) and resamples >= 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
  std::vector<double> stats(static_cast<std::size_t>(resamples));
  std::vector<double> draw(xs.size());
  for (auto& st : stats) {
    for (auto& d : draw) d = xs[pick(rng)];
    st = iqm(draw);
  }
  std::sort(stats.begin(), stats.end());
  const double tail = 0.5 * (1.0 - confidence);
  return {quantile_sorted(stats, tail), quantile_sorted(stats, 1.0 - tail)};
}

struct ViolationStats {
  std::size_t steps = 0;
  std::array<std::size_t, kNumConstraints> count{};
  std::size_t any_count = 0;
  ConstraintArray pct{};
  double any_pct = 0.0;
};

// A second counts as violating constraint i when h_i < 0.
inline ViolationStats violation_stats(const EpisodeTrace& tr) {
  ViolationStats v;
  v.steps = tr.steps.size();
  for (const auto& r : tr.steps) {
    bool any = false;
    for (std::size_t i = 0; i < kNumConstraints; ++i) {
      if (r.h[i] < 0.0) {
        ++v.count[i];
        any = true;
      }
    }
    if (any) ++v.any_count;
  }
  if (v.steps > 0) {
    const double n = static_cast<double>(v.steps);
    for (std::size_t i = 0; i < kNumConstraints; ++i) {
      v.pct[i] = 100.0 * static_cast<double>(v.count[i]) / n;
    }
    v.any_pct = 100.0 * static_cast<double>(v.any_count) / n;
  }
  return v;
}

struct EpisodeMetrics {
  double inspected_weight = 0.0;
  double total_reward = 0.0;
  double episode_length = 0.0;  // s
  double delta_v = 0.0;         // m/s, applied control
  double delta_v_desired = 0.0;
  double total_torque = 0.0;    // N m, applied control, per policy step
  double total_torque_desired = 0.0;
  Termination termination = Termination::Running;
  ViolationStats violations;
};

// Every quantity comes from the step records, so a stored trace reproduces
// the metrics exactly.
inline EpisodeMetrics compute_metrics(const EpisodeTrace& tr) {
  EpisodeMetrics m;
  const auto& h = tr.header;
  for (const auto& r : tr.steps) {
    m.delta_v += l1(r.u_act.force) / h.mass * h.inner_period;
    m.delta_v_desired += l1(r.u_des.force) / h.mass * h.inner_period;
    m.total_torque += l1(r.u_act.torque) * h.inner_period / h.policy_period;
    if (r.reward) {
      m.total_reward += r.reward->total();
      m.total_torque_desired += l1(r.u_des.torque);
    }
  }
  if (!tr.steps.empty()) {
    m.inspected_weight = tr.steps.back().inspected_weight;
    m.episode_length = tr.steps.back().t - h.initial.t;
    m.termination = tr.steps.back().termination;
  }
  m.violations = violation_stats(tr);
  return m;
}

struct MetricSummary {
  std::string name;
  double iqm = 0.0;
  ConfidenceInterval ci;
  double mean = 0.0;
};

struct BatchSummary {
  std::size_t episodes = 0;
  std::vector<MetricSummary> metrics;
  ConstraintArray violation_mean{};
  double any_violation_mean = 0.0;
  std::vector<std::pair<Termination, std::size_t>> terminations;
};

inline BatchSummary summarize(const std::vector<EpisodeMetrics>& eps, std::uint64_t seed = 0,
                              int resamples = 10000, double confidence = 0.95) {
  if (eps.empty()) throw EmptySample("summarize: no episodes");
  BatchSummary b;
  b.episodes = eps.size();
  auto column = [&](auto get) {
    std::vector<double> xs;
    xs.reserve(eps.size());
    for (const auto& e : eps) xs.push_back(get(e));
    return xs;
  };
  auto add = [&](const char* name, const std::vector<double>& xs) {
    b.metrics.push_back({name, iqm(xs), bootstrap_ci(xs, confidence, resamples, seed), mean(xs)});
  };
  add("inspected_weight", column([](const EpisodeMetrics& e) { return e.inspected_weight; }));
  add("total_reward", column([](const EpisodeMetrics& e) { return e.total_reward; }));
  add("episode_length", column([](const EpisodeMetrics& e) { return e.episode_length; }));
  add("delta_v", column([](const EpisodeMetrics& e) { return e.delta_v; }));
  add("delta_v_desired", column([](const EpisodeMetrics& e) { return e.delta_v_desired; }));
  add("total_torque", column([](const EpisodeMetrics& e) { return e.total_torque; }));
  add("total_torque_desired",
      column([](const EpisodeMetrics& e) { return e.total_torque_desired; }));
  add("violation_any_pct", column([](const EpisodeMetrics& e) { return e.violations.any_pct; }));

  for (std::size_t i = 0; i < kNumConstraints; ++i) {
    b.violation_mean[i] = mean(column([i](const EpisodeMetrics& e) { return e.violations.pct[i]; }));
  }
  b.any_violation_mean = mean(column([](const EpisodeMetrics& e) { return e.violations.any_pct; }));
  for (Termination t : {Termination::Success, Termination::Crash, Termination::OutOfBounds,
                        Termination::Timeout, Termination::PowerDepleted, Termination::Running}) {
    const auto c = static_cast<std::size_t>(
        std::count_if(eps.begin(), eps.end(), [t](const auto& e) { return e.termination == t; }));
    if (c > 0) b.terminations.emplace_back(t, c);
  }
  return b;
}

}  // namespace rta
