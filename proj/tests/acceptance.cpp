// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rta/asif_filter.hpp"
#include "rta/runner.hpp"
#include "rta/thermal_power.hpp"

using namespace rta;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string trace_text(const EpisodeTrace& tr) {
  std::ostringstream os;
  write_trace(os, tr);
  return os.str();
}

// Everything after the header line.
std::string trace_records(const EpisodeTrace& tr) {
  const std::string s = trace_text(tr);
  return s.substr(s.find('\n') + 1);
}

Outcome check_filter_run() {
  const RunConfig cfg;
  const CheckFilterReport on = run_check_filter(cfg, true);
  const CheckFilterReport off = run_check_filter(cfg, false);
  const bool pass = on.separation_ok && on.hard_ok && on.slacked_ok && on.seconds < 10.0 &&
                    off.violations.any_count >= 1;
  return {pass, fmt("RTA on: min separation %.3g m, min hard BC %.3g, min slacked BC-slack %.3g, "
                    "%.2f s; RTA off: %zu violating steps",
                    on.min_separation, on.min_hard_bc, on.min_slacked_margin, on.seconds,
                    off.violations.any_count)};
}

Outcome minimal_invasiveness() {
  AsifFilter f(CbfModel(), default_specs());
  const auto& vp = f.model().plant().vehicle;
  Vec6 lim;
  lim << Vec3::Constant(vp.thrust_max), Vec3::Constant(vp.torque_max);
  auto deep_interior = [&](const SimState& s) {
    for (const auto& e : f.model().evaluate_all(f.specs(), s)) {
      if (e.h <= 0.0 || e.row.affine - e.row.grad_u.cwiseAbs().dot(lim) < 1e-6) return false;
    }
    return true;
  };
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0), sym(-1.0, 1.0);
  double worst = 0.0;
  int accepted = 0;
  while (accepted < 1000) {
    SimState s;
    s.p = oracle::random_direction(rng) * (100 + 300 * u(rng));
    s.v = oracle::random_direction(rng) * 0.05 * u(rng);
    s.q = oracle::random_unit_quaternion(rng);
    s.omega = oracle::random_direction(rng) * 0.003 * u(rng);
    s.temp_c = -5 + 10 * u(rng);
    s.energy_kj = 4 + 5 * u(rng);
    s.theta_sun = 2 * std::numbers::pi * u(rng);
    if (!deep_interior(s)) continue;
    ++accepted;
    ControlInput ud;
    for (int j = 0; j < 3; ++j) {
      ud.force[j] = vp.thrust_max * sym(rng);
      ud.torque[j] = vp.torque_max * sym(rng);
    }
    const FilterResult r = f.filter(s, ud);
    worst = std::max(worst, (r.u_act.as_vector() - ud.as_vector()).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-8, fmt("1000 interior states, max |u_act - u_des| = %.3g", worst)};
}

Outcome gradient_conformance() {
  const oracle::ConformanceReport rep = oracle::gradient_conformance(CbfModel(), 1000, 77);
  std::size_t worst_i = 0;
  for (std::size_t i = 0; i < kNumConstraints; ++i) {
    if (rep.worst_rel[i] > rep.worst_rel[worst_i]) worst_i = i;
  }
  return {rep.worst() < 1e-4,
          fmt("%zu constraints x 1000 states, worst relative error %.3g (%s)", kNumConstraints,
              rep.worst(), std::string(constraint_label(kAllConstraints[worst_i])).c_str())};
}

Outcome free_flight_equivalence() {
  const PlantParams pp;
  const double n = pp.vehicle.mean_motion;
  EpisodeConfig cfg;
  const CbfModel model(pp, cfg.constraints);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    cfg.seed = seed;
    SimState s = reset_episode(cfg, model).state;
    // Initial states start at rest; add a drift so the comparison is not trivial.
    s.v = oracle::random_direction(rng) * u(rng);
    const Vec3 p0 = s.p, v0 = s.v;
    s.omega = Vec3::Zero();
    for (int k = 0; k < 500; ++k) s = step_rk4(pp, s, ControlInput{}, 1.0);
    worst = std::max(worst, (s.p - fft_position(n, p0, v0, 500.0)).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-6, fmt("50 initial states over 500 s, max component error %.3g m", worst)};
}

Outcome qp_oracle() {
  std::mt19937_64 rng(31);
  const AdmmQpSolver solver;
  double worst_u = 0.0, worst_kkt = 0.0;
  int optimal = 0;
  bool feasible = true;
  for (int i = 0; i < 500; ++i) {
    const QpProblem qp = oracle::random_asif_qp(rng);
    const QpResult r = solver.solve(qp);
    const oracle::ActiveSetResult ref = oracle::active_set_qp(qp);
    feasible = feasible && ref.feasible;
    worst_u = std::max(worst_u, (r.x.head<6>() - ref.x.head<6>()).cwiseAbs().maxCoeff());
    if (r.status == QpStatus::Optimal) {
      ++optimal;
      worst_kkt = std::max(worst_kkt, oracle::kkt_certificate(qp, r.x, r.lambda).worst());
    }
  }
  return {feasible && worst_u < 1e-5 && worst_kkt < 1e-5,
          fmt("500 QPs, max |u - u_oracle| %.3g, %d Optimal, worst KKT residual %.3g", worst_u,
              optimal, worst_kkt)};
}

Outcome thermal_power_zeros() {
  const ThermalNodeParams th;
  const PowerParams pw;
  const Vec3 n(1, 0, 0);
  const double q = std::abs(heat_total(th, full_sun_equilibrium_temperature(th), n, n));
  const double e = std::abs(energy_deriv(pw, break_even_incidence(pw)));
  return {q < 1e-9 && e < 1e-9,
          fmt("heat at equilibrium %.3g W, energy rate at break-even %.3g kJ/s", q, e)};
}

Outcome zero_policy_batch() {
  RunConfig run;
  run.episode.rta_enabled = true;
  const int n = 100;
  std::vector<std::uint64_t> first(n), second(n);
  std::vector<EpisodeMetrics> metrics;
  bool monotone = true;
  double longest = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < n; ++i) {
    const EpisodeOutcome o = run_one(run, "zero", static_cast<std::uint64_t>(i));
    double prev = 0.0;
    for (const auto& r : o.trace.steps) {
      if (r.inspected_weight < prev) monotone = false;
      prev = r.inspected_weight;
    }
    longest = std::max(longest, o.metrics.episode_length);
    metrics.push_back(o.metrics);
    first[static_cast<std::size_t>(i)] = fnv1a(trace_text(o.trace));
  }
  const double secs = seconds_since(t0);
  const BatchSummary sum = summarize(metrics, run.batch.bootstrap_seed,
                                     run.batch.bootstrap_resamples, run.batch.confidence);
  const double sep =
      sum.violation_mean[static_cast<std::size_t>(index_of(ConstraintId::Collision))];
  for (int i = 0; i < n; ++i) {
    second[static_cast<std::size_t>(i)] =
        fnv1a(trace_text(run_one(run, "zero", static_cast<std::uint64_t>(i)).trace));
  }
  const bool identical = first == second;
  return {sep == 0.0 && monotone && longest <= 12236.0 && identical && secs < 120.0,
          fmt("separation violations %.3g%%, w_p monotone %s, longest episode %.0f s, reruns "
              "identical %s, batch %.1f s",
              sep, monotone ? "yes" : "no", longest, identical ? "yes" : "no", secs)};
}

Outcome metrics_oracle() {
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<int> size(1, 200);
  std::normal_distribution<double> g(0.0, 10.0);
  double worst = 0.0;
  bool deterministic = true, contains = true;
  for (int k = 0; k < 100; ++k) {
    std::vector<double> xs(static_cast<std::size_t>(size(rng)));
    for (double& x : xs) x = g(rng);
    const double m = iqm(xs);
    worst = std::max(worst, std::abs(m - oracle::iqm_by_replication(xs)));
    const ConfidenceInterval a = bootstrap_ci(xs, 0.95, 2000, 7);
    const ConfidenceInterval b = bootstrap_ci(xs, 0.95, 2000, 7);
    deterministic = deterministic && a.lo == b.lo && a.hi == b.hi;
    contains = contains && a.lo <= m && m <= a.hi;
  }
  return {worst < 1e-12 && deterministic && contains,
          fmt("100 lists, max IQM error %.3g, CI deterministic %s, contains IQM %s", worst,
              deterministic ? "yes" : "no", contains ? "yes" : "no")};
}

Outcome bridge_equivalence() {
  RunConfig run;
  const std::string stub =
      "external:read h; echo '{\"v\":1}'; while read l; do echo "
      "'{\"F\":[0,0,0],\"tau\":[0,0,0]}'; done";
  bool same = true;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const std::string a = trace_records(run_one(run, "zero", seed).trace);
    const std::string b = trace_records(run_one(run, stub, seed).trace);
    same = same && a == b;
  }
  return {same, fmt("zero-action stub vs zero policy, 3 seeds: step records %s",
                    same ? "byte-identical" : "differ")};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"safety filter run (check-filter)", check_filter_run},
      {"minimal invasiveness", minimal_invasiveness},
      {"gradient conformance", gradient_conformance},
      {"closed-form free flight vs RK4", free_flight_equivalence},
      {"QP oracle equivalence", qp_oracle},
      {"thermal/power analytic zeros", thermal_power_zeros},
      {"zero-policy batch bookkeeping", zero_policy_batch},
      {"metrics oracle", metrics_oracle},
      {"external policy bridge", bridge_equivalence},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s  %zu. %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
