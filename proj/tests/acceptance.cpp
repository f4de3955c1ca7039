// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aoi/analysis.hpp"
#include "aoi/estimator.hpp"
#include "aoi/experiments.hpp"
#include "aoi/mfg.hpp"
#include "aoi/scheduler.hpp"
#include "aoi/sim.hpp"
#include "aoi/threshold.hpp"
#include "oracles.hpp"

using namespace aoi;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, pattern, args...);
  return buffer;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Outcome threshold_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> uA(0.0, 1.5), uC(1.0, 10.0), up(0.0, 0.4), ul(0.0, 20.0);
  int mismatches = 0;
  std::string first;
  for (int i = 0; i < 20; ++i) {
    double A = 0.0, p = 0.0;
    do {
      A = uA(rng);
      p = up(rng);
    } while (A * A * p >= 1.0);
    const double C = uC(rng), lambda = ul(rng);
    const auto fast = solve_kappa(scalar_matrix(A), scalar_matrix(C), p, lambda);
    const auto slow = value_iteration_oracle(scalar_matrix(A), scalar_matrix(C), p, lambda);
    if (fast.kappa != slow.threshold || !slow.is_threshold) {
      ++mismatches;
      if (first.empty()) first = fmt(" first: A=%.4f C=%.4f p=%.4f lambda=%.4f kappa=%d oracle=%d", A, C, p, lambda,
                                     fast.kappa, slow.threshold);
    }
  }
  const auto closed = solve_kappa(scalar_matrix(1.0), scalar_matrix(5.0), 0.0, 10.0);
  const auto closed_oracle = value_iteration_oracle(scalar_matrix(1.0), scalar_matrix(5.0), 0.0, 10.0);
  const double elapsed = seconds_since(start);
  Outcome o;
  o.pass = mismatches == 0 && closed.kappa == 1 && closed_oracle.threshold == 1 && elapsed < 60.0;
  o.detail = fmt("mismatches=%d/20 closed kappa=%d oracle=%d elapsed=%.2fs", mismatches, closed.kappa,
                 closed_oracle.threshold, elapsed) +
             first;
  return o;
}

Outcome relaxed_feasibility() {
  const auto config = reference_scenario(100, 0.25, 0.2, 5000, 1);
  const auto pop = assign_types(100, config.types);
  const auto policy = bisection_lambda(pop, config.types, 0.2, config.capacity, 1e-6);
  const auto r = run_scheduling_experiment(config, pop, policy, PolicyKind::Relaxed, 0);
  const double err = std::abs(r.relaxed.attempt_rate - 25.0) / 25.0;
  return {err <= 0.02, fmt("C=%d attempt_rate=%.4f relative_error=%.4f q=%.4f", config.capacity,
                           r.relaxed.attempt_rate, err, policy.q)};
}

Outcome fig2_trend() {
  const auto start = std::chrono::steady_clock::now();
  Fig2Options options;
  const auto rows = run_fig2(options);
  const double elapsed = seconds_since(start);
  bool nonnegative = true;
  std::string gaps;
  std::vector<double> xs, ys;
  for (const auto& row : rows) {
    if (row.gap < -2.0 * row.gap_se) nonnegative = false;
    gaps += fmt(" %d:%.3f", row.N, row.gap);
    if (row.gap > 0.0) {
      xs.push_back(row.N);
      ys.push_back(std::log(row.gap));
    }
  }
  const double ratio = rows.back().gap / rows.front().gap;
  double slope = 0.0;
  const bool fit_ok = xs.size() >= 2;
  if (fit_ok) {
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    slope = sxy / sxx;
  }
  Outcome o;
  o.pass = nonnegative && ratio <= 0.25 && fit_ok && slope < 0.0 && elapsed <= 600.0;
  o.detail = fmt("gap(100)/gap(5)=%.4f fit_rate=%.5f nonnegative=%d elapsed=%.1fs gaps:", ratio, slope,
                 nonnegative ? 1 : 0, elapsed) +
             gaps;
  return o;
}

Outcome p0_cap() {
  const auto config = reference_scenario(100, 0.25, 0.0, 10000, 1);
  const auto pop = assign_types(100, config.types);
  const auto policy = bisection_lambda(pop, config.types, 0.0, config.capacity, 1e-6);
  const auto r = run_scheduling_experiment(config, pop, policy, PolicyKind::Matb, 0);
  const int kappa_max = *std::max_element(policy.kappa_high.begin(), policy.kappa_high.end());
  const int cap = p0_aoi_cap(kappa_max, 0.25);
  return {r.matb.max_age <= cap && r.matb.capacity_violations == 0,
          fmt("max_age=%d cap=%d violations=%lld", r.matb.max_age, cap, r.matb.capacity_violations)};
}

Outcome tail_bound() {
  const double delta = 0.05, p = 0.2, alpha = 0.25;
  const int N = 500;
  const auto tail = tail_threshold(delta, p, alpha);
  const auto cond = size_conditions(delta, p, alpha, N, tail.x);
  const auto config = reference_scenario(N, alpha, p, 10000, 1);
  const auto pop = assign_types(N, config.types);
  const auto policy = bisection_lambda(pop, config.types, p, config.capacity, 1e-6);
  SchedulingOptions options;
  options.tail_age = tail.aoi_threshold;
  const auto r = run_scheduling_experiment(config, pop, policy, PolicyKind::Matb, 0, options);
  const double fraction = static_cast<double>(r.matb.tail_exceedances) / static_cast<double>(r.matb.samples);
  Outcome o;
  o.pass = cond.berry_esseen_x_ok && cond.normal_ok && fraction <= delta;
  o.detail = fmt("x=%d threshold=%d fraction=%.3g max_age=%d size: berry_esseen_x=%.4g normal=%.3g limit=%.4g "
                 "(x-free berry_esseen=%.4g ok=%d)",
                 tail.x, tail.aoi_threshold, fraction, r.matb.max_age, cond.berry_esseen_x, cond.normal_term,
                 cond.limit, cond.berry_esseen, cond.berry_esseen_ok ? 1 : 0);
  return o;
}

Outcome mfe_numerics() {
  const auto start = std::chrono::steady_clock::now();
  const auto sol = solve_mfe(reference_types());
  const double elapsed = seconds_since(start);
  double riccati = 0.0, rho = 0.0, worst_ratio = 0.0;
  for (const auto& g : sol.gains) {
    riccati = std::max(riccati, g.riccati_residual);
    rho = std::max(rho, g.spectral_radius);
  }
  for (const double r : sol.ratios) worst_ratio = std::max(worst_ratio, r);
  Outcome o;
  o.pass = riccati <= 1e-10 && sol.residual <= 1e-8 && rho < 1.0 &&
           worst_ratio <= sol.contraction_constant + 1e-6 && elapsed < 5.0;
  o.detail = fmt("riccati=%.3g fixed_point=%.3g max_rho=%.4f max_ratio=%.4f contraction=%.4f holds=%d "
                 "iterations=%d elapsed=%.2fs",
                 riccati, sol.residual, rho, worst_ratio, sol.contraction_constant, sol.contraction_holds ? 1 : 0,
                 sol.iterations, elapsed);
  return o;
}

AgentType random_scalar_type(std::mt19937_64& rng, double prob) {
  std::uniform_real_distribution<double> uA(0.0, 1.3), ux(-5.0, 5.0), uQ(0.5, 3.0);
  AgentType t;
  t.label = "random";
  t.A = scalar_matrix(uA(rng));
  t.B = scalar_matrix(0.1269);
  t.C_W = scalar_matrix(5.0);
  t.Q = scalar_matrix(uQ(rng));
  t.R = scalar_matrix(2.0);
  t.x0_mean = Vector::Constant(1, ux(rng));
  t.x0_cov = scalar_matrix(1.0);
  t.prob = prob;
  return t;
}

Outcome double_sum_equivalence() {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> ux(-5.0, 5.0), uk(0.0, 0.95);
  double worst = 0.0;
  for (int instance = 0; instance < 10; ++instance) {
    std::vector<AgentType> types{random_scalar_type(rng, 0.3), random_scalar_type(rng, 0.7)};
    std::vector<TrackingGains> gains;
    for (const auto& t : types) gains.push_back(solve_riccati(t.A, t.B, t.Q, t.R));
    Trajectory mu;
    for (int k = 0; k <= 5; ++k) mu.window.push_back(Vector::Constant(1, ux(rng)));
    mu.K3 = scalar_matrix(uk(rng));
    const auto out = mf_operator(mu, types, gains);
    for (int k = 0; k <= 5; ++k) {
      double expected = 0.0;
      for (std::size_t t = 0; t < types.size(); ++t) {
        const double bk2 = types[t].B(0, 0) * gains[t].K2(0, 0);
        expected += types[t].prob * oracle::double_sum_mean(k, gains[t].A_cl(0, 0), bk2, types[t].Q(0, 0),
                                                            types[t].x0_mean(0), mu, 3000);
      }
      const double err = std::abs(out.window[static_cast<std::size_t>(k)](0) - expected) /
                         std::max(1.0, std::abs(expected));
      worst = std::max(worst, err);
    }
  }
  return {worst <= 1e-12, fmt("max_relative_difference=%.3g over 10 instances, horizon 5", worst)};
}

double mean_consensus(int N, const MeanFieldSolution& mfe) {
  const auto config = reference_scenario(N, 0.25, 0.2, 500, 1, 20);
  const auto pop = assign_types(N, config.types);
  const auto policy = bisection_lambda(pop, config.types, 0.2, config.capacity, 1e-6);
  std::vector<double> errors(20, 0.0);
  parallel_for(20, [&](int r) {
    GameOptions options;
    options.error_checkpoints.clear();
    options.error_age_cap = -1;
    errors[static_cast<std::size_t>(r)] = run_game_experiment(config, pop, policy, mfe, r, options).consensus_error;
  });
  return std::accumulate(errors.begin(), errors.end(), 0.0) / 20.0;
}

Outcome mean_field_rate() {
  const auto mfe = solve_mfe(reference_types());
  const double small = mean_consensus(90, mfe);
  const double large = mean_consensus(180, mfe);
  const double ratio = large / small;
  return {ratio >= 0.3 && ratio <= 0.8, fmt("error(90)=%.5g error(180)=%.5g ratio=%.4f", small, large, ratio)};
}

Outcome fig3_trend() {
  const auto start = std::chrono::steady_clock::now();
  const auto result = run_fig3(Fig3Options{});
  const double elapsed = seconds_since(start);
  bool decreasing = true, increasing = true;
  std::string text = " alpha:";
  for (std::size_t i = 0; i < result.alpha_sweep.size(); ++i) {
    text += fmt(" %.2f->%.3f", result.alpha_sweep[i].alpha, result.alpha_sweep[i].median);
    if (i > 0 && !(result.alpha_sweep[i].median < result.alpha_sweep[i - 1].median)) decreasing = false;
  }
  text += " p:";
  for (std::size_t i = 0; i < result.p_sweep.size(); ++i) {
    text += fmt(" %.2f->%.3f", result.p_sweep[i].p, result.p_sweep[i].median);
    if (i > 0 && !(result.p_sweep[i].median > result.p_sweep[i - 1].median)) increasing = false;
  }
  return {decreasing && increasing && elapsed <= 600.0,
          fmt("decreasing_in_alpha=%d increasing_in_p=%d elapsed=%.1fs", decreasing ? 1 : 0, increasing ? 1 : 0,
              elapsed) +
              text};
}

Outcome estimator_soundness() {
  const int runs = 20, N = 90;
  const auto config = reference_scenario(N, 0.25, 0.2, 500, 1, runs);
  const auto pop = assign_types(N, config.types);
  const auto policy = bisection_lambda(pop, config.types, 0.2, config.capacity, 1e-6);
  const auto mfe = solve_mfe(config.types);
  std::vector<GameMetrics> results(static_cast<std::size_t>(runs));
  parallel_for(runs, [&](int r) {
    results[static_cast<std::size_t>(r)] = run_game_experiment(config, pop, policy, mfe, r);
  });

  const GameOptions defaults;
  bool mean_ok = true;
  std::string text = "mean/SE:";
  for (std::size_t c = 0; c < defaults.error_checkpoints.size(); ++c) {
    Welford w;
    for (const auto& m : results) {
      for (const double e : m.error_samples[c]) w.add(e);
    }
    const double se = std::sqrt(w.variance() / static_cast<double>(w.count));
    const double z = se > 0.0 ? w.mean / se : 0.0;
    if (std::abs(z) > 3.0) mean_ok = false;
    text += fmt(" k=%d:%.3f", defaults.error_checkpoints[c], z);
  }

  const long long min_count = 5000;
  bool weight_ok = true;
  double worst = 0.0;
  int checked = 0, sparse = 0;
  for (std::size_t t = 0; t < config.types.size(); ++t) {
    for (int age = 1; age <= defaults.error_age_cap; ++age) {
      double sum = 0.0;
      long long count = 0;
      for (const auto& m : results) {
        sum += m.error_sq_sum[t][static_cast<std::size_t>(age)];
        count += m.error_count[t][static_cast<std::size_t>(age)];
      }
      if (count < min_count) {
        ++sparse;
        continue;
      }
      const double expected = error_weight(age, config.types[t].A, config.types[t].C_W);
      const double rel = std::abs(sum / static_cast<double>(count) - expected) / expected;
      worst = std::max(worst, rel);
      if (rel > 0.05) weight_ok = false;
      ++checked;
    }
  }
  return {mean_ok && weight_ok && checked > 0,
          text + fmt(" weight: checked=%d sparse(<%lld samples)=%d max_relative_error=%.4f", checked, min_count,
                     sparse, worst)};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_sweeps(const std::filesystem::path& dir) {
  Fig2Options f2;
  f2.Ns = {5, 20};
  f2.T = 400;
  f2.seeds = {1, 2, 3};
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : run_fig2(f2)) {
    rows.push_back({std::to_string(r.N), format_number(r.J_relaxed), format_number(r.J_matb), format_number(r.gap),
                    format_number(r.gap_bound)});
  }
  write_csv(dir / "fig2.csv", {"N", "J_relaxed", "J_matb", "gap", "gap_bound"}, rows);

  Fig3Options f3;
  f3.N = 30;
  f3.T = 100;
  f3.runs = 3;
  f3.alphas = {0.25, 0.45};
  f3.ps = {0.2};
  const auto fig3 = run_fig3(f3);
  rows.clear();
  for (const auto& r : fig3.alpha_sweep) {
    std::vector<std::string> row{format_number(r.alpha), format_number(r.p)};
    for (const double c : r.run_costs) row.push_back(format_number(c));
    rows.push_back(row);
  }
  write_csv(dir / "fig3.csv", {"alpha", "p", "run0", "run1", "run2"}, rows);
  write_json(dir / "bounds.json",
             to_json(make_bound_report(reference_scenario(100, 0.25, 0.2, 100),
                                       bisection_lambda(assign_types(100, reference_types()), reference_types(), 0.2,
                                                        25, 1e-6),
                                       0.05)));
}

Outcome determinism() {
  const auto base = std::filesystem::temp_directory_path() / "aoi_acceptance_determinism";
  std::filesystem::remove_all(base);
  write_sweeps(base / "a");
  write_sweeps(base / "b");
  int files = 0, identical = 0;
  for (const char* name : {"fig2.csv", "fig3.csv", "bounds.json"}) {
    ++files;
    const auto a = read_file(base / "a" / name);
    if (!a.empty() && a == read_file(base / "b" / name)) ++identical;
  }
  std::filesystem::remove_all(base);
  return {identical == files, fmt("identical=%d/%d files", identical, files)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"threshold matches value iteration", threshold_oracle},
      {"relaxed policy meets the average capacity", relaxed_feasibility},
      {"scheduling gap vanishes with N", fig2_trend},
      {"erasure-free age cap", p0_cap},
      {"age tail bound", tail_bound},
      {"Riccati and equilibrium numerics", mfe_numerics},
      {"forward pass equals the double sum", double_sum_equivalence},
      {"mean-field approximation rate", mean_field_rate},
      {"game cost trends in alpha and p", fig3_trend},
      {"estimator soundness", estimator_soundness},
      {"deterministic outputs", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
