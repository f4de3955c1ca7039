#include "aoi/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "aoi/analysis.hpp"
#include "aoi/error.hpp"
#include "aoi/scheduler.hpp"
#include "aoi/sim.hpp"

namespace aoi {

int thread_count() {
  if (const char* env = std::getenv("AOI_MFG_THREADS")) {
    const int value = std::atoi(env);
    if (value > 0) return value;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(int count, const std::function<void(int)>& fn) {
  const int workers = std::min(thread_count(), count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<Fig2Row> run_fig2(const Fig2Options& options) {
  std::vector<std::uint64_t> seeds = options.seeds;
  if (seeds.empty()) {
    for (std::uint64_t s = 1; s <= 30; ++s) seeds.push_back(s);
  }
  const auto types = options.types.empty() ? reference_types() : options.types;

  std::vector<Fig2Row> rows;
  for (const int N : options.Ns) {
    ScenarioConfig config = reference_scenario(N, options.alpha, options.p, options.T);
    config.types = types;
    config.bisection_eps = options.eps;
    validate(config);
    const Population population = assign_types(N, config.types);
    const RelaxedPolicy policy = bisection_lambda(population, config.types, config.p, config.capacity, options.eps);

    const int S = static_cast<int>(seeds.size());
    std::vector<SchedulingResult> results(static_cast<std::size_t>(S));
    parallel_for(S, [&](int s) {
      ScenarioConfig local = config;
      local.seed = seeds[static_cast<std::size_t>(s)];
      results[static_cast<std::size_t>(s)] = run_scheduling_experiment(local, population, policy, PolicyKind::Both, 0);
    });

    Fig2Row row;
    row.N = N;
    row.capacity = config.capacity;
    row.q = policy.q;
    Welford gaps;
    double attempts = 0.0;
    for (const auto& r : results) {
      row.seed_relaxed.push_back(r.relaxed.J());
      row.seed_matb.push_back(r.matb.J());
      gaps.add(r.matb.J() - r.relaxed.J());
      attempts += r.relaxed.attempt_rate;
      row.max_aoi = std::max(row.max_aoi, r.matb.max_age);
    }
    row.J_relaxed = std::accumulate(row.seed_relaxed.begin(), row.seed_relaxed.end(), 0.0) / S;
    row.J_matb = std::accumulate(row.seed_matb.begin(), row.seed_matb.end(), 0.0) / S;
    row.gap = gaps.mean;
    row.gap_se = std::sqrt(gaps.variance() / S);
    row.relaxed_attempt_rate = attempts / S;
    const BoundReport report = make_bound_report(config, policy, 0.05);
    row.gap_bound = report.gap_bound;
    row.aoi_cap = report.p0_cap;
    rows.push_back(std::move(row));
  }
  return rows;
}

double quantile(std::vector<double> values, double level) {
  if (values.empty()) throw Error(ErrorKind::DomainError, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double position = level * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(position));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = position - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Fig3Row run_game_point(const std::vector<AgentType>& types, const MeanFieldSolution& mfe, int N, int T, double alpha,
                       double p, int runs, std::uint64_t seed, double eps) {
  ScenarioConfig config = reference_scenario(N, alpha, p, T, seed, runs);
  config.types = types;
  config.bisection_eps = eps;
  validate(config);
  const Population population = assign_types(N, config.types);
  const RelaxedPolicy policy = bisection_lambda(population, config.types, p, config.capacity, eps);

  Fig3Row row;
  row.alpha = alpha;
  row.p = p;
  row.capacity = config.capacity;
  row.run_costs.assign(static_cast<std::size_t>(runs), 0.0);
  parallel_for(runs, [&](int r) {
    GameOptions options;
    options.error_checkpoints.clear();
    options.error_age_cap = -1;
    row.run_costs[static_cast<std::size_t>(r)] =
        run_game_experiment(config, population, policy, mfe, r, options).mean_cost;
  });
  row.median = quantile(row.run_costs, 0.5);
  row.q1 = quantile(row.run_costs, 0.25);
  row.q3 = quantile(row.run_costs, 0.75);
  row.mean = std::accumulate(row.run_costs.begin(), row.run_costs.end(), 0.0) / runs;
  return row;
}

Fig3Result run_fig3(const Fig3Options& options) {
  const auto types = options.types.empty() ? reference_types() : options.types;
  const MeanFieldSolution mfe = solve_mfe(types);
  Fig3Result result;
  for (const double alpha : options.alphas) {
    result.alpha_sweep.push_back(run_game_point(types, mfe, options.N, options.T, alpha, options.p_for_alpha,
                                                options.runs, options.seed, options.eps));
  }
  for (const double p : options.ps) {
    result.p_sweep.push_back(run_game_point(types, mfe, options.N, options.T, options.alpha_for_p, p, options.runs,
                                            options.seed, options.eps));
  }
  return result;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buffer, sizeof buffer, "%.*g", precision, value);
    if (std::strtod(buffer, nullptr) == value) break;
  }
  return buffer;
}

namespace {

std::string csv_field(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string quoted = "\"";
  for (const char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  auto out = open_output(path);
  const auto write_line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << csv_field(fields[i]);
    }
    out << '\n';
  };
  write_line(header);
  for (const auto& row : rows) write_line(row);
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

void write_json(const std::filesystem::path& path, const nlohmann::json& document) {
  auto out = open_output(path);
  out << document.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t hash = 14695981039346656037ull;
  for (const unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

nlohmann::json to_json(const RunManifest& m) {
  return nlohmann::json{{"command", m.command},   {"config_hash", m.config_hash}, {"seed", m.seed},
                        {"version", m.version},   {"outputs", m.outputs},         {"wall_seconds", m.wall_seconds}};
}

std::string code_version() { return "0.1.0"; }

}  // namespace aoi
