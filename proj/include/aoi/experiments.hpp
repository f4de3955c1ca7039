#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "aoi/mfg.hpp"
#include "aoi/model.hpp"

namespace aoi {

/// Worker count: AOI_MFG_THREADS when set and positive, else hardware concurrency.
int thread_count();

/// Runs fn(0..count-1) on a worker pool. Results must be written by index; the first exception is rethrown.
void parallel_for(int count, const std::function<void(int)>& fn);

struct Fig2Options {
  std::vector<int> Ns{5, 10, 20, 40, 60, 80, 100};
  double alpha = 0.25;
  double p = 0.2;
  int T = 5000;
  std::vector<std::uint64_t> seeds;  // defaults to 1..30
  std::vector<AgentType> types;      // defaults to the reference types
  double eps = 1e-6;
};

struct Fig2Row {
  int N = 0;
  int capacity = 0;
  double q = 0.0;
  double J_relaxed = 0.0;
  double J_matb = 0.0;
  double gap = 0.0;
  double gap_se = 0.0;
  double gap_bound = 0.0;
  double relaxed_attempt_rate = 0.0;
  int max_aoi = 0;  // over matb runs
  int aoi_cap = 0;  // 2 max(kappa_high_max, ceil(1/alpha))
  std::vector<double> seed_relaxed;
  std::vector<double> seed_matb;
};

std::vector<Fig2Row> run_fig2(const Fig2Options& options);

struct Fig3Options {
  int N = 90;
  int T = 500;
  int runs = 20;
  std::uint64_t seed = 1;
  std::vector<double> alphas{0.15, 0.25, 0.35, 0.45};
  double p_for_alpha = 0.2;
  std::vector<double> ps{0.1, 0.2, 0.3};
  double alpha_for_p = 0.45;
  std::vector<AgentType> types;  // defaults to the reference types
  double eps = 1e-6;
};

struct Fig3Row {
  double alpha = 0.0;
  double p = 0.0;
  int capacity = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double mean = 0.0;
  std::vector<double> run_costs;  // population-average per-agent cost of each run
};

struct Fig3Result {
  std::vector<Fig3Row> alpha_sweep;
  std::vector<Fig3Row> p_sweep;
};

/// One sweep point: game runs at the given capacity ratio and erasure probability.
Fig3Row run_game_point(const std::vector<AgentType>& types, const MeanFieldSolution& mfe, int N, int T, double alpha,
                       double p, int runs, std::uint64_t seed, double eps);

Fig3Result run_fig3(const Fig3Options& options);

/// Linear-interpolation quantile of a sample (copy is sorted).
double quantile(std::vector<double> values, double level);

/// Shortest round-trip decimal form of a double; used for every CSV and JSON number.
std::string format_number(double value);

/// Writes a CSV file; fields are quoted when they contain a comma, quote or newline.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

void write_json(const std::filesystem::path& path, const nlohmann::json& document);

/// 64-bit FNV-1a of a string, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version;
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;
};

nlohmann::json to_json(const RunManifest& manifest);

std::string code_version();

}  // namespace aoi
