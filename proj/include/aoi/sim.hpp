#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "aoi/mfg.hpp"
#include "aoi/model.hpp"
#include "aoi/scheduler.hpp"

namespace aoi {

enum class PolicyKind { Relaxed, Matb, Both };

enum class Stream : std::uint64_t { Channel = 1, Coin = 2, Noise = 3, Initial = 4 };

/// Independent generator per (seed, run, subsystem, agent).
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t run, Stream stream, std::uint64_t agent);

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Reception bits: transmitted and the uniform draw lands in the success region [p, 1).
std::vector<std::uint8_t> step_channel(std::span<const std::uint8_t> transmit, double p,
                                       std::span<const double> uniforms);
std::vector<std::uint8_t> step_channel(std::span<const std::uint8_t> transmit, double p, std::mt19937_64& rng);

/// Streaming mean and variance.
struct Welford {
  long long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

struct TraceRow {
  int run = 0;
  int k = 0;
  int agent = 0;
  int type = 0;
  int tau = 0;
  int zeta = 0;
  int erased = 0;
  double cost_bs = 0.0;
  double cost_game = 0.0;
  bool has_game_cost = false;
};

struct SchedulingOptions {
  int initial_age = 0;
  int tail_age = -1;  // count (agent, step) pairs with age above this when >= 0
  int histogram_cap = 1000;
  bool trace = false;
};

struct SchedulingMetrics {
  Welford cost;  // per-step population average of c(age)
  double attempt_rate = 0.0;  // mean transmissions per step
  double request_rate = 0.0;  // mean n_lambda per step
  double success_rate = 0.0;  // mean receptions per step
  int max_age = 0;
  std::vector<long long> age_histogram;  // last bin collects ages >= histogram_cap
  long long capacity_violations = 0;
  long long projected_steps = 0;
  long long tail_exceedances = 0;
  long long samples = 0;
  std::vector<TraceRow> trace;

  double J() const { return cost.mean; }
};

struct SchedulingResult {
  SchedulingMetrics relaxed;
  SchedulingMetrics matb;
  bool has_relaxed = false;
  bool has_matb = false;
};

/// Age-only scheduling simulation. Both policies consume identical random draws.
SchedulingResult run_scheduling_experiment(const ScenarioConfig& config, const Population& population,
                                           const RelaxedPolicy& policy, PolicyKind kind, int run,
                                           const SchedulingOptions& options = {});

struct GameOptions {
  std::vector<int> error_checkpoints{10, 100, 400};
  int error_age_cap = 10;
  bool trace = false;
};

struct GameMetrics {
  std::vector<double> agent_cost;  // time-averaged per-agent game cost
  std::vector<double> type_cost;   // mean of agent_cost within each type
  double mean_cost = 0.0;          // population average of agent_cost
  double consensus_error = 0.0;    // time average of ||mu^N - mu*||^2
  std::vector<double> consensus_series;
  double attempt_rate = 0.0;
  long long capacity_violations = 0;
  // first state component of e_k = X_k - Z_k, one entry per agent at each checkpoint
  std::vector<std::vector<double>> error_samples;
  // per type, per decoder age 0..error_age_cap: sum of ||e||^2 and counts
  std::vector<std::vector<double>> error_sq_sum;
  std::vector<std::vector<long long>> error_count;
  std::vector<TraceRow> trace;
};

/// Closed loop: MATB-P scheduling, erasure channel, decoders, tracking controllers, plants.
GameMetrics run_game_experiment(const ScenarioConfig& config, const Population& population,
                                const RelaxedPolicy& policy, const MeanFieldSolution& mfe, int run,
                                const GameOptions& options = {});

}  // namespace aoi
