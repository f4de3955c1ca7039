#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aoi/types.hpp"

namespace aoi {

/// Per-type plant, noise and cost description. Scalar systems use 1x1 matrices.
struct AgentType {
  std::string label;
  Matrix A;        // n x n
  Matrix B;        // n x m
  Matrix C_W;      // n x n, noise covariance
  Matrix Q;        // n x n, state weight
  Matrix R;        // m x m, control weight
  Vector x0_mean;  // n
  Matrix x0_cov;   // n x n
  double prob = 0.0;

  Index state_dim() const { return A.rows(); }
  Index input_dim() const { return B.cols(); }
};

struct ScenarioConfig {
  int N = 0;
  int capacity = 0;
  double p = 0.0;
  int T = 1;
  std::vector<AgentType> types;
  std::uint64_t seed = 0;
  int mc_runs = 1;
  double bisection_eps = 1e-6;

  double alpha() const { return static_cast<double>(capacity) / N; }
};

/// Deterministic agent-to-type assignment; agents of the same type are contiguous.
struct Population {
  std::vector<int> type_of;  // agent index -> type index
  std::vector<int> counts;   // type index -> N_phi

  int size() const { return static_cast<int>(type_of.size()); }
};

/// Capacity from a ratio: floor(alpha * N), at least 1.
int capacity_from_ratio(int N, double alpha);

/// Squared Frobenius norm of A times p; must stay below 1 for every type.
double erasure_compatibility(const AgentType& type, double p);

/// Throws NonPositiveDefinite / AssumptionViolation / InvalidConfig on the first violated invariant.
void validate(const ScenarioConfig& config);

ScenarioConfig load_scenario(const nlohmann::json& document);
ScenarioConfig load_scenario_file(const std::filesystem::path& path);
nlohmann::json to_json(const ScenarioConfig& config);

/// Largest-remainder rounding of N * probs; remainder ties go to the lower index.
std::vector<int> largest_remainder_counts(int N, std::span<const double> probs);

Population assign_types(int N, const std::vector<AgentType>& types);

/// The three scalar agent types of the reference experiments (A = 0.5, 1.0, 1.15).
std::vector<AgentType> reference_types();

/// Reference scenario: reference types, capacity floor(alpha * N).
ScenarioConfig reference_scenario(int N, double alpha, double p, int T, std::uint64_t seed = 1,
                                  int mc_runs = 1);

}  // namespace aoi
