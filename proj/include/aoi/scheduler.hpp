#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aoi/model.hpp"
#include "aoi/threshold.hpp"

namespace aoi {

/// Two-threshold randomized relaxed policy. Thresholds are stored per type.
struct RelaxedPolicy {
  std::vector<int> kappa_low;   // per type, at lambda_low (more transmissions)
  std::vector<int> kappa_high;  // per type, at lambda_high
  double q = 1.0;               // probability of using kappa_low
  double lambda_low = 0.0;
  double lambda_high = 0.0;
  double rate_low = 0.0;   // aggregate attempt rate at lambda_low
  double rate_high = 0.0;  // aggregate attempt rate at lambda_high
  int capacity = 0;
  int bisection_steps = 0;
  bool degenerate = false;  // capacity never binds; every agent transmits each slot
};

struct ScheduleDecision {
  std::vector<std::uint8_t> intent;    // a
  std::vector<std::uint8_t> transmit;  // zeta
  int requested = 0;                   // n_lambda
  bool projected = false;
};

/// Aggregate single-threshold attempt rate sum_phi N_phi / ((1 - p) kappa_phi + 1).
double aggregate_rate(const Population& population, std::span<const int> kappa, double p);

/// Per-type thresholds at a given price.
std::vector<int> thresholds_at(const std::vector<AgentType>& types, double p, double price);

/// Bisection on the price until the bracket is narrower than eps.
RelaxedPolicy bisection_lambda(const Population& population, const std::vector<AgentType>& types, double p,
                               int capacity, double eps);

/// q = (C - C_high) / (C_low - C_high); throws DegenerateBracket when C_low == C_high.
double randomization_q(double capacity, double rate_low, double rate_high);

/// a = 1{age >= kappa_low} if coin < q, else 1{age >= kappa_high}.
constexpr bool relaxed_decision(int age, int kappa_low, int kappa_high, double q, double coin) {
  return coin < q ? age >= kappa_low : age >= kappa_high;
}

/// Maximum-age-first projection onto at most C transmissions; equal ages go to the lower index.
ScheduleDecision matb_select(std::span<const std::uint8_t> intent, std::span<const int> age, int capacity);

/// Exact expected attempt rate of the randomized policy (per-agent coin each slot).
double randomized_rate(const RelaxedPolicy& policy, const Population& population, double p);

}  // namespace aoi
