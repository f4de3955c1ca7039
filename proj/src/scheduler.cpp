#include "aoi/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aoi/error.hpp"

namespace aoi {

double aggregate_rate(const Population& population, std::span<const int> kappa, double p) {
  double rate = 0.0;
  for (std::size_t t = 0; t < population.counts.size(); ++t) {
    rate += population.counts[t] * threshold_rate(kappa[t], p);
  }
  return rate;
}

std::vector<int> thresholds_at(const std::vector<AgentType>& types, double p, double price) {
  std::vector<int> kappa;
  kappa.reserve(types.size());
  for (const auto& type : types) kappa.push_back(solve_kappa(type.A, type.C_W, p, price).kappa);
  return kappa;
}

double randomization_q(double capacity, double rate_low, double rate_high) {
  if (rate_low == rate_high) throw Error(ErrorKind::DegenerateBracket, "bracket rates coincide");
  return std::clamp((capacity - rate_high) / (rate_low - rate_high), 0.0, 1.0);
}

RelaxedPolicy bisection_lambda(const Population& population, const std::vector<AgentType>& types, double p,
                               int capacity, double eps) {
  if (capacity <= 0) throw Error(ErrorKind::InfeasibleCapacity, "capacity must be positive");
  if (!(eps > 0.0)) throw Error(ErrorKind::DomainError, "bisection tolerance must be positive");

  RelaxedPolicy policy;
  policy.capacity = capacity;
  const auto rate_at = [&](const std::vector<int>& kappa) { return aggregate_rate(population, kappa, p); };

  auto kappa_zero = thresholds_at(types, p, 0.0);
  const double rate_zero = rate_at(kappa_zero);
  if (rate_zero <= capacity) {
    policy.kappa_low = kappa_zero;
    policy.kappa_high = kappa_zero;
    policy.rate_low = policy.rate_high = rate_zero;
    policy.q = 1.0;
    policy.degenerate = true;
    return policy;
  }

  double lo = 0.0;
  double hi = 1.0;
  auto kappa_lo = kappa_zero;
  double rate_lo = rate_zero;
  auto kappa_hi = thresholds_at(types, p, hi);
  double rate_hi = rate_at(kappa_hi);
  while (rate_hi > capacity) {
    lo = hi;
    kappa_lo = kappa_hi;
    rate_lo = rate_hi;
    hi *= 2.0;
    if (hi > 1e300) throw Error(ErrorKind::NoConvergence, "price bracket expansion overflowed");
    kappa_hi = thresholds_at(types, p, hi);
    rate_hi = rate_at(kappa_hi);
  }

  int steps = 0;
  while (hi - lo > eps) {
    const double mid = 0.5 * (lo + hi);
    auto kappa_mid = thresholds_at(types, p, mid);
    const double rate_mid = rate_at(kappa_mid);
    if (rate_mid > capacity) {
      lo = mid;
      kappa_lo = std::move(kappa_mid);
      rate_lo = rate_mid;
    } else {
      hi = mid;
      kappa_hi = std::move(kappa_mid);
      rate_hi = rate_mid;
    }
    ++steps;
  }

  policy.kappa_low = std::move(kappa_lo);
  policy.kappa_high = std::move(kappa_hi);
  policy.lambda_low = lo;
  policy.lambda_high = hi;
  policy.rate_low = rate_lo;
  policy.rate_high = rate_hi;
  policy.bisection_steps = steps;
  policy.q = randomization_q(capacity, rate_lo, rate_hi);
  return policy;
}

ScheduleDecision matb_select(std::span<const std::uint8_t> intent, std::span<const int> age, int capacity) {
  if (intent.size() != age.size()) throw Error(ErrorKind::DimensionMismatch, "intent and age lengths differ");
  ScheduleDecision decision;
  decision.intent.assign(intent.begin(), intent.end());
  decision.requested = static_cast<int>(std::count(intent.begin(), intent.end(), std::uint8_t{1}));
  if (decision.requested <= capacity) {
    decision.transmit = decision.intent;
    return decision;
  }
  decision.projected = true;
  decision.transmit.assign(intent.size(), 0);
  if (capacity <= 0) return decision;

  std::vector<int> requesting;
  requesting.reserve(static_cast<std::size_t>(decision.requested));
  for (std::size_t i = 0; i < intent.size(); ++i) {
    if (intent[i]) requesting.push_back(static_cast<int>(i));
  }
  const auto older = [&](int x, int y) {
    const auto ax = age[static_cast<std::size_t>(x)];
    const auto ay = age[static_cast<std::size_t>(y)];
    return ax != ay ? ax > ay : x < y;
  };
  std::nth_element(requesting.begin(), requesting.begin() + capacity, requesting.end(), older);
  for (int k = 0; k < capacity; ++k) decision.transmit[static_cast<std::size_t>(requesting[k])] = 1;
  return decision;
}

double randomized_rate(const RelaxedPolicy& policy, const Population& population, double p) {
  double rate = 0.0;
  for (std::size_t t = 0; t < population.counts.size(); ++t) {
    rate += population.counts[t] * transmission_rate(policy.kappa_low[t], policy.kappa_high[t], policy.q, p);
  }
  return rate;
}

}  // namespace aoi
