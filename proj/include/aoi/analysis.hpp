#pragma once

#include <json.hpp>

#include "aoi/model.hpp"
#include "aoi/scheduler.hpp"

namespace aoi {

/// Bernoulli KL divergence D(x || y); both arguments in (0, 1).
double kl_divergence(double x, double y);

/// U exp(-D(alpha || q) N).
double gap_bound(double alpha, double q, double U, int N);

/// 2 max(kappa_max, ceil(1 / alpha)).
int p0_aoi_cap(int kappa_max, double alpha);

struct TailThreshold {
  int x = 0;               // combined threshold
  double drift_part = 0.0;     // (2 / (alpha (1 - p)))^2
  double geometric_part = 0.0; // log(2 / delta) / log(1 / p)
  int aoi_threshold = 0;   // 2x
};

TailThreshold tail_threshold(double delta, double p, double alpha);

struct SizeConditions {
  double berry_esseen = 0.0;    // 0.3354 (1 - p + 0.415) / sqrt(alpha N)
  double berry_esseen_x = 0.0;  // 0.33554 (1 - p + 0.415) / sqrt(x alpha N)
  double normal_term = 0.0;     // Phi(-sqrt(N / (alpha p (1 - p))))
  double limit = 0.0;           // delta / 4
  bool berry_esseen_ok = false;
  bool berry_esseen_x_ok = false;
  bool normal_ok = false;
};

SizeConditions size_conditions(double delta, double p, double alpha, int N, int x);

/// Standard normal CDF.
double normal_cdf(double x);

/// Penalty added to the cost of an agent that requests while the capacity binds.
/// p = 0: c(Delta) when n > C and age >= y. p > 0: sum_{l >= 1} p^l c(age + l) under the same indicators.
double aux_penalty(int age, int y, const Matrix& A, const Matrix& C_W, double p, int requested, int capacity,
                   int delta_bar);

struct BoundReport {
  double alpha = 0.0;
  double q = 0.0;
  int N = 0;
  double kl_exponent = 0.0;
  double U = 0.0;
  double gap_bound = 0.0;
  bool gap_bound_vacuous = false;
  int kappa_high_max = 0;
  int p0_cap = 0;
  double delta = 0.0;
  bool tail_applicable = false;  // requires 0 < p < 1
  TailThreshold tail;
  SizeConditions conditions;
  std::vector<double> aux_penalty;  // per type at age = p0_cap, y = kappa_high
};

BoundReport make_bound_report(const ScenarioConfig& config, const RelaxedPolicy& policy, double delta);

nlohmann::json to_json(const BoundReport& report);

}  // namespace aoi
