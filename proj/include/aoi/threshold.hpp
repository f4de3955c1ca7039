#pragma once

#include <vector>

#include "aoi/types.hpp"

namespace aoi {

/// Optimal threshold of the priced single-agent AoI problem.
struct ThresholdSolution {
  int kappa = 0;              // transmit iff age >= kappa
  double eta = 0.0;           // fractional position with f(kappa + eta) = sigma / (1 - p)
  double average_cost = 0.0;  // sigma*, including the transmission price
  double price = 0.0;         // lambda
};

/// Stationary law of the AoI chain under the two-threshold randomized rule.
///
/// Below `lower` the age climbs deterministically. On [lower, upper) an attempt is
/// made with probability q, above `upper` always. Every attempt succeeds with
/// probability 1 - p. Mass on [0, upper] is stored explicitly; beyond `upper`
/// it decays geometrically with ratio p.
struct AoIChain {
  int lower = 0;
  int upper = 0;
  double q = 1.0;
  double p = 0.0;
  std::vector<double> head;  // pi(0), ..., pi(upper)

  double probability(int age) const;
  /// P(age > a).
  double mass_above(int a) const;
  double total_mass() const;
  /// Long-run fraction of slots with a transmission attempt.
  double attempt_rate() const;
  double mean_age() const;
};

/// Tail sum f(x) = sum_{r >= 0} c(x + r) p^r of the running cost.
/// Scalar systems use the closed form; other inputs sum the series until the
/// geometric tail drops below 1e-14 relative. Non-integer x interpolates linearly.
double f_tail(double x, const Matrix& A, const Matrix& C_W, double p);
double f_tail(int x, const Matrix& A, const Matrix& C_W, double p);

/// Series evaluation regardless of dimension; kept public for cross-checks.
double f_tail_series(int x, const Matrix& A, const Matrix& C_W, double p);

/// Scalar closed form with a = A^2 (the A = 1 branch when a == 1).
double f_tail_scalar_closed_form(int x, double A, double C_W, double p);

/// Smallest kappa whose bracket f(kappa) <= sigma/(1-p) <= f(kappa + 1) holds.
ThresholdSolution solve_kappa(const Matrix& A, const Matrix& C_W, double p, double price);

struct OracleResult {
  std::vector<int> policy;  // action per state 0..state_cap
  double average_cost = 0.0;
  int threshold = 0;          // first state with action 1
  bool is_threshold = false;  // no 1 -> 0 switch after `threshold`
  double residual_mass = 0.0; // stationary mass above the cap under the returned threshold
  int iterations = 0;
};

/// Relative value iteration on {0, ..., state_cap}; the top state absorbs the climb.
/// Uses the aperiodicity transform P' = (P + I) / 2. Independent of solve_kappa.
OracleResult value_iteration_oracle(const Matrix& A, const Matrix& C_W, double p, double price,
                                    int state_cap = 500, double tol = 1e-9, int max_iter = 2'000'000);

AoIChain stationary_distribution(int lower, int upper, double q, double p);

/// Exact long-run attempt rate of the two-threshold rule (renewal-reward).
double transmission_rate(int lower, int upper, double q, double p);

/// Single threshold: 1 / ((1 - p) kappa + 1).
inline double threshold_rate(int kappa, double p) { return transmission_rate(kappa, kappa, 1.0, p); }

/// Closed-form return rate built from the weights (1-p)^{r+1} p^r. These weights do not
/// sum to one, so it differs from transmission_rate for p > 0; kept for side-by-side reports.
double return_rate_closed_form(int kappa, double p);

}  // namespace aoi
