#include "aoi/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "aoi/error.hpp"
#include "aoi/estimator.hpp"
#include "aoi/threshold.hpp"

namespace aoi {

double kl_divergence(double x, double y) {
  if (!(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0)) {
    throw Error(ErrorKind::DomainError, "KL divergence arguments must lie in (0, 1)");
  }
  if (x == y) return 0.0;
  return std::max(0.0, x * std::log(x / y) + (1.0 - x) * std::log((1.0 - x) / (1.0 - y)));
}

double gap_bound(double alpha, double q, double U, int N) {
  return U * std::exp(-kl_divergence(alpha, q) * N);
}

int p0_aoi_cap(int kappa_max, double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorKind::DomainError, "alpha must be positive");
  const int inverse = static_cast<int>(std::ceil(1.0 / alpha - 1e-12));
  return 2 * std::max(kappa_max, inverse);
}

TailThreshold tail_threshold(double delta, double p, double alpha) {
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorKind::DomainError, "delta must lie in (0, 1)");
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::DomainError, "p must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorKind::DomainError, "alpha must lie in (0, 1]");
  TailThreshold out;
  const double base = 2.0 / (alpha * (1.0 - p));
  out.drift_part = base * base;
  out.geometric_part = std::log(2.0 / delta) / std::log(1.0 / p);
  out.x = static_cast<int>(std::ceil(std::max(out.drift_part, out.geometric_part) - 1e-12));
  out.aoi_threshold = 2 * out.x;
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

SizeConditions size_conditions(double delta, double p, double alpha, int N, int x) {
  if (N < 1 || x < 1) throw Error(ErrorKind::DomainError, "N and x must be positive");
  SizeConditions c;
  c.limit = delta / 4.0;
  c.berry_esseen = 0.3354 * (1.0 - p + 0.415) / std::sqrt(alpha * N);
  c.berry_esseen_x = 0.33554 * (1.0 - p + 0.415) / std::sqrt(static_cast<double>(x) * alpha * N);
  c.normal_term = normal_cdf(-std::sqrt(N / (alpha * p * (1.0 - p))));
  c.berry_esseen_ok = c.berry_esseen <= c.limit;
  c.berry_esseen_x_ok = c.berry_esseen_x <= c.limit;
  c.normal_ok = c.normal_term <= c.limit;
  return c;
}

double aux_penalty(int age, int y, const Matrix& A, const Matrix& C_W, double p, int requested, int capacity,
                   int delta_bar) {
  if (requested <= capacity || age < y) return 0.0;
  if (p == 0.0) return running_cost(delta_bar, A, C_W);
  return p * f_tail(age + 1, A, C_W, p);
}

BoundReport make_bound_report(const ScenarioConfig& config, const RelaxedPolicy& policy, double delta) {
  BoundReport r;
  r.alpha = config.alpha();
  r.q = policy.q;
  r.N = config.N;
  r.delta = delta;
  r.kappa_high_max = policy.kappa_high.empty() ? 0 : *std::max_element(policy.kappa_high.begin(), policy.kappa_high.end());
  r.p0_cap = p0_aoi_cap(r.kappa_high_max, r.alpha);
  for (const auto& type : config.types) r.U = std::max(r.U, running_cost(r.p0_cap, type.A, type.C_W));

  const bool interior = r.alpha > 0.0 && r.alpha < 1.0 && r.q > 0.0 && r.q < 1.0;
  if (interior) {
    r.kl_exponent = kl_divergence(r.alpha, r.q);
  }
  r.gap_bound_vacuous = !interior || r.kl_exponent == 0.0;
  r.gap_bound = r.gap_bound_vacuous ? r.U : gap_bound(r.alpha, r.q, r.U, r.N);

  r.tail_applicable = config.p > 0.0 && config.p < 1.0;
  if (r.tail_applicable) {
    r.tail = tail_threshold(delta, config.p, r.alpha);
    r.conditions = size_conditions(delta, config.p, r.alpha, config.N, r.tail.x);
  }
  for (std::size_t t = 0; t < config.types.size(); ++t) {
    const auto& type = config.types[t];
    r.aux_penalty.push_back(aux_penalty(r.p0_cap, policy.kappa_high[t], type.A, type.C_W, config.p,
                                        config.capacity + 1, config.capacity, r.p0_cap));
  }
  return r;
}

nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json j;
  j["alpha"] = r.alpha;
  j["q"] = r.q;
  j["N"] = r.N;
  j["kl_exponent"] = r.kl_exponent;
  j["U"] = r.U;
  j["gap_bound"] = r.gap_bound;
  j["gap_bound_vacuous"] = r.gap_bound_vacuous;
  j["kappa_high_max"] = r.kappa_high_max;
  j["p0_aoi_cap"] = r.p0_cap;
  j["delta"] = r.delta;
  if (r.tail_applicable) {
    j["tail"] = {{"x", r.tail.x},
                 {"drift_part", r.tail.drift_part},
                 {"geometric_part", r.tail.geometric_part},
                 {"aoi_threshold", r.tail.aoi_threshold}};
    j["size_conditions"] = {{"berry_esseen", r.conditions.berry_esseen},
                            {"berry_esseen_ok", r.conditions.berry_esseen_ok},
                            {"berry_esseen_x", r.conditions.berry_esseen_x},
                            {"berry_esseen_x_ok", r.conditions.berry_esseen_x_ok},
                            {"normal_term", r.conditions.normal_term},
                            {"normal_ok", r.conditions.normal_ok},
                            {"limit", r.conditions.limit}};
  } else {
    j["tail"] = nullptr;
    j["size_conditions"] = nullptr;
  }
  j["aux_penalty"] = r.aux_penalty;
  return j;
}

}  // namespace aoi
