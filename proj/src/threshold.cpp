#include "aoi/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "aoi/error.hpp"
#include "aoi/estimator.hpp"

namespace aoi {

namespace {

constexpr int kKappaCap = 1'000'000;
constexpr int kSeriesCap = 1'000'000;

void require_erasure_compatible(const Matrix& A, double p) {
  if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorKind::DomainError, "erasure probability must lie in [0, 1)");
  const double value = A.squaredNorm() * p;
  if (!(value < 1.0)) {
    std::ostringstream os;
    os << "||A||_F^2 * p = " << value << " >= 1";
    throw Error(ErrorKind::AssumptionViolation, os.str());
  }
}

double series_from_table(int x, ErrorWeightTable<double>& table, double p, double growth) {
  double sum = table.cost(x);
  if (p == 0.0) return sum;
  double weight = 1.0;
  double previous = sum;
  for (int r = 1; r < kSeriesCap; ++r) {
    weight *= p;
    const double term = table.cost(x + r) * weight;
    sum += term;
    // Terms decay at least geometrically with ratio `growth` once they start shrinking.
    if (term <= previous && term <= 1e-14 * (1.0 - growth) * sum) return sum;
    previous = term;
  }
  throw Error(ErrorKind::NoConvergence, "tail series did not converge");
}

bool use_scalar_closed_form(const Matrix& A) {
  if (!is_scalar(A)) return false;
  const double a = A(0, 0) * A(0, 0);
  return a == 1.0 || std::abs(1.0 - a) > 1e-4;
}

}  // namespace

double f_tail_scalar_closed_form(int x, double A, double C_W, double p) {
  const double a = A * A;
  const double xd = static_cast<double>(x);
  if (a == 1.0) {
    const double q = 1.0 - p;
    return C_W * xd * xd / q + 2.0 * C_W * xd * p / (q * q) + C_W * p * (1.0 + p) / (q * q * q);
  }
  const double ax = std::pow(a, xd);
  const double ap = 1.0 - a * p;
  const double q = 1.0 - p;
  return C_W / (1.0 - a) * (xd * (1.0 / q - ax / ap) + p / (q * q) - ax * a * p / (ap * ap));
}

double f_tail_series(int x, const Matrix& A, const Matrix& C_W, double p) {
  require_erasure_compatible(A, p);
  if (x < 0) throw Error(ErrorKind::DomainError, "f_tail argument must be >= 0");
  ErrorWeightTable<double> table(A, C_W);
  const double growth = std::max(p, A.squaredNorm() * p);
  return series_from_table(x, table, p, growth);
}

double f_tail(int x, const Matrix& A, const Matrix& C_W, double p) {
  require_erasure_compatible(A, p);
  if (x < 0) throw Error(ErrorKind::DomainError, "f_tail argument must be >= 0");
  if (use_scalar_closed_form(A) && is_scalar(C_W)) {
    return f_tail_scalar_closed_form(x, A(0, 0), C_W(0, 0), p);
  }
  return f_tail_series(x, A, C_W, p);
}

double f_tail(double x, const Matrix& A, const Matrix& C_W, double p) {
  if (!(x >= 0.0)) throw Error(ErrorKind::DomainError, "f_tail argument must be >= 0");
  const double base = std::floor(x);
  const int k = static_cast<int>(base);
  const double frac = x - base;
  const double lo = f_tail(k, A, C_W, p);
  if (frac == 0.0) return lo;
  return lo + frac * (f_tail(k + 1, A, C_W, p) - lo);
}

ThresholdSolution solve_kappa(const Matrix& A, const Matrix& C_W, double p, double price) {
  if (!(price >= 0.0)) throw Error(ErrorKind::DomainError, "price must be >= 0");
  require_erasure_compatible(A, p);

  ErrorWeightTable<double> table(A, C_W);
  const bool closed = use_scalar_closed_form(A) && is_scalar(C_W);
  const double growth = std::max(p, A.squaredNorm() * p);
  const auto f = [&](int x) {
    return closed ? f_tail_scalar_closed_form(x, A(0, 0), C_W(0, 0), p) : series_from_table(x, table, p, growth);
  };

  const double q = 1.0 - p;
  double head_cost = 0.0;  // sum_{i < kappa} c(i)
  double f_k = f(0);
  for (int kappa = 0; kappa < kKappaCap; ++kappa) {
    const double f_next = f(kappa + 1);
    const double rhs = price / q + f_k + head_cost;
    const double target = rhs / (1.0 + kappa * q);  // = f(kappa + eta)
    if (target <= f_next * (1.0 + 1e-12)) {
      // eta from the monotone interpolated map eta -> f(kappa + eta)
      double lo = 0.0;
      double hi = 1.0;
      const double span = f_next - f_k;
      for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (f_k + mid * span < target) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      const double eta = span > 0.0 ? std::clamp(0.5 * (lo + hi), 0.0, 1.0) : 0.0;
      const double at_eta = f_k + eta * span;
      const double residual = (1.0 + kappa * q) * at_eta - rhs;
      if (std::abs(residual) > 1e-9 * std::max(1.0, std::abs(rhs))) {
        throw Error(ErrorKind::NoConvergence, "threshold equation residual above tolerance");
      }
      return ThresholdSolution{kappa, eta, q * at_eta, price};
    }
    head_cost += table.cost(kappa);
    f_k = f_next;
  }
  throw Error(ErrorKind::NoConvergence, "threshold scan exceeded cap; inputs are likely mis-scaled");
}

OracleResult value_iteration_oracle(const Matrix& A, const Matrix& C_W, double p, double price, int state_cap,
                                    double tol, int max_iter) {
  if (state_cap < 1) throw Error(ErrorKind::DomainError, "state_cap must be >= 1");
  if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorKind::DomainError, "erasure probability must lie in [0, 1)");

  const auto states = static_cast<std::size_t>(state_cap) + 1;
  ErrorWeightTable<double> table(A, C_W);
  std::vector<double> cost(states);
  for (std::size_t s = 0; s < states; ++s) cost[s] = table.cost(static_cast<int>(s));

  constexpr double theta = 0.5;
  std::vector<double> h(states, 0.0);
  std::vector<double> next(states, 0.0);
  std::vector<int> policy(states, 0);
  double gain = 0.0;

  const auto up = [&](std::size_t s) { return std::min(s + 1, states - 1); };
  const auto evaluate = [&](std::size_t s, double& stay, double& send) {
    stay = cost[s] + h[up(s)];
    send = cost[s] + price + p * h[up(s)] + (1.0 - p) * h[0];
  };

  OracleResult result;
  for (int it = 1; it <= max_iter; ++it) {
    for (std::size_t s = 0; s < states; ++s) {
      double stay = 0.0;
      double send = 0.0;
      evaluate(s, stay, send);
      const double best = std::min(stay, send);
      next[s] = theta * best + (1.0 - theta) * h[s];
    }
    gain = next[0];
    double worst = 0.0;
    for (std::size_t s = 0; s < states; ++s) {
      next[s] -= gain;
      const double scale = std::max(1.0, std::abs(next[s]));
      worst = std::max(worst, std::abs(next[s] - h[s]) / scale);
    }
    h.swap(next);
    result.iterations = it;
    if (worst <= tol) break;
    if (it == max_iter) throw Error(ErrorKind::NoConvergence, "relative value iteration hit the iteration cap");
  }

  for (std::size_t s = 0; s < states; ++s) {
    double stay = 0.0;
    double send = 0.0;
    evaluate(s, stay, send);
    // ties go to transmitting
    policy[s] = send <= stay + 1e-12 * std::max(1.0, std::abs(stay)) ? 1 : 0;
  }

  result.policy = policy;
  result.average_cost = gain / theta;
  const auto first = std::find(policy.begin(), policy.end(), 1);
  result.threshold = static_cast<int>(first - policy.begin());
  result.is_threshold = std::all_of(first, policy.end(), [](int a) { return a == 1; });
  if (first != policy.end()) {
    result.residual_mass = stationary_distribution(result.threshold, result.threshold, 1.0, p).mass_above(state_cap);
  } else {
    result.residual_mass = 1.0;
  }
  return result;
}

AoIChain stationary_distribution(int lower, int upper, double q, double p) {
  if (lower < 0 || upper < lower) throw Error(ErrorKind::DomainError, "thresholds must satisfy 0 <= lower <= upper");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorKind::DomainError, "q must lie in [0, 1]");
  if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorKind::DomainError, "erasure probability must lie in [0, 1)");

  AoIChain chain{lower, upper, q, p, {}};
  chain.head.resize(static_cast<std::size_t>(upper) + 1);
  const double mixed_stay = 1.0 - q * (1.0 - p);
  double u = 1.0;
  double total = 0.0;
  for (int s = 0; s <= upper; ++s) {
    chain.head[static_cast<std::size_t>(s)] = u;
    total += s < upper ? u : u / (1.0 - p);
    u *= s < lower ? 1.0 : mixed_stay;
  }
  for (double& v : chain.head) v /= total;
  return chain;
}

double AoIChain::probability(int age) const {
  if (age < 0) return 0.0;
  if (age <= upper) return head[static_cast<std::size_t>(age)];
  return head.back() * std::pow(p, age - upper);
}

double AoIChain::mass_above(int a) const {
  if (a < 0) return total_mass();
  if (a >= upper) return head.back() * std::pow(p, a - upper + 1) / (1.0 - p);
  double mass = head.back() / (1.0 - p);
  for (int s = a + 1; s < upper; ++s) mass += head[static_cast<std::size_t>(s)];
  return mass;
}

double AoIChain::total_mass() const {
  double mass = head.back() / (1.0 - p);
  for (int s = 0; s < upper; ++s) mass += head[static_cast<std::size_t>(s)];
  return mass;
}

double AoIChain::attempt_rate() const {
  double mixed = 0.0;
  for (int s = lower; s < upper; ++s) mixed += head[static_cast<std::size_t>(s)];
  return q * mixed + head.back() / (1.0 - p);
}

double AoIChain::mean_age() const {
  double mean = 0.0;
  for (int s = 0; s < upper; ++s) mean += s * head[static_cast<std::size_t>(s)];
  // sum_{j>=0} (upper + j) p^j pi(upper)
  const double q = 1.0 - p;
  mean += head.back() * (upper / q + p / (q * q));
  return mean;
}

double transmission_rate(int lower, int upper, double q, double p) {
  return stationary_distribution(lower, upper, q, p).attempt_rate();
}

double return_rate_closed_form(int kappa, double p) {
  const double k1 = kappa + 1.0;
  const double num = ((1.0 - p) * p - 1.0) * ((1.0 - p) * p - 1.0);
  const double den = (1.0 - p) * ((p - 1.0) * p * k1 + (1.0 - p) * p + k1);
  return num / den;
}

}  // namespace aoi
