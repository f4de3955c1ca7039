#include "aoi/mfg.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include "aoi/error.hpp"
#include "aoi/estimator.hpp"

namespace aoi {

namespace {

using ComplexMatrix = Eigen::MatrixXcd;

int complex_rank(const ComplexMatrix& m) {
  Eigen::ColPivHouseholderQR<ComplexMatrix> qr(m);
  qr.setThreshold(1e-10);
  return static_cast<int>(qr.rank());
}

// PBH tests restricted to eigenvalues on or outside the unit circle.
void check_stabilizable_detectable(const Matrix& A, const Matrix& B, const Matrix& Q) {
  const Index n = A.rows();
  Eigen::EigenSolver<Matrix> solver(A, false);
  const auto eigenvalues = solver.eigenvalues();
  for (Index i = 0; i < n; ++i) {
    const std::complex<double> ev = eigenvalues(i);
    if (std::abs(ev) < 1.0 - 1e-12) continue;
    ComplexMatrix shifted = A.cast<std::complex<double>>() - ev * ComplexMatrix::Identity(n, n);
    ComplexMatrix ctrb(n, n + B.cols());
    ctrb << shifted, B.cast<std::complex<double>>();
    if (complex_rank(ctrb) < n) {
      throw Error(ErrorKind::RankDeficient, "(A, B) is not stabilizable");
    }
    ComplexMatrix obsv(2 * n, n);
    obsv << shifted, Q.cast<std::complex<double>>();
    if (complex_rank(obsv) < n) {
      throw Error(ErrorKind::RankDeficient, "(A, Q) is not detectable");
    }
  }
}

Matrix riccati_map(const Matrix& K, const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
  const Matrix BtK = B.transpose() * K;
  const Matrix S = R + BtK * B;
  const Matrix gain = S.ldlt().solve(BtK * A);
  Matrix next = Q + A.transpose() * K * A - A.transpose() * K.transpose() * B * gain;
  return 0.5 * (next + next.transpose());
}

double sup_gap(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  double gap = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) gap = std::max(gap, (a[k] - b[k]).lpNorm<Eigen::Infinity>());
  return gap;
}

Trajectory constant_trajectory(const Vector& value, int horizon) {
  Trajectory mu;
  mu.window.assign(static_cast<std::size_t>(horizon) + 1, value);
  mu.K3 = Matrix::Identity(value.size(), value.size());
  return mu;
}

Trajectory extend(const Trajectory& mu, int horizon) {
  Trajectory out;
  out.K3 = mu.K3;
  out.window.reserve(static_cast<std::size_t>(horizon) + 1);
  for (int k = 0; k <= horizon; ++k) {
    out.window.push_back(k <= mu.horizon() ? mu.window[static_cast<std::size_t>(k)] : Vector(mu.K3 * out.window.back()));
  }
  return out;
}

// Size of the stored tail ||mu_L|| r / (1 - r), infinite when K3 does not contract.
double tail_size(const Trajectory& mu) {
  const double r = spectral_norm(mu.K3);
  if (!(r < 1.0)) return std::numeric_limits<double>::infinity();
  return mu.window.back().norm() * r / (1.0 - r);
}

}  // namespace

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> solver(m, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Vector Trajectory::at(int k) const {
  if (k < 0) throw Error(ErrorKind::DomainError, "trajectory index must be >= 0");
  const int L = horizon();
  if (k <= L) return window[static_cast<std::size_t>(k)];
  Vector v = window.back();
  for (int j = L; j < k; ++j) v = K3 * v;
  return v;
}

double riccati_residual(const Matrix& K, const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
  return (K - riccati_map(K, A, B, Q, R)).norm();
}

TrackingGains solve_riccati(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, double tol,
                            int max_iter) {
  const Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() ||
      R.cols() != B.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "Riccati operands have inconsistent sizes");
  }
  if (!(tol > 0.0)) throw Error(ErrorKind::DomainError, "Riccati tolerance must be positive");
  check_stabilizable_detectable(A, B, Q);

  TrackingGains gains;
  Matrix K = Q;
  bool converged = false;
  for (int it = 1; it <= max_iter; ++it) {
    Matrix next = riccati_map(K, A, B, Q, R);
    const double step = (next - K).norm();
    K = std::move(next);
    gains.iterations = it;
    if (step < tol * std::max(1.0, K.norm())) {
      converged = true;
      break;
    }
  }
  if (!converged) throw Error(ErrorKind::NoConvergence, "Riccati iteration hit the iteration cap");

  gains.K = K;
  const Matrix S = R + B.transpose() * K * B;
  gains.K2 = S.ldlt().solve(B.transpose());
  gains.K1 = gains.K2 * K * A;
  gains.A_cl = A - B * gains.K1;
  gains.riccati_residual = riccati_residual(K, A, B, Q, R);
  gains.spectral_radius = spectral_radius(gains.A_cl);
  if (!(gains.spectral_radius < 1.0)) {
    throw Error(ErrorKind::UnstableClosedLoop, "closed-loop matrix is not Schur stable");
  }
  return gains;
}

Matrix solve_stein(const Matrix& A_cl, const Matrix& K3, const Matrix& Q) {
  const Index n = A_cl.rows();
  // vec(A_cl' G K3) = (K3' kron A_cl') vec(G)
  Matrix system = Matrix::Identity(n * n, n * n);
  const Matrix At = A_cl.transpose();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      system.block(i * n, j * n, n, n) -= K3(j, i) * At;
    }
  }
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible()) throw Error(ErrorKind::UnstableClosedLoop, "feedforward tail equation is singular");
  const Vector vecQ = Eigen::Map<const Vector>(Q.data(), n * n);
  const Vector vecG = lu.solve(vecQ);
  return Eigen::Map<const Matrix>(vecG.data(), n, n);
}

Feedforward g_trajectory(const Trajectory& mu, const Matrix& A_cl, const Matrix& Q, int horizon) {
  if (!(spectral_radius(A_cl) < 1.0)) throw Error(ErrorKind::UnstableClosedLoop, "closed-loop matrix is not Schur stable");
  if (horizon < 0) throw Error(ErrorKind::DomainError, "horizon must be >= 0");
  if (spectral_radius(A_cl) * spectral_radius(mu.K3) >= 1.0) {
    throw Error(ErrorKind::UnstableClosedLoop, "trajectory grows faster than the closed loop contracts");
  }
  Feedforward out;
  out.G = solve_stein(A_cl, mu.K3, Q);
  const int H = std::max(horizon, mu.horizon());
  const std::vector<Vector> values = extend(mu, H).window;
  std::vector<Vector> g(static_cast<std::size_t>(H) + 1);
  g[static_cast<std::size_t>(H)] = -out.G * values.back();
  const Matrix At = A_cl.transpose();
  for (int k = H - 1; k >= 0; --k) {
    g[static_cast<std::size_t>(k)] = At * g[static_cast<std::size_t>(k) + 1] - Q * values[static_cast<std::size_t>(k)];
  }
  g.resize(static_cast<std::size_t>(horizon) + 1);
  out.g = std::move(g);
  return out;
}

Vector control_action(const Vector& Z, const Vector& g_next, const TrackingGains& gains) {
  if (Z.size() != gains.K1.cols() || g_next.size() != gains.K2.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "control_action operands have inconsistent sizes");
  }
  return -gains.K1 * Z - gains.K2 * g_next;
}

Matrix estimate_decay(const std::vector<Vector>& window) {
  const Index n = window.front().size();
  const std::size_t L = window.size() - 1;
  if (L == 0) return Matrix::Zero(n, n);
  const std::size_t start = L / 2;
  Matrix cross = Matrix::Zero(n, n);
  Matrix gram = Matrix::Zero(n, n);
  for (std::size_t k = start; k < L; ++k) {
    cross += window[k + 1] * window[k].transpose();
    gram += window[k] * window[k].transpose();
  }
  if (gram.norm() == 0.0) return Matrix::Zero(n, n);
  return cross * gram.completeOrthogonalDecomposition().pseudoInverse();
}

Trajectory mf_operator(const Trajectory& mu, const std::vector<AgentType>& types,
                       const std::vector<TrackingGains>& gains) {
  const int L = mu.horizon();
  const Index n = mu.window.front().size();
  Trajectory out;
  out.window.assign(static_cast<std::size_t>(L) + 1, Vector::Zero(n));
  for (std::size_t t = 0; t < types.size(); ++t) {
    const auto& type = types[t];
    const auto& gain = gains[t];
    const Feedforward ff = g_trajectory(mu, gain.A_cl, type.Q, L);
    const Matrix BK2 = type.B * gain.K2;
    Vector nu = type.x0_mean;
    out.window[0] += type.prob * nu;
    for (int k = 0; k < L; ++k) {
      nu = gain.A_cl * nu - BK2 * ff.g[static_cast<std::size_t>(k) + 1];
      out.window[static_cast<std::size_t>(k) + 1] += type.prob * nu;
    }
  }
  out.K3 = estimate_decay(out.window);
  return out;
}

std::vector<double> contraction_constants(const std::vector<AgentType>& types, const std::vector<TrackingGains>& gains) {
  double coupling = 0.0;
  for (std::size_t t = 0; t < types.size(); ++t) {
    const double a = spectral_norm(gains[t].A_cl);
    const double denom = 1.0 - a;
    const double term = spectral_norm(types[t].Q) * spectral_norm(types[t].B * gains[t].K2) * types[t].prob;
    coupling += denom > 0.0 ? term / (denom * denom) : std::numeric_limits<double>::infinity();
  }
  std::vector<double> out;
  out.reserve(types.size());
  for (const auto& gain : gains) out.push_back(spectral_norm(gain.A_cl) + coupling);
  return out;
}

MeanFieldSolution solve_mfe(const std::vector<AgentType>& types, const MfeOptions& options) {
  if (types.empty()) throw Error(ErrorKind::InvalidConfig, "no agent types");
  MeanFieldSolution sol;
  for (const auto& type : types) sol.gains.push_back(solve_riccati(type.A, type.B, type.Q, type.R));
  sol.type_constants = contraction_constants(types, sol.gains);
  sol.contraction_constant = *std::max_element(sol.type_constants.begin(), sol.type_constants.end());
  sol.contraction_holds = sol.contraction_constant < 1.0;

  const Index n = types.front().state_dim();
  Vector mean0 = Vector::Zero(n);
  for (const auto& type : types) mean0 += type.prob * type.x0_mean;

  Trajectory mu = constant_trajectory(mean0, options.initial_window);
  double previous_gap = 0.0;
  for (int it = 1; it <= options.max_iter; ++it) {
    Trajectory next = mf_operator(mu, types, sol.gains);
    const double gap = sup_gap(next.window, mu.window);
    sol.gaps.push_back(gap);
    if (it > 1 && previous_gap > 1e-13) sol.ratios.push_back(gap / previous_gap);
    previous_gap = gap;
    mu = std::move(next);
    sol.iterations = it;
    if (gap <= options.tol) {
      if (tail_size(mu) <= options.tol / 10.0) break;
      const int grown = 2 * mu.horizon();
      if (grown > options.max_window) throw Error(ErrorKind::NoConvergence, "mean-field window exceeded its cap");
      mu = extend(mu, grown);
      previous_gap = 0.0;  // ratios across a window change are not comparable
    }
    if (it == options.max_iter) {
      std::ostringstream os;
      os << "Picard iteration did not converge (last gap " << gap << ", contraction constant "
         << sol.contraction_constant << ")";
      throw Error(ErrorKind::NoConvergence, os.str());
    }
  }
  sol.residual = sup_gap(mf_operator(mu, types, sol.gains).window, mu.window);
  sol.mu = std::move(mu);
  return sol;
}

CostBound cost_upper_bound(const AgentType& type, int kappa_hat, double p, const TrackingGains& gains,
                           const Trajectory& mu, int horizon) {
  if (kappa_hat < 0) throw Error(ErrorKind::DomainError, "kappa_hat must be >= 0");
  if (horizon < 1) throw Error(ErrorKind::DomainError, "horizon must be >= 1");
  const double a = type.A.squaredNorm();
  if (!(a * p < 1.0)) {
    std::ostringstream os;
    os << "estimation tail diverges: ||A||_F^2 * p = " << a * p;
    throw Error(ErrorKind::AssumptionViolation, os.str());
  }

  CostBound bound;
  bound.noise_term = (gains.K * type.C_W).trace();

  const Feedforward ff = g_trajectory(mu, gains.A_cl, type.Q, horizon);
  const Matrix BK2 = type.B * gains.K2;
  double tracking = 0.0;
  for (int k = 0; k < horizon; ++k) {
    const Vector m = mu.at(k);
    const Vector& g = ff.g[static_cast<std::size_t>(k) + 1];
    tracking += m.dot(type.Q * m) - g.dot(BK2 * g);
  }
  bound.tracking_term = tracking / horizon;

  bound.estimation_coefficient = spectral_norm(type.A.transpose() * gains.K.transpose() * type.B * gains.K1);

  ErrorWeightTable<double> table(type.A, type.C_W);
  for (int m = 1; m <= kappa_hat; ++m) bound.estimation_head += table.weight(m);

  const double cw = type.C_W.norm();
  if (p == 0.0) {
    bound.estimation_tail = 0.0;
  } else if (std::abs(a - 1.0) > 1e-8) {
    bound.estimation_tail =
        cw / (a - 1.0) * (std::pow(a, kappa_hat + 1) * p / (1.0 - a * p) - p / (1.0 - p));
  } else {
    // sum_{j >= 1} cw * (sum_{r=1}^{kappa_hat + j} a^{r-1}) p^j
    double geometric = 0.0;
    double power = 1.0;
    for (int r = 1; r <= kappa_hat; ++r) {
      geometric += power;
      power *= a;
    }
    double weight = 1.0;
    double sum = 0.0;
    for (int j = 1; j < 10'000'000; ++j) {
      geometric += power;
      power *= a;
      weight *= p;
      const double term = cw * geometric * weight;
      sum += term;
      if (term <= 1e-16 * sum) break;
    }
    bound.estimation_tail = sum;
  }

  bound.total = bound.noise_term + bound.tracking_term +
                bound.estimation_coefficient * (bound.estimation_head + bound.estimation_tail);
  return bound;
}

}  // namespace aoi
