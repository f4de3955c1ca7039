#pragma once

#include <vector>

#include "aoi/model.hpp"
#include "aoi/types.hpp"

namespace aoi {

struct TrackingGains {
  Matrix K;     // Riccati fixed point
  Matrix K1;    // feedback gain
  Matrix K2;    // feedforward gain
  Matrix A_cl;  // A - B K1
  double riccati_residual = 0.0;
  double spectral_radius = 0.0;  // of A_cl
  int iterations = 0;
};

/// Trajectory stored on k = 0..L with the geometric continuation mu_{L+j} = K3^j mu_L.
struct Trajectory {
  std::vector<Vector> window;
  Matrix K3;

  int horizon() const { return static_cast<int>(window.size()) - 1; }
  Vector at(int k) const;
};

/// Feedforward term g_k for k = 0..horizon; beyond the stored window of mu, g_k = -G mu_k.
struct Feedforward {
  std::vector<Vector> g;
  Matrix G;
};

/// Fixed-point DARE iteration with PBH stabilizability/detectability checks.
TrackingGains solve_riccati(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, double tol = 1e-13,
                            int max_iter = 1'000'000);

/// Riccati residual ||K - (Q + A'KA - A'KB (R + B'KB)^-1 B'KA)||_F.
double riccati_residual(const Matrix& K, const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R);

/// Solves G = Q + A_cl' G K3 (vectorized); throws UnstableClosedLoop when no solution exists.
Matrix solve_stein(const Matrix& A_cl, const Matrix& K3, const Matrix& Q);

/// g_k = A_cl' g_{k+1} - Q mu_k, anchored by the tail g_H = -G mu_H.
Feedforward g_trajectory(const Trajectory& mu, const Matrix& A_cl, const Matrix& Q, int horizon);

/// U = -K1 Z - K2 g_next.
Vector control_action(const Vector& Z, const Vector& g_next, const TrackingGains& gains);

/// Least-squares K3 from consecutive window samples (later half of the window).
Matrix estimate_decay(const std::vector<Vector>& window);

/// Population mean of the closed-loop means when every agent tracks mu. Same window as mu.
Trajectory mf_operator(const Trajectory& mu, const std::vector<AgentType>& types,
                       const std::vector<TrackingGains>& gains);

struct MfeOptions {
  double tol = 1e-10;
  int max_iter = 10'000;
  int initial_window = 64;
  int max_window = 1 << 16;
};

struct MeanFieldSolution {
  Trajectory mu;
  std::vector<TrackingGains> gains;
  std::vector<double> type_constants;  // left-hand side of the contraction condition, per type
  double contraction_constant = 0.0;   // max over types
  bool contraction_holds = false;
  double residual = 0.0;               // sup-norm ||M_F(mu) - mu|| on the window
  std::vector<double> gaps;
  std::vector<double> ratios;
  int iterations = 0;
};

/// Per-type contraction constants ||A_cl|| + sum_psi ||Q|| ||B K2|| (1 - ||A_cl||)^-2 P (spectral norms).
std::vector<double> contraction_constants(const std::vector<AgentType>& types, const std::vector<TrackingGains>& gains);

/// Picard iteration from the constant trajectory at the initial population mean.
/// A violated contraction condition is reported in the result, not thrown.
MeanFieldSolution solve_mfe(const std::vector<AgentType>& types, const MfeOptions& options = {});

struct CostBound {
  double noise_term = 0.0;     // tr(K C_W)
  double tracking_term = 0.0;  // average of mu'Q mu - g' B K2 g over the horizon
  double estimation_coefficient = 0.0;
  double estimation_head = 0.0;
  double estimation_tail = 0.0;
  double total = 0.0;
};

/// Upper bound on the per-agent game cost of one type; kappa_hat is the upper threshold of the type.
CostBound cost_upper_bound(const AgentType& type, int kappa_hat, double p, const TrackingGains& gains,
                           const Trajectory& mu, int horizon);

double spectral_norm(const Matrix& m);
double spectral_radius(const Matrix& m);

}  // namespace aoi
