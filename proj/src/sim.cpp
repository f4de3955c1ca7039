#include "aoi/sim.hpp"

#include <algorithm>
#include <numeric>

#include "aoi/error.hpp"
#include "aoi/estimator.hpp"

namespace aoi {

namespace {

// Square-root factor S with S S' = cov for a symmetric PSD covariance.
Matrix covariance_factor(const Matrix& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  const Vector roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * roots.asDiagonal();
}

struct GaussianStream {
  std::mt19937_64 rng;
  std::normal_distribution<double> normal{0.0, 1.0};

  Vector draw(const Matrix& factor) {
    Vector z(factor.cols());
    for (Index j = 0; j < z.size(); ++j) z(j) = normal(rng);
    return factor * z;
  }
};

std::vector<std::mt19937_64> make_streams(std::uint64_t seed, int run, Stream stream, int N) {
  std::vector<std::mt19937_64> out;
  out.reserve(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    out.push_back(make_stream(seed, static_cast<std::uint64_t>(run), stream, static_cast<std::uint64_t>(i)));
  }
  return out;
}

SchedulingMetrics simulate_ages(const ScenarioConfig& config, const Population& population,
                                const RelaxedPolicy& policy, bool project, int run,
                                const SchedulingOptions& options) {
  const int N = population.size();
  const double p = config.p;
  auto channel = make_streams(config.seed, run, Stream::Channel, N);
  auto coin = make_streams(config.seed, run, Stream::Coin, N);

  std::vector<ErrorWeightTable<double>> tables;
  for (const auto& type : config.types) tables.emplace_back(type.A, type.C_W);

  SchedulingMetrics m;
  m.age_histogram.assign(static_cast<std::size_t>(options.histogram_cap) + 1, 0);
  std::vector<int> age(static_cast<std::size_t>(N), options.initial_age);
  std::vector<std::uint8_t> intent(static_cast<std::size_t>(N));
  std::vector<double> uniforms(static_cast<std::size_t>(N));
  long long attempts = 0;
  long long requests = 0;
  long long successes = 0;

  for (int k = 0; k < config.T; ++k) {
    double step_cost = 0.0;
    std::vector<double> agent_cost(options.trace ? static_cast<std::size_t>(N) : 0);
    for (int i = 0; i < N; ++i) {
      const auto s = static_cast<std::size_t>(i);
      const int type = population.type_of[s];
      const int tau = age[s];
      const double c = tables[static_cast<std::size_t>(type)].cost(tau);
      step_cost += c;
      if (options.trace) agent_cost[s] = c;
      m.max_age = std::max(m.max_age, tau);
      ++m.age_histogram[static_cast<std::size_t>(std::min(tau, options.histogram_cap))];
      if (options.tail_age >= 0 && tau > options.tail_age) ++m.tail_exceedances;
      const double u = uniform01(coin[s]);
      intent[s] = relaxed_decision(tau, policy.kappa_low[static_cast<std::size_t>(type)],
                                   policy.kappa_high[static_cast<std::size_t>(type)], policy.q, u)
                      ? 1
                      : 0;
      uniforms[s] = uniform01(channel[s]);
    }
    m.cost.add(step_cost / N);
    m.samples += N;

    std::vector<std::uint8_t> transmit;
    if (project) {
      ScheduleDecision decision = matb_select(intent, age, config.capacity);
      if (decision.projected) ++m.projected_steps;
      requests += decision.requested;
      transmit = std::move(decision.transmit);
    } else {
      requests += std::count(intent.begin(), intent.end(), std::uint8_t{1});
      transmit = intent;
    }
    const auto sent = std::count(transmit.begin(), transmit.end(), std::uint8_t{1});
    attempts += sent;
    if (project && sent > config.capacity) ++m.capacity_violations;

    const auto received = step_channel(transmit, p, uniforms);
    for (int i = 0; i < N; ++i) {
      const auto s = static_cast<std::size_t>(i);
      if (options.trace) {
        m.trace.push_back(TraceRow{run, k, i, population.type_of[s], age[s], transmit[s],
                                   transmit[s] && !received[s] ? 1 : 0, agent_cost[s], 0.0, false});
      }
      successes += received[s];
      age[s] = update_aoi(age[s], received[s] != 0);
    }
  }
  m.attempt_rate = static_cast<double>(attempts) / config.T;
  m.request_rate = static_cast<double>(requests) / config.T;
  m.success_rate = static_cast<double>(successes) / config.T;
  return m;
}

}  // namespace

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t run, Stream stream, std::uint64_t agent) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(agent),
                    static_cast<std::uint32_t>(agent >> 32)};
  return std::mt19937_64(seq);
}

std::vector<std::uint8_t> step_channel(std::span<const std::uint8_t> transmit, double p,
                                       std::span<const double> uniforms) {
  if (transmit.size() != uniforms.size()) throw Error(ErrorKind::DimensionMismatch, "one uniform per agent expected");
  std::vector<std::uint8_t> received(transmit.size(), 0);
  for (std::size_t i = 0; i < transmit.size(); ++i) received[i] = transmit[i] && uniforms[i] >= p ? 1 : 0;
  return received;
}

std::vector<std::uint8_t> step_channel(std::span<const std::uint8_t> transmit, double p, std::mt19937_64& rng) {
  std::vector<double> uniforms(transmit.size());
  for (double& u : uniforms) u = uniform01(rng);
  return step_channel(transmit, p, uniforms);
}

SchedulingResult run_scheduling_experiment(const ScenarioConfig& config, const Population& population,
                                           const RelaxedPolicy& policy, PolicyKind kind, int run,
                                           const SchedulingOptions& options) {
  SchedulingResult result;
  if (kind == PolicyKind::Relaxed || kind == PolicyKind::Both) {
    result.relaxed = simulate_ages(config, population, policy, false, run, options);
    result.has_relaxed = true;
  }
  if (kind == PolicyKind::Matb || kind == PolicyKind::Both) {
    result.matb = simulate_ages(config, population, policy, true, run, options);
    result.has_matb = true;
  }
  return result;
}

GameMetrics run_game_experiment(const ScenarioConfig& config, const Population& population,
                                const RelaxedPolicy& policy, const MeanFieldSolution& mfe, int run,
                                const GameOptions& options) {
  const int N = population.size();
  const int T = config.T;
  const auto& types = config.types;
  const std::size_t n_types = types.size();
  const Index n = types.front().state_dim();

  std::vector<Matrix> noise_factor;
  std::vector<Matrix> initial_factor;
  std::vector<Feedforward> feedforward;
  std::vector<ErrorWeightTable<double>> tables;
  for (std::size_t t = 0; t < n_types; ++t) {
    noise_factor.push_back(covariance_factor(types[t].C_W));
    initial_factor.push_back(covariance_factor(types[t].x0_cov));
    feedforward.push_back(g_trajectory(mfe.mu, mfe.gains[t].A_cl, types[t].Q, T + 1));
    tables.emplace_back(types[t].A, types[t].C_W);
  }
  const std::vector<Vector> mu_star = [&] {
    std::vector<Vector> values;
    values.reserve(static_cast<std::size_t>(T));
    for (int k = 0; k < T; ++k) {
      values.push_back(k <= mfe.mu.horizon() ? mfe.mu.window[static_cast<std::size_t>(k)]
                                             : Vector(mfe.mu.K3 * values.back()));
    }
    return values;
  }();

  auto channel = make_streams(config.seed, run, Stream::Channel, N);
  auto coin = make_streams(config.seed, run, Stream::Coin, N);
  std::vector<GaussianStream> noise;
  noise.reserve(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    noise.push_back(GaussianStream{make_stream(config.seed, static_cast<std::uint64_t>(run), Stream::Noise,
                                               static_cast<std::uint64_t>(i))});
  }

  GameMetrics m;
  m.agent_cost.assign(static_cast<std::size_t>(N), 0.0);
  m.error_samples.assign(options.error_checkpoints.size(), {});
  m.error_sq_sum.assign(n_types, std::vector<double>(static_cast<std::size_t>(options.error_age_cap) + 1, 0.0));
  m.error_count.assign(n_types, std::vector<long long>(static_cast<std::size_t>(options.error_age_cap) + 1, 0));
  m.consensus_series.reserve(static_cast<std::size_t>(T));

  std::vector<Vector> X(static_cast<std::size_t>(N));
  std::vector<DecoderState<double>> decoder(static_cast<std::size_t>(N));
  std::vector<Vector> U(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    const auto s = static_cast<std::size_t>(i);
    const auto t = static_cast<std::size_t>(population.type_of[s]);
    GaussianStream initial{make_stream(config.seed, static_cast<std::uint64_t>(run), Stream::Initial,
                                       static_cast<std::uint64_t>(i))};
    X[s] = types[t].x0_mean + initial.draw(initial_factor[t]);
    decoder[s] = DecoderState<double>{X[s], Vector::Zero(types[t].input_dim()), 0};
    U[s] = Vector::Zero(types[t].input_dim());
  }

  std::vector<int> age(static_cast<std::size_t>(N), 0);
  std::vector<std::uint8_t> intent(static_cast<std::size_t>(N));
  std::vector<double> uniforms(static_cast<std::size_t>(N));
  std::vector<std::uint8_t> transmit(static_cast<std::size_t>(N), 0);
  std::vector<std::uint8_t> received(static_cast<std::size_t>(N), 0);
  std::vector<double> bs_cost(static_cast<std::size_t>(N), 0.0);
  long long attempts = 0;

  for (int k = 0; k < T; ++k) {
    // The decoders start from X_0, so scheduling begins at k = 1.
    if (k > 0) {
      for (int i = 0; i < N; ++i) {
        const auto s = static_cast<std::size_t>(i);
        const auto t = static_cast<std::size_t>(population.type_of[s]);
        bs_cost[s] = tables[t].cost(age[s]);
        intent[s] = relaxed_decision(age[s], policy.kappa_low[t], policy.kappa_high[t], policy.q,
                                     uniform01(coin[s]))
                        ? 1
                        : 0;
        uniforms[s] = uniform01(channel[s]);
      }
      ScheduleDecision decision = matb_select(intent, age, config.capacity);
      transmit = std::move(decision.transmit);
      const auto sent = std::count(transmit.begin(), transmit.end(), std::uint8_t{1});
      attempts += sent;
      if (sent > config.capacity) ++m.capacity_violations;
      received = step_channel(transmit, config.p, uniforms);
      for (int i = 0; i < N; ++i) {
        const auto s = static_cast<std::size_t>(i);
        const auto t = static_cast<std::size_t>(population.type_of[s]);
        decoder[s] = decoder_update(decoder[s], X[s], U[s], received[s] != 0, types[t].A, types[t].B);
      }
    }

    Vector mean = Vector::Zero(n);
    for (const auto& x : X) mean += x;
    mean /= N;
    const double consensus = (mean - mu_star[static_cast<std::size_t>(k)]).squaredNorm();
    m.consensus_series.push_back(consensus);

    const auto checkpoint = std::find(options.error_checkpoints.begin(), options.error_checkpoints.end(), k);
    for (int i = 0; i < N; ++i) {
      const auto s = static_cast<std::size_t>(i);
      const auto t = static_cast<std::size_t>(population.type_of[s]);
      const Vector& g_next = feedforward[t].g[static_cast<std::size_t>(k) + 1];
      U[s] = control_action(decoder[s].estimate, g_next, mfe.gains[t]);
      const Vector dev = X[s] - mean;
      const double cost = dev.dot(types[t].Q * dev) + U[s].dot(types[t].R * U[s]);
      m.agent_cost[s] += cost;

      const Vector e = X[s] - decoder[s].estimate;
      const int d = decoder[s].age;
      if (d <= options.error_age_cap) {
        m.error_sq_sum[t][static_cast<std::size_t>(d)] += e.squaredNorm();
        ++m.error_count[t][static_cast<std::size_t>(d)];
      }
      if (checkpoint != options.error_checkpoints.end()) {
        m.error_samples[static_cast<std::size_t>(checkpoint - options.error_checkpoints.begin())].push_back(e(0));
      }
      if (options.trace) {
        m.trace.push_back(TraceRow{run, k, i, static_cast<int>(t), age[s], k > 0 ? transmit[s] : 0,
                                   k > 0 && transmit[s] && !received[s] ? 1 : 0, k > 0 ? bs_cost[s] : 0.0, cost,
                                   true});
      }
    }

    for (int i = 0; i < N; ++i) {
      const auto s = static_cast<std::size_t>(i);
      const auto t = static_cast<std::size_t>(population.type_of[s]);
      X[s] = types[t].A * X[s] + types[t].B * U[s] + noise[s].draw(noise_factor[t]);
      if (k > 0) age[s] = update_aoi(age[s], received[s] != 0);
    }
  }

  m.type_cost.assign(n_types, 0.0);
  for (int i = 0; i < N; ++i) {
    const auto s = static_cast<std::size_t>(i);
    m.agent_cost[s] /= T;
    m.type_cost[static_cast<std::size_t>(population.type_of[s])] += m.agent_cost[s];
    m.mean_cost += m.agent_cost[s];
  }
  for (std::size_t t = 0; t < n_types; ++t) {
    if (population.counts[t] > 0) m.type_cost[t] /= population.counts[t];
  }
  m.mean_cost /= N;
  m.consensus_error = std::accumulate(m.consensus_series.begin(), m.consensus_series.end(), 0.0) / T;
  m.attempt_rate = T > 1 ? static_cast<double>(attempts) / (T - 1) : 0.0;
  return m;
}

}  // namespace aoi
