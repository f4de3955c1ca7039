#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aoi/analysis.hpp"
#include "aoi/error.hpp"
#include "aoi/experiments.hpp"
#include "aoi/mfg.hpp"
#include "aoi/model.hpp"
#include "aoi/scheduler.hpp"
#include "aoi/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::string out = "out";
  std::string preset;
  std::optional<double> p;
  std::optional<double> alpha;
  std::optional<int> runs;
  std::vector<int> N;
  std::optional<int> T;
  std::optional<double> delta;
  bool report = false;
  bool trace = false;
  bool strict = false;
};

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) return {std::stoull(text)};
    const std::uint64_t first = std::stoull(text.substr(0, dots));
    const std::uint64_t last = std::stoull(text.substr(dots + 2));
    if (last < first) throw aoi::Error(aoi::ErrorKind::InvalidConfig, "--seeds range is empty: " + text);
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = first; s <= last; ++s) seeds.push_back(s);
    return seeds;
  } catch (const std::logic_error&) {
    throw aoi::Error(aoi::ErrorKind::InvalidConfig, "--seeds expects INT or A..B, got '" + text + "'");
  }
}

std::optional<aoi::ScenarioConfig> load_config(const Flags& flags) {
  if (flags.config.empty()) return std::nullopt;
  return aoi::load_scenario_file(flags.config);
}

class Manifest {
 public:
  Manifest(std::string command, const Flags& flags)
      : start_(std::chrono::steady_clock::now()), out_(flags.out) {
    manifest_.command = std::move(command);
    manifest_.version = aoi::code_version();
  }

  void set_inputs(const json& effective, std::uint64_t seed) {
    manifest_.config_hash = aoi::fnv1a_hex(effective.dump());
    manifest_.seed = seed;
  }

  fs::path output(const std::string& name) {
    manifest_.outputs.push_back(name);
    return out_ / name;
  }

  void finish() {
    manifest_.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    aoi::write_json(out_ / (manifest_.command + "_manifest.json"), aoi::to_json(manifest_));
  }

 private:
  std::chrono::steady_clock::time_point start_;
  fs::path out_;
  aoi::RunManifest manifest_;
};

std::string num(double v) { return aoi::format_number(v); }

json policy_json(const aoi::RelaxedPolicy& policy, const std::vector<aoi::AgentType>& types, double p) {
  json j;
  j["lambda_low"] = policy.lambda_low;
  j["lambda_high"] = policy.lambda_high;
  j["q"] = policy.q;
  j["rate_low"] = policy.rate_low;
  j["rate_high"] = policy.rate_high;
  j["capacity"] = policy.capacity;
  j["degenerate"] = policy.degenerate;
  json per_type = json::array();
  for (std::size_t t = 0; t < types.size(); ++t) {
    per_type.push_back({{"label", types[t].label},
                        {"kappa_low", policy.kappa_low[t]},
                        {"kappa_high", policy.kappa_high[t]},
                        {"rate_low", aoi::threshold_rate(policy.kappa_low[t], p)},
                        {"rate_high", aoi::threshold_rate(policy.kappa_high[t], p)},
                        {"return_rate_closed_form_high", aoi::return_rate_closed_form(policy.kappa_high[t], p)}});
  }
  j["types"] = per_type;
  return j;
}

void write_trace(const fs::path& path, const std::vector<aoi::TraceRow>& rows) {
  std::vector<std::vector<std::string>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    out.push_back({std::to_string(r.run), std::to_string(r.k), std::to_string(r.agent), std::to_string(r.type),
                   std::to_string(r.tau), std::to_string(r.zeta), std::to_string(r.erased), num(r.cost_bs),
                   r.has_game_cost ? num(r.cost_game) : std::string()});
  }
  aoi::write_csv(path, {"run", "k", "agent", "type", "tau", "zeta", "erased", "cost_bs", "cost_game"}, out);
}

int cmd_schedule(const Flags& flags) {
  Manifest manifest("schedule", flags);
  const auto file = load_config(flags);

  aoi::Fig2Options options;
  options.types = file ? file->types : aoi::reference_types();
  options.p = flags.p.value_or(file ? file->p : 0.2);
  options.alpha = flags.alpha.value_or(file ? file->alpha() : 0.25);
  options.T = flags.T.value_or(file ? file->T : 5000);
  if (file) options.eps = file->bisection_eps;
  if (!flags.N.empty()) {
    options.Ns = flags.N;
  } else if (file && flags.preset != "fig2") {
    options.Ns = {file->N};
  }
  const std::uint64_t first_seed = flags.seed.value_or(file ? file->seed : 1);
  if (!flags.seeds.empty()) {
    options.seeds = parse_seeds(flags.seeds);
  } else {
    const int runs = flags.runs.value_or(file ? file->mc_runs : 30);
    if (runs < 1) throw aoi::Error(aoi::ErrorKind::InvalidConfig, "--runs must be >= 1");
    for (int r = 0; r < runs; ++r) options.seeds.push_back(first_seed + static_cast<std::uint64_t>(r));
  }

  json effective;
  effective["Ns"] = options.Ns;
  effective["p"] = options.p;
  effective["alpha"] = options.alpha;
  effective["T"] = options.T;
  effective["seeds"] = options.seeds;
  effective["eps"] = options.eps;
  aoi::ScenarioConfig probe = aoi::reference_scenario(options.Ns.front(), options.alpha, options.p, options.T);
  probe.types = options.types;
  effective["types"] = aoi::to_json(probe)["types"];
  manifest.set_inputs(effective, options.seeds.front());

  const auto rows = aoi::run_fig2(options);
  const bool p_zero = options.p == 0.0;

  std::vector<std::string> header{"N", "J_relaxed", "J_matb", "gap", "gap_bound"};
  if (p_zero) {
    header.push_back("max_aoi");
    header.push_back("aoi_cap");
  }
  std::vector<std::vector<std::string>> table;
  std::vector<std::vector<std::string>> per_seed;
  bool cap_violated = false;
  for (const auto& row : rows) {
    std::vector<std::string> line{std::to_string(row.N), num(row.J_relaxed), num(row.J_matb), num(row.gap),
                                  num(row.gap_bound)};
    if (p_zero) {
      line.push_back(std::to_string(row.max_aoi));
      line.push_back(std::to_string(row.aoi_cap));
      cap_violated = cap_violated || row.max_aoi > row.aoi_cap;
    }
    table.push_back(std::move(line));
    for (std::size_t s = 0; s < options.seeds.size(); ++s) {
      per_seed.push_back({std::to_string(row.N), std::to_string(options.seeds[s]), num(row.seed_relaxed[s]),
                          num(row.seed_matb[s]), num(row.seed_matb[s] - row.seed_relaxed[s])});
    }
  }
  aoi::write_csv(manifest.output("fig2.csv"), header, table);
  aoi::write_csv(manifest.output("fig2_seeds.csv"), {"N", "seed", "J_relaxed", "J_matb", "gap"}, per_seed);

  if (flags.report) {
    json report = json::array();
    for (const int N : options.Ns) {
      aoi::ScenarioConfig config = aoi::reference_scenario(N, options.alpha, options.p, options.T);
      config.types = options.types;
      const auto population = aoi::assign_types(N, config.types);
      const auto policy = aoi::bisection_lambda(population, config.types, config.p, config.capacity, options.eps);
      json entry = policy_json(policy, config.types, config.p);
      entry["N"] = N;
      entry["randomized_rate"] = aoi::randomized_rate(policy, population, config.p);
      report.push_back(entry);
    }
    aoi::write_json(manifest.output("schedule_report.json"), report);
  }
  if (flags.trace) {
    aoi::ScenarioConfig config = aoi::reference_scenario(options.Ns.front(), options.alpha, options.p, options.T,
                                                         options.seeds.front());
    config.types = options.types;
    const auto population = aoi::assign_types(config.N, config.types);
    const auto policy = aoi::bisection_lambda(population, config.types, config.p, config.capacity, options.eps);
    aoi::SchedulingOptions sim;
    sim.trace = true;
    const auto result = aoi::run_scheduling_experiment(config, population, policy, aoi::PolicyKind::Matb, 0, sim);
    write_trace(manifest.output("schedule_trace.csv"), result.matb.trace);
  }
  manifest.finish();
  if (cap_violated) {
    std::cerr << "error: p = 0 age cap exceeded\n";
    return 2;
  }
  return 0;
}

std::vector<std::vector<std::string>> fig3_table(const std::vector<aoi::Fig3Row>& rows) {
  std::vector<std::vector<std::string>> table;
  for (const auto& r : rows) {
    table.push_back({num(r.alpha), num(r.p), std::to_string(r.capacity), num(r.median), num(r.q1), num(r.q3),
                     num(r.mean)});
  }
  return table;
}

void warn_contraction(const aoi::MeanFieldSolution& mfe, bool strict) {
  if (mfe.contraction_holds) return;
  if (strict) {
    throw aoi::Error(aoi::ErrorKind::AssumptionViolation,
                     "contraction constant " + num(mfe.contraction_constant) + " >= 1");
  }
  std::cerr << "warning: contraction constant " << num(mfe.contraction_constant)
            << " >= 1; fixed-point convergence is not guaranteed\n";
}

int cmd_game(const Flags& flags) {
  Manifest manifest("game", flags);
  const auto file = load_config(flags);

  aoi::Fig3Options options;
  options.types = file ? file->types : aoi::reference_types();
  options.N = flags.N.empty() ? (file ? file->N : 90) : flags.N.front();
  options.T = flags.T.value_or(file ? file->T : 500);
  options.runs = flags.runs.value_or(file ? file->mc_runs : 20);
  options.seed = flags.seed.value_or(file ? file->seed : 1);
  if (file) options.eps = file->bisection_eps;
  if (flags.alpha) options.alpha_for_p = *flags.alpha;
  if (flags.p) options.p_for_alpha = *flags.p;
  if (options.runs < 1) throw aoi::Error(aoi::ErrorKind::InvalidConfig, "--runs must be >= 1");

  json effective;
  effective["N"] = options.N;
  effective["T"] = options.T;
  effective["runs"] = options.runs;
  effective["seed"] = options.seed;
  effective["alphas"] = options.alphas;
  effective["p_for_alpha"] = options.p_for_alpha;
  effective["ps"] = options.ps;
  effective["alpha_for_p"] = options.alpha_for_p;
  aoi::ScenarioConfig probe = aoi::reference_scenario(options.N, options.alpha_for_p, options.p_for_alpha, options.T);
  probe.types = options.types;
  effective["types"] = aoi::to_json(probe)["types"];
  manifest.set_inputs(effective, options.seed);

  const auto mfe = aoi::solve_mfe(options.types);
  warn_contraction(mfe, flags.strict);

  aoi::Fig3Result result;
  for (const double alpha : options.alphas) {
    result.alpha_sweep.push_back(aoi::run_game_point(options.types, mfe, options.N, options.T, alpha,
                                                     options.p_for_alpha, options.runs, options.seed, options.eps));
    std::cerr << "alpha " << num(alpha) << ": median " << num(result.alpha_sweep.back().median) << '\n';
  }
  for (const double p : options.ps) {
    result.p_sweep.push_back(aoi::run_game_point(options.types, mfe, options.N, options.T, options.alpha_for_p, p,
                                                 options.runs, options.seed, options.eps));
    std::cerr << "p " << num(p) << ": median " << num(result.p_sweep.back().median) << '\n';
  }
  const std::vector<std::string> header{"alpha", "p", "capacity", "median", "q1", "q3", "mean"};
  aoi::write_csv(manifest.output("fig3a.csv"), header, fig3_table(result.alpha_sweep));
  aoi::write_csv(manifest.output("fig3b.csv"), header, fig3_table(result.p_sweep));

  std::vector<std::vector<std::string>> runs;
  const auto add_runs = [&](const std::string& sweep, const std::vector<aoi::Fig3Row>& rows) {
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.run_costs.size(); ++i) {
        runs.push_back({sweep, num(r.alpha), num(r.p), std::to_string(i), num(r.run_costs[i])});
      }
    }
  };
  add_runs("alpha", result.alpha_sweep);
  add_runs("p", result.p_sweep);
  aoi::write_csv(manifest.output("fig3_runs.csv"), {"sweep", "alpha", "p", "run", "cost"}, runs);

  if (flags.trace) {
    aoi::ScenarioConfig config =
        aoi::reference_scenario(options.N, options.alpha_for_p, options.p_for_alpha, options.T, options.seed);
    config.types = options.types;
    const auto population = aoi::assign_types(config.N, config.types);
    const auto policy = aoi::bisection_lambda(population, config.types, config.p, config.capacity, options.eps);
    aoi::GameOptions game;
    game.trace = true;
    const auto metrics = aoi::run_game_experiment(config, population, policy, mfe, 0, game);
    write_trace(manifest.output("game_trace.csv"), metrics.trace);
  }
  manifest.finish();
  return 0;
}

json matrix_json(const aoi::Matrix& m) {
  json rows = json::array();
  for (aoi::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (aoi::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

int cmd_mfe(const Flags& flags) {
  Manifest manifest("mfe", flags);
  const auto file = load_config(flags);
  const auto types = file ? file->types : aoi::reference_types();
  aoi::ScenarioConfig probe = aoi::reference_scenario(90, 0.45, 0.2, 500);
  probe.types = types;
  manifest.set_inputs(aoi::to_json(probe)["types"], 0);

  const auto mfe = aoi::solve_mfe(types);
  warn_contraction(mfe, flags.strict);

  json report;
  json gains = json::array();
  for (std::size_t t = 0; t < types.size(); ++t) {
    const auto& g = mfe.gains[t];
    gains.push_back({{"label", types[t].label},
                     {"K", matrix_json(g.K)},
                     {"K1", matrix_json(g.K1)},
                     {"K2", matrix_json(g.K2)},
                     {"A_cl", matrix_json(g.A_cl)},
                     {"riccati_residual", g.riccati_residual},
                     {"spectral_radius", g.spectral_radius},
                     {"contraction_constant", mfe.type_constants[t]}});
  }
  report["gains"] = gains;
  report["contraction_constant"] = mfe.contraction_constant;
  report["contraction_holds"] = mfe.contraction_holds;
  report["residual"] = mfe.residual;
  report["iterations"] = mfe.iterations;
  report["gaps"] = mfe.gaps;
  report["ratios"] = mfe.ratios;
  report["K3"] = matrix_json(mfe.mu.K3);
  json window = json::array();
  for (const auto& v : mfe.mu.window) {
    json entry = json::array();
    for (aoi::Index i = 0; i < v.size(); ++i) entry.push_back(v(i));
    window.push_back(entry);
  }
  report["mu_window"] = window;
  aoi::write_json(manifest.output("mfe_report.json"), report);
  manifest.finish();
  return 0;
}

int cmd_bounds(const Flags& flags) {
  Manifest manifest("bounds", flags);
  const auto file = load_config(flags);
  aoi::ScenarioConfig config;
  if (file) {
    config = *file;
    if (flags.p) config.p = *flags.p;
    if (flags.alpha) config.capacity = aoi::capacity_from_ratio(config.N, *flags.alpha);
    if (!flags.N.empty()) throw aoi::Error(aoi::ErrorKind::InvalidConfig, "--N conflicts with --config for bounds");
  } else {
    config = aoi::reference_scenario(flags.N.empty() ? 100 : flags.N.front(), flags.alpha.value_or(0.25),
                                     flags.p.value_or(0.2), flags.T.value_or(5000));
  }
  aoi::validate(config);
  const double delta = flags.delta.value_or(0.05);
  json effective = aoi::to_json(config);
  effective["delta"] = delta;
  manifest.set_inputs(effective, config.seed);

  const auto population = aoi::assign_types(config.N, config.types);
  const auto policy = aoi::bisection_lambda(population, config.types, config.p, config.capacity, config.bisection_eps);
  const auto report = aoi::make_bound_report(config, policy, delta);
  json doc = aoi::to_json(report);
  doc["policy"] = policy_json(policy, config.types, config.p);
  if (report.gap_bound_vacuous) std::cerr << "note: gap bound is vacuous (alpha equals q or q is degenerate)\n";
  aoi::write_json(manifest.output("bounds_report.json"), doc);
  manifest.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Age-of-information scheduling and mean-field control experiments"};
  app.require_subcommand(0, 1);
  Flags flags;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", flags.config, "Scenario JSON file");
    cmd->add_option("--seed", flags.seed, "Base seed");
    cmd->add_option("--out", flags.out, "Output directory");
    cmd->add_option("--preset", flags.preset, "Experiment preset")->check(CLI::IsMember({"fig2", "fig3", "bounds"}));
    cmd->add_option("--p", flags.p, "Erasure probability");
    cmd->add_option("--alpha", flags.alpha, "Capacity ratio C / N");
    cmd->add_option("--runs", flags.runs, "Monte-Carlo runs (seeds for schedule)");
    cmd->add_option("--N", flags.N, "Population size(s)");
    cmd->add_option("--T", flags.T, "Horizon");
    cmd->add_option("--seeds", flags.seeds, "Seed range A..B");
    cmd->add_option("--delta", flags.delta, "Tail probability for the bounds report");
    cmd->add_flag("--report", flags.report, "Also write the JSON report");
    cmd->add_flag("--trace", flags.trace, "Also write a per-agent trace CSV");
    cmd->add_flag("--strict", flags.strict, "Fail when the contraction condition is violated");
  };
  add_common(&app);
  auto* schedule = app.add_subcommand("schedule", "Relaxed vs MATB-P cost over an N sweep (fig2.csv)");
  auto* game = app.add_subcommand("game", "Game cost over capacity and erasure sweeps (fig3a.csv, fig3b.csv)");
  auto* mfe = app.add_subcommand("mfe", "Mean-field equilibrium report");
  auto* bounds = app.add_subcommand("bounds", "Analytic bound report");
  for (auto* cmd : {schedule, game, mfe, bounds}) add_common(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (schedule->parsed()) return cmd_schedule(flags);
    if (game->parsed()) return cmd_game(flags);
    if (mfe->parsed()) return cmd_mfe(flags);
    if (bounds->parsed()) return cmd_bounds(flags);
    if (flags.preset == "fig2") return cmd_schedule(flags);
    if (flags.preset == "fig3") return cmd_game(flags);
    if (flags.preset == "bounds") return cmd_bounds(flags);
    std::cerr << app.help();
    return 1;
  } catch (const aoi::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return aoi::exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: InvalidConfig: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
