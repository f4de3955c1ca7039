#include "aoi/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "aoi/error.hpp"

namespace aoi {

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorKind::MissingKey, "'" + std::string(key) + "' missing in " + where);
  }
  return *it;
}

// Matrices are row-major nested arrays; a bare number is a 1x1 matrix.
Matrix parse_matrix(const json& value, const std::string& name) {
  if (value.is_number()) return scalar_matrix(value.get<double>());
  if (!value.is_array() || value.empty()) {
    throw Error(ErrorKind::InvalidConfig, name + " must be a number or a nested array");
  }
  if (value.front().is_number()) {
    // A flat array is read as a column.
    Matrix m(static_cast<Index>(value.size()), 1);
    for (std::size_t i = 0; i < value.size(); ++i) m(static_cast<Index>(i), 0) = value[i].get<double>();
    return m;
  }
  const auto rows = static_cast<Index>(value.size());
  const auto cols = static_cast<Index>(value.front().size());
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto& row = value[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw Error(ErrorKind::InvalidConfig, name + " has ragged rows");
    }
    for (Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Vector parse_vector(const json& value, const std::string& name) {
  Matrix m = parse_matrix(value, name);
  if (m.cols() != 1) {
    if (m.rows() != 1) throw Error(ErrorKind::InvalidConfig, name + " must be a vector");
    return m.row(0).transpose();
  }
  return m.col(0);
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

bool symmetric(const Matrix& m) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + m.cwiseAbs().maxCoeff());
}

// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

void check_definite(const Matrix& m, const std::string& name, bool strict) {
  if (!symmetric(m)) throw Error(ErrorKind::NonPositiveDefinite, name + " is not symmetric");
  const double lo = min_eigenvalue(m);
  if (strict ? !(lo > 0.0) : !(lo >= -1e-12)) {
    std::ostringstream os;
    os << name << " has eigenvalue " << lo << (strict ? " (must be > 0)" : " (must be >= 0)");
    throw Error(ErrorKind::NonPositiveDefinite, os.str());
  }
}

void check_dims(const AgentType& t) {
  const Index n = t.A.rows();
  const auto bad = [&](const std::string& what) {
    throw Error(ErrorKind::DimensionMismatch, "type '" + t.label + "': " + what);
  };
  if (t.A.cols() != n) bad("A must be square");
  if (t.B.rows() != n) bad("B must have n rows");
  if (t.C_W.rows() != n || t.C_W.cols() != n) bad("C_W must be n x n");
  if (t.Q.rows() != n || t.Q.cols() != n) bad("Q must be n x n");
  const Index m = t.B.cols();
  if (t.R.rows() != m || t.R.cols() != m) bad("R must be m x m");
  if (t.x0_mean.size() != n) bad("x0_mean must have n entries");
  if (t.x0_cov.rows() != n || t.x0_cov.cols() != n) bad("x0_cov must be n x n");
}

}  // namespace

int capacity_from_ratio(int N, double alpha) {
  return std::max(1, static_cast<int>(std::floor(alpha * N + 1e-9)));
}

double erasure_compatibility(const AgentType& type, double p) {
  return type.A.squaredNorm() * p;
}

void validate(const ScenarioConfig& config) {
  if (config.N < 1) throw Error(ErrorKind::InvalidConfig, "N must be >= 1");
  if (config.capacity < 1 || config.capacity > config.N) {
    throw Error(ErrorKind::InvalidConfig, "capacity must lie in [1, N]");
  }
  if (!(config.p >= 0.0 && config.p < 1.0)) throw Error(ErrorKind::InvalidConfig, "p must lie in [0, 1)");
  if (config.T < 1) throw Error(ErrorKind::InvalidConfig, "T must be >= 1");
  if (config.mc_runs < 1) throw Error(ErrorKind::InvalidConfig, "mc_runs must be >= 1");
  if (!(config.bisection_eps > 0.0)) throw Error(ErrorKind::InvalidConfig, "bisection_eps must be > 0");
  if (config.types.empty()) throw Error(ErrorKind::InvalidConfig, "types must not be empty");

  double total = 0.0;
  for (const auto& t : config.types) {
    check_dims(t);
    check_definite(t.C_W, "C_W of type '" + t.label + "'", true);
    check_definite(t.x0_cov, "x0_cov of type '" + t.label + "'", true);
    check_definite(t.R, "R of type '" + t.label + "'", true);
    check_definite(t.Q, "Q of type '" + t.label + "'", false);
    if (!(t.prob >= 0.0 && t.prob <= 1.0)) {
      throw Error(ErrorKind::InvalidConfig, "prob of type '" + t.label + "' must lie in [0, 1]");
    }
    const double value = erasure_compatibility(t, config.p);
    if (!(value < 1.0)) {
      std::ostringstream os;
      os << "type '" << t.label << "': ||A||_F^2 * p = " << value << " >= 1";
      throw Error(ErrorKind::AssumptionViolation, os.str());
    }
    total += t.prob;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(12);
    os << "type probabilities sum to " << total << ", expected 1";
    throw Error(ErrorKind::InvalidConfig, os.str());
  }
}

ScenarioConfig load_scenario(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::InvalidConfig, "scenario document must be an object");
  const std::string where = "scenario";
  ScenarioConfig config;
  config.N = require(doc, "N", where).get<int>();
  if (doc.contains("capacity")) {
    config.capacity = doc["capacity"].get<int>();
  } else if (doc.contains("alpha")) {
    config.capacity = capacity_from_ratio(config.N, doc["alpha"].get<double>());
  } else {
    throw Error(ErrorKind::MissingKey, "'capacity' or 'alpha' missing in scenario");
  }
  config.p = require(doc, "p", where).get<double>();
  config.T = require(doc, "T", where).get<int>();
  config.seed = require(doc, "seed", where).get<std::uint64_t>();
  config.mc_runs = require(doc, "mc_runs", where).get<int>();
  config.bisection_eps = require(doc, "bisection_eps", where).get<double>();

  const auto& types = require(doc, "types", where);
  if (!types.is_array()) throw Error(ErrorKind::InvalidConfig, "'types' must be an array");
  for (std::size_t i = 0; i < types.size(); ++i) {
    const auto& entry = types[i];
    const std::string at = "types[" + std::to_string(i) + "]";
    AgentType t;
    t.label = require(entry, "label", at).get<std::string>();
    t.A = parse_matrix(require(entry, "A", at), at + ".A");
    t.B = parse_matrix(require(entry, "B", at), at + ".B");
    t.C_W = parse_matrix(require(entry, "C_W", at), at + ".C_W");
    t.Q = parse_matrix(require(entry, "Q", at), at + ".Q");
    t.R = parse_matrix(require(entry, "R", at), at + ".R");
    t.x0_mean = parse_vector(require(entry, "x0_mean", at), at + ".x0_mean");
    t.x0_cov = parse_matrix(require(entry, "x0_cov", at), at + ".x0_cov");
    t.prob = require(entry, "prob", at).get<double>();
    config.types.push_back(std::move(t));
  }
  validate(config);
  return config;
}

ScenarioConfig load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
  return load_scenario(doc);
}

json to_json(const ScenarioConfig& config) {
  json doc;
  doc["N"] = config.N;
  doc["capacity"] = config.capacity;
  doc["p"] = config.p;
  doc["T"] = config.T;
  doc["seed"] = config.seed;
  doc["mc_runs"] = config.mc_runs;
  doc["bisection_eps"] = config.bisection_eps;
  json types = json::array();
  for (const auto& t : config.types) {
    json entry;
    entry["label"] = t.label;
    entry["A"] = matrix_json(t.A);
    entry["B"] = matrix_json(t.B);
    entry["C_W"] = matrix_json(t.C_W);
    entry["Q"] = matrix_json(t.Q);
    entry["R"] = matrix_json(t.R);
    entry["x0_mean"] = matrix_json(t.x0_mean);
    entry["x0_cov"] = matrix_json(t.x0_cov);
    entry["prob"] = t.prob;
    types.push_back(std::move(entry));
  }
  doc["types"] = std::move(types);
  return doc;
}

std::vector<int> largest_remainder_counts(int N, std::span<const double> probs) {
  std::vector<int> counts(probs.size(), 0);
  std::vector<double> remainder(probs.size(), 0.0);
  int assigned = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double exact = N * probs[i];
    counts[i] = static_cast<int>(std::floor(exact + 1e-9));
    remainder[i] = exact - counts[i];
    assigned += counts[i];
  }
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b] + 1e-12; });
  for (std::size_t k = 0; assigned < N && k < order.size(); ++k, ++assigned) ++counts[order[k]];
  return counts;
}

Population assign_types(int N, const std::vector<AgentType>& types) {
  std::vector<double> probs;
  probs.reserve(types.size());
  for (const auto& t : types) probs.push_back(t.prob);
  Population pop;
  pop.counts = largest_remainder_counts(N, probs);
  pop.type_of.reserve(static_cast<std::size_t>(N));
  for (std::size_t phi = 0; phi < pop.counts.size(); ++phi) {
    pop.type_of.insert(pop.type_of.end(), static_cast<std::size_t>(pop.counts[phi]), static_cast<int>(phi));
  }
  return pop;
}

std::vector<AgentType> reference_types() {
  const double a_values[] = {0.5, 1.0, 1.15};
  const double x0_values[] = {2.0, 4.0, 6.0};
  const char* labels[] = {"stable", "marginal", "unstable"};
  std::vector<AgentType> types;
  for (int i = 0; i < 3; ++i) {
    AgentType t;
    t.label = labels[i];
    t.A = scalar_matrix(a_values[i]);
    t.B = scalar_matrix(0.1269);
    t.C_W = scalar_matrix(5.0);
    t.Q = scalar_matrix(2.0);
    t.R = scalar_matrix(2.0);
    t.x0_mean = Vector::Constant(1, x0_values[i]);
    t.x0_cov = scalar_matrix(1.0);
    t.prob = 1.0 / 3.0;
    types.push_back(std::move(t));
  }
  return types;
}

ScenarioConfig reference_scenario(int N, double alpha, double p, int T, std::uint64_t seed, int mc_runs) {
  ScenarioConfig config;
  config.N = N;
  config.capacity = capacity_from_ratio(N, alpha);
  config.p = p;
  config.T = T;
  config.types = reference_types();
  config.seed = seed;
  config.mc_runs = mc_runs;
  config.bisection_eps = 1e-6;
  validate(config);
  return config;
}

}  // namespace aoi
