#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ergolq/error.hpp"
#include "ergolq/model.hpp"
#include "ergolq/simulate.hpp"

// JSON problem files. Matrices are flat row-major arrays sized by the
// explicit n, m, d in "system"; nested row lists are accepted on input.
namespace ergolq::cli {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct ProblemFile {
  int schema_version = kSchemaVersion;
  LinearSystem sys;
  CostWeights w;
  std::optional<Strategy> strategy;
  std::optional<SimConfig> sim;
  std::optional<std::vector<double>> schedule;
};

namespace detail {

inline std::vector<double> flatten(const json& j, const std::string& what) {
  std::vector<double> out;
  if (j.is_number()) {
    out.push_back(j.get<double>());
  } else if (j.is_array()) {
    for (const auto& e : j) {
      if (e.is_array()) {
        for (const auto& x : e) {
          if (!x.is_number()) throw Error(Errc::InvalidInput, what + ": entries must be numbers");
          out.push_back(x.get<double>());
        }
      } else if (e.is_number()) {
        out.push_back(e.get<double>());
      } else {
        throw Error(Errc::InvalidInput, what + ": entries must be numbers");
      }
    }
  } else {
    throw Error(Errc::InvalidInput, what + ": expected a number array");
  }
  return out;
}

inline Matrix read_matrix(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  const auto xs = flatten(j, what);
  if (static_cast<Eigen::Index>(xs.size()) != rows * cols)
    throw Error(Errc::DimensionMismatch, what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                                             " = " + std::to_string(rows * cols) + " entries, got " +
                                             std::to_string(xs.size()));
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = xs[static_cast<std::size_t>(i * cols + k)];
  return M;
}

inline Vector read_vector(const json& j, Eigen::Index n, const std::string& what) {
  return read_matrix(j, n, 1, what).col(0);
}

inline std::vector<Matrix> read_list(const json& j, std::size_t d, Eigen::Index rows, Eigen::Index cols,
                                     const std::string& what) {
  if (!j.is_array() || j.size() != d)
    throw Error(Errc::DimensionMismatch, what + ": expected a list of d = " + std::to_string(d) + " entries");
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < d; ++k)
    out.push_back(read_matrix(j[k], rows, cols, what + "[" + std::to_string(k) + "]"));
  return out;
}

inline json write_matrix(const Matrix& M) {
  json a = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index k = 0; k < M.cols(); ++k) a.push_back(M(i, k));
  return a;
}

inline const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw Error(Errc::InvalidInput, where + ": missing field \"" + key + "\"");
  return obj.at(key);
}

template <class T>
T get_as(const json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::InvalidInput, what + ": wrong type");
  }
}

}  // namespace detail

inline ProblemFile parse_problem(const json& doc) {
  using namespace detail;
  ProblemFile pf;
  pf.schema_version = get_as<int>(field(doc, "schema_version", "problem"), "schema_version");
  if (pf.schema_version != kSchemaVersion)
    throw Error(Errc::InvalidInput, "unsupported schema_version " + std::to_string(pf.schema_version));

  const json& s = field(doc, "system", "problem");
  const auto n = get_as<Eigen::Index>(field(s, "n", "system"), "system.n");
  const auto m = get_as<Eigen::Index>(field(s, "m", "system"), "system.m");
  const auto dd = get_as<long long>(field(s, "d", "system"), "system.d");
  if (n < 1 || m < 1 || dd < 1) throw Error(Errc::InvalidInput, "system: n, m, d must be positive");
  const auto d = static_cast<std::size_t>(dd);
  LinearSystem& sys = pf.sys;
  sys.A = read_matrix(field(s, "A", "system"), n, n, "A");
  sys.B = read_matrix(field(s, "B", "system"), n, m, "B");
  sys.C = read_list(field(s, "C", "system"), d, n, n, "C");
  sys.D = read_list(field(s, "D", "system"), d, n, m, "D");
  sys.b = s.contains("b") ? read_vector(s["b"], n, "b") : Vector::Zero(n);
  if (s.contains("sigma")) {
    for (const auto& M : read_list(s["sigma"], d, n, 1, "sigma")) sys.sigma.push_back(M.col(0));
  } else {
    sys.sigma.assign(d, Vector::Zero(n));
  }
  validate(sys);

  const json& w = field(doc, "weights", "problem");
  CostWeights cw;
  cw.Q = read_matrix(field(w, "Q", "weights"), n, n, "Q");
  cw.S = read_matrix(field(w, "S", "weights"), m, n, "S");
  cw.R = read_matrix(field(w, "R", "weights"), m, m, "R");
  cw.q = w.contains("q") ? read_vector(w["q"], n, "q") : Vector::Zero(n);
  cw.rho = w.contains("rho") ? read_vector(w["rho"], m, "rho") : Vector::Zero(m);
  pf.w = validated(cw, sys);

  if (doc.contains("strategy")) {
    const json& st = doc["strategy"];
    Strategy strat{read_matrix(field(st, "Theta", "strategy"), m, n, "Theta"),
                   st.contains("v") ? read_vector(st["v"], m, "v") : Vector::Zero(m)};
    if (!strat.Theta.allFinite() || !strat.v.allFinite())
      throw Error(Errc::InvalidInput, "strategy: entries must be finite");
    pf.strategy = strat;
  }
  if (doc.contains("sim")) {
    const json& j = doc["sim"];
    SimConfig c;
    if (!j.is_object()) throw Error(Errc::InvalidInput, "sim: expected an object");
    for (const auto& [key, val] : j.items()) {
      if (key == "dt") c.dt = get_as<double>(val, "sim.dt");
      else if (key == "horizon_T") c.horizon_T = get_as<double>(val, "sim.horizon_T");
      else if (key == "n_paths") c.n_paths = get_as<int>(val, "sim.n_paths");
      else if (key == "burn_in_T") c.burn_in_T = get_as<double>(val, "sim.burn_in_T");
      else if (key == "seed") c.seed = get_as<std::uint64_t>(val, "sim.seed");
      else if (key == "abel_lambda") c.abel_lambda = get_as<double>(val, "sim.abel_lambda");
      else if (key == "workers") c.workers = get_as<unsigned>(val, "sim.workers");
      else throw Error(Errc::InvalidInput, "sim: unknown field \"" + key + "\"");
    }
    pf.sim = c;
  }
  if (doc.contains("schedule")) {
    auto xs = flatten(doc["schedule"], "schedule");
    for (double x : xs)
      if (!std::isfinite(x)) throw Error(Errc::InvalidInput, "schedule: entries must be finite");
    pf.schedule = std::move(xs);
  }
  return pf;
}

inline ProblemFile parse_problem_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidInput, std::string("malformed problem file: ") + e.what());
  }
  return parse_problem(doc);
}

inline ProblemFile load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidInput, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_problem_text(ss.str());
}

/// Canonical form: every field present, matrices flat row-major.
inline json to_json(const ProblemFile& pf) {
  using detail::write_matrix;
  const LinearSystem& s = pf.sys;
  json sys = {{"n", s.n()}, {"m", s.m()}, {"d", s.d()}, {"A", write_matrix(s.A)}, {"B", write_matrix(s.B)},
              {"b", write_matrix(s.b)}};
  sys["C"] = json::array();
  sys["D"] = json::array();
  sys["sigma"] = json::array();
  for (std::size_t k = 0; k < s.d(); ++k) {
    sys["C"].push_back(write_matrix(s.C[k]));
    sys["D"].push_back(write_matrix(s.D[k]));
    sys["sigma"].push_back(write_matrix(s.sigma[k]));
  }
  json doc = {{"schema_version", pf.schema_version},
              {"system", sys},
              {"weights",
               {{"Q", write_matrix(pf.w.Q)},
                {"S", write_matrix(pf.w.S)},
                {"R", write_matrix(pf.w.R)},
                {"q", write_matrix(pf.w.q)},
                {"rho", write_matrix(pf.w.rho)}}}};
  if (pf.strategy) doc["strategy"] = {{"Theta", write_matrix(pf.strategy->Theta)}, {"v", write_matrix(pf.strategy->v)}};
  if (pf.sim) {
    const SimConfig& c = *pf.sim;
    doc["sim"] = {{"dt", c.dt},       {"horizon_T", c.horizon_T},     {"n_paths", c.n_paths},
                  {"burn_in_T", c.burn_in_T}, {"seed", c.seed}, {"abel_lambda", c.abel_lambda},
                  {"workers", c.workers}};
  }
  if (pf.schedule) doc["schedule"] = *pf.schedule;
  return doc;
}

}  // namespace ergolq::cli
