#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "ergolq/error.hpp"
#include "ergolq/model.hpp"
#include "ergolq/stationary.hpp"

namespace ergolq {

struct SimConfig {
  double dt = 1e-3;
  double horizon_T = 2000;
  int n_paths = 64;
  double burn_in_T = 100;
  std::uint64_t seed = 20240521;
  double abel_lambda = 1e-3;
  unsigned workers = 0;  // 0: one per hardware thread
};

/// Cross-path statistics. Means are over paths; stderr is the sample
/// standard deviation across paths divided by sqrt(n_paths).
struct PathStats {
  double cesaro_mean = 0, cesaro_stderr = 0;
  // Present only when abel_lambda * horizon_T >= 20.
  std::optional<double> abel_mean, abel_stderr;
  Vector emp_m1, m1_stderr;
  Matrix emp_M2, M2_stderr;
  int n_paths = 0;
};

struct AbelEstimate {
  double mean, standard_error;
};

/// Receives (t, X_t, running time-average of g since t = 0).
using SampleSink = std::function<void(double, const Vector&, double)>;

/// v(t) = values[k] on [k piece_length, (k+1) piece_length), zero afterwards.
struct PiecewiseControl {
  double piece_length = 1.0;
  std::vector<Vector> values;
};

struct HomogeneousCheck {
  std::vector<double> costs, stderrs;
  double min_cost = 0, min_stderr = 0;

  // True when some estimate sits more than three standard errors below zero.
  bool violated() const {
    for (std::size_t i = 0; i < costs.size(); ++i)
      if (costs[i] < -3 * stderrs[i]) return true;
    return false;
  }
};

namespace detail {

struct Segment {
  double t_end;
  Vector drift;               // constant drift term
  std::vector<Vector> diff;   // constant diffusion terms
  Vector cg;
  double kg;
};

// Linear plant with piecewise-constant affine terms and a quadratic running cost.
struct Plant {
  Matrix A;
  std::vector<Matrix> C;
  Matrix Qg;
  std::vector<Segment> segments;
};

struct PathResult {
  double cesaro = 0, abel = 0, total = 0;
  Vector s1;
  Matrix s2;
};

inline void validate_config(const SimConfig& cfg, const Matrix& A_cl) {
  if (!(cfg.dt > 0) || !(cfg.horizon_T > 0) || !(cfg.burn_in_T >= 0) || !(cfg.burn_in_T < cfg.horizon_T))
    throw Error(Errc::InvalidInput, "simulation needs dt > 0 and 0 <= burn_in_T < horizon_T");
  if (cfg.n_paths < 1) throw Error(Errc::InvalidInput, "simulation needs n_paths >= 1");
  if (!(cfg.abel_lambda > 0)) throw Error(Errc::InvalidInput, "abel_lambda must be positive");
  const double a = A_cl.size() ? Eigen::JacobiSVD<Matrix>(A_cl).singularValues()(0) : 0.0;
  const double limit = 1e-2 * std::min(1.0, a > 0 ? 1.0 / a : 1.0);
  if (cfg.dt > limit * (1 + 1e-12))
    throw Error(Errc::InvalidInput, "dt = " + std::to_string(cfg.dt) + " exceeds 1e-2 min(1, 1/|A_cl|) = " +
                                        std::to_string(limit));
}

inline std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
  return std::mt19937_64(seq);
}

template <int N, class Observer>
PathResult run_path(const Plant& p, const Vector& x0, const SimConfig& cfg, std::uint64_t path, Observer&& obs) {
  using Vec = Eigen::Matrix<double, N, 1>;
  using Mat = Eigen::Matrix<double, N, N>;
  struct Seg {
    double t_end;
    Vec drift;
    std::vector<Vec> diff;
    Vec cg;
    double kg;
  };
  const Eigen::Index n = x0.size();
  const Mat A = p.A, Qg = p.Qg;
  const std::vector<Mat> C(p.C.begin(), p.C.end());
  std::vector<Seg> segs;
  for (const auto& s : p.segments) segs.push_back({s.t_end, s.drift, {s.diff.begin(), s.diff.end()}, s.cg, s.kg});

  auto rng = path_rng(cfg.seed, path);
  boost::random::normal_distribution<double> normal;
  const long long steps = std::llround(cfg.horizon_T / cfg.dt);
  const long long burn = std::llround(cfg.burn_in_T / cfg.dt);
  const double dt = cfg.dt, sq = std::sqrt(dt), decay = std::exp(-cfg.abel_lambda * dt);

  Vec x = x0;
  Vec s1 = Vec::Zero(n);
  Mat s2 = Mat::Zero(n, n);
  double ces = 0, tot = 0, abel = 0, weight = 1;
  std::size_t seg = 0;
  for (long long i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    while (seg + 1 < segs.size() && t >= segs[seg].t_end) ++seg;
    const Seg& sg = segs[seg];
    const double g = x.dot(Qg * x) + 2 * sg.cg.dot(x) + sg.kg;
    tot += g;
    abel += weight * g;
    weight *= decay;
    if (i >= burn) {
      ces += g;
      s1 += x;
      s2.noalias() += x * x.transpose();
    }
    obs(i, t, x, tot / static_cast<double>(i + 1));
    Vec dx = (A * x + sg.drift) * dt;
    for (std::size_t k = 0; k < C.size(); ++k) dx += (C[k] * x + sg.diff[k]) * (sq * normal(rng));
    x += dx;
    if (!(x.squaredNorm() <= 1e24))
      throw Error(Errc::NumericalBlowup, "state norm exceeded 1e12 at t = " + std::to_string(t + dt) +
                                             " (dt too large or gain not stabilizing)");
  }
  const double kept = static_cast<double>(steps - burn);
  PathResult r;
  r.cesaro = ces / kept;
  r.abel = cfg.abel_lambda * dt * abel;
  r.total = dt * tot;
  r.s1 = s1 / kept;
  r.s2 = s2 / kept;
  return r;
}

template <class Observer>
PathResult dispatch_path(const Plant& p, const Vector& x0, const SimConfig& cfg, std::uint64_t path, Observer&& obs) {
  switch (x0.size()) {
    case 1: return run_path<1>(p, x0, cfg, path, obs);
    case 2: return run_path<2>(p, x0, cfg, path, obs);
    case 3: return run_path<3>(p, x0, cfg, path, obs);
    case 4: return run_path<4>(p, x0, cfg, path, obs);
    default: return run_path<Eigen::Dynamic>(p, x0, cfg, path, obs);
  }
}

// Runs all paths, statically partitioned over workers. Each path writes its
// own slot, so the result does not depend on the worker count.
inline std::vector<PathResult> run_paths(const Plant& p, const Vector& x0, const SimConfig& cfg) {
  const auto count = static_cast<std::size_t>(cfg.n_paths);
  std::vector<PathResult> out(count);
  unsigned workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  const auto noop = [](long long, double, const auto&, double) {};
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = dispatch_path(p, x0, cfg, i, noop);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) out[i] = dispatch_path(p, x0, cfg, i, noop);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline double mean_of(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double stderr_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

inline Plant closed_loop_plant(const LinearSystem& sys, const CostWeights& w, const Strategy& strat) {
  const ClosedLoop cl = closed_loop(sys, strat);
  const FeedbackCost fc = feedback_cost(w, strat);
  return {cl.A_cl, cl.C_cl, fc.Qg, {{INFINITY, cl.drift_const, cl.diff_const, fc.cg, fc.kg}}};
}

inline PathStats aggregate(const std::vector<PathResult>& rs, const SimConfig& cfg) {
  PathStats st;
  st.n_paths = static_cast<int>(rs.size());
  std::vector<double> ces, abel;
  for (const auto& r : rs) {
    ces.push_back(r.cesaro);
    abel.push_back(r.abel);
  }
  st.cesaro_mean = mean_of(ces);
  st.cesaro_stderr = stderr_of(ces);
  if (cfg.abel_lambda * cfg.horizon_T >= 20) {
    st.abel_mean = mean_of(abel);
    st.abel_stderr = stderr_of(abel);
  }
  const Eigen::Index n = rs.front().s1.size();
  st.emp_m1 = Vector::Zero(n);
  st.m1_stderr = Vector::Zero(n);
  st.emp_M2 = Matrix::Zero(n, n);
  st.M2_stderr = Matrix::Zero(n, n);
  std::vector<double> xs(rs.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < rs.size(); ++p) xs[p] = rs[p].s1(i);
    st.emp_m1(i) = mean_of(xs);
    st.m1_stderr(i) = stderr_of(xs);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (std::size_t p = 0; p < rs.size(); ++p) xs[p] = rs[p].s2(i, j);
      st.emp_M2(i, j) = mean_of(xs);
      st.M2_stderr(i, j) = stderr_of(xs);
    }
  }
  return st;
}

inline void check_inputs(const LinearSystem& sys, const Strategy& strat, const Vector& x0, const char* where) {
  validate(sys);
  require_stabilizer(sys, strat.Theta, where);
  if (strat.v.size() != static_cast<Eigen::Index>(sys.m()) || x0.size() != static_cast<Eigen::Index>(sys.n()))
    throw Error(Errc::DimensionMismatch, std::string(where) + ": v must have m entries and x0 n entries");
}

}  // namespace detail

/// Streams one Euler-Maruyama path of the closed-loop equation, calling
/// `sink` every `every` steps. Returns the path's Cesaro mean of g.
inline double simulate_closed_loop(const LinearSystem& sys, const CostWeights& w, const Strategy& strat,
                                   const Vector& x0, const SimConfig& cfg, std::uint64_t path_index,
                                   const SampleSink& sink, long long every = 1) {
  detail::check_inputs(sys, strat, x0, "simulate_closed_loop");
  const auto plant = detail::closed_loop_plant(sys, validated(w, sys), strat);
  detail::validate_config(cfg, plant.A);
  if (every < 1) throw Error(Errc::InvalidInput, "trace stride must be positive");
  const auto obs = [&](long long i, double t, const auto& x, double running) {
    if (i % every == 0) sink(t, Vector(x), running);
  };
  return detail::dispatch_path(plant, x0, cfg, path_index, obs).cesaro;
}

/// Time average of g over [burn_in_T, horizon_T], plus empirical moments over
/// the same window. The Abel estimate is filled in when abel_lambda * T >= 20.
inline PathStats cesaro_cost(const LinearSystem& sys, const CostWeights& w, const Strategy& strat, const Vector& x0,
                             const SimConfig& cfg) {
  detail::check_inputs(sys, strat, x0, "cesaro_cost");
  const auto plant = detail::closed_loop_plant(sys, validated(w, sys), strat);
  detail::validate_config(cfg, plant.A);
  return detail::aggregate(detail::run_paths(plant, x0, cfg), cfg);
}

/// lambda * int_0^T exp(-lambda t) g dt, averaged over paths.
inline AbelEstimate abel_cost(const LinearSystem& sys, const CostWeights& w, const Strategy& strat, const Vector& x0,
                              const SimConfig& cfg) {
  if (!(cfg.abel_lambda * cfg.horizon_T >= 20))
    throw Error(Errc::InvalidInput, "abel_cost needs abel_lambda * horizon_T >= 20");
  const auto st = cesaro_cost(sys, w, strat, x0, cfg);
  return {*st.abel_mean, *st.abel_stderr};
}

inline std::vector<PiecewiseControl> random_piecewise_controls(std::size_t m, int count, int pieces,
                                                               double piece_length, double amplitude,
                                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, amplitude);
  std::vector<PiecewiseControl> out(static_cast<std::size_t>(count));
  for (auto& c : out) {
    c.piece_length = piece_length;
    for (int k = 0; k < pieces; ++k) {
      Vector v(static_cast<Eigen::Index>(m));
      for (auto& e : v) e = normal(rng);
      c.values.push_back(v);
    }
  }
  return out;
}

/// Finite-horizon estimates of the homogeneous cost from x = 0,
///   int_0^T g0(X, Theta X + v(t)) dt,  dX = ((A+B Theta) X + B v) dt + sum_k ((C_k+D_k Theta) X + D_k v) dW_k,
/// with g0 the cost without q and rho. Under a finiteness certificate these
/// are nonnegative up to truncation and sampling error.
inline HomogeneousCheck homogeneous_cost_check(const LinearSystem& sys, const CostWeights& w, const Matrix& Theta,
                                               const std::vector<PiecewiseControl>& controls,
                                               const SimConfig& cfg) {
  validate(sys);
  const CostWeights wv = validated(w, sys);
  require_stabilizer(sys, Theta, "homogeneous_cost_check");
  const auto n = static_cast<Eigen::Index>(sys.n()), m = static_cast<Eigen::Index>(sys.m());
  Matrix A_cl = sys.A + sys.B * Theta;
  detail::validate_config(cfg, A_cl);
  std::vector<Matrix> C_cl;
  for (std::size_t k = 0; k < sys.d(); ++k) C_cl.push_back(sys.C[k] + sys.D[k] * Theta);
  const Matrix Qg = feedback_state_weight(wv, Theta);
  const Matrix cross = wv.S + wv.R * Theta;

  HomogeneousCheck out;
  for (const auto& ctrl : controls) {
    detail::Plant p{A_cl, C_cl, Qg, {}};
    const auto segment = [&](double t_end, const Vector& v) {
      if (v.size() != m) throw Error(Errc::DimensionMismatch, "control values must have m entries");
      std::vector<Vector> diff;
      for (std::size_t k = 0; k < sys.d(); ++k) diff.push_back(sys.D[k] * v);
      p.segments.push_back({t_end, sys.B * v, diff, cross.transpose() * v, v.dot(wv.R * v)});
    };
    for (std::size_t k = 0; k < ctrl.values.size(); ++k)
      segment(static_cast<double>(k + 1) * ctrl.piece_length, ctrl.values[k]);
    segment(INFINITY, Vector::Zero(m));
    const auto rs = detail::run_paths(p, Vector::Zero(n), cfg);
    std::vector<double> totals;
    for (const auto& r : rs) totals.push_back(r.total);
    out.costs.push_back(detail::mean_of(totals));
    out.stderrs.push_back(detail::stderr_of(totals));
  }
  if (!out.costs.empty()) {
    std::size_t k = 0;
    for (std::size_t i = 1; i < out.costs.size(); ++i)
      if (out.costs[i] < out.costs[k]) k = i;
    out.min_cost = out.costs[k];
    out.min_stderr = out.stderrs[k];
  }
  return out;
}

}  // namespace ergolq
