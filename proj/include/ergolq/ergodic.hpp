#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ergolq/algebra.hpp"
#include "ergolq/error.hpp"
#include "ergolq/model.hpp"
#include "ergolq/riccati.hpp"
#include "ergolq/stationary.hpp"

namespace ergolq {

struct RegularizedSolution {
  double delta = 0.0;  // 0 for the unregularized positive-definite path
  Matrix P_hat;
  Matrix Theta_hat;
  Vector eta_hat;
  Vector v_hat;
  double value = 0.0;
  double are_residual = 0.0;
  int nk_iterations = 0;
  bool at_precision_floor = false;

  Strategy strategy() const { return {Theta_hat, v_hat}; }
};

namespace detail {

inline CostWeights with_regularization(CostWeights w, double delta) {
  w.R += delta * Matrix::Identity(w.R.rows(), w.R.cols());
  return w;
}

inline Matrix require_found_stabilizer(const LinearSystem& sys) {
  auto Theta = find_stabilizer(sys);
  if (!Theta) throw Error(Errc::StabilizerNotFound, "no gain with F(Theta) < 0 was found");
  return *Theta;
}

/// Optimal strategy and value of a problem whose ARE is solvable by NK:
///   eta from the adjoint equation, v = -G^{-1}(B^T eta + sum D^T P sigma + rho),
///   value = sum <P sigma, sigma> + 2 <eta, b> - <G v, v>.
/// The value is cross-checked against the invariant-measure integral.
inline RegularizedSolution solve_by_newton_kleinman(const LinearSystem& sys, const CostWeights& w, double delta,
                                                    const Matrix& Theta_init) {
  const AreSolution are = newton_kleinman(sys, w, Theta_init);
  RegularizedSolution out;
  out.delta = delta;
  out.P_hat = are.P;
  out.Theta_hat = are.Theta;
  out.are_residual = are.residual;
  out.nk_iterations = are.iterations;
  out.at_precision_floor = are.at_precision_floor;
  out.eta_hat = eta_solve(sys, w, are.Theta, are.P);

  const Matrix G = r_plus_dpd(sys, w, are.P);
  Vector rhs = sys.B.transpose() * out.eta_hat + w.rho;
  double noise = 0.0;
  for (std::size_t k = 0; k < sys.d(); ++k) {
    rhs.noalias() += sys.D[k].transpose() * are.P * sys.sigma[k];
    noise += sys.sigma[k].dot(are.P * sys.sigma[k]);
  }
  out.v_hat = -G.llt().solve(rhs);
  out.value = noise + 2.0 * out.eta_hat.dot(sys.b) - out.v_hat.dot(G * out.v_hat);

  // The invariant-measure integral sums terms that can dwarf the result (E_delta ~ -1/delta when
  // the problem is not finite), so the agreement tolerance includes their rounding floor.
  const FeedbackCost fc = feedback_cost(w, out.strategy());
  const StationaryMoments mom = stationary_moments(sys, out.strategy());
  const double direct = integrate_quadratic(fc, mom);
  const double magnitude = fc.Qg.norm() * mom.M2.norm() + 2.0 * fc.cg.norm() * mom.m1.norm() + std::abs(fc.kg) +
                           noise + 2.0 * std::abs(out.eta_hat.dot(sys.b)) + std::abs(out.v_hat.dot(G * out.v_hat));
  const double tol = 1e-8 * (1.0 + std::abs(direct)) + 16.0 * std::numeric_limits<double>::epsilon() * magnitude;
  if (!(std::abs(direct - out.value) <= tol))
    throw Error(Errc::ConsistencyCheck, "optimal value " + std::to_string(out.value) +
                                            " disagrees with the invariant-measure cost " + std::to_string(direct));
  return out;
}

}  // namespace detail

/// True when [[Q, S^T], [S, R]] is positive definite.
inline bool block_positive_definite(const CostWeights& w) {
  const auto n = w.Q.rows(), m = w.R.rows();
  Matrix blk(n + m, n + m);
  blk << w.Q, w.S.transpose(), w.S, w.R;
  const Vector ev = sym_eigenvalues(blk);
  return ev(0) > 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
}

/// Closed-form optimum when the cost weights are jointly positive definite.
inline RegularizedSolution solve_positive_definite(const LinearSystem& sys, const CostWeights& w_in) {
  validate(sys);
  const CostWeights w = validated(w_in, sys);
  if (!block_positive_definite(w))
    throw Error(Errc::NotPositiveDefinite, "solve_positive_definite: [[Q, S^T], [S, R]] is not positive definite");
  return detail::solve_by_newton_kleinman(sys, w, 0.0, detail::require_found_stabilizer(sys));
}

/// Optimal solution of the problem with R replaced by R + delta I.
inline RegularizedSolution solve_regularized(const LinearSystem& sys, const CostWeights& w_in, double delta,
                                             const std::optional<Matrix>& Theta_init = std::nullopt) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw Error(Errc::InvalidInput, "solve_regularized: delta must be positive and finite");
  validate(sys);
  const CostWeights w = detail::with_regularization(validated(w_in, sys), delta);
  const Matrix Theta0 = Theta_init ? *Theta_init : detail::require_found_stabilizer(sys);
  return detail::solve_by_newton_kleinman(sys, w, delta, Theta0);
}

/// delta_j = delta0 * ratio^j, j = 0..count-1.
inline std::vector<double> geometric_schedule(double delta0 = 1e-2, double ratio = 0.25, int count = 12) {
  if (!(delta0 > 0.0) || !(ratio > 0.0 && ratio < 1.0) || count < 1)
    throw Error(Errc::InvalidInput, "geometric_schedule: need delta0 > 0, 0 < ratio < 1, count >= 1");
  std::vector<double> s;
  for (int j = 0; j < count; ++j) s.push_back(delta0 * std::pow(ratio, j));
  return s;
}

enum class TraceStatus { Converged, NotConverged, Diverging };

inline const char* to_string(TraceStatus s) {
  switch (s) {
    case TraceStatus::Converged: return "converged";
    case TraceStatus::NotConverged: return "not converged";
    case TraceStatus::Diverging: return "diverging";
  }
  return "?";
}

struct RegularizationTrace {
  std::vector<RegularizedSolution> entries;  // decreasing delta
  std::vector<double> diffs;                 // |E_{delta_j} - E_{delta_{j+1}}|
  TraceStatus status = TraceStatus::NotConverged;
  double limit_estimate = 0.0;  // value at the smallest delta
  double extrapolated = 0.0;    // fit E + c sqrt(delta) on the last three points
  bool strategy_convergent = false;

  bool converged() const { return status == TraceStatus::Converged; }
};

struct RegularizationOptions {
  double conv_tol = 1e-4;
  double strategy_tol = 1e-3;  // relative step of (Theta, v) below which the sequence counts as settled
};

namespace detail {

inline double strategy_norm(const RegularizedSolution& s) {
  return std::sqrt(s.Theta_hat.squaredNorm() + s.v_hat.squaredNorm());
}

inline double strategy_step(const RegularizedSolution& a, const RegularizedSolution& b) {
  return std::sqrt((a.Theta_hat - b.Theta_hat).squaredNorm() + (a.v_hat - b.v_hat).squaredNorm());
}

/// Least-squares fit value = E + c sqrt(delta); returns E.
inline double sqrt_extrapolate(const std::vector<RegularizedSolution>& e) {
  const std::size_t k = std::min<std::size_t>(3, e.size());
  if (k < 2) return e.back().value;
  Matrix X(k, 2);
  Vector y(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& s = e[e.size() - k + i];
    X(i, 0) = 1.0;
    X(i, 1) = std::sqrt(s.delta);
    y(i) = s.value;
  }
  return X.colPivHouseholderQr().solve(y)(0);
}

}  // namespace detail

/// Values E_delta along a decreasing schedule. Each delta is solved from a
/// fresh stabilizer, so entries do not depend on each other.
inline RegularizationTrace value_by_regularization(const LinearSystem& sys, const CostWeights& w,
                                                   const std::vector<double>& schedule,
                                                   const RegularizationOptions& opts = {}) {
  if (schedule.empty()) throw Error(Errc::InvalidInput, "value_by_regularization: empty schedule");
  for (std::size_t j = 0; j < schedule.size(); ++j) {
    if (!(schedule[j] > 0.0)) throw Error(Errc::InvalidInput, "value_by_regularization: deltas must be positive");
    if (j > 0 && !(schedule[j] < schedule[j - 1]))
      throw Error(Errc::InvalidInput, "value_by_regularization: schedule must be strictly decreasing");
  }
  validate(sys);
  const Matrix Theta0 = detail::require_found_stabilizer(sys);

  RegularizationTrace tr;
  for (double delta : schedule) tr.entries.push_back(solve_regularized(sys, w, delta, Theta0));
  for (std::size_t j = 0; j + 1 < tr.entries.size(); ++j)
    tr.diffs.push_back(std::abs(tr.entries[j].value - tr.entries[j + 1].value));

  tr.limit_estimate = tr.entries.back().value;
  tr.extrapolated = detail::sqrt_extrapolate(tr.entries);

  const std::size_t N = tr.entries.size();
  if (N >= 3) {
    bool settled = true;
    for (std::size_t j = N - 3; j + 1 < N; ++j)
      settled = settled && tr.diffs[j] <= opts.conv_tol * (1.0 + std::abs(tr.entries[j + 1].value));
    const double d1 = tr.entries[N - 2].value - tr.entries[N - 3].value;
    const double d2 = tr.entries[N - 1].value - tr.entries[N - 2].value;
    if (settled)
      tr.status = TraceStatus::Converged;
    else if (d1 < 0.0 && d2 < 0.0 && std::abs(d2) >= std::abs(d1))
      tr.status = TraceStatus::Diverging;

    const auto& last = tr.entries[N - 1];
    tr.strategy_convergent = detail::strategy_step(last, tr.entries[N - 2]) <=
                                 opts.strategy_tol * (1.0 + detail::strategy_norm(last)) &&
                             detail::strategy_step(tr.entries[N - 2], tr.entries[N - 3]) <=
                                 opts.strategy_tol * (1.0 + detail::strategy_norm(tr.entries[N - 2]));
  }
  return tr;
}

inline void require_convergent(const RegularizationTrace& tr) {
  if (tr.status == TraceStatus::Diverging)
    throw Error(Errc::Diverging, "regularized values keep decreasing: E_delta -> -infinity as delta -> 0");
}

enum class Verdict { SolvableWithStrategy, FiniteWithValue, RegularizationDiverged, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::SolvableWithStrategy: return "solvable (optimal strategy found)";
    case Verdict::FiniteWithValue: return "finite (value from regularization)";
    case Verdict::RegularizationDiverged: return "regularization diverged";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct ClassifyOptions {
  std::optional<Matrix> pi0;
  std::vector<double> schedule = geometric_schedule();
  RegularizationOptions regularization;
  PinvPolicy policy;
  double grid_half_width = 10.0;
  double grid_step = 0.5;
};

struct Report {
  Verdict verdict = Verdict::Inconclusive;
  std::optional<Matrix> stabilizer;
  bool positive_definite = false;
  std::optional<CertificateH2> h2;
  std::optional<CertificateH3> h3;
  std::string certificate_source;  // which candidate Pi0 produced the certificate
  std::optional<Strategy> strategy;
  std::optional<double> value;
  std::optional<RegularizationTrace> trace;
  std::vector<std::string> notes;
};

namespace detail {

struct PiCandidate {
  std::string source;
  Matrix Pi;
};

/// Candidate Pi0 for the certificate checks: user input, the NK solution of
/// the unregularized ARE when NK applies, the symmetric least-squares
/// solution of B^T Pi = -S (kills the control-state cross term when D = 0),
/// and a scaled grid t I.
inline std::vector<PiCandidate> pi_candidates(const LinearSystem& sys, const CostWeights& w, const Matrix& Theta,
                                              const ClassifyOptions& opts, std::vector<std::string>& notes) {
  const auto n = sys.n();
  std::vector<PiCandidate> out;
  if (opts.pi0) out.push_back({"user Pi0", symmetrize(*opts.pi0)});
  try {
    out.push_back({"Newton-Kleinman ARE solution", newton_kleinman(sys, w, Theta).P});
  } catch (const Error& e) {
    notes.push_back(std::string("Newton-Kleinman on the original weights: ") + e.what());
  }

  // vec(B^T Pi) = (I_n kron B^T) vec(Pi), restricted to symmetric Pi via vec(Pi) = T s.
  const Eigen::Index ns = n * (n + 1) / 2;
  Matrix T = Matrix::Zero(n * n, ns);
  for (Eigen::Index j = 0, c = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i, ++c) {
      T(i + j * n, c) = 1.0;
      T(j + i * n, c) = 1.0;
    }
  const Matrix op = kron(Matrix::Identity(n, n), sys.B.transpose()) * T;
  const Vector sol = pinv(op, opts.policy) * vec(-w.S);
  Matrix Pi = unvec(T * sol, n, n);
  if ((sys.B.transpose() * Pi + w.S).norm() <= 1e-9 * (1.0 + w.S.norm())) out.push_back({"B^T Pi = -S", Pi});

  const double scale = std::max({1.0, w.Q.norm(), w.R.norm(), w.S.norm()});
  for (double t = -opts.grid_half_width; t <= opts.grid_half_width + 1e-12; t += opts.grid_step)
    out.push_back({"grid t I, t = " + std::to_string(t * scale), t * scale * Matrix::Identity(n, n)});
  return out;
}

}  // namespace detail

/// Orchestrates the solvers: positive-definite path, H3 certificate,
/// H2 certificate with regularization. Never throws for mathematical
/// failure modes; they are reported. A missing certificate is not a proof
/// that the problem is not finite.
inline Report classify(const LinearSystem& sys, const CostWeights& w_in, const ClassifyOptions& opts = {}) {
  validate(sys);
  const CostWeights w = validated(w_in, sys);
  Report rep;
  rep.stabilizer = find_stabilizer(sys);
  if (!rep.stabilizer) {
    rep.notes.push_back("stabilizer not found");
    return rep;
  }
  const Matrix& Lambda = *rep.stabilizer;

  rep.positive_definite = block_positive_definite(w);
  if (rep.positive_definite) {
    try {
      const auto sol = detail::solve_by_newton_kleinman(sys, w, 0.0, Lambda);
      rep.verdict = Verdict::SolvableWithStrategy;
      rep.certificate_source = "positive definite weights";
      rep.strategy = sol.strategy();
      rep.value = sol.value;
      return rep;
    } catch (const Error& e) {
      rep.notes.push_back(std::string("positive-definite path: ") + e.what());
    }
  }

  const auto candidates = detail::pi_candidates(sys, w, Lambda, opts, rep.notes);
  const Vector nu = Vector::Zero(sys.m());
  for (const auto& c : candidates) {
    auto r = check_h3(sys, w, c.Pi, Lambda, nu, opts.policy);
    if (succeeded(r)) {
      rep.h3 = std::get<CertificateH3>(std::move(r));
      rep.verdict = Verdict::SolvableWithStrategy;
      rep.certificate_source = c.source;
      rep.strategy = Strategy{rep.h3->ThetaBar0, rep.h3->vBar0};
      rep.value = rep.h3->value;
      return rep;
    }
  }
  rep.notes.push_back("no H3 certificate among " + std::to_string(candidates.size()) + " candidate Pi0");

  for (const auto& c : candidates) {
    auto r = check_h2(sys, w, c.Pi, Lambda, opts.policy);
    if (succeeded(r)) {
      rep.h2 = std::get<CertificateH2>(std::move(r));
      rep.certificate_source = c.source;
      break;
    }
  }
  if (!rep.h2) rep.notes.push_back("no H2 certificate among the candidate Pi0");

  try {
    rep.trace = value_by_regularization(sys, w, opts.schedule, opts.regularization);
  } catch (const Error& e) {
    rep.notes.push_back(std::string("regularization: ") + e.what());
    return rep;
  }
  const auto& tr = *rep.trace;
  if (tr.status == TraceStatus::Diverging) {
    rep.verdict = Verdict::RegularizationDiverged;
  } else if (tr.converged() && rep.h2) {
    rep.verdict = Verdict::FiniteWithValue;
    rep.value = tr.limit_estimate;
    if (tr.strategy_convergent) {
      rep.strategy = tr.entries.back().strategy();
      rep.notes.push_back("regularized strategies settle; their limit is an optimal strategy candidate");
    } else {
      rep.notes.push_back("regularized strategies do not settle (no optimal strategy identified)");
    }
  } else if (tr.converged()) {
    rep.value = tr.limit_estimate;
    rep.notes.push_back("regularized values settle but no H2 certificate backs the limit");
  }
  return rep;
}

}  // namespace ergolq
