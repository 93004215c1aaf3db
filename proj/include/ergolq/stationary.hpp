#pragma once

#include "ergolq/algebra.hpp"
#include "ergolq/error.hpp"
#include "ergolq/linalg.hpp"
#include "ergolq/model.hpp"

namespace ergolq {

/// First moment and second raw moment of the invariant measure of the
/// closed-loop state.
struct StationaryMoments {
  Vector m1;
  Matrix M2;

  Matrix covariance() const { return symmetrize(M2 - m1 * m1.transpose()); }
};

inline void require_stabilizer(const LinearSystem& sys, const Matrix& Theta, const char* where) {
  if (!is_stabilizer(sys, Theta))
    throw Error(Errc::NotStabilizing, std::string(where) + ": Theta does not satisfy F(Theta) < 0");
}

/// Drift of the moment equations evaluated at (m1, M2). Zero at stationarity.
inline std::pair<Vector, Matrix> moment_drift(const ClosedLoop& cl, const Vector& m1, const Matrix& M2) {
  Vector dm = cl.A_cl * m1 + cl.drift_const;
  Matrix dM = cl.A_cl * M2 + M2 * cl.A_cl.transpose() + cl.drift_const * m1.transpose() +
              m1 * cl.drift_const.transpose();
  for (std::size_t k = 0; k < cl.C_cl.size(); ++k) {
    const Matrix& C = cl.C_cl[k];
    const Vector& s = cl.diff_const[k];
    dM.noalias() += C * M2 * C.transpose();
    dM.noalias() += C * m1 * s.transpose() + s * m1.transpose() * C.transpose();
    dM.noalias() += s * s.transpose();
  }
  return {dm, dM};
}

inline StationaryMoments stationary_moments(const LinearSystem& sys, const Strategy& strat) {
  require_stabilizer(sys, strat.Theta, "stationary_moments");
  const ClosedLoop cl = closed_loop(sys, strat);
  const auto n = sys.n();

  StationaryMoments out;
  out.m1 = -detail::solve_checked(cl.A_cl, cl.drift_const, "stationary mean");

  // A M + M A^T + sum C M C^T = -(forcing); the operator is the transpose of the Lyapunov one.
  Matrix forcing = cl.drift_const * out.m1.transpose() + out.m1 * cl.drift_const.transpose();
  for (std::size_t k = 0; k < cl.C_cl.size(); ++k) {
    const Matrix& C = cl.C_cl[k];
    const Vector& s = cl.diff_const[k];
    forcing.noalias() += C * out.m1 * s.transpose() + s * out.m1.transpose() * C.transpose();
    forcing.noalias() += s * s.transpose();
  }
  const Matrix K = detail::lyapunov_operator(cl.A_cl, cl.C_cl).transpose();
  out.M2 = symmetrize(unvec(detail::solve_checked(K, -vec(forcing), "stationary second moment"), n, n));
  return out;
}

/// Coefficients of x -> g(x, Theta x + v) = <Qg x,x> + 2<cg,x> + kg.
struct FeedbackCost {
  Matrix Qg;
  Vector cg;
  double kg;
};

inline FeedbackCost feedback_cost(const CostWeights& w, const Strategy& strat) {
  const Matrix& Th = strat.Theta;
  const Vector& v = strat.v;
  FeedbackCost fc;
  fc.Qg = feedback_state_weight(w, Th);
  fc.cg = (w.S + w.R * Th).transpose() * v + w.q + Th.transpose() * w.rho;
  fc.kg = v.dot(w.R * v) + 2.0 * w.rho.dot(v);
  return fc;
}

inline double integrate_quadratic(const FeedbackCost& fc, const StationaryMoments& mom) {
  return (fc.Qg * mom.M2).trace() + 2.0 * fc.cg.dot(mom.m1) + fc.kg;
}

/// Ergodic cost E(Theta, v): integral of g(x, Theta x + v) against the invariant measure.
inline double ergodic_cost(const LinearSystem& sys, const CostWeights& w, const Strategy& strat) {
  require_stabilizer(sys, strat.Theta, "ergodic_cost");
  return integrate_quadratic(feedback_cost(w, strat), stationary_moments(sys, strat));
}

/// Unique solution eta of
///   (A+B Theta)^T eta + Pi b + sum_k (C_k+D_k Theta)^T Pi sigma_k + q + Theta^T rho = 0.
inline Vector eta_solve(const LinearSystem& sys, const CostWeights& w, const Matrix& Theta, const Matrix& Pi) {
  check_gain(sys, Theta);
  if (Pi.rows() != sys.n() || Pi.cols() != sys.n()) throw Error(Errc::DimensionMismatch, "Pi must be n x n");
  const Matrix A_cl = sys.A + sys.B * Theta;
  Vector rhs = Pi * sys.b + w.q + Theta.transpose() * w.rho;
  for (std::size_t k = 0; k < sys.d(); ++k)
    rhs.noalias() += (sys.C[k] + sys.D[k] * Theta).transpose() * Pi * sys.sigma[k];
  return -detail::solve_checked(A_cl.transpose(), rhs, "eta equation");
}

/// The Pi-parameterized expression of E(Theta, v); equal to ergodic_cost for every symmetric Pi.
inline double cost_representation(const LinearSystem& sys, const CostWeights& w, const Strategy& strat,
                                  const Matrix& Pi) {
  require_stabilizer(sys, strat.Theta, "cost_representation");
  const auto n = sys.n(), m = sys.m();
  const Matrix Ps = symmetrize(Pi);
  const StationaryMoments mom = stationary_moments(sys, strat);
  const Matrix M = m_theta_pi(sys, w, strat.Theta, Ps);
  const Vector& v = strat.v;

  const double quad = (M.topLeftCorner(n, n) * mom.M2).trace() +
                      2.0 * v.dot(M.bottomLeftCorner(m, n) * mom.m1) + v.dot(M.bottomRightCorner(m, m) * v);
  const Vector eta = eta_solve(sys, w, strat.Theta, Ps);
  Vector lin = sys.B.transpose() * eta + w.rho;
  double noise = 0.0;
  for (std::size_t k = 0; k < sys.d(); ++k) {
    lin.noalias() += sys.D[k].transpose() * Ps * sys.sigma[k];
    noise += sys.sigma[k].dot(Ps * sys.sigma[k]);
  }
  return quad + 2.0 * lin.dot(v) + noise + 2.0 * eta.dot(sys.b);
}

}  // namespace ergolq
