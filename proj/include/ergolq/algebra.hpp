#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ergolq/error.hpp"
#include "ergolq/linalg.hpp"
#include "ergolq/model.hpp"

namespace ergolq {

/// Truncation rule for the Moore-Penrose pseudo-inverse. Singular values
/// below rel_tol * sigma_max are treated as zero.
struct PinvPolicy {
  double rel_tol = 1e-10;

  void validate() const {
    if (!(rel_tol > 0.0 && rel_tol <= 1e-4))
      throw Error(Errc::InvalidInput, "PinvPolicy.rel_tol must lie in (0, 1e-4]");
  }
  /// Tolerance used by range-inclusion and semidefiniteness checks.
  double check_tol() const { return 10.0 * rel_tol; }
};

inline Matrix pinv(const Matrix& M, const PinvPolicy& policy = {}) {
  policy.validate();
  if (M.size() == 0) return Matrix::Zero(M.cols(), M.rows());
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  Vector sinv = Vector::Zero(s.size());
  if (smax > 0.0)
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s(i) > policy.rel_tol * smax) sinv(i) = 1.0 / s(i);
  return svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();
}

struct RangeCheck {
  bool ok;
  double defect;  // |(I - M M^+) Y| / (1 + |Y|)
};

/// Tests R(Y) subset of R(M) through the orthogonal projector onto R(M)^perp.
inline RangeCheck check_range(const Matrix& Y, const Matrix& M, const PinvPolicy& policy = {}) {
  if (Y.rows() != M.rows()) throw Error(Errc::DimensionMismatch, "check_range: row mismatch");
  const Matrix proj = Matrix::Identity(M.rows(), M.rows()) - M * pinv(M, policy);
  const double defect = (proj * Y).norm() / (1.0 + Y.norm());
  return {defect <= policy.check_tol(), defect};
}

inline RangeCheck check_range(const Vector& y, const Matrix& M, const PinvPolicy& policy = {}) {
  return check_range(Matrix(y), M, policy);
}

/// R + sum_k D_k^T Pi D_k.
inline Matrix r_plus_dpd(const LinearSystem& sys, const CostWeights& w, const Matrix& Pi) {
  Matrix G = w.R;
  for (std::size_t k = 0; k < sys.d(); ++k) G.noalias() += sys.D[k].transpose() * Pi * sys.D[k];
  return symmetrize(G);
}

/// L_Pi = B^T Pi + sum_k D_k^T Pi C_k + S.
inline Matrix l_of_pi(const LinearSystem& sys, const CostWeights& w, const Matrix& Pi) {
  Matrix L = sys.B.transpose() * Pi + w.S;
  for (std::size_t k = 0; k < sys.d(); ++k) L.noalias() += sys.D[k].transpose() * Pi * sys.C[k];
  return L;
}

/// Q + S^T Theta + Theta^T S + Theta^T R Theta, the state weight seen by a feedback.
inline Matrix feedback_state_weight(const CostWeights& w, const Matrix& Theta) {
  return symmetrize(w.Q + w.S.transpose() * Theta + Theta.transpose() * w.S +
                    Theta.transpose() * w.R * Theta);
}

/// Q_{Theta,Pi}, evaluated in closed-loop form.
inline Matrix q_theta_pi(const LinearSystem& sys, const CostWeights& w, const Matrix& Theta, const Matrix& Pi) {
  check_gain(sys, Theta);
  const Matrix A_cl = sys.A + sys.B * Theta;
  Matrix Qtp = Pi * A_cl + A_cl.transpose() * Pi + feedback_state_weight(w, Theta);
  for (std::size_t k = 0; k < sys.d(); ++k) {
    const Matrix C_cl = sys.C[k] + sys.D[k] * Theta;
    Qtp.noalias() += C_cl.transpose() * Pi * C_cl;
  }
  return symmetrize(Qtp);
}

/// Q_{Theta,Pi}, evaluated through L_Pi (the second algebraic form).
inline Matrix q_theta_pi_via_l(const LinearSystem& sys, const CostWeights& w, const Matrix& Theta,
                               const Matrix& Pi) {
  const Matrix L = l_of_pi(sys, w, Pi);
  Matrix Qtp = Pi * sys.A + sys.A.transpose() * Pi + w.Q + L.transpose() * Theta + Theta.transpose() * L +
               Theta.transpose() * r_plus_dpd(sys, w, Pi) * Theta;
  for (std::size_t k = 0; k < sys.d(); ++k) Qtp.noalias() += sys.C[k].transpose() * Pi * sys.C[k];
  return symmetrize(Qtp);
}

/// Riccati map Q-hat_Pi = Pi A + A^T Pi + sum C^T Pi C + Q - L^T (R + sum D^T Pi D)^+ L.
inline Matrix q_hat(const LinearSystem& sys, const CostWeights& w, const Matrix& Pi, const PinvPolicy& policy = {}) {
  const Matrix L = l_of_pi(sys, w, Pi);
  Matrix Qh = Pi * sys.A + sys.A.transpose() * Pi + w.Q - L.transpose() * pinv(r_plus_dpd(sys, w, Pi), policy) * L;
  for (std::size_t k = 0; k < sys.d(); ++k) Qh.noalias() += sys.C[k].transpose() * Pi * sys.C[k];
  return symmetrize(Qh);
}

/// Member of Upsilon[Pi] selected by the free matrix Lambda:
///   Theta0 = -G^+ L_Pi + (I - G^+ G) Lambda,  G = R + sum D^T Pi D.
/// Throws RangeViolation unless R(L_Pi) is contained in R(G).
inline Matrix upsilon(const LinearSystem& sys, const CostWeights& w, const Matrix& Pi, const Matrix& Lambda,
                      const PinvPolicy& policy = {}) {
  check_gain(sys, Lambda);
  const Matrix G = r_plus_dpd(sys, w, Pi);
  const Matrix L = l_of_pi(sys, w, Pi);
  const auto rc = check_range(L, G, policy);
  if (!rc.ok)
    throw Error(Errc::RangeViolation, "range of L_Pi is not contained in range of R + D^T Pi D (defect " +
                                          std::to_string(rc.defect) + ")");
  const Matrix Gp = pinv(G, policy);
  const Matrix I = Matrix::Identity(G.rows(), G.rows());
  return -Gp * L + (I - Gp * G) * Lambda;
}

/// Block quadratic form M_{Theta,Pi} on (x, v).
inline Matrix m_theta_pi(const LinearSystem& sys, const CostWeights& w, const Matrix& Theta, const Matrix& Pi) {
  const auto n = sys.n(), m = sys.m();
  const Matrix G = r_plus_dpd(sys, w, Pi);
  const Matrix off = l_of_pi(sys, w, Pi) + G * Theta;  // m x n
  Matrix M(n + m, n + m);
  M.topLeftCorner(n, n) = q_theta_pi(sys, w, Theta, Pi);
  M.topRightCorner(n, m) = off.transpose();
  M.bottomLeftCorner(m, n) = off;
  M.bottomRightCorner(m, m) = G;
  return M;
}

/// Solves P A_cl + A_cl^T P + sum_k C_cl,k^T P C_cl,k + rhs = 0 by vectorization.
inline Matrix lyap_stationary(const Matrix& A_cl, std::span<const Matrix> C_cl, const Matrix& rhs) {
  const auto n = A_cl.rows();
  if (A_cl.cols() != n || rhs.rows() != n || rhs.cols() != n)
    throw Error(Errc::DimensionMismatch, "lyap_stationary: inconsistent sizes");
  for (const auto& C : C_cl)
    if (C.rows() != n || C.cols() != n) throw Error(Errc::DimensionMismatch, "lyap_stationary: C_cl size");
  const Matrix K = detail::lyapunov_operator(A_cl, C_cl);
  const Vector p = detail::solve_checked(K, -vec(rhs), "lyap_stationary");
  const Matrix P = symmetrize(unvec(p, n, n));
  Matrix res = P * A_cl + A_cl.transpose() * P + rhs;
  for (const auto& C : C_cl) res.noalias() += C.transpose() * P * C;
  const double scale = 1.0 + rhs.norm() + K.norm() * P.norm();
  if (!(res.norm() <= 1e-10 * scale))
    throw Error(Errc::SingularLinearSystem, "lyap_stationary: residual too large");
  return P;
}

inline Matrix lyap_stationary(const Matrix& A_cl, const std::vector<Matrix>& C_cl, const Matrix& rhs) {
  return lyap_stationary(A_cl, std::span<const Matrix>(C_cl), rhs);
}

/// Residual matrix of the algebraic Riccati equation with invertible G:
///   P A + A^T P + sum C^T P C + Q - L_P^T G^{-1} L_P.
inline Matrix are_residual(const LinearSystem& sys, const CostWeights& w, const Matrix& P) {
  const Matrix G = r_plus_dpd(sys, w, P);
  const Matrix L = l_of_pi(sys, w, P);
  Matrix res = P * sys.A + sys.A.transpose() * P + w.Q - L.transpose() * G.ldlt().solve(L);
  for (std::size_t k = 0; k < sys.d(); ++k) res.noalias() += sys.C[k].transpose() * P * sys.C[k];
  return symmetrize(res);
}

}  // namespace ergolq
