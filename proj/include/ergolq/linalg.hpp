#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ergolq/error.hpp"

namespace ergolq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix symmetrize(const Matrix& M) { return 0.5 * (M + M.transpose()); }

inline bool all_finite(const Matrix& M) { return M.allFinite(); }

/// Eigenvalues of the symmetric part of `M`, ascending.
inline Vector sym_eigenvalues(const Matrix& M) {
  if (M.size() == 0) return Vector{};
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double max_sym_eigenvalue(const Matrix& M) { return sym_eigenvalues(M).maxCoeff(); }
inline double min_sym_eigenvalue(const Matrix& M) { return sym_eigenvalues(M).minCoeff(); }

/// Spectral norm of a symmetric matrix.
inline double sym_norm2(const Matrix& M) { return sym_eigenvalues(M).cwiseAbs().maxCoeff(); }

inline Matrix kron(const Matrix& X, const Matrix& Y) {
  Matrix K(X.rows() * Y.rows(), X.cols() * Y.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      K.block(i * Y.rows(), j * Y.cols(), Y.rows(), Y.cols()) = X(i, j) * Y;
  return K;
}

inline Vector vec(const Matrix& M) { return Eigen::Map<const Vector>(M.data(), M.size()); }

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

namespace detail {

/// Dense solve that refuses numerically singular systems.
inline Vector solve_checked(const Matrix& K, const Vector& rhs, const char* what) {
  Eigen::FullPivLU<Matrix> lu(K);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible())
    throw Error(Errc::SingularLinearSystem, std::string(what) + ": operator is numerically singular");
  Vector x = lu.solve(rhs);
  if (!x.allFinite())
    throw Error(Errc::SingularLinearSystem, std::string(what) + ": non-finite solution");
  return x;
}

/// Matrix of P -> P*Acl + Acl^T*P + sum_k Ccl_k^T*P*Ccl_k acting on vec(P).
/// Its transpose is the generator of the stationary second-moment equation.
inline Matrix lyapunov_operator(const Matrix& A_cl, std::span<const Matrix> C_cl) {
  const Eigen::Index n = A_cl.rows();
  const Matrix I = Matrix::Identity(n, n);
  Matrix K = kron(A_cl.transpose(), I) + kron(I, A_cl.transpose());
  for (const auto& C : C_cl) K += kron(C.transpose(), C.transpose());
  return K;
}

}  // namespace detail
}  // namespace ergolq
