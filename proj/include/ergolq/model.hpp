#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ergolq/error.hpp"
#include "ergolq/linalg.hpp"

namespace ergolq {

/// Coefficients of the controlled state equation
///   dX = (A X + B u + b) dt + sum_k (C_k X + D_k u + sigma_k) dW_k.
struct LinearSystem {
  Matrix A;                    // n x n
  Matrix B;                    // n x m
  std::vector<Matrix> C;       // d matrices, n x n
  std::vector<Matrix> D;       // d matrices, n x m
  Vector b;                    // n
  std::vector<Vector> sigma;   // d vectors, n

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  std::size_t d() const { return C.size(); }
};

/// Quadratic running cost g(x,u) = <Qx,x> + 2<Sx,u> + <Ru,u> + 2<q,x> + 2<rho,u>.
struct CostWeights {
  Matrix Q;    // n x n, symmetric
  Matrix S;    // m x n
  Matrix R;    // m x m, symmetric
  Vector q;    // n
  Vector rho;  // m
};

/// Affine feedback u(x) = Theta x + v.
struct Strategy {
  Matrix Theta;  // m x n
  Vector v;      // m
};

struct ClosedLoop {
  Matrix A_cl;                    // A + B Theta
  std::vector<Matrix> C_cl;       // C_k + D_k Theta
  Vector drift_const;             // B v + b
  std::vector<Vector> diff_const; // D_k v + sigma_k
};

inline void validate(const LinearSystem& sys) {
  const auto n = sys.A.rows();
  if (n < 1 || sys.A.cols() != n) throw Error(Errc::DimensionMismatch, "A must be square with n >= 1");
  if (sys.B.rows() != n || sys.B.cols() < 1) throw Error(Errc::DimensionMismatch, "B must be n x m with m >= 1");
  const auto m = sys.B.cols();
  if (sys.C.empty()) throw Error(Errc::DimensionMismatch, "at least one noise channel is required");
  if (sys.D.size() != sys.C.size() || sys.sigma.size() != sys.C.size())
    throw Error(Errc::DimensionMismatch, "C, D and sigma must have the same number of channels");
  if (sys.b.size() != n) throw Error(Errc::DimensionMismatch, "b must have length n");
  for (std::size_t k = 0; k < sys.C.size(); ++k) {
    if (sys.C[k].rows() != n || sys.C[k].cols() != n)
      throw Error(Errc::DimensionMismatch, "C[" + std::to_string(k) + "] must be n x n");
    if (sys.D[k].rows() != n || sys.D[k].cols() != m)
      throw Error(Errc::DimensionMismatch, "D[" + std::to_string(k) + "] must be n x m");
    if (sys.sigma[k].size() != n)
      throw Error(Errc::DimensionMismatch, "sigma[" + std::to_string(k) + "] must have length n");
  }
  bool finite = sys.A.allFinite() && sys.B.allFinite() && sys.b.allFinite();
  for (std::size_t k = 0; k < sys.C.size(); ++k)
    finite = finite && sys.C[k].allFinite() && sys.D[k].allFinite() && sys.sigma[k].allFinite();
  if (!finite) throw Error(Errc::InvalidInput, "system coefficients must be finite");
}

/// Checks dimensions against `sys` and returns the weights with Q and R
/// symmetrized. Asymmetry beyond 1e-12 (1 + |M|) is rejected.
inline CostWeights validated(const CostWeights& w, const LinearSystem& sys) {
  const auto n = sys.n(), m = sys.m();
  if (w.Q.rows() != n || w.Q.cols() != n) throw Error(Errc::DimensionMismatch, "Q must be n x n");
  if (w.S.rows() != m || w.S.cols() != n) throw Error(Errc::DimensionMismatch, "S must be m x n");
  if (w.R.rows() != m || w.R.cols() != m) throw Error(Errc::DimensionMismatch, "R must be m x m");
  if (w.q.size() != n) throw Error(Errc::DimensionMismatch, "q must have length n");
  if (w.rho.size() != m) throw Error(Errc::DimensionMismatch, "rho must have length m");
  if (!(w.Q.allFinite() && w.S.allFinite() && w.R.allFinite() && w.q.allFinite() && w.rho.allFinite()))
    throw Error(Errc::InvalidInput, "cost weights must be finite");
  auto check_sym = [](const Matrix& M, const char* name) {
    if ((M - M.transpose()).norm() > 1e-12 * (1.0 + M.norm()))
      throw Error(Errc::InvalidInput, std::string(name) + " is not symmetric");
  };
  check_sym(w.Q, "Q");
  check_sym(w.R, "R");
  CostWeights out = w;
  out.Q = symmetrize(w.Q);
  out.R = symmetrize(w.R);
  return out;
}

inline void check_gain(const LinearSystem& sys, const Matrix& Theta) {
  if (Theta.rows() != sys.m() || Theta.cols() != sys.n())
    throw Error(Errc::DimensionMismatch, "Theta must be m x n");
}

inline ClosedLoop closed_loop(const LinearSystem& sys, const Strategy& strat) {
  check_gain(sys, strat.Theta);
  if (strat.v.size() != sys.m()) throw Error(Errc::DimensionMismatch, "v must have length m");
  ClosedLoop cl;
  cl.A_cl = sys.A + sys.B * strat.Theta;
  cl.drift_const = sys.B * strat.v + sys.b;
  for (std::size_t k = 0; k < sys.d(); ++k) {
    cl.C_cl.push_back(sys.C[k] + sys.D[k] * strat.Theta);
    cl.diff_const.push_back(sys.D[k] * strat.v + sys.sigma[k]);
  }
  return cl;
}

/// F(Theta) = (A+B Theta) + (A+B Theta)^T + sum_k (C_k+D_k Theta)^T (C_k+D_k Theta).
inline Matrix f_of_theta(const LinearSystem& sys, const Matrix& Theta) {
  check_gain(sys, Theta);
  const Matrix A_cl = sys.A + sys.B * Theta;
  Matrix F = A_cl + A_cl.transpose();
  for (std::size_t k = 0; k < sys.d(); ++k) {
    const Matrix C_cl = sys.C[k] + sys.D[k] * Theta;
    F.noalias() += C_cl.transpose() * C_cl;
  }
  return symmetrize(F);
}

/// Decay rate lambda(Theta) = -max eig F(Theta); positive iff F(Theta) < 0.
inline double lambda_of_theta(const LinearSystem& sys, const Matrix& Theta) {
  return -max_sym_eigenvalue(f_of_theta(sys, Theta));
}

inline constexpr double kDefaultStabTol = 1e-10;

/// Mean-square stabilizer test: max eig F(Theta) < -tol |F|.
inline bool is_stabilizer(const LinearSystem& sys, const Matrix& Theta, double tol = kDefaultStabTol) {
  const Vector ev = sym_eigenvalues(f_of_theta(sys, Theta));
  const double norm = ev.cwiseAbs().maxCoeff();
  return ev.maxCoeff() < -tol * norm;
}

struct StabilizerSearchOptions {
  int max_iters = 500;
  int round_length = 100;  // iterations before restarting from Theta = 0 with doubled scale
  int polish_iters = 50;   // extra descent steps after the first stabilizer is hit
  double tol_stab = kDefaultStabTol;
};

/// Subgradient descent on the convex map Theta -> lambda_max(F(Theta)).
/// Returns a gain with F(Theta) < 0, or nullopt when the search gives up;
/// nullopt does not prove that no stabilizer exists.
inline std::optional<Matrix> find_stabilizer(const LinearSystem& sys, const StabilizerSearchOptions& opts = {}) {
  validate(sys);
  const auto n = sys.n(), m = sys.m();
  std::optional<Matrix> best;
  double best_lmax = 0.0;
  int total = 0;
  double scale = 1.0;
  while (total < opts.max_iters) {
    Matrix Theta = Matrix::Zero(m, n);
    int polish_left = -1;
    for (int k = 0; k < opts.round_length && total < opts.max_iters; ++k, ++total) {
      const Matrix F = f_of_theta(sys, Theta);
      Eigen::SelfAdjointEigenSolver<Matrix> es(F);
      const double lmax = es.eigenvalues()(n - 1);
      const double fnorm = es.eigenvalues().cwiseAbs().maxCoeff();
      if (lmax < -opts.tol_stab * fnorm && (!best || lmax < best_lmax)) {
        best = Theta;
        best_lmax = lmax;
        if (polish_left < 0) polish_left = opts.polish_iters;
      }
      if (polish_left == 0) return best;
      if (polish_left > 0) --polish_left;

      const Vector u = es.eigenvectors().col(n - 1);
      Matrix coupling = sys.B.transpose();
      for (std::size_t j = 0; j < sys.d(); ++j)
        coupling += sys.D[j].transpose() * (sys.C[j] + sys.D[j] * Theta);
      const Matrix G = 2.0 * coupling * u * u.transpose();
      const double gnorm = G.norm();
      if (!(gnorm > 1e-14)) break;
      Theta -= (scale / (1.0 + k)) * G / gnorm;
    }
    if (best) return best;
    // A vanishing subgradient at Theta = 0 with B = D = 0 means F does not depend on Theta.
    bool uncontrolled = sys.B.norm() == 0.0;
    for (const auto& Dk : sys.D) uncontrolled = uncontrolled && Dk.norm() == 0.0;
    if (uncontrolled) return std::nullopt;
    scale *= 2.0;
  }
  return best;
}

}  // namespace ergolq
