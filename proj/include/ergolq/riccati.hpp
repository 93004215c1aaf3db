#pragma once

#include <cmath>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "ergolq/algebra.hpp"
#include "ergolq/error.hpp"
#include "ergolq/model.hpp"
#include "ergolq/stationary.hpp"

namespace ergolq {

/// A certificate check that did not go through. `condition` names the first
/// violated requirement; `value` is the offending slack or defect.
struct Failure {
  std::string condition;
  double value = 0.0;
};

template <class T>
using Checked = std::variant<T, Failure>;

template <class T>
bool succeeded(const Checked<T>& r) {
  return std::holds_alternative<T>(r);
}

struct AreSolution {
  Matrix P;
  Matrix Theta;
  int iterations = 0;
  double residual = 0.0;               // Frobenius norm of the ARE residual at P
  std::vector<double> residual_trace;  // one entry per accepted iterate
  bool at_precision_floor = false;     // stopped on stagnation rather than on tol
};

struct NewtonKleinmanOptions {
  int max_iter = 200;
  double tol = 1e-12;
  int polish_steps = 3;  // extra steps after tol is met, kept only while the residual halves
};

/// Newton-Kleinman iteration for
///   P A + A^T P + sum C^T P C + Q - L_P^T (R + sum D^T P D)^{-1} L_P = 0,
/// started from a stabilizing gain. Each step solves the closed-loop
/// Lyapunov equation and updates Theta = -(R + sum D^T P D)^{-1} L_P.
/// Requires R + sum D^T P D > tol I along the iterates (LostPositivity
/// otherwise). Convergence is declared when |residual| <= tol (1 + |P|),
/// after which a few more steps are taken while they still pay off: when
/// two ARE roots nearly coincide the gain is far more sensitive than the
/// residual. If the iterates stagnate before tol is met, the iterate is
/// accepted when |residual| <= 1e-10 (1 + |P|) and flagged `at_precision_floor`.
inline AreSolution newton_kleinman(const LinearSystem& sys, const CostWeights& w, const Matrix& Theta_init,
                                   const NewtonKleinmanOptions& opts = {}) {
  if (!is_stabilizer(sys, Theta_init)) throw Error(Errc::NotStabilizing, "newton_kleinman: initial gain");
  AreSolution best;
  bool have_best = false;
  bool converged = false;
  int polish_left = opts.polish_steps;
  Matrix Theta = Theta_init;
  Matrix P_prev;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Matrix A_cl = sys.A + sys.B * Theta;
    std::vector<Matrix> C_cl;
    for (std::size_t k = 0; k < sys.d(); ++k) C_cl.push_back(sys.C[k] + sys.D[k] * Theta);
    const Matrix P = lyap_stationary(A_cl, C_cl, feedback_state_weight(w, Theta));

    const Matrix G = r_plus_dpd(sys, w, P);
    const double gmin = min_sym_eigenvalue(G);
    if (!(gmin > opts.tol)) {
      if (converged) return best;
      throw Error(Errc::LostPositivity,
                  "newton_kleinman: R + D^T P D not positive definite (min eig " + std::to_string(gmin) + ")");
    }
    const Matrix Theta_next = -G.llt().solve(l_of_pi(sys, w, P));
    const double res = are_residual(sys, w, P).norm();
    const double scale = 1.0 + P.norm();

    if (converged) {
      if (!(res < 0.5 * best.residual) || !is_stabilizer(sys, Theta_next)) return best;
    } else if (have_best && res > best.residual && best.residual <= 1e-10 * (1.0 + best.P.norm())) {
      // Residual went up at working precision. Keep the last accepted iterate.
      best.at_precision_floor = true;
      return best;
    }
    const bool accepted = !have_best || res <= best.residual;
    if (accepted) {
      best.P = P;
      best.Theta = Theta_next;
      best.iterations = it;
      best.residual = res;
      best.residual_trace.push_back(res);
      have_best = true;
    }
    if (converged) {
      if (--polish_left <= 0) return best;
    } else if (res <= opts.tol * scale) {
      if (!is_stabilizer(sys, Theta_next)) throw Error(Errc::LostStability, "newton_kleinman: final gain");
      converged = true;
      if (polish_left <= 0) return best;
    } else if (it > 1 && (P - P_prev).norm() <= 1e-14 * scale && res <= 1e-10 * scale) {
      if (!is_stabilizer(sys, Theta_next)) throw Error(Errc::LostStability, "newton_kleinman: final gain");
      best.at_precision_floor = true;
      return best;
    } else if (!is_stabilizer(sys, Theta_next)) {
      throw Error(Errc::LostStability, "newton_kleinman: iterate " + std::to_string(it));
    }
    Theta = Theta_next;
    P_prev = P;
  }
  if (converged) return best;
  throw Error(Errc::MaxIterations, "newton_kleinman: no convergence in " + std::to_string(opts.max_iter) +
                                       " iterations (residual " + std::to_string(best.residual) + ")");
}

/// Finiteness certificate: Riccati inequality at Pi0 plus the range
/// memberships that make E(Theta, v) bounded below.
struct CertificateH2 {
  Matrix Pi0;
  Matrix Theta0;
  Vector eta0;
  Matrix Q_theta0;     // Q_{Theta0,Pi0}, equal to Q-hat at Pi0
  double lower_bound;  // uniform lower bound on E over admissible strategies
  std::map<std::string, double> residuals;
};

/// Solvability certificate: Riccati equation at Pi0 with a stabilizing
/// member of Upsilon[Pi0] and a solvable eta equation.
struct CertificateH3 {
  Matrix Pi0;
  Matrix ThetaBar0;
  Vector etaBar0;
  Vector vBar0;
  double value;  // E(ThetaBar0, vBar0), the optimal ergodic cost
  std::map<std::string, double> residuals;
};

namespace detail {

struct ControlSideTerms {
  Vector r_v;   // B^T eta + sum D^T Pi sigma + rho
  double noise; // sum <Pi sigma, sigma>
};

inline ControlSideTerms control_side(const LinearSystem& sys, const CostWeights& w, const Matrix& Pi,
                                     const Vector& eta) {
  ControlSideTerms t{sys.B.transpose() * eta + w.rho, 0.0};
  for (std::size_t k = 0; k < sys.d(); ++k) {
    t.r_v.noalias() += sys.D[k].transpose() * Pi * sys.sigma[k];
    t.noise += sys.sigma[k].dot(Pi * sys.sigma[k]);
  }
  return t;
}

/// (A + B Theta)^T eta + Pi b + sum (C + D Theta)^T Pi sigma + q + Theta^T rho.
inline Vector state_side(const LinearSystem& sys, const CostWeights& w, const Matrix& Theta, const Matrix& Pi,
                         const Vector& eta) {
  Vector r = (sys.A + sys.B * Theta).transpose() * eta + Pi * sys.b + w.q + Theta.transpose() * w.rho;
  for (std::size_t k = 0; k < sys.d(); ++k)
    r.noalias() += (sys.C[k] + sys.D[k] * Theta).transpose() * Pi * sys.sigma[k];
  return r;
}

inline double psd_slack(const Matrix& M) { return M.size() ? min_sym_eigenvalue(M) : 0.0; }

}  // namespace detail

inline Checked<CertificateH2> check_h2(const LinearSystem& sys, const CostWeights& w, const Matrix& Pi0_in,
                                       const Matrix& Lambda, const PinvPolicy& policy = {}) {
  const double tol = policy.check_tol();
  const Matrix Pi0 = symmetrize(Pi0_in);
  std::map<std::string, double> res;

  const Matrix G = r_plus_dpd(sys, w, Pi0);
  const double g_slack = detail::psd_slack(G);
  res["gram_min_eig"] = g_slack;
  if (g_slack < -tol * (1.0 + G.norm())) return Failure{"R + D^T Pi0 D >= 0", g_slack};

  const auto l_range = check_range(l_of_pi(sys, w, Pi0), G, policy);
  res["L_range_defect"] = l_range.defect;
  if (!l_range.ok) return Failure{"range(L_Pi0) in range(R + D^T Pi0 D)", l_range.defect};

  const Matrix Qh = q_hat(sys, w, Pi0, policy);
  const double q_slack = detail::psd_slack(Qh);
  res["riccati_inequality_min_eig"] = q_slack;
  if (q_slack < -tol * (1.0 + Qh.norm() + w.Q.norm())) return Failure{"Riccati inequality Q-hat >= 0", q_slack};

  const Matrix Theta0 = upsilon(sys, w, Pi0, Lambda, policy);
  const Matrix Qt = q_theta_pi(sys, w, Theta0, Pi0);

  // eta0 minimizing both projected membership defects in the least-squares sense.
  const auto n = sys.n(), m = sys.m();
  const Matrix proj_G = Matrix::Identity(m, m) - G * pinv(G, policy);
  const Matrix proj_Q = Matrix::Identity(n, n) - Qt * pinv(Qt, policy);
  const Vector r_v0 = detail::control_side(sys, w, Pi0, Vector::Zero(n)).r_v;
  const Vector r_x0 = detail::state_side(sys, w, Theta0, Pi0, Vector::Zero(n));
  Matrix lhs(m + n, n);
  lhs << proj_G * sys.B.transpose(), proj_Q * (sys.A + sys.B * Theta0).transpose();
  Vector rhs(m + n);
  rhs << -proj_G * r_v0, -proj_Q * r_x0;
  const Vector eta0 = pinv(lhs, policy) * rhs;

  const auto cs = detail::control_side(sys, w, Pi0, eta0);
  const Vector r_x = detail::state_side(sys, w, Theta0, Pi0, eta0);
  const auto v_range = check_range(cs.r_v, G, policy);
  res["eta_control_range_defect"] = v_range.defect;
  if (!v_range.ok) return Failure{"B^T eta0 + D^T Pi0 sigma + rho in range(R + D^T Pi0 D)", v_range.defect};
  const auto x_range = check_range(r_x, Qt, policy);
  res["eta_state_range_defect"] = x_range.defect;
  if (!x_range.ok) return Failure{"eta0 state residual in range(Q_{Theta0,Pi0})", x_range.defect};

  const double lower = -r_x.dot(pinv(Qt, policy) * r_x) - cs.r_v.dot(pinv(G, policy) * cs.r_v) + cs.noise +
                       2.0 * eta0.dot(sys.b);
  return CertificateH2{Pi0, Theta0, eta0, Qt, lower, std::move(res)};
}

inline Checked<CertificateH3> check_h3(const LinearSystem& sys, const CostWeights& w, const Matrix& Pi0_in,
                                       const Matrix& Lambda, const Vector& nu, const PinvPolicy& policy = {}) {
  const double tol = policy.check_tol();
  const Matrix Pi0 = symmetrize(Pi0_in);
  std::map<std::string, double> res;

  const Matrix Qh = q_hat(sys, w, Pi0, policy);
  res["riccati_equation_residual"] = Qh.norm();
  if (Qh.norm() > 1e-10 * (1.0 + Pi0.norm() + w.Q.norm())) return Failure{"Riccati equation Q-hat = 0", Qh.norm()};

  const Matrix G = r_plus_dpd(sys, w, Pi0);
  const double g_slack = detail::psd_slack(G);
  res["gram_min_eig"] = g_slack;
  if (g_slack < -tol * (1.0 + G.norm())) return Failure{"R + D^T Pi0 D >= 0", g_slack};

  const auto l_range = check_range(l_of_pi(sys, w, Pi0), G, policy);
  res["L_range_defect"] = l_range.defect;
  if (!l_range.ok) return Failure{"range(L_Pi0) in range(R + D^T Pi0 D)", l_range.defect};

  const Matrix ThetaBar = upsilon(sys, w, Pi0, Lambda, policy);
  res["lambda_of_ThetaBar0"] = lambda_of_theta(sys, ThetaBar);
  if (!is_stabilizer(sys, ThetaBar)) return Failure{"ThetaBar0 stabilizes the system", res["lambda_of_ThetaBar0"]};

  const Vector eta = eta_solve(sys, w, ThetaBar, Pi0);
  res["eta_equation_residual"] = detail::state_side(sys, w, ThetaBar, Pi0, eta).norm();

  const auto cs = detail::control_side(sys, w, Pi0, eta);
  const auto v_range = check_range(cs.r_v, G, policy);
  res["eta_control_range_defect"] = v_range.defect;
  if (!v_range.ok) return Failure{"B^T eta + D^T Pi0 sigma + rho in range(R + D^T Pi0 D)", v_range.defect};

  if (nu.size() != sys.m()) throw Error(Errc::DimensionMismatch, "check_h3: nu must have length m");
  const Matrix Gp = pinv(G, policy);
  const Vector vbar = -Gp * cs.r_v + (Matrix::Identity(sys.m(), sys.m()) - Gp * G) * nu;
  const double value = -cs.r_v.dot(Gp * cs.r_v) + cs.noise + 2.0 * eta.dot(sys.b);
  return CertificateH3{Pi0, ThetaBar, eta, vbar, value, std::move(res)};
}

struct ConvexityCertificate {
  Matrix Pi;
  double delta;  // min eig of the Schur-type matrix; > 0 certifies uniform convexity
};

/// Uniform-convexity certificate for the stabilized homogeneous problem.
/// Solves the Lyapunov equation
///   Pi A_cl + A_cl^T Pi + sum C_cl^T Pi C_cl + Q_Theta - Q0 = 0
/// and returns delta = min eig [R + sum D^T Pi D - K^T Q0^{-1} K],
///   K = Pi B + sum C_cl^T Pi D + S^T + Theta^T R.
inline Checked<ConvexityCertificate> uniform_convexity_certificate(const LinearSystem& sys, const CostWeights& w,
                                                                   const Matrix& Theta, const Matrix& Q0) {
  require_stabilizer(sys, Theta, "uniform_convexity_certificate");
  if (Q0.rows() != sys.n() || Q0.cols() != sys.n())
    throw Error(Errc::DimensionMismatch, "uniform_convexity_certificate: Q0 must be n x n");
  Eigen::LLT<Matrix> q0_llt(symmetrize(Q0));
  if (q0_llt.info() != Eigen::Success || min_sym_eigenvalue(Q0) <= 0.0)
    throw Error(Errc::InvalidInput, "uniform_convexity_certificate: Q0 must be positive definite");

  const Matrix A_cl = sys.A + sys.B * Theta;
  std::vector<Matrix> C_cl;
  for (std::size_t k = 0; k < sys.d(); ++k) C_cl.push_back(sys.C[k] + sys.D[k] * Theta);
  Matrix Pi;
  try {
    Pi = lyap_stationary(A_cl, C_cl, feedback_state_weight(w, Theta) - symmetrize(Q0));
  } catch (const Error& e) {
    return Failure{std::string("Lyapunov solve: ") + e.what(), 0.0};
  }
  Matrix K = Pi * sys.B + w.S.transpose() + Theta.transpose() * w.R;
  for (std::size_t k = 0; k < sys.d(); ++k) K.noalias() += C_cl[k].transpose() * Pi * sys.D[k];
  const Matrix N = r_plus_dpd(sys, w, Pi) - K.transpose() * q0_llt.solve(K);
  const double delta = min_sym_eigenvalue(N);
  if (!(delta > 0.0)) return Failure{"uniform convexity margin delta > 0", delta};
  return ConvexityCertificate{Pi, delta};
}

}  // namespace ergolq
