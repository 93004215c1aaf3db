#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>

#include "ergolq/error.hpp"
#include "ergolq/model.hpp"

// Closed forms for the two scalar families worked out by hand: D = R = 0
// with B = 1 ("example 1"), and D != 0 ("example 2").
namespace ergolq::analytic1d {

enum class Tri { No, Yes, Unknown };

inline const char* to_string(Tri t) {
  switch (t) {
    case Tri::No: return "no";
    case Tri::Yes: return "yes";
    case Tri::Unknown: return "unknown";
  }
  return "?";
}

struct Verdict1D {
  std::string case_label;  // "I", "II", "III", or empty when no row applies
  Tri finite = Tri::Unknown;
  Tri solvable = Tri::Unknown;
  std::string optimal_description;
  std::optional<double> value;
  std::map<std::string, double> quantities;  // raw numbers behind the decision
};

// dX = (A X + u + b) dt + (C X + sigma) dW,  g = Q x^2 + 2 S x u.
struct Example1Params {
  double A, C, b, sigma, Q, S;
};

// dX = (A X + B u + b) dt + (C X + D u + sigma) dW,
// g = Q x^2 + 2 S x u + R u^2 + 2 q x + 2 rho u.
struct Example2Params {
  double A, B, C, D, Q, S, R;
  double b = 0, sigma = 0, q = 0, rho = 0;
};

namespace detail {

inline bool is_scalar_problem(const LinearSystem& sys, const CostWeights& w) {
  return sys.n() == 1 && sys.m() == 1 && sys.d() == 1 && w.Q.size() == 1 && w.R.size() == 1;
}

inline bool near_zero(double x, double scale) { return std::abs(x) <= 1e-9 * std::max(1.0, scale); }

inline void require_admissible(const Example1Params& p, double Theta) {
  if (!(Theta < -(2 * p.A + p.C * p.C) / 2))
    throw Error(Errc::NotStabilizing, "example 1: Theta must satisfy Theta < -(2A + C^2)/2");
}

}  // namespace detail

/// Recognizes the example-1 family: n = m = d = 1, B = 1, D = R = q = rho = 0.
inline std::optional<Example1Params> as_example1(const LinearSystem& sys, const CostWeights& w) {
  if (!detail::is_scalar_problem(sys, w)) return std::nullopt;
  if (sys.B(0, 0) != 1.0 || sys.D[0](0, 0) != 0.0 || w.R(0, 0) != 0.0 || w.q(0) != 0.0 || w.rho(0) != 0.0)
    return std::nullopt;
  return Example1Params{sys.A(0, 0), sys.C[0](0, 0), sys.b(0), sys.sigma[0](0), w.Q(0, 0), w.S(0, 0)};
}

/// Recognizes the example-2 family: n = m = d = 1 with D != 0.
inline std::optional<Example2Params> as_example2(const LinearSystem& sys, const CostWeights& w) {
  if (!detail::is_scalar_problem(sys, w) || sys.D[0](0, 0) == 0.0) return std::nullopt;
  Example2Params p{sys.A(0, 0), sys.B(0, 0), sys.C[0](0, 0), sys.D[0](0, 0), w.Q(0, 0), w.S(0, 0), w.R(0, 0)};
  p.b = sys.b(0);
  p.sigma = sys.sigma[0](0);
  p.q = w.q(0);
  p.rho = w.rho(0);
  return p;
}

/// Invariant-measure moments (m1, m2) under u = Theta x + v.
inline std::pair<double, double> moments_example1(const Example1Params& p, double Theta, double v) {
  detail::require_admissible(p, Theta);
  const double a = p.A + Theta, k = 2 * a + p.C * p.C, bv = p.b + v;
  const double m1 = -bv / a;
  const double m2 = 2 * bv * bv / (k * a) - p.sigma * p.sigma / k + 2 * p.C * p.sigma * bv / (a * k);
  return {m1, m2};
}

inline double cost_example1(const Example1Params& p, double Theta, double v) {
  const auto [m1, m2] = moments_example1(p, Theta, v);
  return p.Q * m2 + 2 * p.S * (Theta * m2 + v * m1);
}

/// Minimizer of E(Theta, .) for Q > S(2A + C^2). The default returns the
/// true minimizer v*; with `verbatim` the printed expression, which equals
/// b + v*, is returned instead.
inline double v_minimizer_example1(const Example1Params& p, double Theta, bool verbatim = false) {
  detail::require_admissible(p, Theta);
  const double abar = p.Q - p.S * (2 * p.A + p.C * p.C);
  if (!(abar > 0)) throw Error(Errc::InvalidInput, "example 1: v minimizer needs Q > S(2A + C^2)");
  const double k = 2 * (p.A + Theta) + p.C * p.C;
  const double printed = -k / (2 * abar) * (p.S * p.b + (p.Q + 2 * p.S * Theta) * p.C * p.sigma / k);
  return verbatim ? printed : printed - p.b;
}

/// h(Theta) = min_v E(Theta, v).
inline double h_example1(const Example1Params& p, double Theta) {
  return cost_example1(p, Theta, v_minimizer_example1(p, Theta));
}

/// h(-infinity) = -S^2 (b + C sigma)^2 / (Q - S(2A + C^2)) - S sigma^2.
inline double h_inf_example1(const Example1Params& p) {
  const double abar = p.Q - p.S * (2 * p.A + p.C * p.C);
  if (!(abar > 0)) throw Error(Errc::InvalidInput, "example 1: h(-inf) needs Q > S(2A + C^2)");
  const double bc = p.b + p.C * p.sigma;
  return -p.S * p.S * bc * bc / abar - p.S * p.sigma * p.sigma;
}

inline Verdict1D classify_example1(const Example1Params& p) {
  Verdict1D v;
  const double s1 = p.S * (2 * p.A + p.C * p.C);
  const double s2 = p.C * p.S * p.b + (p.Q - 2 * p.A * p.S) * p.sigma;
  const double s2_boundary = p.S * (p.b + p.C * p.sigma);
  const double scale = std::abs(p.Q) + std::abs(s1) + std::abs(p.S) * (std::abs(p.b) + std::abs(p.C * p.sigma)) +
                       std::abs(p.Q * p.sigma) + std::abs(2 * p.A * p.S * p.sigma);
  v.quantities = {{"S(2A+C^2)", s1}, {"Q", p.Q}, {"CSb+(Q-2AS)sigma", s2}, {"S(b+C sigma)", s2_boundary}};

  if (detail::near_zero(p.Q - s1, scale)) {
    v.case_label = "II";
    // On Q = S(2A + C^2), E is affine in v with slope proportional to S(b + C sigma).
    if (detail::near_zero(s2_boundary, scale)) {
      v.finite = v.solvable = Tri::Yes;
      v.optimal_description = "any admissible (Theta, v) is optimal";
      v.value = -p.S * p.sigma * p.sigma;
    } else {
      v.finite = v.solvable = Tri::No;
      v.optimal_description = "not finite: E is affine in v with nonzero slope";
    }
  } else if (s1 < p.Q) {
    v.case_label = "I";
    v.finite = Tri::Yes;
    v.value = h_inf_example1(p);
    if (detail::near_zero(s2, scale)) {
      v.solvable = Tri::Yes;
      v.optimal_description = "(Theta, v_Theta) is optimal for every admissible Theta";
    } else {
      v.solvable = Tri::No;
      v.optimal_description = "finite, infimum h(-inf) approached only as Theta -> -infinity";
    }
  } else {
    v.case_label = "III";
    v.finite = v.solvable = Tri::No;
    v.optimal_description = "not finite: E is a concave quadratic in v";
  }
  return v;
}

struct RegularizedClosedForm {
  double P, Theta, eta, v, value;
};

/// Solution of the problem with R = delta > 0, on the stabilizing ARE branch.
inline RegularizedClosedForm regularized_closed_form_example1(const Example1Params& p, double delta) {
  if (!(delta > 0)) throw Error(Errc::InvalidInput, "example 1: delta must be positive");
  const double abar = p.Q - p.S * (2 * p.A + p.C * p.C);
  const double bbar = (2 * p.A + p.C * p.C) / 2;
  if (abar < 0) throw Error(Errc::InvalidInput, "example 1: closed form needs Q >= S(2A + C^2)");
  RegularizedClosedForm f;
  const double root = std::sqrt(abar / delta + bbar * bbar);
  const double bc = p.b + p.C * p.sigma;
  f.P = -p.S + delta * bbar + std::sqrt(delta * abar + delta * delta * bbar * bbar);
  f.Theta = -bbar - root;
  f.eta = -f.P * bc / (p.A - bbar - root);
  f.v = f.P * bc / (delta * (p.A - bbar - root));
  f.value = f.P * p.sigma * p.sigma + 2 * p.b * f.eta - delta * f.v * f.v;
  return f;
}

template <class T>
struct ABG {
  T alpha, beta, gamma;
};

/// alpha, beta, gamma of the D != 0 family. Templated so that exact
/// arithmetic types can be used.
template <class T>
ABG<T> abg_example2(const T& A, const T& B, const T& C, const T& D, const T& Q, const T& S, const T& R) {
  if (D == T(0)) throw Error(Errc::InvalidInput, "example 2: D must be nonzero");
  const T id2 = T(1) / (D * D);
  const T bcd = B + C * D;
  const T k = T(2) * A + C * C;
  ABG<T> r;
  r.alpha = id2 * bcd * bcd - k;
  r.beta = Q - id2 * k * R - T(2) * id2 * (S - id2 * R * bcd) * bcd;
  const T t = id2 * R * bcd - S;
  r.gamma = id2 * t * t;
  return r;
}

inline ABG<double> abg_example2(const Example2Params& p) {
  return abg_example2<double>(p.A, p.B, p.C, p.D, p.Q, p.S, p.R);
}

/// Admissibility for D != 0: |D^2 Theta + (B + C D)| < sqrt(alpha) |D|.
inline bool admissible_example2(const Example2Params& p, double Theta) {
  const auto g = abg_example2(p);
  return g.alpha > 0 && std::abs(p.D * p.D * Theta + p.B + p.C * p.D) < std::sqrt(g.alpha) * std::abs(p.D);
}

struct ThetaStar {
  double theta;
  bool sign_tie;  // the sign argument vanished and sgn(0) = +1 was used
};

inline ThetaStar theta_star_example2(const Example2Params& p) {
  const auto g = abg_example2(p);
  if (!(g.alpha > 0)) throw Error(Errc::InvalidInput, "example 2: Theta* needs alpha > 0");
  const double id2 = 1.0 / (p.D * p.D);
  const double arg = p.S - id2 * p.R * (p.B + p.C * p.D);
  const bool tie = detail::near_zero(arg, std::abs(p.S) + std::abs(id2 * p.R * (p.B + p.C * p.D)));
  const double sgn = (tie || arg > 0) ? 1.0 : -1.0;
  ThetaStar ts{-id2 * (p.B + p.C * p.D) - std::sqrt(g.alpha) / std::abs(p.D) * sgn, tie};
  const double lhs = std::abs(p.D * p.D * ts.theta + p.B + p.C * p.D);
  const double rhs = std::sqrt(g.alpha) * std::abs(p.D);
  if (!(std::abs(lhs - rhs) <= 1e-10 * (1.0 + rhs)))
    throw Error(Errc::ConsistencyCheck, "example 2: Theta* is not on the admissibility boundary");
  return ts;
}

inline Verdict1D classify_example2(const Example2Params& p) {
  const auto g = abg_example2(p);
  if (!(g.alpha > 0)) throw Error(Errc::InvalidInput, "example 2: needs alpha > 0 (no stabilizer otherwise)");
  Verdict1D v;
  const double margin = g.beta - 2 * std::sqrt(g.alpha * g.gamma);
  const double scale = std::abs(g.beta) + 2 * std::sqrt(g.alpha * g.gamma) + std::abs(p.Q);
  v.quantities = {{"alpha", g.alpha}, {"beta", g.beta}, {"gamma", g.gamma}, {"beta-2sqrt(alpha gamma)", margin}};
  const double id2 = 1.0 / (p.D * p.D);
  const bool gamma_zero = detail::near_zero(g.gamma, scale);
  const bool margin_zero = detail::near_zero(margin, scale);

  if (margin > 0 && !margin_zero) {
    v.case_label = "I";
    v.finite = v.solvable = Tri::Yes;
    v.optimal_description = "Riccati equation has a stabilizing solution with positive R + D^2 P";
    return v;
  }
  if (gamma_zero && detail::near_zero(g.beta, scale)) {
    // B eta0 = D^{-1} R sigma - rho and A eta0 = D^{-2} R (b + C sigma) - q, one unknown.
    const double r1 = p.R * p.sigma / p.D - p.rho, r2 = id2 * p.R * (p.b + p.C * p.sigma) - p.q;
    const double nn = p.B * p.B + p.A * p.A;
    const double eta0 = nn > 0 ? (p.B * r1 + p.A * r2) / nn : 0.0;
    const double defect = std::hypot(p.B * eta0 - r1, p.A * eta0 - r2);
    v.quantities["eta0"] = eta0;
    v.quantities["eta0_defect"] = defect;
    if (defect <= 1e-9 * (1.0 + std::hypot(r1, r2))) {
      v.case_label = "II";
      v.finite = v.solvable = Tri::Yes;
      v.optimal_description = "P = -R/D^2 with a consistent eta0";
      return v;
    }
  }
  if (!gamma_zero && margin_zero) {
    const auto ts = theta_star_example2(p);
    const double Pstar = std::sqrt(g.gamma / g.alpha) - id2 * p.R;
    const double y = p.q + ts.theta * p.rho + (p.b + (p.C + p.D * ts.theta) * p.sigma) * Pstar;
    const double a = p.A + p.B * ts.theta;
    v.quantities["Theta*"] = ts.theta;
    v.quantities["P*"] = Pstar;
    const bool in_range = !detail::near_zero(a, std::abs(p.A) + std::abs(p.B * ts.theta)) ||
                          detail::near_zero(y, std::abs(p.q) + std::abs(p.rho * ts.theta) + std::abs(Pstar));
    if (in_range) {
      v.case_label = "III";
      v.finite = Tri::Yes;
      v.optimal_description = "finite; Theta* lies on the boundary of the admissible set";
      return v;
    }
  }
  v.optimal_description = "no certificate row applies";
  return v;
}

}  // namespace ergolq::analytic1d
