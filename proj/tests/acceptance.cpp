// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <boost/rational.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"

using namespace ergolq;
using fx::s;
using fx::sv;

namespace {

constexpr double kValueTol1 = 1e-3;
constexpr double kRatioLo = 1.8, kRatioHi = 2.2;
constexpr double kReprTol = 1e-8;
constexpr double kMcRel = 0.02;
constexpr double kPdTol = 1e-10, kPdDeltaTol = 1e-6;
constexpr double kAreTol = 1e-12;
constexpr double kLowerSlack = 1e-6;
constexpr double kAbelRel = 0.05;
constexpr double kCrossTol = 1e-8;

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool in_time = secs < budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("%s [%2d] %s: %s; %.2f s (budget %.1f s)%s\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
              budget_s, in_time ? "" : " OVER BUDGET");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// 1e-8 * 4^10, ..., 1e-8: eleven steps of ratio 1/4 ending exactly at 1e-8.
std::vector<double> schedule_to_1e8() {
  std::vector<double> s;
  for (int j = 10; j >= 0; --j) s.push_back(1e-8 * std::pow(4.0, j));
  return s;
}

bool monotone(const std::vector<double>& xs) {
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] > xs[i - 1]) return false;
  return true;
}

}  // namespace

int main() {
  const auto ex1 = fx::example1_system(1, 1);
  const auto ex1w = fx::example1_weights();
  const auto pd = fx::pd_system(0, 1);
  const auto pdw = fx::pd_weights();

  criterion(1, "Example 1 value by regularization down to delta = 1e-8", 1.0, [&] {
    const auto tr = value_by_regularization(ex1, ex1w, schedule_to_1e8());
    const double target = analytic1d::h_inf_example1({1, 1, 1, 1, -1, -1});
    const double err = std::abs(tr.limit_estimate - target);
    return Outcome{err <= kValueTol1 && tr.entries.back().delta == 1e-8,
                   fmt("value %.12g vs %.12g, |diff| = %.3g", tr.limit_estimate, target, err)};
  });

  criterion(2, "Example 1 gain grows like delta^(-1/2)", 1.0, [&] {
    const auto tr = value_by_regularization(ex1, ex1w, schedule_to_1e8());
    const auto& e = tr.entries;
    bool ok = true;
    std::string ratios;
    for (std::size_t j = e.size() - 3; j < e.size(); ++j) {
      const double r = e[j].Theta_hat.norm() / e[j - 1].Theta_hat.norm();
      ok = ok && r >= kRatioLo && r <= kRatioHi;
      ratios += fmt("%.6f ", r);
    }
    return Outcome{ok, "ratios " + ratios + fmt("in [%.1f, %.1f]", kRatioLo, kRatioHi)};
  });

  criterion(3, "Example 2 doubly negative weights, exact arithmetic", 0.1, [&] {
    using Q = boost::rational<long long>;
    const auto g = analytic1d::abg_example2<Q>(Q(1), Q(1), Q(1), Q(1), Q(-1), Q(-5, 2), Q(-1));
    // sqrt(alpha gamma) = 1/2 exactly here, so the margin is rational.
    const Q root(1, 2);
    const bool exact = g.alpha == Q(1) && g.beta == Q(4) && g.gamma == Q(1, 4) && root * root == g.alpha * g.gamma &&
                       g.beta - 2 * root == Q(3) && g.beta > 0 && g.beta * g.beta > 4 * g.alpha * g.gamma;
    const auto v = analytic1d::classify_example2({1, 1, 1, 1, -1, -2.5, -1});
    const bool row1 = v.case_label == "I" && v.solvable == analytic1d::Tri::Yes;
    return Outcome{exact && row1, "(alpha, beta, gamma) = (" + std::to_string(g.alpha.numerator()) + "/" +
                                      std::to_string(g.alpha.denominator()) + ", " +
                                      std::to_string(g.beta.numerator()) + "/" + std::to_string(g.beta.denominator()) +
                                      ", " + std::to_string(g.gamma.numerator()) + "/" +
                                      std::to_string(g.gamma.denominator()) + "), margin 3, row " + v.case_label};
  });

  criterion(4, "Representation identity on 100 random instances x 5 Pi", 10.0, [&] {
    std::mt19937_64 rng(4);
    double worst = 0;
    int bad = 0;
    for (int i = 0; i < 100; ++i) {
      const auto inst = fx::random_instance(rng);
      const Strategy st{inst.Theta, fx::gaussian(rng, inst.sys.m(), 1)};
      const double E = ergodic_cost(inst.sys, inst.w, st);
      for (int k = 0; k < 5; ++k) {
        const Matrix Pi = fx::random_symmetric(rng, inst.sys.n(), 2.0);
        const double rel = std::abs(cost_representation(inst.sys, inst.w, st, Pi) - E) / (1 + std::abs(E));
        worst = std::max(worst, rel);
        if (rel > kReprTol) ++bad;
      }
    }
    return Outcome{bad == 0, fmt("worst |diff|/(1+|E|) = %.3g, %g of 500 over 1e-8", worst, bad)};
  });

  criterion(5, "Monte Carlo Cesaro estimates match the ergodic cost (defaults)", 180.0, [&] {
    SimConfig cfg;
    cfg.seed = 5;
    const auto opt = solve_positive_definite(pd, pdw);
    struct Case {
      const char* name;
      LinearSystem sys;
      CostWeights w;
      Strategy st;
    };
    const std::vector<Case> cases{{"test system", pd, pdw, opt.strategy()},
                                  {"Ex1 v=0", ex1, ex1w, fx::scalar_strategy(-3, 0)},
                                  {"Ex1 v=-3", ex1, ex1w, fx::scalar_strategy(-3, -3)}};
    bool ok = true;
    std::string detail;
    for (const auto& c : cases) {
      const double E = ergodic_cost(c.sys, c.w, c.st);
      const auto ps = cesaro_cost(c.sys, c.w, c.st, Vector::Zero(c.sys.n()), cfg);
      const double tol = std::max(3 * ps.cesaro_stderr, kMcRel * std::abs(E));
      ok = ok && std::abs(ps.cesaro_mean - E) <= tol;
      if (!detail.empty()) detail += "; ";
      detail += std::string(c.name) + fmt(" %.5f vs %.5f", ps.cesaro_mean, E) + fmt(" (tol %.4f)", tol);
    }
    return Outcome{ok, detail};
  });

  criterion(6, "Positive-definite path, value sqrt(2) - 1", 1.0, [&] {
    const double exact = std::sqrt(2.0) - 1;
    const auto sol = solve_positive_definite(pd, pdw);
    const double e1 = std::abs(sol.value - exact);
    const double e2 = std::abs(ergodic_cost(pd, pdw, sol.strategy()) - exact);
    const auto tr = value_by_regularization(pd, pdw, {1e-6, 1e-7, 1e-8});
    double e3 = 0;
    for (const auto& e : tr.entries) e3 = std::max(e3, std::abs(e.value - exact));
    return Outcome{e1 <= kPdTol && e2 <= kPdTol && e3 <= kPdDeltaTol,
                   fmt("solve %.2g, cost at strategy %.2g, regularized (delta <= 1e-6) %.2g off", e1, e2, e3)};
  });

  criterion(7, "Newton-Kleinman residual <= 1e-12 (1 + |P|), monotone trace", 1.0, [&] {
    struct Run {
      std::string name;
      LinearSystem sys;
      CostWeights w;
    };
    std::vector<Run> runs;
    for (double d : schedule_to_1e8()) {
      auto w = ex1w;
      w.R(0, 0) += d;
      runs.push_back({fmt("Ex1 delta=%.3g", d), ex1, w});
    }
    runs.push_back({"test system", pd, pdw});
    for (double d : {1e-6, 1e-7, 1e-8}) {
      auto w = pdw;
      w.R(0, 0) += d;
      runs.push_back({fmt("test system delta=%.0e", d), pd, w});
    }
    runs.push_back({"Ex2", fx::example2_system(1, 1), fx::example2_weights()});
    int bad = 0;
    double worst = 0;
    std::string fails;
    for (const auto& r : runs) {
      const auto Theta0 = find_stabilizer(r.sys);
      if (!Theta0) return Outcome{false, r.name + ": no stabilizer"};
      const auto sol = newton_kleinman(r.sys, r.w, *Theta0);
      const double ratio = sol.residual / (kAreTol * (1 + sol.P.norm()));
      worst = std::max(worst, ratio);
      if (ratio > 1 || !monotone(sol.residual_trace)) {
        ++bad;
        fails += " " + r.name + fmt(" (residual %.3g, bound %.3g)", sol.residual, kAreTol * (1 + sol.P.norm()));
      }
    }
    return Outcome{bad == 0, std::to_string(runs.size()) + " solves, worst residual/bound = " + fmt("%.3g", worst) +
                                 (bad ? "; failing:" + fails : "")};
  });

  criterion(8, "H2 lower bound holds on 1000 random admissible strategies", 10.0, [&] {
    const auto cert = check_h2(ex1, ex1w, s(1), s(-3));
    if (!succeeded(cert)) return Outcome{false, "certificate at Pi0 = 1 failed"};
    const auto& c = std::get<CertificateH2>(cert);
    if (std::abs(c.eta0(0)) > 1e-12) return Outcome{false, fmt("eta0 = %.3g, expected 0", c.eta0(0))};
    std::mt19937_64 rng(8);
    std::exponential_distribution<double> gap(0.5);
    std::normal_distribution<double> nv(0.0, 3.0);
    double worst = INFINITY;
    int bad = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto st = fx::scalar_strategy(-1.5 - 1e-6 - gap(rng), nv(rng));
      const double E = ergodic_cost(ex1, ex1w, st);
      worst = std::min(worst, E - c.lower_bound);
      if (E < c.lower_bound - kLowerSlack) ++bad;
    }
    return Outcome{bad == 0, fmt("lower bound %.12g, min(E - bound) = %.3g", c.lower_bound, worst)};
  });

  criterion(9, "Abel and Cesaro agree; initial state forgotten", 120.0, [&] {
    const auto st = fx::scalar_strategy(-3, 0);
    const double E = ergodic_cost(ex1, ex1w, st);
    SimConfig cfg;
    cfg.seed = 9;
    cfg.abel_lambda = 1e-3;
    cfg.horizon_T = 20000;  // lambda T >= 20
    const auto long_run = cesaro_cost(ex1, ex1w, st, sv(0), cfg);
    const double gap = std::abs(*long_run.abel_mean - long_run.cesaro_mean);
    const double tol = std::max(3 * *long_run.abel_stderr, kAbelRel * std::abs(E));

    SimConfig a;
    a.seed = 90;
    SimConfig b;
    b.seed = 91;
    const auto from0 = cesaro_cost(ex1, ex1w, st, sv(0), a);
    const auto from10 = cesaro_cost(ex1, ex1w, st, sv(10), b);
    const double dx = std::abs(from0.cesaro_mean - from10.cesaro_mean);
    const double tx = 3 * std::hypot(from0.cesaro_stderr, from10.cesaro_stderr);
    return Outcome{gap <= tol && dx <= tx,
                   fmt("Abel %.5f, Cesaro %.5f, tol %.3f", *long_run.abel_mean, long_run.cesaro_mean, tol) +
                       fmt("; x0=0 %.5f vs x0=10 %.5f", from0.cesaro_mean, from10.cesaro_mean) +
                       fmt(" (tol %.4f)", tx)};
  });

  criterion(10, "Scalar closed forms agree with the generic pipeline", 1.0, [&] {
    const analytic1d::Example1Params p{1, 1, 1, 1, -1, -1};
    const auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    double worst = 0;
    for (double theta : {-2.0, -3.0, -5.0})
      for (double v : {0.0, -3.0}) {
        const auto [m1, m2] = analytic1d::moments_example1(p, theta, v);
        const auto mom = stationary_moments(ex1, fx::scalar_strategy(theta, v));
        worst = std::max({worst, rel(mom.m1(0), m1), rel(mom.M2(0, 0), m2)});
      }
    for (double d : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8}) {
      const auto f = analytic1d::regularized_closed_form_example1(p, d);
      const auto sol = solve_regularized(ex1, ex1w, d);
      worst = std::max({worst, rel(sol.P_hat(0, 0), f.P), rel(sol.Theta_hat(0, 0), f.Theta),
                        rel(sol.eta_hat(0), f.eta), rel(sol.v_hat(0), f.v), rel(sol.value, f.value)});
    }
    return Outcome{worst <= kCrossTol, fmt("worst relative difference %.3g", worst)};
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
