#include <gtest/gtest.h>

#include <boost/rational.hpp>
#include <cmath>

#include "fixtures.hpp"

using namespace ergolq;
using namespace ergolq::analytic1d;
using fx::s;

namespace {

Example1Params ex1(double b = 1, double sigma = 1, double Q = -1) { return {1, 1, b, sigma, Q, -1}; }

Example2Params ex2() { return {1, 1, 1, 1, -1, -2.5, -1}; }

// Vertex of v -> E(Theta, v) from three evaluations of the generic cost.
double parabola_vertex(const LinearSystem& sys, const CostWeights& w, double theta) {
  const double h = 0.5;
  const double e0 = ergodic_cost(sys, w, fx::scalar_strategy(theta, -h));
  const double e1 = ergodic_cost(sys, w, fx::scalar_strategy(theta, 0));
  const double e2 = ergodic_cost(sys, w, fx::scalar_strategy(theta, h));
  return -h * (e2 - e0) / (2 * (e2 - 2 * e1 + e0));
}

}  // namespace

TEST(Example1, MomentsMatchFormulaValues) {
  const auto [m1, m2] = moments_example1(ex1(), -3, 0);
  EXPECT_DOUBLE_EQ(m1, 0.5);
  EXPECT_NEAR(m2, 1.0, 1e-15);
  const auto [c1, c2] = moments_example1(ex1(2, 1.5), -4, -2);
  EXPECT_EQ(c1, 0.0);
  EXPECT_NEAR(c2, -2.25 / (2 * (1 - 4) + 1), 1e-15);
  EXPECT_THROW(moments_example1(ex1(), -1.5, 0), Error);
}

TEST(Example1, MomentsAgreeWithStationarySolver) {
  for (double b : {1.0, -0.7, 0.0})
    for (double sigma : {1.0, 0.4})
      for (double theta : {-2.0, -3.0, -5.0})
        for (double v : {0.0, -3.0, 1.25}) {
          const auto [m1, m2] = moments_example1(ex1(b, sigma), theta, v);
          const auto mom = stationary_moments(fx::example1_system(b, sigma), fx::scalar_strategy(theta, v));
          EXPECT_NEAR(mom.m1(0), m1, 1e-12 * (1 + std::abs(m1)));
          EXPECT_NEAR(mom.M2(0, 0), m2, 1e-12 * (1 + std::abs(m2)));
        }
}

TEST(Example1, VMinimizerExamples) {
  EXPECT_NEAR(v_minimizer_example1(ex1(), -3), -3.0, 1e-14);
  EXPECT_NEAR(v_minimizer_example1(ex1(), -2), -2.0, 1e-14);
  EXPECT_NEAR(v_minimizer_example1(ex1(0, 0), -2.5), 0.0, 1e-15);
  EXPECT_NEAR(cost_example1(ex1(), -3, -3), -1.0, 1e-13);
  EXPECT_NEAR(cost_example1(ex1(), -2, -2), -1.0, 1e-13);
  // The printed expression is b + v*; using it as the control misses the minimum.
  const double printed = v_minimizer_example1(ex1(), -3, true);
  EXPECT_NEAR(printed, -2.0, 1e-14);
  EXPECT_NEAR(cost_example1(ex1(), -3, printed), -1.0 / 3, 1e-13);
  EXPECT_THROW(v_minimizer_example1(ex1(1, 1, -3), -3), Error);
}

TEST(Example1, VMinimizerIsTheVertexOfTheGenericCost) {
  for (double b : {1.0, 0.3, -2.0})
    for (double sigma : {1.0, -0.5})
      for (double Q : {-1.0, 0.5})
        for (double theta : {-1.75, -3.0, -6.0}) {
          const auto p = ex1(b, sigma, Q);
          const double vertex = parabola_vertex(fx::example1_system(b, sigma), fx::example1_weights(Q), theta);
          EXPECT_NEAR(v_minimizer_example1(p, theta), vertex, 1e-8 * (1 + std::abs(vertex)));
          EXPECT_NEAR(h_example1(p, theta), cost_example1(p, theta, vertex), 1e-8);
        }
}

TEST(Example1, HInfinity) {
  EXPECT_NEAR(h_inf_example1(ex1()), -1.0, 1e-15);
  EXPECT_NEAR(h_inf_example1(ex1(0, 0)), 0.0, 1e-15);
  EXPECT_NEAR(h_inf_example1({0.5, 0.0, 2.0, 1.0, 3.0, 1.0}), -4.0 / 2 - 1.0, 1e-15);
}

TEST(Example1, HIsConstantWhenSolvable) {
  const auto p = ex1();
  for (double theta = -1.51; theta > -50; theta *= 1.3) EXPECT_NEAR(h_example1(p, theta), -1.0, 1e-10) << theta;
}

TEST(Example1, HDecreasesToHInfinityOtherwise) {
  const auto p = ex1(0.4, 1.3);
  double prev = h_example1(p, -1.6);
  for (double theta = -2.0; theta > -1e5; theta *= 2) {
    const double h = h_example1(p, theta);
    EXPECT_LT(h, prev);
    EXPECT_GT(h, h_inf_example1(p));
    prev = h;
  }
  EXPECT_NEAR(h_example1(p, -1e7), h_inf_example1(p), 1e-5);
}

TEST(Example1, TableCases) {
  auto v = classify_example1(ex1());
  EXPECT_EQ(v.case_label, "I");
  EXPECT_EQ(v.finite, Tri::Yes);
  EXPECT_EQ(v.solvable, Tri::Yes);
  EXPECT_NEAR(*v.value, -1.0, 1e-15);

  v = classify_example1(ex1(0.4, 1.3));
  EXPECT_EQ(v.case_label, "I");
  EXPECT_EQ(v.finite, Tri::Yes);
  EXPECT_EQ(v.solvable, Tri::No);
  EXPECT_NEAR(*v.value, h_inf_example1(ex1(0.4, 1.3)), 1e-15);

  v = classify_example1(ex1(1, 1, -3));
  EXPECT_EQ(v.case_label, "II");
  EXPECT_EQ(v.finite, Tri::No);
  EXPECT_EQ(v.solvable, Tri::No);
  EXPECT_FALSE(v.value);

  v = classify_example1(ex1(-1, 1, -3));
  EXPECT_EQ(v.case_label, "II");
  EXPECT_EQ(v.solvable, Tri::Yes);
  EXPECT_NEAR(*v.value, 1.0, 1e-15);

  v = classify_example1(ex1(1, 1, -4));
  EXPECT_EQ(v.case_label, "III");
  EXPECT_EQ(v.finite, Tri::No);
}

TEST(Example1, BoundaryCaseWithoutNoiseCouplingUsesDriftShift) {
  // C = 0 and Q = 2AS: finiteness hinges on S b alone.
  Example1Params p{1, 0, 1, 1, -2, -1};
  EXPECT_EQ(classify_example1(p).finite, Tri::No);
  const double e0 = cost_example1(p, -2, 0), e1 = cost_example1(p, -2, -10);
  EXPECT_NE(e0, e1);
  p.b = 0;
  const auto v = classify_example1(p);
  EXPECT_EQ(v.solvable, Tri::Yes);
  EXPECT_NEAR(cost_example1(p, -2, 0), *v.value, 1e-14);
  EXPECT_NEAR(cost_example1(p, -7, 3), *v.value, 1e-14);
}

TEST(Example1, RegularizedClosedFormMatchesSolver) {
  for (double b : {1.0, 0.3})
    for (double delta = 1e-2; delta >= 1e-8 * 0.99; delta /= 10) {
      const auto f = regularized_closed_form_example1(ex1(b, 1), delta);
      const auto sol = solve_regularized(fx::example1_system(b, 1), fx::example1_weights(), delta);
      const auto rel = [](double x) { return 1e-8 * (1 + std::abs(x)); };
      EXPECT_NEAR(sol.P_hat(0, 0), f.P, rel(f.P));
      EXPECT_NEAR(sol.Theta_hat(0, 0), f.Theta, rel(f.Theta));
      EXPECT_NEAR(sol.eta_hat(0), f.eta, rel(f.eta));
      EXPECT_NEAR(sol.v_hat(0), f.v, rel(f.v));
      EXPECT_NEAR(sol.value, f.value, rel(f.value));
    }
}

TEST(Example1, RegularizedClosedFormLimits) {
  EXPECT_NEAR(regularized_closed_form_example1(ex1(0.4, 1.3), 1e-12).value, h_inf_example1(ex1(0.4, 1.3)), 1e-5);
  const auto p = ex1(-1, 1, -3);
  for (double delta : {1e-1, 1e-4, 1e-8}) {
    const auto f = regularized_closed_form_example1(p, delta);
    EXPECT_NEAR(f.Theta, -3.0, 1e-15);
    EXPECT_EQ(f.v, 0.0);
  }
  EXPECT_THROW(regularized_closed_form_example1(ex1(1, 1, -4), 1e-3), Error);
  EXPECT_THROW(regularized_closed_form_example1(ex1(), 0), Error);
}

TEST(Example2, AlphaBetaGamma) {
  auto g = abg_example2(ex2());
  EXPECT_DOUBLE_EQ(g.alpha, 1.0);
  EXPECT_DOUBLE_EQ(g.beta, 4.0);
  EXPECT_DOUBLE_EQ(g.gamma, 0.25);
  EXPECT_DOUBLE_EQ(g.beta - 2 * std::sqrt(g.alpha * g.gamma), 3.0);

  auto p = ex2();
  p.S = p.R * (p.B + p.C * p.D) / (p.D * p.D);
  EXPECT_EQ(abg_example2(p).gamma, 0.0);

  p = ex2();
  p.R = p.S = 0;
  g = abg_example2(p);
  EXPECT_EQ(g.beta, p.Q);
  EXPECT_EQ(g.gamma, 0.0);
  EXPECT_DOUBLE_EQ(g.alpha, 1.0);

  p.D = 0;
  EXPECT_THROW(abg_example2(p), Error);
}

TEST(Example2, ExactRationalArithmetic) {
  using Q = boost::rational<long long>;
  const auto g = abg_example2<Q>(Q(1), Q(1), Q(1), Q(1), Q(-1), Q(-5, 2), Q(-1));
  EXPECT_EQ(g.alpha, Q(1));
  EXPECT_EQ(g.beta, Q(4));
  EXPECT_EQ(g.gamma, Q(1, 4));
  EXPECT_TRUE(g.beta > 0 && g.beta * g.beta > 4 * g.alpha * g.gamma);
}

TEST(Example2, ThetaStar) {
  const auto ts = theta_star_example2(ex2());
  EXPECT_DOUBLE_EQ(ts.theta, -1.0);
  EXPECT_FALSE(ts.sign_tie);
  EXPECT_FALSE(is_stabilizer(fx::example2_system(), s(ts.theta)));
  EXPECT_NEAR(f_of_theta(fx::example2_system(), s(ts.theta))(0, 0), 0.0, 1e-15);

  auto p = ex2();
  p.S = p.R * (p.B + p.C * p.D);
  EXPECT_TRUE(theta_star_example2(p).sign_tie);

  p = ex2();
  p.A = 5;
  EXPECT_THROW(theta_star_example2(p), Error);
}

TEST(Example2, AdmissibilityMatchesStabilizerTest) {
  for (const auto& p : {ex2(), Example2Params{0.3, -0.5, 0.8, 2.0, 0, 0, 0}, Example2Params{-1, 2, 0.1, -0.7, 0, 0, 0}}) {
    const auto sys = fx::scalar_system(p.A, p.B, p.C, p.D, 0, 0);
    for (double theta = -8.0; theta <= 8.0; theta += 0.03125) {
      const double margin = std::abs(std::abs(p.D * p.D * theta + p.B + p.C * p.D) -
                                     std::sqrt(abg_example2(p).alpha) * std::abs(p.D));
      if (margin < 1e-6) continue;
      EXPECT_EQ(is_stabilizer(sys, s(theta)), admissible_example2(p, theta)) << theta;
    }
  }
}

TEST(Example2, TableRows) {
  auto v = classify_example2(ex2());
  EXPECT_EQ(v.case_label, "I");
  EXPECT_EQ(v.solvable, Tri::Yes);
  EXPECT_NEAR(v.quantities.at("beta-2sqrt(alpha gamma)"), 3.0, 1e-15);

  Example2Params row2{-1, 1, 0, 1, 0, 0, 0};
  v = classify_example2(row2);
  EXPECT_EQ(v.case_label, "II");
  EXPECT_EQ(v.solvable, Tri::Yes);
  row2.b = 1;
  row2.R = 0;
  row2.q = 1;  // A eta0 = -q with B eta0 = -rho = 0 is inconsistent
  EXPECT_EQ(classify_example2(row2).case_label, "");

  auto p = ex2();
  p.Q = -4.5;  // beta = 1/2 < 2 sqrt(alpha gamma) = 1
  v = classify_example2(p);
  EXPECT_EQ(v.case_label, "");
  EXPECT_EQ(v.finite, Tri::Unknown);
  EXPECT_EQ(v.solvable, Tri::Unknown);

  p.Q = -4;  // beta = 1 = 2 sqrt(alpha gamma), Theta* = -1 and A + B Theta* = 0
  v = classify_example2(p);
  EXPECT_EQ(v.case_label, "III");
  EXPECT_EQ(v.finite, Tri::Yes);
  EXPECT_EQ(v.solvable, Tri::Unknown);
  p.b = 1;  // the range condition now needs b P* = 0
  EXPECT_EQ(classify_example2(p).case_label, "");
  p.A = 0.5;  // A + B Theta* != 0 once alpha moves; rebalance Q onto the boundary
  const auto g = abg_example2(p);
  p.Q += 2 * std::sqrt(g.alpha * g.gamma) - g.beta;
  EXPECT_EQ(classify_example2(p).case_label, "III");

  p = ex2();
  p.A = 5;
  EXPECT_THROW(classify_example2(p), Error);
}

TEST(Example2, RowOneAgreesWithGenericPipeline) {
  const auto sys = fx::example2_system(1, 1);
  const auto w = fx::example2_weights();
  const auto rep = classify(sys, w);
  EXPECT_EQ(rep.verdict, Verdict::SolvableWithStrategy);
  const auto g = abg_example2(ex2());
  const double Pstar = std::sqrt(g.gamma / g.alpha) - ex2().R / (ex2().D * ex2().D);
  ASSERT_TRUE(rep.h3);
  // P* maximizes the scalar Riccati residual; the certificate sits on a root of it.
  EXPECT_NEAR(q_hat(sys, w, s(Pstar))(0, 0), 3.0, 1e-12);
  EXPECT_NEAR(q_hat(sys, w, rep.h3->Pi0)(0, 0), 0.0, 1e-9);
  EXPECT_GT(rep.h3->Pi0(0, 0), Pstar);
}

TEST(Recognizers, PickTheRightFamily) {
  EXPECT_TRUE(as_example1(fx::example1_system(), fx::example1_weights()));
  EXPECT_FALSE(as_example1(fx::example2_system(), fx::example2_weights()));
  EXPECT_TRUE(as_example2(fx::example2_system(), fx::example2_weights()));
  EXPECT_FALSE(as_example2(fx::example1_system(), fx::example1_weights()));
  const auto p = *as_example2(fx::example2_system(0.5, 2), fx::scalar_weights(-1, -2.5, -1, 3, 4));
  EXPECT_EQ(p.b, 0.5);
  EXPECT_EQ(p.sigma, 2.0);
  EXPECT_EQ(p.q, 3.0);
  EXPECT_EQ(p.rho, 4.0);
}
