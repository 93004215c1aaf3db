#pragma once

#include <random>

#include "ergolq/ergolq.hpp"

namespace fx {

using ergolq::Matrix;
using ergolq::Vector;

inline Matrix s(double x) { return Matrix::Constant(1, 1, x); }
inline Vector sv(double x) { return Vector::Constant(1, x); }

inline ergolq::LinearSystem scalar_system(double A, double B, double C, double D, double b, double sigma) {
  return {s(A), s(B), {s(C)}, {s(D)}, sv(b), {sv(sigma)}};
}

inline ergolq::CostWeights scalar_weights(double Q, double S, double R, double q = 0.0, double rho = 0.0) {
  return {s(Q), s(S), s(R), sv(q), sv(rho)};
}

inline ergolq::Strategy scalar_strategy(double theta, double v) { return {s(theta), sv(v)}; }

// A=B=C=1, D=0 with Q=-1, S=-1, R=0.
inline ergolq::LinearSystem example1_system(double b = 1.0, double sigma = 1.0) {
  return scalar_system(1, 1, 1, 0, b, sigma);
}
inline ergolq::CostWeights example1_weights(double Q = -1.0) { return scalar_weights(Q, -1, 0); }

// A=B=C=D=1 with Q=R=-1, S=-5/2.
inline ergolq::LinearSystem example2_system(double b = 0.0, double sigma = 0.0) {
  return scalar_system(1, 1, 1, 1, b, sigma);
}
inline ergolq::CostWeights example2_weights() { return scalar_weights(-1, -2.5, -1); }

// A=-1, B=1, C=D=0 with Q=R=1.
inline ergolq::LinearSystem pd_system(double b = 0.0, double sigma = 1.0) { return scalar_system(-1, 1, 0, 0, b, sigma); }
inline ergolq::CostWeights pd_weights() { return scalar_weights(1, 0, 1); }

inline Matrix gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> N(0.0, scale);
  Matrix M(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) M(i, j) = N(rng);
  return M;
}

inline Matrix random_symmetric(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  return ergolq::symmetrize(gaussian(rng, n, n, scale));
}

struct Instance {
  ergolq::LinearSystem sys;
  ergolq::CostWeights w;
  Matrix Theta;  // a stabilizer
};

// Random instance with n <= 4, m <= 3, d <= 2 that admits a stabilizer found by the search.
inline Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dn(1, 4), dm(1, 3), dd(1, 2);
  for (;;) {
    const int n = dn(rng), m = dm(rng), d = dd(rng);
    ergolq::LinearSystem sys;
    sys.A = gaussian(rng, n, n) - 0.5 * Matrix::Identity(n, n);
    sys.B = gaussian(rng, n, m);
    for (int k = 0; k < d; ++k) {
      sys.C.push_back(gaussian(rng, n, n, 0.3));
      sys.D.push_back(gaussian(rng, n, m, 0.2));
      sys.sigma.push_back(gaussian(rng, n, 1));
    }
    sys.b = gaussian(rng, n, 1);
    ergolq::CostWeights w{random_symmetric(rng, n), gaussian(rng, m, n), random_symmetric(rng, m),
                          gaussian(rng, n, 1), gaussian(rng, m, 1)};
    auto Theta = ergolq::find_stabilizer(sys);
    if (!Theta) continue;
    return {sys, w, *Theta};
  }
}

}  // namespace fx
