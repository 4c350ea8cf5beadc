// Shared test helpers: central finite differences and random state sampling.

#ifndef RALO_TESTS_SUPPORT_TEST_UTIL_HPP_
#define RALO_TESTS_SUPPORT_TEST_UTIL_HPP_

#include <functional>
#include <random>

#include <Eigen/Core>

#include "ralo/nav_state.hpp"

namespace ralo::test {

/// Central-difference Jacobian of f: R^n -> R^m around x.
inline Eigen::MatrixXd numeric_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double step = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd hi = x, lo = x;
    hi[i] += step;
    lo[i] -= step;
    J.col(i) = (f(hi) - f(lo)) / (2.0 * step);
  }
  return J;
}

/// |a - b| <= tol * max(1, |b|) elementwise.
inline bool matrices_close(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                           double tol) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) {
      const double scale = std::max(1.0, std::abs(b(r, c)));
      if (std::abs(a(r, c) - b(r, c)) > tol * scale) return false;
    }
  }
  return true;
}

inline Vec3 random_vec3(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Vec3(u(rng), u(rng), u(rng));
}

inline NavState random_state(std::mt19937_64& rng, double t = 0.0) {
  std::uniform_real_distribution<double> ang(-0.4, 0.4);
  NavState s;
  s.timestamp = t;
  s.p = random_vec3(rng, 5.0);
  s.v = random_vec3(rng, 1.5);
  s.yaw = ang(rng) * 4.0;
  s.roll = ang(rng);
  s.pitch = ang(rng);
  s.bias_radar = random_vec3(rng, 0.05);
  s.bias_leg = random_vec3(rng, 0.05);
  return s;
}

}  // namespace ralo::test

#endif  // RALO_TESTS_SUPPORT_TEST_UTIL_HPP_
