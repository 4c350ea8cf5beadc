// Minimal SO(3) / rotation kernel shared by all modules: skew operators,
// exponential and logarithm maps, and the yaw-pitch-roll factored rotation
// used by the 4-DoF parametrization.

#ifndef RALO_GEOM_HPP_
#define RALO_GEOM_HPP_

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <stdexcept>

namespace ralo {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Rot3 = Eigen::Matrix3d;

struct GimbalLockError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * M_PI);
  if (r <= -M_PI) r += 2.0 * M_PI;
  return r;
}

/// Roll/pitch/yaw triple, normalized to (-pi, pi] on construction.
struct YprAngles {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  YprAngles() = default;
  YprAngles(double roll_, double pitch_, double yaw_)
      : roll(wrap_angle(roll_)), pitch(wrap_angle(pitch_)), yaw(wrap_angle(yaw_)) {}
};

/// skew(v) * w == v x w.
inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return s;
}

/// Rodrigues exponential map so(3) -> SO(3). Angles below 1e-8 rad use the
/// second-order series I + w^ + w^2/2.
inline Rot3 so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = skew(omega);
  if (theta < 1e-8) {
    return Mat3::Identity() + w + 0.5 * w * w;
  }
  const double s = std::sin(theta) / theta;
  const double c = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + s * w + c * w * w;
}

/// Logarithm map SO(3) -> so(3), ||result|| <= pi. Near-pi rotations take the
/// trace-stable branch; `degraded` (optional) is set when trace is close to -1
/// and the axis is recovered from the diagonal with reduced precision.
inline Vec3 so3_log(const Rot3& R, bool* degraded = nullptr) {
  if (degraded) *degraded = false;
  const double tr = R.trace();
  const Vec3 w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));

  if (tr >= 3.0 - 1e-10) {
    // Identity neighbourhood: log(R) ~ 0.5 * vee(R - R^T).
    return 0.5 * w;
  }
  if (tr <= -1.0 + 1e-8) {
    // Angle ~ pi: vee(R - R^T) vanishes, use diagonal to recover the axis.
    if (degraded) *degraded = true;
    Vec3 axis;
    const Vec3 d = R.diagonal();
    int k;
    d.maxCoeff(&k);
    axis[k] = std::sqrt(std::max(0.0, (d[k] + 1.0) / 2.0));
    const int i = (k + 1) % 3, j = (k + 2) % 3;
    axis[i] = (R(k, i) + R(i, k)) / (4.0 * axis[k]);
    axis[j] = (R(k, j) + R(j, k)) / (4.0 * axis[k]);
    axis.normalize();
    const double theta = M_PI - std::asin(std::clamp(0.5 * w.norm(), -1.0, 1.0));
    // Fix the axis sign from the off-diagonal antisymmetric part when usable.
    if (w.dot(axis) < 0.0) axis = -axis;
    return theta * axis;
  }
  const double theta = std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
  return (0.5 * theta / std::sin(theta)) * w;
}

/// R = Exp([0,0,yaw]^) Exp([0,pitch,0]^) Exp([roll,0,0]^).
inline Rot3 ypr_compose(const YprAngles& a) {
  return so3_exp(Vec3(0, 0, a.yaw)) * so3_exp(Vec3(0, a.pitch, 0)) *
         so3_exp(Vec3(a.roll, 0, 0));
}

/// Inverse of ypr_compose. Throws GimbalLockError within 1e-6 of pitch = +-pi/2.
inline YprAngles ypr_decompose(const Rot3& R) {
  const double sp = -R(2, 0);
  if (std::abs(sp) > std::cos(1e-6)) {
    throw GimbalLockError("ypr_decompose: pitch within 1e-6 of +-pi/2");
  }
  const double pitch = std::asin(std::clamp(sp, -1.0, 1.0));
  const double roll = std::atan2(R(2, 1), R(2, 2));
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  return YprAngles(roll, pitch, yaw);
}

/// Single-axis rotation by angle about a unit axis.
inline Rot3 axis_rotation(const Vec3& axis, double angle) {
  return so3_exp(axis * angle);
}

inline bool is_rotation(const Rot3& R, double tol = 1e-9) {
  return (R.transpose() * R - Mat3::Identity()).norm() < tol &&
         std::abs(R.determinant() - 1.0) < tol;
}

}  // namespace ralo

#endif  // RALO_GEOM_HPP_
