// Keyframe state shared by the factor modules and the smoother.

#ifndef RALO_NAV_STATE_HPP_
#define RALO_NAV_STATE_HPP_

#include "ralo/geom.hpp"

namespace ralo {

// Radar and leg velocity biases are slowly varying additive errors on the
// respective velocity measurements (m/s).
using RadarBias = Vec3;
using LegBias = Vec3;

/// Per-keyframe state. Position, velocity, yaw and the two biases are
/// optimized; roll and pitch are pinned to the IMU attitude and never touched
/// by the optimizer.
struct NavState {
  double timestamp = 0.0;
  Vec3 p = Vec3::Zero();    // m, world
  Vec3 v = Vec3::Zero();    // m/s, world
  double yaw = 0.0;         // rad, optimized
  double roll = 0.0;        // rad, held from attitude provider
  double pitch = 0.0;       // rad, held from attitude provider
  RadarBias bias_radar = Vec3::Zero();  // m/s
  LegBias bias_leg = Vec3::Zero();      // m/s

  YprAngles attitude() const { return YprAngles(roll, pitch, yaw); }
  Rot3 rotation() const { return ypr_compose(attitude()); }
};

}  // namespace ralo

#endif  // RALO_NAV_STATE_HPP_
