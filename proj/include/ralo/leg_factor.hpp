// Preintegrated leg-odometry velocity factor with a slowly varying bias.
// World-frame velocities are summed directly, so the model is exactly linear
// in the bias and the first-order bias correction is exact.

#ifndef RALO_LEG_FACTOR_HPP_
#define RALO_LEG_FACTOR_HPP_

#include <vector>

#include "ralo/geom.hpp"
#include "ralo/nav_state.hpp"
#include "ralo/radar_factor.hpp"  // EmptyWindowError

namespace ralo {

struct LegNoiseParams {
  double sigma_v = 0.05;    // m/s, white velocity noise
  double sigma_bl = 5e-4;   // m/s/sqrt(s), bias random walk
};

struct LegVelocityMeasurement {
  Vec3 v = Vec3::Zero();  // m/s, world frame
  double dt = 0.0;        // s
};

struct PreintegratedLeg {
  Vec3 delta_p = Vec3::Zero();      // m, at lin_bias
  Mat3 d_dp_d_bias = Mat3::Zero();  // s, equals -dt_total * I
  LegBias lin_bias = Vec3::Zero();
  Mat3 cov = Mat3::Zero();          // m^2, sum of (sigma_v dt_k)^2
  double dt_total = 0.0;            // s
};

inline PreintegratedLeg leg_preintegrate(
    const std::vector<LegVelocityMeasurement>& velocities, const LegBias& lin_bias,
    const LegNoiseParams& noise = LegNoiseParams{}) {
  if (velocities.empty()) {
    throw EmptyWindowError("leg_preintegrate: empty measurement window");
  }
  PreintegratedLeg out;
  out.lin_bias = lin_bias;
  double var = 0.0;
  for (const auto& m : velocities) {
    out.delta_p += (m.v - lin_bias) * m.dt;
    out.dt_total += m.dt;
    var += noise.sigma_v * noise.sigma_v * m.dt * m.dt;
  }
  out.d_dp_d_bias = -out.dt_total * Mat3::Identity();
  out.cov = var * Mat3::Identity();
  return out;
}

/// Delta position corrected to a new bias. Exact, not first-order: the model
/// is linear in the bias.
inline Vec3 leg_bias_correct(const PreintegratedLeg& preint, const LegBias& new_bias) {
  return preint.delta_p + preint.d_dp_d_bias * (new_bias - preint.lin_bias);
}

/// r = p_j - p_i - delta_p(b_j). Jacobians: d/dp_i = -I, d/dp_j = I,
/// d/db_j = dt_total * I.
inline Vec3 leg_residual(const NavState& state_i, const NavState& state_j,
                         const PreintegratedLeg& preint) {
  return state_j.p - state_i.p - leg_bias_correct(preint, state_j.bias_leg);
}

}  // namespace ralo

#endif  // RALO_LEG_FACTOR_HPP_
