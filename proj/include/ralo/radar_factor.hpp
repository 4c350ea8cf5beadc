// Preintegration of radar ego-velocities between keyframes and the 4-DoF
// radar velocity factor: residual blocks r_dp / r_v / r_db and the yaw-only
// orientation Jacobian.
//
// Integration model: body-frame ego-velocities are rotated into the body
// frame at keyframe i with per-step attitudes from the IMU provider and
// accumulated,
//
//   delta_p = sum_k R_rel(k) (v_k - b) dt_k,   R_rel(k) = R(att_i)^T R(att_k).
//
// The residual subtracts a constant-velocity term v_i*dt from the state
// displacement. To keep that form consistent with physically integrated
// trajectories, the preintegrated measurement carries the window-initial
// body-frame velocity reference `ref_vel_body` (the boundary scan's
// ego-velocity, a measurement lock), and the prediction used by r_dp is
// [delta_p + J_b db - ref_vel_body*dt]. With a zero reference the textbook
// formulas hold verbatim.

#ifndef RALO_RADAR_FACTOR_HPP_
#define RALO_RADAR_FACTOR_HPP_

#include <stdexcept>
#include <vector>

#include "ralo/geom.hpp"
#include "ralo/nav_state.hpp"
#include "ralo/radar_ego.hpp"

namespace ralo {

struct EmptyWindowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Mat9 = Eigen::Matrix<double, 9, 9>;

struct RadarPreintMeasurement {
  EgoVelEstimate estimate;
  YprAngles attitude;  // IMU roll/pitch + linearization yaw at the scan time
  double dt = 0.0;     // s, time since the previous measurement (or window start)
};

struct PreintegratedRadar {
  Vec3 delta_p = Vec3::Zero();        // m, body frame at keyframe i
  Mat3 d_dp_d_bias = Mat3::Zero();    // s
  Vec3 last_v = Vec3::Zero();         // m/s, world frame, at lin_bias
  Mat3 d_v_d_bias = Mat3::Zero();     // dimensionless
  Vec3 ref_vel_body = Vec3::Zero();   // m/s, u_i for the -v_i*dt term
  RadarBias lin_bias = Vec3::Zero();  // linearization bias
  Mat9 cov = Mat9::Zero();            // residual noise (r_dp, r_v, r_db)
  double dt_total = 0.0;              // s
};

struct RadarResidual {
  Vec3 r_dp = Vec3::Zero();  // m
  Vec3 r_v = Vec3::Zero();   // m/s
  Vec3 r_db = Vec3::Zero();  // m/s
};

/// Jacobian blocks of the stacked residual (r_dp, r_v, r_db) with respect to
/// the optimized coordinates of states i and j. Roll and pitch are not
/// optimized; their blocks are structurally zero and kept explicit so the
/// 4-DoF contract is assertable.
struct RadarJacobian {
  // r_dp row
  Mat3 r_dp_d_p_i = Mat3::Zero();
  Mat3 r_dp_d_v_i = Mat3::Zero();
  Vec3 r_dp_d_yaw_i = Vec3::Zero();
  Mat3 r_dp_d_p_j = Mat3::Zero();
  Mat3 r_dp_d_bias_j = Mat3::Zero();
  // r_v row
  Mat3 r_v_d_v_j = Mat3::Zero();
  Mat3 r_v_d_bias_j = Mat3::Zero();
  // r_db row
  Mat3 r_db_d_bias_i = Mat3::Zero();
  Mat3 r_db_d_bias_j = Mat3::Zero();
  // Structural zeros of the 4-DoF parametrization.
  Vec3 r_dp_d_roll_i = Vec3::Zero();
  Vec3 r_dp_d_pitch_i = Vec3::Zero();
  Vec3 r_dp_d_roll_j = Vec3::Zero();
  Vec3 r_dp_d_pitch_j = Vec3::Zero();
  Vec3 r_dp_d_yaw_j = Vec3::Zero();
  Vec3 r_v_d_yaw_i = Vec3::Zero();
  Vec3 r_v_d_yaw_j = Vec3::Zero();
};

/// Accumulates a window of valid ego-velocity measurements. The first
/// measurement's attitude defines the reference frame (body at keyframe i).
/// `sigma_bias_walk` is the radar bias random-walk density (m/s/sqrt(s)).
inline PreintegratedRadar radar_preintegrate(
    const std::vector<RadarPreintMeasurement>& measurements,
    const RadarBias& lin_bias, const Vec3& ref_vel_body = Vec3::Zero(),
    double sigma_bias_walk = 1e-3) {
  if (measurements.empty()) {
    throw EmptyWindowError("radar_preintegrate: empty measurement window");
  }
  PreintegratedRadar out;
  out.lin_bias = lin_bias;
  out.ref_vel_body = ref_vel_body;

  const Rot3 R_ref = ypr_compose(measurements.front().attitude);
  Mat3 cov_dp = Mat3::Zero();
  for (const auto& m : measurements) {
    const Rot3 R_rel = R_ref.transpose() * ypr_compose(m.attitude);
    out.delta_p += R_rel * (m.estimate.v_hat - lin_bias) * m.dt;
    out.d_dp_d_bias -= R_rel * m.dt;
    cov_dp += R_rel * m.estimate.covariance * R_rel.transpose() * (m.dt * m.dt);
    out.dt_total += m.dt;
  }
  const auto& last = measurements.back();
  const Rot3 R_last = ypr_compose(last.attitude);
  out.last_v = R_last * (last.estimate.v_hat - lin_bias);
  out.d_v_d_bias = -R_last;

  out.cov.block<3, 3>(0, 0) = cov_dp;
  out.cov.block<3, 3>(3, 3) = R_last * last.estimate.covariance * R_last.transpose();
  out.cov.block<3, 3>(6, 6) =
      sigma_bias_walk * sigma_bias_walk * out.dt_total * Mat3::Identity();
  return out;
}

/// Evaluates the 4-DoF radar velocity residual between two keyframe states.
inline RadarResidual radar_residual_4dof(const NavState& state_i,
                                         const NavState& state_j,
                                         const PreintegratedRadar& preint) {
  RadarResidual r;
  const double dt = preint.dt_total;
  const Rot3 R_i = state_i.rotation();
  const Vec3 db = state_j.bias_radar - preint.lin_bias;

  const Vec3 pred_dp =
      preint.delta_p + preint.d_dp_d_bias * db - preint.ref_vel_body * dt;
  r.r_dp = R_i.transpose() * (state_j.p - state_i.p - state_i.v * dt) - pred_dp;
  r.r_v = state_j.v - (preint.last_v + preint.d_v_d_bias * db);
  r.r_db = state_j.bias_radar - state_i.bias_radar;
  return r;
}

/// Analytic Jacobians of radar_residual_4dof. The orientation part follows
/// the yaw-perturbation derivation: the only nonzero angle block is
///   d r_dp / d yaw_i = third column of R(a_i)^T R(b_i)^T [R(g_i)^T u]_x,
/// u = p_j - p_i - v_i dt.
inline RadarJacobian radar_jacobian_4dof(const NavState& state_i,
                                         const NavState& state_j,
                                         const PreintegratedRadar& preint) {
  RadarJacobian J;
  const double dt = preint.dt_total;
  const Rot3 R_i = state_i.rotation();
  const Rot3 Ra = so3_exp(Vec3(state_i.roll, 0, 0));
  const Rot3 Rb = so3_exp(Vec3(0, state_i.pitch, 0));
  const Rot3 Rg = so3_exp(Vec3(0, 0, state_i.yaw));

  const Vec3 u = state_j.p - state_i.p - state_i.v * dt;
  J.r_dp_d_p_i = -R_i.transpose();
  J.r_dp_d_p_j = R_i.transpose();
  J.r_dp_d_v_i = -R_i.transpose() * dt;
  J.r_dp_d_yaw_i =
      (Ra.transpose() * Rb.transpose() * skew(Rg.transpose() * u)).col(2);
  J.r_dp_d_bias_j = -preint.d_dp_d_bias;

  J.r_v_d_v_j = Mat3::Identity();
  J.r_v_d_bias_j = -preint.d_v_d_bias;

  J.r_db_d_bias_i = -Mat3::Identity();
  J.r_db_d_bias_j = Mat3::Identity();
  return J;
}

}  // namespace ralo

#endif  // RALO_RADAR_FACTOR_HPP_
