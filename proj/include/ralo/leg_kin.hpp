// Forward kinematics for a parametric 3-joint revolute quadruped leg
// (abduction, hip flexion, knee) and the rolling-contact body-velocity
// derivation for round-footed robots.
//
// Chain per leg: body -> hip offset -> Rot(a1,q1) -> lateral link l1 ->
// Rot(a2,q2) -> thigh l2 (down) -> Rot(a3,q3) -> shank l3 (down) -> foot
// sphere center (the contact frame origin). n_C is the vector from the
// ground contact point to the sphere center, foot_radius * world-up.

#ifndef RALO_LEG_KIN_HPP_
#define RALO_LEG_KIN_HPP_

#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ralo/geom.hpp"

namespace ralo {

struct DtTooSmallError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoContactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using JointVec = Eigen::Matrix<double, 12, 1>;

struct LegGeometry {
  Vec3 hip_offset = Vec3::Zero();       // m, body frame
  std::array<Vec3, 3> axes = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitY()};
  std::array<double, 3> lengths = {0.11, 0.35, 0.34};  // m
  double lateral_sign = 1.0;  // +1 left legs, -1 right legs
};

struct LegModel {
  std::array<LegGeometry, 4> legs;  // FL, FR, RL, RR
  double foot_radius = 0.0;         // m, 0 recovers the fixed-contact model
  std::array<double, 3> joint_lower = {-0.8, -2.0, -2.6};
  std::array<double, 3> joint_upper = {0.8, 2.0, 2.6};

  // Desk-scale defaults; geometry placeholders for the synthetic suite.
  static LegModel spot_like(double foot_radius = 0.03) {
    LegModel m;
    m.foot_radius = foot_radius;
    const double x = 0.29, y = 0.11;
    m.legs[0].hip_offset = Vec3(x, y, 0);
    m.legs[1].hip_offset = Vec3(x, -y, 0);
    m.legs[2].hip_offset = Vec3(-x, y, 0);
    m.legs[3].hip_offset = Vec3(-x, -y, 0);
    for (int i = 0; i < 4; ++i) {
      m.legs[i].lateral_sign = (i % 2 == 0) ? 1.0 : -1.0;
    }
    return m;
  }

  bool within_limits(const Vec3& q) const {
    for (int k = 0; k < 3; ++k) {
      if (q[k] < joint_lower[k] || q[k] > joint_upper[k]) return false;
    }
    return true;
  }
};

struct JointState {
  double timestamp = 0.0;
  JointVec angles = JointVec::Zero();      // rad, 3 per leg
  JointVec velocities = JointVec::Zero();  // rad/s

  Vec3 leg_angles(int leg) const { return angles.segment<3>(3 * leg); }
  Vec3 leg_velocities(int leg) const { return velocities.segment<3>(3 * leg); }
};

struct ContactState {
  double timestamp = 0.0;
  std::array<bool, 4> in_contact = {false, false, false, false};
};

/// Everything the velocity formulas need at one joint configuration.
struct LegKinematics {
  Rot3 R_BC = Mat3::Identity();     // contact frame orientation in body
  Vec3 p_C = Vec3::Zero();          // foot center in body frame
  Mat3 axes_body = Mat3::Zero();    // joint axes in body frame (columns)
  Mat3 J_pos = Mat3::Zero();        // d p_C / d q
};

inline std::array<Vec3, 3> link_vectors(const LegGeometry& g) {
  return {g.lengths[0] * Vec3(0, g.lateral_sign, 0),
          g.lengths[1] * Vec3(0, 0, -1.0), g.lengths[2] * Vec3(0, 0, -1.0)};
}

inline LegKinematics leg_kinematics(int leg, const Vec3& q, const LegModel& model) {
  const LegGeometry& g = model.legs[leg];
  const auto links = link_vectors(g);
  const Rot3 R1 = axis_rotation(g.axes[0], q[0]);
  const Rot3 R2 = axis_rotation(g.axes[1], q[1]);
  const Rot3 R3 = axis_rotation(g.axes[2], q[2]);

  LegKinematics out;
  out.R_BC = R1 * R2 * R3;
  const Vec3 o1 = g.hip_offset;
  const Vec3 o2 = o1 + R1 * links[0];
  const Vec3 o3 = o2 + R1 * R2 * links[1];
  out.p_C = o3 + out.R_BC * links[2];

  out.axes_body.col(0) = g.axes[0];
  out.axes_body.col(1) = R1 * g.axes[1];
  out.axes_body.col(2) = R1 * R2 * g.axes[2];
  out.J_pos.col(0) = out.axes_body.col(0).cross(out.p_C - o1);
  out.J_pos.col(1) = out.axes_body.col(1).cross(out.p_C - o2);
  out.J_pos.col(2) = out.axes_body.col(2).cross(out.p_C - o3);
  return out;
}

/// R_BC = f_R(q): orientation of the contact frame in the body frame.
inline Rot3 fk_rot(int leg, const Vec3& q, const LegModel& model) {
  return leg_kinematics(leg, q, model).R_BC;
}

/// p_C = f_p(q): foot center position in the body frame.
inline Vec3 fk_pos(int leg, const Vec3& q, const LegModel& model) {
  return leg_kinematics(leg, q, model).p_C;
}

/// Differential kinematics: angular velocity of the contact frame relative to
/// the body expressed in the contact frame, and the linear velocity of the
/// foot center in the body frame.
inline std::pair<Vec3, Vec3> fk_jacobians(int leg, const Vec3& q, const Vec3& qdot,
                                          const LegModel& model) {
  const LegKinematics kin = leg_kinematics(leg, q, model);
  const Vec3 omega_bc = kin.R_BC.transpose() * (kin.axes_body * qdot);
  const Vec3 v_bc = kin.J_pos * qdot;
  return {omega_bc, v_bc};
}

/// omega_WC(t) = Log(R_WC(t-1)^T R_WC(t)) / dt, expressed in the contact frame.
inline Vec3 contact_angular_velocity(const Rot3& prev, const Rot3& cur, double dt) {
  if (dt < 1e-6) throw DtTooSmallError("contact_angular_velocity: dt < 1e-6 s");
  return so3_log(prev.transpose() * cur) / dt;
}

/// 6-DoF body velocity from one stance foot under the rolling-contact model.
/// `omega_wc` is the contact-frame angular velocity from
/// contact_angular_velocity. Returns (omega_WB in body frame, v_WB in world).
/// The rolling term is the sphere-center velocity omega_WC x n_C.
inline std::pair<Vec3, Vec3> body_velocity_rolling(
    const Rot3& R_WB, int leg, const JointState& joints, const ContactState& contact,
    const Vec3& omega_wc, const LegModel& model, const Vec3& up_world = Vec3::UnitZ()) {
  if (!contact.in_contact[leg]) {
    throw NoContactError("body_velocity_rolling: foot not in contact");
  }
  const Vec3 q = joints.leg_angles(leg);
  const Vec3 qdot = joints.leg_velocities(leg);
  const LegKinematics kin = leg_kinematics(leg, q, model);

  const Vec3 omega_bc = kin.R_BC.transpose() * (kin.axes_body * qdot);
  const Vec3 omega_wb = kin.R_BC * (omega_wc - omega_bc);

  const Rot3 R_WC = R_WB * kin.R_BC;
  const Vec3 n_c = model.foot_radius * up_world.normalized();
  const Vec3 v_wb = -R_WB * skew(omega_wb) * kin.p_C -
                    R_WB * (kin.J_pos * qdot) + skew(R_WC * omega_wc) * n_c;
  return {omega_wb, v_wb};
}

struct FootVelocity {
  Vec3 v = Vec3::Zero();       // m/s, world
  Mat3 cov = Mat3::Identity();
  bool valid = false;
};

struct FusedVelocity {
  Vec3 v = Vec3::Zero();
  Mat3 cov = Mat3::Zero();
};

/// Inverse-variance-weighted mean of the valid per-foot velocities, with the
/// inter-foot sample spread added to the diagonal. Empty when no foot is in
/// contact (the measurement is skipped).
inline std::optional<FusedVelocity> fuse_leg_velocity(
    const std::array<FootVelocity, 4>& feet) {
  Mat3 info = Mat3::Zero();
  Vec3 weighted = Vec3::Zero();
  int n = 0;
  for (const auto& f : feet) {
    if (!f.valid) continue;
    const Mat3 w = f.cov.inverse();
    info += w;
    weighted += w * f.v;
    ++n;
  }
  if (n == 0) return std::nullopt;

  FusedVelocity out;
  out.cov = info.inverse();
  out.v = out.cov * weighted;
  if (n > 1) {
    Vec3 spread = Vec3::Zero();
    for (const auto& f : feet) {
      if (f.valid) spread += (f.v - out.v).cwiseAbs2();
    }
    out.cov += (spread / n).asDiagonal();
  }
  return out;
}

/// Per-foot contact-frame history; populated only while the foot stays in
/// contact and reset on every touchdown.
struct ContactFrameTrack {
  Rot3 prev_R_WC = Mat3::Identity();
  double prev_time = 0.0;
  bool active = false;
};

/// Consumes joint/contact samples at native rate and produces per-foot world
/// velocities. Owns the per-foot orientation tracks.
class LegOdometer {
 public:
  explicit LegOdometer(LegModel model, double sigma_v = 0.05)
      : model_(std::move(model)), sigma_v_(sigma_v) {}

  const LegModel& model() const { return model_; }

  std::array<FootVelocity, 4> process(const JointState& joints,
                                      const ContactState& contact, const Rot3& R_WB,
                                      const Vec3& up_world = Vec3::UnitZ()) {
    std::array<FootVelocity, 4> out;
    for (int leg = 0; leg < 4; ++leg) {
      auto& track = tracks_[leg];
      if (!contact.in_contact[leg]) {
        track.active = false;
        continue;
      }
      const Rot3 R_WC = R_WB * fk_rot(leg, joints.leg_angles(leg), model_);
      if (track.active) {
        const double dt = joints.timestamp - track.prev_time;
        if (dt >= 1e-6) {
          const Vec3 omega_wc = contact_angular_velocity(track.prev_R_WC, R_WC, dt);
          const auto [omega_wb, v_wb] = body_velocity_rolling(
              R_WB, leg, joints, contact, omega_wc, model_, up_world);
          out[leg].v = v_wb;
          out[leg].cov = sigma_v_ * sigma_v_ * Mat3::Identity();
          out[leg].valid = true;
        }
      }
      track.prev_R_WC = R_WC;
      track.prev_time = joints.timestamp;
      track.active = true;
    }
    return out;
  }

  void reset() {
    for (auto& t : tracks_) t.active = false;
  }

 private:
  LegModel model_;
  double sigma_v_;
  std::array<ContactFrameTrack, 4> tracks_;
};

/// Newton inverse kinematics for the foot center in the body frame. Returns
/// nullopt when no in-limits solution is found.
inline std::optional<Vec3> ik_solve(int leg, const Vec3& target_body,
                                    const LegModel& model,
                                    const Vec3& q_init = Vec3(0.0, 0.6, -1.2)) {
  Vec3 q = q_init;
  for (int it = 0; it < 50; ++it) {
    const LegKinematics kin = leg_kinematics(leg, q, model);
    const Vec3 err = target_body - kin.p_C;
    if (err.norm() < 1e-13) {
      return model.within_limits(q) ? std::optional<Vec3>(q) : std::nullopt;
    }
    const Eigen::FullPivLU<Mat3> lu(kin.J_pos);
    if (lu.rank() < 3) {
      // Singular configuration, nudge and retry.
      q += Vec3(1e-3, -1e-3, 1e-3);
      continue;
    }
    Vec3 step = lu.solve(err);
    if (step.norm() > 0.5) step *= 0.5 / step.norm();
    q += step;
  }
  return std::nullopt;
}

}  // namespace ralo

#endif  // RALO_LEG_KIN_HPP_
