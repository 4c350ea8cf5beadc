// Synthetic sensor-log generation: the test oracle for the whole pipeline.
//
// The world model is discrete-first so that noiseless logs are exactly
// consistent with every measurement model the estimator uses:
//  - ground-truth velocity is piecewise constant per radar-scan interval and
//    positions are the cumulative sums of those steps;
//  - attitude knots live on the joint-sample grid (the IMU stream is emitted
//    on that grid) with gyro increments that reproduce the knots exactly;
//  - radar dopplers are sampled from a static landmark field with
//    doppler = -d^T v_body, plus configured noise, outliers and
//    elevation corruption;
//  - joint data is constructed so the rolling-contact velocity recovery of
//    the leg pipeline reproduces the target velocity: stance feet evolve by
//    the no-slip update and the emitted joint rates solve the velocity
//    identity in least squares.
//
// Shapes with purely sagittal leg motion ("line", "stair", "out_back") are
// exact to floating-point noise; turning shapes ("curve", "loop",
// "strafe_loop") carry a small kinematic discretization residual, well below
// the configured noise levels.

#ifndef RALO_SYNTH_HPP_
#define RALO_SYNTH_HPP_

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "ralo/config.hpp"
#include "ralo/io.hpp"
#include "ralo/leg_kin.hpp"

namespace ralo {

struct InfeasibleIkError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SynthScenario {
  std::string shape = "line";  // line | stair | out_back | strafe_loop | curve | loop
  double duration = 20.0;      // s
  double speed = 0.8;          // m/s
  double speed_wobble = 0.15;  // fractional sinusoidal speed modulation
  double turn_rate = 0.15;     // rad/s (curve)

  // Terrain (stairs along the path arc length).
  double stair_start = 5.0;   // m
  double stair_riser = 0.15;  // m
  double stair_tread = 0.3;   // m
  int stair_count = 0;

  // Sensor noise.
  double sigma_doppler = 0.0;  // m/s
  double sigma_leg = 0.0;      // m/s, white noise on the leg velocity channel

  // Radar corruption.
  double outlier_fraction = 0.0;      // uniform doppler outliers
  double elev_corrupt_fraction = 0.0; // elevation-corrupted points
  double dynamic_start = -1.0;        // s, coherent moving-cluster segment
  double dynamic_end = -1.0;
  double dynamic_fraction = 0.6;

  // Leg corruption.
  double leg_velocity_scale = 1.0;

  // World / robot.
  int landmarks = 500;
  double landmark_box = 30.0;  // m
  int min_scan_points = 50;
  int max_scan_points = 200;
  double foot_radius = 0.0;   // 0 = fixed-contact data
  double body_height = 0.48;  // m above local ground
  double attitude_wobble = 0.0;  // rad, roll/pitch realism on turning shapes

  unsigned seed = 1;

  static SynthScenario from_config(const Config& cfg) {
    SynthScenario s;
    s.shape = cfg.get_string("shape", s.shape);
    s.duration = cfg.get_double("duration", s.duration);
    s.speed = cfg.get_double("speed", s.speed);
    s.speed_wobble = cfg.get_double("speed_wobble", s.speed_wobble);
    s.turn_rate = cfg.get_double("turn_rate", s.turn_rate);
    s.stair_start = cfg.get_double("stair_start", s.stair_start);
    s.stair_riser = cfg.get_double("stair_riser", s.stair_riser);
    s.stair_tread = cfg.get_double("stair_tread", s.stair_tread);
    s.stair_count = cfg.get_int("stair_count", s.stair_count);
    s.sigma_doppler = cfg.get_double("sigma_doppler", s.sigma_doppler);
    s.sigma_leg = cfg.get_double("sigma_leg", s.sigma_leg);
    s.outlier_fraction = cfg.get_double("outlier_fraction", s.outlier_fraction);
    s.elev_corrupt_fraction =
        cfg.get_double("elev_corrupt_fraction", s.elev_corrupt_fraction);
    s.dynamic_start = cfg.get_double("dynamic_start", s.dynamic_start);
    s.dynamic_end = cfg.get_double("dynamic_end", s.dynamic_end);
    s.dynamic_fraction = cfg.get_double("dynamic_fraction", s.dynamic_fraction);
    s.leg_velocity_scale = cfg.get_double("leg_velocity_scale", s.leg_velocity_scale);
    s.landmarks = cfg.get_int("landmarks", s.landmarks);
    s.landmark_box = cfg.get_double("landmark_box", s.landmark_box);
    s.min_scan_points = cfg.get_int("min_scan_points", s.min_scan_points);
    s.max_scan_points = cfg.get_int("max_scan_points", s.max_scan_points);
    s.foot_radius = cfg.get_double("foot_radius", s.foot_radius);
    s.body_height = cfg.get_double("body_height", s.body_height);
    s.attitude_wobble = cfg.get_double("attitude_wobble", s.attitude_wobble);
    s.seed = static_cast<unsigned>(cfg.get_int("seed", static_cast<int>(s.seed)));
    return s;
  }
};

struct SynthResult {
  SensorLog log;
  Trajectory ground_truth;        // at radar-scan times
  std::vector<Vec3> gt_velocity;  // v(t_k^-), world frame, per scan time
  LegModel leg_model;
};

namespace synth_detail {

constexpr long kScanDtNs = 50'000'000;  // 20 Hz
constexpr int kJointsPerScan = 9;       // ~180 Hz

inline double ns_to_s(long ns) { return static_cast<double>(ns) * 1e-9; }

struct ShapeEval {
  Vec3 position = Vec3::Zero();  // smooth shape position (body origin)
  double yaw = 0.0;
  double roll = 0.0, pitch = 0.0;
};

/// Analytic smooth path; the discrete world is derived from it.
class Shape {
 public:
  explicit Shape(const SynthScenario& sc) : sc_(sc) {
    if (sc.shape == "loop" || sc.shape == "strafe_loop") {
      radius_ = sc.speed * sc.duration / (2.0 * M_PI);
    }
  }

  double arc_length(double t) const {
    // Integral of speed * (1 + wobble sin(2 pi t / 8)).
    const double w = sc_.speed_wobble;
    const double period = 8.0;
    return sc_.speed *
           (t + w * period / (2.0 * M_PI) * (1.0 - std::cos(2.0 * M_PI * t / period)));
  }

  double ground_z(double s) const {
    if (sc_.stair_count <= 0) return 0.0;
    const double top = sc_.stair_riser * sc_.stair_count;
    const double climb_len = sc_.stair_tread * sc_.stair_count;
    if (sc_.shape == "loop") {
      // Stairs up mid-loop, ramp back down before closing.
      const double total = sc_.speed * sc_.duration;
      const double down0 = 0.62 * total, down1 = 0.82 * total;
      if (s < sc_.stair_start) return 0.0;
      if (s < sc_.stair_start + climb_len) {
        const int step = static_cast<int>((s - sc_.stair_start) / sc_.stair_tread) + 1;
        return sc_.stair_riser * std::min(step, sc_.stair_count);
      }
      if (s < down0) return top;
      if (s < down1) return top * (1.0 - (s - down0) / (down1 - down0));
      return 0.0;
    }
    if (s < sc_.stair_start) return 0.0;
    const int step = static_cast<int>((s - sc_.stair_start) / sc_.stair_tread) + 1;
    return sc_.stair_riser * std::min(step, sc_.stair_count);
  }

  /// Smoothed terrain the body follows (linear ramp across the stair flight).
  double body_ground_z(double s) const {
    if (sc_.stair_count <= 0) return 0.0;
    const double top = sc_.stair_riser * sc_.stair_count;
    const double climb_len = sc_.stair_tread * sc_.stair_count;
    auto ramp = [&](double x) {
      return top * std::clamp((x - sc_.stair_start) / climb_len, 0.0, 1.0);
    };
    if (sc_.shape == "loop") {
      const double total = sc_.speed * sc_.duration;
      const double down0 = 0.62 * total, down1 = 0.82 * total;
      if (s < down0) return ramp(s);
      if (s < down1) return top * (1.0 - (s - down0) / (down1 - down0));
      return 0.0;
    }
    return ramp(s);
  }

  ShapeEval eval(double t) const {
    ShapeEval out;
    const double s = arc_length(t);
    double x = 0, y = 0;
    if (sc_.shape == "line" || sc_.shape == "stair") {
      x = s;
      out.yaw = 0.0;
    } else if (sc_.shape == "out_back") {
      // Smooth out-and-back: x = A sin^2(pi t / T), peak speed = sc.speed.
      const double amp = sc_.speed * sc_.duration / M_PI;
      x = amp * std::pow(std::sin(M_PI * t / sc_.duration), 2);
      out.yaw = 0.0;
    } else if (sc_.shape == "strafe_loop") {
      const double phi = s / radius_;
      x = radius_ * std::sin(phi);
      y = radius_ * (1.0 - std::cos(phi));
      out.yaw = 0.0;
    } else if (sc_.shape == "loop") {
      const double phi = s / radius_;
      x = radius_ * std::sin(phi);
      y = radius_ * (1.0 - std::cos(phi));
      out.yaw = phi;  // heading along the tangent
    } else if (sc_.shape == "curve") {
      const double rad = sc_.speed / std::max(1e-6, std::abs(sc_.turn_rate));
      const double phi = (sc_.turn_rate >= 0 ? 1.0 : -1.0) * s / rad;
      x = rad * std::sin(std::abs(phi));
      y = (sc_.turn_rate >= 0 ? 1.0 : -1.0) * rad * (1.0 - std::cos(phi));
      out.yaw = phi;
    } else {
      throw ConfigError("unknown scenario shape: " + sc_.shape);
    }
    out.position = Vec3(x, y, body_ground_z(path_s(s)) + sc_.body_height);
    if (sc_.attitude_wobble > 0) {
      out.roll = sc_.attitude_wobble * std::sin(2.0 * M_PI * t / 2.5);
      out.pitch = sc_.attitude_wobble * std::sin(2.0 * M_PI * t / 3.7 + 1.0);
    }
    return out;
  }

  double terrain_at(double x, double y, double t_hint) const {
    // Project onto the path via the arc length at the hint time; the shapes
    // used here are locally well approximated by it.
    (void)x;
    (void)y;
    return ground_z(path_s(arc_length(t_hint)));
  }

 private:
  double path_s(double s) const {
    if (sc_.shape == "out_back") {
      const double half = arc_length(sc_.duration) / 2.0;
      return s < half ? s : 2.0 * half - s;
    }
    return s;
  }

  const SynthScenario& sc_;
  double radius_ = 1.0;
};

}  // namespace synth_detail

/// Generates a sensor log plus ground truth. Deterministic per seed.
inline SynthResult synth_generate(const SynthScenario& sc) {
  using namespace synth_detail;
  SynthResult result;
  result.leg_model = LegModel::spot_like(sc.foot_radius);
  const LegModel& model = result.leg_model;
  Shape shape(sc);
  std::mt19937_64 rng(sc.seed);

  const int n_scans = std::max(2, static_cast<int>(std::llround(sc.duration / 0.05)));

  // Time grids (integer nanoseconds).
  std::vector<long> scan_ns(n_scans + 1);
  for (int k = 0; k <= n_scans; ++k) scan_ns[k] = static_cast<long>(k) * kScanDtNs;
  std::vector<long> joint_ns;
  for (int k = 0; k < n_scans; ++k) {
    for (int j = 0; j < kJointsPerScan; ++j) {
      joint_ns.push_back(scan_ns[k] +
                         std::llround(static_cast<double>(j) * kScanDtNs /
                                      kJointsPerScan));
    }
  }
  joint_ns.push_back(scan_ns[n_scans]);

  // Ground truth: piecewise-constant velocity per scan interval, positions by
  // cumulative summation (the reference the factors telescope against).
  std::vector<Vec3> vel(n_scans);  // v over [t_k, t_{k+1})
  std::vector<Vec3> pos(n_scans + 1);
  pos[0] = shape.eval(0.0).position;
  for (int k = 0; k < n_scans; ++k) {
    const double t0 = ns_to_s(scan_ns[k]), t1 = ns_to_s(scan_ns[k + 1]);
    vel[k] = (shape.eval(t1).position - shape.eval(t0).position) / (t1 - t0);
    pos[k + 1] = pos[k] + vel[k] * (t1 - t0);
  }
  auto body_pos = [&](double t) -> Vec3 {
    int k = std::min(n_scans - 1, static_cast<int>(t / 0.05 + 1e-9));
    while (k > 0 && t < ns_to_s(scan_ns[k]) - 1e-12) --k;
    while (k + 1 < n_scans && t >= ns_to_s(scan_ns[k + 1]) - 1e-12) ++k;
    return pos[k] + vel[k] * (t - ns_to_s(scan_ns[k]));
  };
  // Backward-looking velocity: a sample at an interval boundary measures the
  // interval it closes.
  auto vel_before = [&](double t) -> Vec3 {
    int k = std::min(n_scans - 1, static_cast<int>(t / 0.05 + 1e-9));
    while (k > 0 && t <= ns_to_s(scan_ns[k]) + 1e-12) --k;
    while (k + 1 < n_scans && t > ns_to_s(scan_ns[k + 1]) + 1e-12) ++k;
    return vel[k];
  };

  // Attitude knots on the joint grid; gyro increments reproduce them exactly.
  const std::size_t n_knots = joint_ns.size();
  std::vector<Rot3> att(n_knots);
  for (std::size_t m = 0; m < n_knots; ++m) {
    const ShapeEval e = shape.eval(ns_to_s(joint_ns[m]));
    att[m] = ypr_compose(YprAngles(e.roll, e.pitch, e.yaw));
  }
  auto att_at_joint = [&](std::size_t m) -> const Rot3& { return att[m]; };

  for (std::size_t m = 0; m < n_knots; ++m) {
    ImuSample s;
    s.timestamp = ns_to_s(joint_ns[m]);
    if (m + 1 < n_knots) {
      const double dt = ns_to_s(joint_ns[m + 1]) - s.timestamp;
      s.angular_velocity = so3_log(att[m].transpose() * att[m + 1]) / dt;
    }
    s.linear_acceleration = att[m].transpose() * Vec3(0, 0, 9.81);
    s.orientation = att[m];
    s.has_orientation = true;
    result.log.imu.push_back(s);
  }

  // ---------------------------------------------------------------- radar
  // Landmark field: uniform box around the trajectory.
  Vec3 lo = pos[0], hi = pos[0];
  for (const auto& p : pos) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  lo.array() -= sc.landmark_box / 2;
  hi.array() += sc.landmark_box / 2;
  std::vector<Vec3> landmarks(sc.landmarks);
  {
    std::uniform_real_distribution<double> ux(lo.x(), hi.x());
    std::uniform_real_distribution<double> uy(lo.y(), hi.y());
    std::uniform_real_distribution<double> uz(lo.z() - 2.0, hi.z() + 6.0);
    for (auto& l : landmarks) l = Vec3(ux(rng), uy(rng), uz(rng));
  }

  std::normal_distribution<double> doppler_noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  result.log.doppler_sign = -1.0;

  for (int k = 0; k <= n_scans; ++k) {
    const double t = ns_to_s(scan_ns[k]);
    const Rot3& R = att[static_cast<std::size_t>(k) * kJointsPerScan];
    const Vec3 p = pos[k];
    const Vec3 v_body = R.transpose() * (k == 0 ? vel[0] : vel[k - 1]);

    RadarScan scan;
    scan.timestamp = t;
    std::vector<RadarPoint> candidates;
    for (const auto& l : landmarks) {
      const Vec3 pb = R.transpose() * (l - p);
      const double range = pb.norm();
      if (range < 1.0 || range > 30.0) continue;
      if (std::abs(std::atan2(pb.y(), pb.x())) > 60.0 * M_PI / 180.0) continue;
      if (std::abs(std::atan2(pb.z(), pb.head<2>().norm())) > 15.0 * M_PI / 180.0) {
        continue;
      }
      RadarPoint pt;
      pt.position = pb;
      pt.doppler = -pb.normalized().dot(v_body);
      pt.intensity = 10.0 + 20.0 * unit(rng);
      candidates.push_back(pt);
    }
    std::shuffle(candidates.begin(), candidates.end(), rng);
    std::uniform_int_distribution<int> target_n(sc.min_scan_points, sc.max_scan_points);
    const int keep = std::min<int>(static_cast<int>(candidates.size()), target_n(rng));
    candidates.resize(keep);

    const bool dynamic_now = t >= sc.dynamic_start && t <= sc.dynamic_end;
    for (auto& pt : candidates) {
      if (dynamic_now && unit(rng) < sc.dynamic_fraction) {
        // Coherent moving rigid cluster ahead of the robot.
        const Vec3 center_w = p + R * Vec3(6.0, 0.0, 0.5);
        const Vec3 v_obj = R * Vec3(-0.9, 1.1, 0.0);
        const Vec3 off(2.0 * (unit(rng) - 0.5) * 1.5, 2.0 * (unit(rng) - 0.5) * 1.5,
                       2.0 * (unit(rng) - 0.5) * 0.5);
        pt.position = R.transpose() * (center_w + off - p);
        pt.doppler =
            pt.position.normalized().dot(R.transpose() * (v_obj - (k == 0 ? vel[0] : vel[k - 1])));
      } else if (unit(rng) < sc.outlier_fraction) {
        pt.doppler = -5.0 + 10.0 * unit(rng);
      } else if (unit(rng) < sc.elev_corrupt_fraction) {
        const double dz = (2.0 + 2.0 * unit(rng)) * (unit(rng) < 0.5 ? -1.0 : 1.0);
        pt.position.z() += dz;  // doppler stays true to the real position
      }
      if (sc.sigma_doppler > 0) pt.doppler += sc.sigma_doppler * doppler_noise(rng);
    }
    scan.points = std::move(candidates);
    result.log.radar.push_back(std::move(scan));

    TrajectoryPose pose;
    pose.timestamp = t;
    pose.p = p;
    pose.R = R;
    result.ground_truth.push_back(pose);
    result.gt_velocity.push_back(R * v_body);
  }
  result.log.ground_truth = result.ground_truth;

  // ----------------------------------------------------------------- legs
  const double gait_period = 0.5, duty = 0.8;
  const std::array<double, 4> phase = {0.0, 0.5, 0.25, 0.75};
  auto scheduled_contact = [&](int leg, double t) {
    if (vel_before(t).norm() < 5e-3) return true;  // standing: no stepping
    double frac = t / gait_period - phase[leg];
    frac -= std::floor(frac);
    return frac < duty;
  };
  auto next_touchdown_time = [&](int leg, double t) {
    const double cycles = std::floor(t / gait_period - phase[leg]) + 1.0;
    return (cycles + phase[leg]) * gait_period;
  };

  struct FootGen {
    bool active = false;
    Vec3 c = Vec3::Zero();
    Rot3 R_WC = Mat3::Identity();
    Vec3 q = Vec3(0.0, 0.6, -1.2);
    bool have_q = false;
    Vec3 swing_from = Vec3::Zero();
    double swing_t0 = 0.0, swing_t1 = 0.0;
    Vec3 swing_to = Vec3::Zero();
  };
  std::array<FootGen, 4> feet;

  auto hip_world = [&](int leg, double t) -> Vec3 {
    const std::size_t m = std::min<std::size_t>(
        n_knots - 1,
        static_cast<std::size_t>(std::lower_bound(joint_ns.begin(), joint_ns.end(),
                                                  std::llround(t * 1e9) - 1) -
                                 joint_ns.begin()));
    const Rot3& R = att_at_joint(m);
    const auto& g = model.legs[leg];
    return body_pos(t) +
           R * (g.hip_offset + Vec3(0, g.lateral_sign * g.lengths[0], 0));
  };
  auto touchdown_target = [&](int leg, double t_td) -> Vec3 {
    Vec3 c = hip_world(leg, t_td);
    const Vec3 v = vel_before(t_td);
    Vec3 lead = v;
    lead.z() = 0;
    c.head<2>() += lead.head<2>() * (duty * gait_period / 2.0);
    c.z() = shape.terrain_at(c.x(), c.y(), t_td) + model.foot_radius;
    return c;
  };
  // Stance and touchdown targets must be hit exactly; swing paths are
  // cosmetic and may be pulled toward the nominal stance point.
  auto solve_ik = [&](int leg, const Vec3& target_body, const Vec3& init, double t,
                      bool strict) -> Vec3 {
    Vec3 tb = target_body;
    const auto& g = model.legs[leg];
    const Vec3 nominal =
        g.hip_offset + Vec3(0, g.lateral_sign * g.lengths[0], -sc.body_height);
    const int attempts = strict ? 1 : 7;
    for (int attempt = 0; attempt < attempts; ++attempt) {
      const auto q = ik_solve(leg, tb, model, init);
      if (q) return *q;
      tb = 0.5 * (tb + nominal);
    }
    throw InfeasibleIkError("synth: leg " + std::to_string(leg) +
                            " target unreachable at t=" + std::to_string(t));
  };

  std::normal_distribution<double> leg_noise(0.0, 1.0);
  const Vec3 n_c = model.foot_radius * Vec3::UnitZ();

  for (std::size_t m = 0; m < n_knots; ++m) {
    const double t = ns_to_s(joint_ns[m]);
    const double dt = m > 0 ? t - ns_to_s(joint_ns[m - 1]) : 0.0;
    const Rot3& R_WB = att_at_joint(m);
    const Vec3 p_B = body_pos(t);

    Vec3 v_target = sc.leg_velocity_scale * vel_before(t);
    if (sc.sigma_leg > 0) {
      v_target += sc.sigma_leg * Vec3(leg_noise(rng), leg_noise(rng), leg_noise(rng));
    }

    JointState js;
    js.timestamp = t;
    ContactState cs;
    cs.timestamp = t;

    for (int leg = 0; leg < 4; ++leg) {
      FootGen& f = feet[leg];
      const bool contact = scheduled_contact(leg, t);
      cs.in_contact[leg] = contact;
      Vec3 q = f.q, qdot = Vec3::Zero();

      if (contact && !f.active) {
        // Touchdown: place the foot on the terrain under the lead point.
        f.c = (m == 0) ? touchdown_target(leg, t) : f.swing_to;
        q = solve_ik(leg, R_WB.transpose() * (f.c - p_B), f.q, t, true);
        qdot = f.have_q ? Vec3((q - f.q) / std::max(dt, 1e-6)) : Vec3::Zero();
        f.R_WC = R_WB * fk_rot(leg, q, model);
        f.active = true;
      } else if (contact && f.active) {
        // Stance: no-slip evolution of (c, q, R_WC), then joint rates that
        // make the pipeline recover v_target exactly (least squares).
        Vec3 c = f.c;
        Rot3 R_WC = f.R_WC;
        Vec3 omega_c = Vec3::Zero();
        q = f.q;
        if (model.foot_radius > 0) {
          for (int it = 0; it < 8; ++it) {
            q = solve_ik(leg, R_WB.transpose() * (c - p_B), q, t, true);
            R_WC = R_WB * fk_rot(leg, q, model);
            omega_c = so3_log(f.R_WC.transpose() * R_WC) / dt;
            const Vec3 c_next = f.c + skew(R_WC * omega_c) * n_c * dt;
            if ((c_next - c).norm() < 1e-15) {
              c = c_next;
              break;
            }
            c = c_next;
          }
          q = solve_ik(leg, R_WB.transpose() * (c - p_B), q, t, true);
          R_WC = R_WB * fk_rot(leg, q, model);
          omega_c = so3_log(f.R_WC.transpose() * R_WC) / dt;
        } else {
          q = solve_ik(leg, R_WB.transpose() * (c - p_B), q, t, true);
          R_WC = R_WB * fk_rot(leg, q, model);
          omega_c = so3_log(f.R_WC.transpose() * R_WC) / dt;
        }
        const LegKinematics kin = leg_kinematics(leg, q, model);
        const Vec3 konst = -R_WB * skew(kin.R_BC * omega_c) * kin.p_C +
                           skew(R_WC * omega_c) * n_c;
        const Mat3 M = R_WB * (-skew(kin.p_C) * kin.axes_body - kin.J_pos);
        const Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Vec3 sv_inv = Vec3::Zero();
        for (int i = 0; i < 3; ++i) {
          if (svd.singularValues()[i] > 1e-3 * svd.singularValues()[0]) {
            sv_inv[i] = 1.0 / svd.singularValues()[i];
          }
        }
        qdot = svd.matrixV() * sv_inv.asDiagonal() * svd.matrixU().transpose() *
               (v_target - konst);
        f.c = c;
        f.R_WC = R_WC;
      } else if (!contact && f.active) {
        // Liftoff: plan the swing to the next touchdown.
        f.active = false;
        f.swing_from = f.c;
        f.swing_t0 = t;
        f.swing_t1 = next_touchdown_time(leg, t);
        f.swing_to = touchdown_target(leg, f.swing_t1);
        const Vec3 c_sw = f.swing_from;
        q = solve_ik(leg, R_WB.transpose() * (c_sw - p_B), f.q, t, false);
        qdot = f.have_q ? Vec3((q - f.q) / std::max(dt, 1e-6)) : Vec3::Zero();
      } else {
        // Swing: smooth arc toward the planned touchdown.
        const double u =
            std::clamp((t - f.swing_t0) / std::max(1e-9, f.swing_t1 - f.swing_t0),
                       0.0, 1.0);
        const double su = u * u * (3 - 2 * u);  // smoothstep
        Vec3 c_sw = f.swing_from + su * (f.swing_to - f.swing_from);
        c_sw.z() += 0.05 * 4.0 * u * (1.0 - u);
        q = solve_ik(leg, R_WB.transpose() * (c_sw - p_B), f.q, t, false);
        qdot = f.have_q ? Vec3((q - f.q) / std::max(dt, 1e-6)) : Vec3::Zero();
      }

      js.angles.segment<3>(3 * leg) = q;
      js.velocities.segment<3>(3 * leg) = qdot;
      f.q = q;
      f.have_q = true;
    }
    result.log.joints.push_back(js);
    result.log.contacts.push_back(cs);
  }
  return result;
}

}  // namespace ralo

#endif  // RALO_SYNTH_HPP_
