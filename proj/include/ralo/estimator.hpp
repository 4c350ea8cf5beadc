// Fixed-lag 4-DoF factor-graph smoother: IMU attitude provider, keyframe
// bookkeeping, Levenberg-Marquardt solve over the sliding window, and the
// end-to-end log driver.
//
// Per-state parameterization (13 dof): p(3), v(3), yaw(1), radar bias(3),
// leg bias(3). Roll and pitch are pinned to the attitude provider and are
// not part of the parameter vector.

#ifndef RALO_ESTIMATOR_HPP_
#define RALO_ESTIMATOR_HPP_

#include <deque>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "ralo/config.hpp"
#include "ralo/io.hpp"
#include "ralo/leg_factor.hpp"
#include "ralo/leg_kin.hpp"
#include "ralo/nav_state.hpp"
#include "ralo/radar_ego.hpp"
#include "ralo/radar_factor.hpp"

namespace ralo {

struct OutOfRangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonMonotoneTimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalFailureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Roll/pitch over time, interpolated from the IMU's own orientation output
/// when present, else from a complementary filter over gyro + accel.
class AttitudeProvider {
 public:
  static constexpr double kExtrapolationGuard = 0.05;  // s

  AttitudeProvider() = default;

  explicit AttitudeProvider(const std::vector<ImuSample>& imu, double gain = 0.02) {
    knots_.reserve(imu.size());
    if (imu.empty()) return;
    if (imu.front().has_orientation) {
      for (const auto& s : imu) {
        const YprAngles a = ypr_decompose(s.orientation);
        knots_.push_back({s.timestamp, a.roll, a.pitch});
      }
      return;
    }
    // Complementary filter, initialized from the first accel sample.
    const Vec3 a0 = imu.front().linear_acceleration;
    const double roll = std::atan2(a0.y(), a0.z());
    const double pitch = std::atan2(-a0.x(), std::hypot(a0.y(), a0.z()));
    Rot3 R = ypr_compose(YprAngles(roll, pitch, 0.0));
    knots_.push_back({imu.front().timestamp, roll, pitch});
    for (std::size_t i = 1; i < imu.size(); ++i) {
      const double dt = imu[i].timestamp - imu[i - 1].timestamp;
      R = R * so3_exp(imu[i - 1].angular_velocity * dt);
      const Vec3 g_meas = imu[i].linear_acceleration.normalized();
      const Vec3 g_pred = R.transpose() * Vec3::UnitZ();
      R = R * so3_exp(gain * g_meas.cross(g_pred));
      const YprAngles a = ypr_decompose(R);
      knots_.push_back({imu[i].timestamp, a.roll, a.pitch});
    }
  }

  bool empty() const { return knots_.empty(); }
  double start_time() const { return knots_.front().t; }
  double end_time() const { return knots_.back().t; }

  /// Roll/pitch at t (yaw intentionally absent).
  YprAngles attitude_at(double t) const {
    if (knots_.empty()) throw OutOfRangeError("attitude_at: no IMU data");
    if (t < knots_.front().t - kExtrapolationGuard ||
        t > knots_.back().t + kExtrapolationGuard) {
      throw OutOfRangeError("attitude_at: t outside IMU coverage");
    }
    if (t <= knots_.front().t) return YprAngles(knots_.front().roll, knots_.front().pitch, 0);
    if (t >= knots_.back().t) return YprAngles(knots_.back().roll, knots_.back().pitch, 0);
    const auto it = std::lower_bound(
        knots_.begin(), knots_.end(), t,
        [](const Knot& k, double time) { return k.t < time; });
    const auto& a = *(it - 1);
    const auto& b = *it;
    const double w = (t - a.t) / (b.t - a.t);
    return YprAngles(a.roll + w * wrap_angle(b.roll - a.roll),
                     a.pitch + w * wrap_angle(b.pitch - a.pitch), 0.0);
  }

 private:
  struct Knot {
    double t, roll, pitch;
  };
  std::vector<Knot> knots_;
};

/// Gyro-propagated orientation between keyframes; supplies the linearization
/// yaw at measurement timestamps. Re-anchored at every keyframe.
class YawDeadReckoner {
 public:
  explicit YawDeadReckoner(const std::vector<ImuSample>& imu) : imu_(&imu) {}

  void anchor(double t, const YprAngles& attitude) {
    R_ = ypr_compose(attitude);
    t_ = t;
    idx_ = 0;
    while (idx_ + 1 < imu_->size() && (*imu_)[idx_ + 1].timestamp <= t + 1e-9) ++idx_;
  }

  double yaw_at(double t) {
    advance_to(t);
    Rot3 R = R_;
    if (idx_ < imu_->size() && t - t_ > 1e-9) {
      R = R * so3_exp((*imu_)[idx_].angular_velocity * (t - t_));
    }
    return ypr_decompose(R).yaw;
  }

 private:
  void advance_to(double t) {
    while (idx_ + 1 < imu_->size() && (*imu_)[idx_ + 1].timestamp <= t + 1e-9) {
      const double dt = (*imu_)[idx_ + 1].timestamp - std::max(t_, (*imu_)[idx_].timestamp);
      if (dt > 0) R_ = R_ * so3_exp((*imu_)[idx_].angular_velocity * dt);
      t_ = (*imu_)[idx_ + 1].timestamp;
      ++idx_;
    }
  }

  const std::vector<ImuSample>* imu_;
  Rot3 R_ = Mat3::Identity();
  double t_ = 0.0;
  std::size_t idx_ = 0;
};

struct SolverParams {
  int max_iterations = 15;
  double lambda_init = 1e-4;
  double lambda_scale = 10.0;
  double convergence_tol = 1e-9;  // relative cost decrease
  int window_size = 20;           // states
  double keyframe_period = 0.25;  // s
};

struct PriorSigmas {
  double p = 1e-4;     // m, gauge anchor
  double yaw = 1e-6;   // rad
  double v = 0.1;      // m/s
  double bias = 0.1;   // m/s
  // Transfer prior applied to the new oldest state on window slide.
  double slide_p = 1e-3;
  double slide_yaw = 1e-4;
  double slide_v = 0.05;
  double slide_bias = 0.02;
};

struct EstimatorParams {
  SolverParams solver;
  RansacParams ransac;
  LegModel leg_model = LegModel::spot_like(0.0);
  LegNoiseParams leg_noise;
  double sigma_bias_walk_radar = 1e-3;  // m/s/sqrt(s)
  PriorSigmas prior;
  bool use_radar = true;
  bool use_leg = true;
  YprAngles radar_extrinsic_ypr;  // sensor->body rotation, identity default

  static EstimatorParams from_config(const Config& cfg) {
    EstimatorParams p;
    p.solver.max_iterations = cfg.get_int("solver.max_iterations", p.solver.max_iterations);
    p.solver.lambda_init = cfg.get_double("solver.lambda_init", p.solver.lambda_init);
    p.solver.lambda_scale = cfg.get_double("solver.lambda_scale", p.solver.lambda_scale);
    p.solver.convergence_tol =
        cfg.get_double("solver.convergence_tol", p.solver.convergence_tol);
    p.solver.window_size = cfg.get_int("solver.window_size", p.solver.window_size);
    p.solver.keyframe_period =
        cfg.get_double("solver.keyframe_period", p.solver.keyframe_period);

    p.ransac.max_iterations_xy =
        cfg.get_int("ransac.max_iterations_xy", p.ransac.max_iterations_xy);
    p.ransac.max_iterations_xz =
        cfg.get_int("ransac.max_iterations_xz", p.ransac.max_iterations_xz);
    p.ransac.inlier_threshold_xy =
        cfg.get_double("ransac.inlier_threshold_xy", p.ransac.inlier_threshold_xy);
    p.ransac.inlier_threshold_xz =
        cfg.get_double("ransac.inlier_threshold_xz", p.ransac.inlier_threshold_xz);
    p.ransac.min_points = cfg.get_int("ransac.min_points", p.ransac.min_points);
    p.ransac.min_inlier_ratio =
        cfg.get_double("ransac.min_inlier_ratio", p.ransac.min_inlier_ratio);
    p.ransac.sigma_doppler = cfg.get_double("ransac.sigma_doppler", p.ransac.sigma_doppler);
    p.ransac.use_xz_stage = cfg.get_bool("ransac.use_xz_stage", p.ransac.use_xz_stage);

    p.leg_noise.sigma_v = cfg.get_double("leg.sigma_v", p.leg_noise.sigma_v);
    p.leg_noise.sigma_bl = cfg.get_double("leg.sigma_bl", p.leg_noise.sigma_bl);
    p.sigma_bias_walk_radar =
        cfg.get_double("radar.sigma_bias_walk", p.sigma_bias_walk_radar);
    p.use_radar = cfg.get_bool("use_radar", p.use_radar);
    p.use_leg = cfg.get_bool("use_leg", p.use_leg);

    LegModel& m = p.leg_model;
    m.foot_radius = cfg.get_double("leg.foot_radius", m.foot_radius);
    for (int leg = 0; leg < 4; ++leg) {
      const std::string key = "leg" + std::to_string(leg);
      m.legs[leg].hip_offset =
          cfg.get_vec3(key + ".hip_offset", m.legs[leg].hip_offset);
      for (int j = 0; j < 3; ++j) {
        m.legs[leg].axes[j] = cfg.get_vec3(key + ".axis" + std::to_string(j),
                                           m.legs[leg].axes[j]);
        if (m.legs[leg].axes[j].norm() > 0) m.legs[leg].axes[j].normalize();
      }
      const Vec3 lengths = cfg.get_vec3(
          key + ".lengths", Vec3(m.legs[leg].lengths[0], m.legs[leg].lengths[1],
                                 m.legs[leg].lengths[2]));
      m.legs[leg].lengths = {lengths.x(), lengths.y(), lengths.z()};
      m.legs[leg].lateral_sign =
          cfg.get_double(key + ".lateral_sign", m.legs[leg].lateral_sign);
    }
    const Vec3 lo = cfg.get_vec3("leg.joint_lower", Vec3(m.joint_lower[0], m.joint_lower[1], m.joint_lower[2]));
    const Vec3 hi = cfg.get_vec3("leg.joint_upper", Vec3(m.joint_upper[0], m.joint_upper[1], m.joint_upper[2]));
    m.joint_lower = {lo.x(), lo.y(), lo.z()};
    m.joint_upper = {hi.x(), hi.y(), hi.z()};

    p.radar_extrinsic_ypr =
        YprAngles(cfg.get_vec3("radar.extrinsic_ypr", Vec3::Zero()).x(),
                  cfg.get_vec3("radar.extrinsic_ypr", Vec3::Zero()).y(),
                  cfg.get_vec3("radar.extrinsic_ypr", Vec3::Zero()).z());
    return p;
  }
};

struct IterationReport {
  std::vector<double> cost_trace;
  bool converged = false;
  int iterations = 0;
  double final_cost = 0.0;
};

/// The sliding window: states plus the factors connecting them.
struct SlidingWindow {
  static constexpr int kStateDim = 13;

  struct RadarFactorSlot {
    int i, j;
    PreintegratedRadar preint;
    Eigen::Matrix<double, 9, 9> sqrt_info;
  };
  struct LegFactorSlot {
    int i, j;
    PreintegratedLeg preint;
    Mat3 sqrt_info;
  };
  struct BiasWalkSlot {
    int i, j;
    bool radar;  // which bias
    Mat3 sqrt_info;
  };

  std::deque<NavState> states;
  std::vector<RadarFactorSlot> radar_factors;
  std::vector<LegFactorSlot> leg_factors;
  std::vector<BiasWalkSlot> bias_walks;
  // Diagonal prior on the oldest state.
  NavState prior_mean;
  Eigen::Matrix<double, kStateDim, 1> prior_weights =
      Eigen::Matrix<double, kStateDim, 1>::Zero();
  bool has_prior = false;
};

namespace estimator_detail {

template <int N>
Eigen::Matrix<double, N, N> sqrt_info_of(const Eigen::Matrix<double, N, N>& cov) {
  Eigen::Matrix<double, N, N> c = cov;
  for (int i = 0; i < N; ++i) c(i, i) += 1e-14;  // floor for degenerate axes
  const Eigen::Matrix<double, N, N> info = c.inverse();
  Eigen::LLT<Eigen::Matrix<double, N, N>> llt(
      0.5 * (info + info.transpose()).eval());
  return llt.matrixU();
}

inline Eigen::Matrix<double, 13, 1> pack(const NavState& s) {
  Eigen::Matrix<double, 13, 1> x;
  x << s.p, s.v, s.yaw, s.bias_radar, s.bias_leg;
  return x;
}

inline void apply_delta(NavState& s, const Eigen::VectorXd& dx, int off) {
  s.p += dx.segment<3>(off);
  s.v += dx.segment<3>(off + 3);
  s.yaw = wrap_angle(s.yaw + dx[off + 6]);
  s.bias_radar += dx.segment<3>(off + 7);
  s.bias_leg += dx.segment<3>(off + 10);
}

}  // namespace estimator_detail

/// Stacks whitened residuals/Jacobians of every factor in the window.
class WindowProblem {
 public:
  explicit WindowProblem(SlidingWindow& w) : w_(w) {}

  int dimension() const {
    return SlidingWindow::kStateDim * static_cast<int>(w_.states.size());
  }

  double cost(const std::deque<NavState>& states) const {
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    evaluate(states, &r, nullptr);
    return r.squaredNorm();
  }

  void evaluate(const std::deque<NavState>& states, Eigen::VectorXd* residual,
                Eigen::MatrixXd* jacobian) const {
    const int D = SlidingWindow::kStateDim;
    int rows = 0;
    if (w_.has_prior) rows += D;
    rows += 9 * static_cast<int>(w_.radar_factors.size());
    rows += 3 * static_cast<int>(w_.leg_factors.size());
    rows += 3 * static_cast<int>(w_.bias_walks.size());
    residual->setZero(rows);
    if (jacobian) jacobian->setZero(rows, D * static_cast<int>(states.size()));

    int row = 0;
    if (w_.has_prior) {
      const auto x = estimator_detail::pack(states[0]);
      auto x0 = estimator_detail::pack(w_.prior_mean);
      Eigen::Matrix<double, 13, 1> r = x - x0;
      r[6] = wrap_angle(r[6]);
      residual->segment<13>(row) = w_.prior_weights.asDiagonal() * r;
      if (jacobian) {
        jacobian->block<13, 13>(row, 0) =
            w_.prior_weights.asDiagonal() * Eigen::Matrix<double, 13, 13>::Identity();
      }
      row += D;
    }
    for (const auto& f : w_.radar_factors) {
      const NavState& si = states[f.i];
      const NavState& sj = states[f.j];
      const RadarResidual r = radar_residual_4dof(si, sj, f.preint);
      Eigen::Matrix<double, 9, 1> rv;
      rv << r.r_dp, r.r_v, r.r_db;
      residual->segment<9>(row) = f.sqrt_info * rv;
      if (jacobian) {
        const RadarJacobian Jf = radar_jacobian_4dof(si, sj, f.preint);
        Eigen::Matrix<double, 9, 13> Ji = Eigen::Matrix<double, 9, 13>::Zero();
        Eigen::Matrix<double, 9, 13> Jj = Eigen::Matrix<double, 9, 13>::Zero();
        Ji.block<3, 3>(0, 0) = Jf.r_dp_d_p_i;
        Ji.block<3, 3>(0, 3) = Jf.r_dp_d_v_i;
        Ji.block<3, 1>(0, 6) = Jf.r_dp_d_yaw_i;
        Ji.block<3, 3>(6, 7) = Jf.r_db_d_bias_i;
        Jj.block<3, 3>(0, 0) = Jf.r_dp_d_p_j;
        Jj.block<3, 3>(0, 7) = Jf.r_dp_d_bias_j;
        Jj.block<3, 3>(3, 3) = Jf.r_v_d_v_j;
        Jj.block<3, 3>(3, 7) = Jf.r_v_d_bias_j;
        Jj.block<3, 3>(6, 7) = Jf.r_db_d_bias_j;
        jacobian->block<9, 13>(row, D * f.i) = f.sqrt_info * Ji;
        jacobian->block<9, 13>(row, D * f.j) = f.sqrt_info * Jj;
      }
      row += 9;
    }
    for (const auto& f : w_.leg_factors) {
      const Vec3 r = leg_residual(states[f.i], states[f.j], f.preint);
      residual->segment<3>(row) = f.sqrt_info * r;
      if (jacobian) {
        jacobian->block<3, 3>(row, D * f.i) = -f.sqrt_info;
        jacobian->block<3, 3>(row, D * f.j) = f.sqrt_info;
        jacobian->block<3, 3>(row, D * f.j + 10) =
            f.sqrt_info * f.preint.dt_total;  // d r / d b_l_j
      }
      row += 3;
    }
    for (const auto& f : w_.bias_walks) {
      const int col = f.radar ? 7 : 10;
      const Vec3 bi = f.radar ? states[f.i].bias_radar : states[f.i].bias_leg;
      const Vec3 bj = f.radar ? states[f.j].bias_radar : states[f.j].bias_leg;
      residual->segment<3>(row) = f.sqrt_info * (bj - bi);
      if (jacobian) {
        jacobian->block<3, 3>(row, D * f.i + col) = -f.sqrt_info;
        jacobian->block<3, 3>(row, D * f.j + col) = f.sqrt_info;
      }
      row += 3;
    }
  }

 private:
  SlidingWindow& w_;
};

/// Levenberg-Marquardt over the window. Accepted steps never increase the
/// cost; roll/pitch are untouched (not in the parameterization).
inline IterationReport optimize(SlidingWindow& window, const SolverParams& params) {
  IterationReport report;
  if (window.states.empty()) return report;
  WindowProblem problem(window);

  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  problem.evaluate(window.states, &r, &J);
  double cost = r.squaredNorm();
  report.cost_trace.push_back(cost);

  double lambda = params.lambda_init;
  const double lambda_max = params.lambda_init * 1e12;
  for (int it = 0; it < params.max_iterations; ++it) {
    if (cost < 1e-18) {
      report.converged = true;
      break;
    }
    const Eigen::MatrixXd H = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() < 1e-12) {
      report.converged = true;
      break;
    }

    bool accepted = false;
    bool any_solve = false;
    while (lambda <= lambda_max) {
      Eigen::MatrixXd A = H;
      A.diagonal().array() += lambda;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        lambda *= params.lambda_scale;
        continue;
      }
      any_solve = true;
      const Eigen::VectorXd dx = ldlt.solve(-g);
      std::deque<NavState> trial = window.states;
      for (std::size_t k = 0; k < trial.size(); ++k) {
        estimator_detail::apply_delta(trial[k], dx, SlidingWindow::kStateDim * k);
      }
      Eigen::VectorXd r_trial;
      Eigen::MatrixXd J_trial;
      problem.evaluate(trial, &r_trial, &J_trial);
      const double cost_trial = r_trial.squaredNorm();
      if (cost_trial <= cost) {
        window.states = std::move(trial);
        r = std::move(r_trial);
        J = std::move(J_trial);
        const double decrease = cost - cost_trial;
        cost = cost_trial;
        report.cost_trace.push_back(cost);
        lambda = std::max(lambda / params.lambda_scale, 1e-12);
        accepted = true;
        ++report.iterations;
        if (decrease <= params.convergence_tol * std::max(cost, 1e-18)) {
          report.converged = true;
        }
        break;
      }
      lambda *= params.lambda_scale;
    }
    if (!accepted) {
      if (!any_solve) {
        throw NumericalFailureError(
            "optimize: normal equations indefinite beyond lambda escalation");
      }
      report.converged = true;  // no descent possible: at a numerical minimum
      break;
    }
    if (report.converged) break;
  }
  report.final_cost = cost;
  return report;
}

/// The full estimator: consumes a SensorLog, produces an optimized keyframe
/// trajectory.
class Estimator {
 public:
  explicit Estimator(EstimatorParams params) : params_(std::move(params)) {}

  /// Replays the log in timestamp order. Deterministic for identical inputs.
  Trajectory process_log(const SensorLog& log) {
    Trajectory out;
    if (log.imu.empty()) return out;
    provider_ = AttitudeProvider(log.imu);
    dead_reckoner_.emplace(log.imu);
    LegOdometer odometer(params_.leg_model, params_.leg_noise.sigma_v);

    const Rot3 R_ext = ypr_compose(params_.radar_extrinsic_ypr);
    std::size_t scan_idx = 0, joint_idx = 0;
    double next_kf = 0.0;
    bool anchored = false;
    bool kf_clock_started = false;

    auto joint_time = [&](std::size_t i) {
      return params_.use_leg && i < log.joints.size() ? log.joints[i].timestamp
                                                      : 1e300;
    };
    auto scan_time = [&](std::size_t i) {
      return params_.use_radar && i < log.radar.size() ? log.radar[i].timestamp : 1e300;
    };

    while (true) {
      const double tj = joint_time(joint_idx);
      const double ts = scan_time(scan_idx);
      if (tj >= 1e300 && ts >= 1e300) break;

      if (params_.use_leg && tj <= ts) {
        const JointState& joints = log.joints[joint_idx];
        const ContactState* contact = find_contact(log, joints.timestamp);
        if (contact != nullptr && coverage_ok(joints.timestamp)) {
          if (!anchored) {
            anchor_origin(joints.timestamp);
            anchored = true;
          }
          if (!params_.use_radar && !kf_clock_started) {
            kf_clock_started = true;
            next_kf = joints.timestamp + params_.solver.keyframe_period;
          }
          const YprAngles att = attitude_with_yaw(joints.timestamp);
          const auto feet = odometer.process(joints, *contact, ypr_compose(att));
          const auto fused = fuse_leg_velocity(feet);
          const double dt = joints.timestamp - last_leg_time_;
          if (fused.has_value() && last_leg_time_ >= 0.0 && dt > 0) {
            leg_window_.push_back({fused->v, dt + pending_leg_dt_});
            pending_leg_dt_ = 0.0;
          } else if (last_leg_time_ >= 0.0 && dt > 0) {
            pending_leg_dt_ += dt;
          }
          last_leg_time_ = joints.timestamp;
          if (!params_.use_radar && kf_clock_started &&
              joints.timestamp >= next_kf - 1e-9) {
            make_keyframe(joints.timestamp, nullptr, &out);
            next_kf += params_.solver.keyframe_period;
          }
        }
        ++joint_idx;
        continue;
      }

      const RadarScan& scan = log.radar[scan_idx];
      if (!coverage_ok(scan.timestamp)) {
        ++scan_idx;
        continue;
      }
      EgoVelEstimate est = estimate_ego_velocity(scan, params_.ransac);
      if (est.valid) {
        est.v_hat = R_ext * est.v_hat;
        est.covariance = (R_ext * est.covariance * R_ext.transpose()).eval();
      }
      if (!kf_clock_started) {
        // The keyframe clock starts at the first scan; that scan is the
        // boundary measurement of the first window, not part of it.
        if (!anchored) {
          anchor_origin(scan.timestamp);
          anchored = true;
        }
        kf_clock_started = true;
        next_kf = scan.timestamp + params_.solver.keyframe_period;
        if (est.valid) {
          boundary_vel_ = est.v_hat;
          have_boundary_vel_ = true;
          if (std::abs(window_.states.back().timestamp - scan.timestamp) < 1e-9) {
            window_.states.back().v =
                ypr_compose(attitude_with_yaw(scan.timestamp)) * est.v_hat;
            window_.prior_mean.v = window_.states.back().v;
          }
        }
        last_radar_time_ = scan.timestamp;
        ++scan_idx;
        continue;
      }

      const double dt = scan.timestamp - last_radar_time_;
      if (dt <= 0) throw NonMonotoneTimeError("radar scan timestamps not increasing");
      if (est.valid) {
        RadarPreintMeasurement m;
        m.estimate = est;
        m.attitude = attitude_with_yaw(scan.timestamp);
        m.dt = dt + pending_radar_dt_;
        pending_radar_dt_ = 0.0;
        radar_window_.push_back(m);
      } else {
        pending_radar_dt_ += dt;
      }
      last_radar_time_ = scan.timestamp;

      if (scan.timestamp >= next_kf - 1e-9) {
        make_keyframe(scan.timestamp, est.valid ? &est : nullptr, &out);
        next_kf += params_.solver.keyframe_period;
      }
      ++scan_idx;
    }

    for (const auto& s : window_.states) out.push_back(pose_of(s));
    return out;
  }

  const SlidingWindow& window() const { return window_; }
  const AttitudeProvider& attitude_provider() const { return provider_; }

 private:
  bool coverage_ok(double t) const {
    return !provider_.empty() && t >= provider_.start_time() - 0.05 &&
           t <= provider_.end_time() + 0.05;
  }

  const ContactState* find_contact(const SensorLog& log, double t) {
    while (contact_idx_ + 1 < log.contacts.size() &&
           log.contacts[contact_idx_ + 1].timestamp <= t + 1e-6) {
      ++contact_idx_;
    }
    if (contact_idx_ < log.contacts.size() &&
        std::abs(log.contacts[contact_idx_].timestamp - t) <= 1e-6) {
      return &log.contacts[contact_idx_];
    }
    return nullptr;
  }

  YprAngles attitude_with_yaw(double t) {
    const YprAngles rp = provider_.attitude_at(t);
    const double yaw = dead_reckoner_->yaw_at(t);
    return YprAngles(rp.roll, rp.pitch, yaw);
  }

  void anchor_origin(double t) {
    NavState s;
    s.timestamp = t;
    const YprAngles rp = provider_.attitude_at(t);
    s.roll = rp.roll;
    s.pitch = rp.pitch;
    s.yaw = 0.0;  // anchor convention
    window_.states.push_back(s);
    window_.prior_mean = s;
    auto& wts = window_.prior_weights;
    wts.segment<3>(0).setConstant(1.0 / params_.prior.p);
    wts.segment<3>(3).setConstant(1.0 / params_.prior.v);
    wts[6] = 1.0 / params_.prior.yaw;
    wts.segment<6>(7).setConstant(1.0 / params_.prior.bias);
    window_.has_prior = true;
    dead_reckoner_->anchor(t, s.attitude());
    last_leg_time_ = -1.0;
  }

  TrajectoryPose pose_of(const NavState& s) const {
    return {s.timestamp, s.p, s.rotation()};
  }

  void make_keyframe(double t, const EgoVelEstimate* boundary_est, Trajectory* out) {
    NavState& prev = window_.states.back();
    if (t <= prev.timestamp) return;
    const int i = static_cast<int>(window_.states.size()) - 1;

    NavState next;
    next.timestamp = t;
    const YprAngles rp = provider_.attitude_at(t);
    next.roll = rp.roll;
    next.pitch = rp.pitch;
    next.yaw = dead_reckoner_->yaw_at(t);
    next.bias_radar = prev.bias_radar;
    next.bias_leg = prev.bias_leg;
    next.p = prev.p;
    next.v = prev.v;

    bool radar_attached = false;
    if (params_.use_radar && !radar_window_.empty()) {
      const Vec3 u_ref = have_boundary_vel_ ? boundary_vel_ : Vec3::Zero();
      PreintegratedRadar preint = radar_preintegrate(
          radar_window_, prev.bias_radar, u_ref, params_.sigma_bias_walk_radar);
      // Dead-reckon initialization from the preintegrated delta.
      const Rot3 R_i = prev.rotation();
      const double dt = preint.dt_total;
      next.p = prev.p + prev.v * dt + R_i * (preint.delta_p - u_ref * dt);
      next.v = preint.last_v;

      SlidingWindow::RadarFactorSlot slot;
      slot.i = i;
      slot.j = i + 1;
      slot.preint = std::move(preint);
      slot.sqrt_info = estimator_detail::sqrt_info_of<9>(slot.preint.cov);
      window_.radar_factors.push_back(std::move(slot));
      radar_attached = true;
    }
    if (params_.use_leg && !leg_window_.empty()) {
      PreintegratedLeg preint =
          leg_preintegrate(leg_window_, prev.bias_leg, params_.leg_noise);
      if (!radar_attached) {
        // No radar this window: dead-reckon from the leg delta instead.
        next.p = prev.p + leg_bias_correct(preint, prev.bias_leg);
      }
      SlidingWindow::LegFactorSlot slot;
      slot.i = i;
      slot.j = i + 1;
      slot.preint = std::move(preint);
      slot.sqrt_info = estimator_detail::sqrt_info_of<3>(slot.preint.cov);
      window_.leg_factors.push_back(std::move(slot));
    }
    const double dt_win = t - prev.timestamp;
    if (!radar_attached) {
      SlidingWindow::BiasWalkSlot walk;
      walk.i = i;
      walk.j = i + 1;
      walk.radar = true;
      walk.sqrt_info = Mat3::Identity() /
                       (params_.sigma_bias_walk_radar * std::sqrt(dt_win));
      window_.bias_walks.push_back(walk);
    }
    {
      SlidingWindow::BiasWalkSlot walk;
      walk.i = i;
      walk.j = i + 1;
      walk.radar = false;
      walk.sqrt_info =
          Mat3::Identity() / (params_.leg_noise.sigma_bl * std::sqrt(dt_win));
      window_.bias_walks.push_back(walk);
    }

    window_.states.push_back(next);
    // The next window's constant-velocity reference: the ego-velocity of the
    // scan at this keyframe (or the last valid one in the sealed window).
    if (boundary_est != nullptr) {
      boundary_vel_ = boundary_est->v_hat;
      have_boundary_vel_ = true;
    } else if (!radar_window_.empty()) {
      boundary_vel_ = radar_window_.back().estimate.v_hat;
      have_boundary_vel_ = true;
    } else if (!params_.use_radar || radar_attached) {
      have_boundary_vel_ = false;
    }
    radar_window_.clear();
    leg_window_.clear();
    pending_radar_dt_ = 0.0;
    pending_leg_dt_ = 0.0;

    slide_window(out);
    optimize(window_, params_.solver);
    // Re-anchor the linearization yaw at the optimized newest state.
    dead_reckoner_->anchor(t, window_.states.back().attitude());
  }

  void slide_window(Trajectory* out) {
    while (static_cast<int>(window_.states.size()) > params_.solver.window_size) {
      out->push_back(pose_of(window_.states.front()));
      window_.states.pop_front();
      auto drop_or_shift = [](auto& factors) {
        auto it = factors.begin();
        while (it != factors.end()) {
          if (it->i == 0) {
            it = factors.erase(it);
          } else {
            --it->i;
            --it->j;
            ++it;
          }
        }
      };
      drop_or_shift(window_.radar_factors);
      drop_or_shift(window_.leg_factors);
      drop_or_shift(window_.bias_walks);

      // Diagonal prior transferred to the new oldest state.
      window_.prior_mean = window_.states.front();
      auto& wts = window_.prior_weights;
      wts.segment<3>(0).setConstant(1.0 / params_.prior.slide_p);
      wts.segment<3>(3).setConstant(1.0 / params_.prior.slide_v);
      wts[6] = 1.0 / params_.prior.slide_yaw;
      wts.segment<6>(7).setConstant(1.0 / params_.prior.slide_bias);
      window_.has_prior = true;
    }
  }

  EstimatorParams params_;
  AttitudeProvider provider_;
  std::optional<YawDeadReckoner> dead_reckoner_;
  SlidingWindow window_;

  std::vector<RadarPreintMeasurement> radar_window_;
  std::vector<LegVelocityMeasurement> leg_window_;
  double pending_radar_dt_ = 0.0;
  double pending_leg_dt_ = 0.0;
  double last_radar_time_ = -1.0;
  double last_leg_time_ = -1.0;
  Vec3 boundary_vel_ = Vec3::Zero();
  bool have_boundary_vel_ = false;
  std::size_t contact_idx_ = 0;
};

}  // namespace ralo

#endif  // RALO_ESTIMATOR_HPP_
