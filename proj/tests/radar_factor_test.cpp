#include "ralo/radar_factor.hpp"

#include <gtest/gtest.h>

#include <random>

#include "support/test_util.hpp"

using namespace ralo;
using test::matrices_close;
using test::numeric_jacobian;
using test::random_vec3;

namespace {

std::mt19937_64 rng(1234);

EgoVelEstimate make_estimate(const Vec3& v, double sigma = 0.05) {
  EgoVelEstimate est;
  est.v_hat = v;
  est.covariance = sigma * sigma * Mat3::Identity();
  est.valid = true;
  return est;
}

std::vector<RadarPreintMeasurement> random_window(int n) {
  std::uniform_real_distribution<double> dt(0.04, 0.06);
  std::uniform_real_distribution<double> ang(-0.3, 0.3);
  std::vector<RadarPreintMeasurement> out;
  for (int k = 0; k < n; ++k) {
    RadarPreintMeasurement m;
    m.estimate = make_estimate(random_vec3(rng, 1.5));
    m.attitude = YprAngles(ang(rng), ang(rng), ang(rng) * 3.0);
    m.dt = dt(rng);
    out.push_back(m);
  }
  return out;
}

// Packs the optimized coordinates of (state_i, state_j) used by the factor.
Eigen::VectorXd pack_states(const NavState& si, const NavState& sj) {
  Eigen::VectorXd x(20);
  x << si.p, si.v, si.yaw, si.bias_radar, sj.p, sj.v, sj.yaw, sj.bias_radar;
  return x;
}

void unpack_states(const Eigen::VectorXd& x, NavState* si, NavState* sj) {
  si->p = x.segment<3>(0);
  si->v = x.segment<3>(3);
  si->yaw = x[6];
  si->bias_radar = x.segment<3>(7);
  sj->p = x.segment<3>(10);
  sj->v = x.segment<3>(13);
  sj->yaw = x[16];
  sj->bias_radar = x.segment<3>(17);
}

Eigen::VectorXd stack_residual(const RadarResidual& r) {
  Eigen::VectorXd out(9);
  out << r.r_dp, r.r_v, r.r_db;
  return out;
}

// Assembles the analytic blocks in the same 20-column layout as pack_states.
Eigen::MatrixXd stack_jacobian(const RadarJacobian& J) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(9, 20);
  out.block<3, 3>(0, 0) = J.r_dp_d_p_i;
  out.block<3, 3>(0, 3) = J.r_dp_d_v_i;
  out.block<3, 1>(0, 6) = J.r_dp_d_yaw_i;
  out.block<3, 3>(0, 10) = J.r_dp_d_p_j;
  out.block<3, 3>(0, 17) = J.r_dp_d_bias_j;
  out.block<3, 1>(0, 16) = J.r_dp_d_yaw_j;
  out.block<3, 3>(3, 13) = J.r_v_d_v_j;
  out.block<3, 3>(3, 17) = J.r_v_d_bias_j;
  out.block<3, 1>(3, 6) = J.r_v_d_yaw_i;
  out.block<3, 1>(3, 16) = J.r_v_d_yaw_j;
  out.block<3, 3>(6, 7) = J.r_db_d_bias_i;
  out.block<3, 3>(6, 17) = J.r_db_d_bias_j;
  return out;
}

}  // namespace

TEST(RadarPreintegrate, SingleMeasurement) {
  std::vector<RadarPreintMeasurement> ms(1);
  ms[0].estimate = make_estimate(Vec3(1, 0, 0));
  ms[0].attitude = YprAngles();
  ms[0].dt = 0.05;
  const auto p = radar_preintegrate(ms, Vec3::Zero());
  EXPECT_LT((p.delta_p - Vec3(0.05, 0, 0)).norm(), 1e-15);
  EXPECT_LT((p.d_dp_d_bias + 0.05 * Mat3::Identity()).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(p.dt_total, 0.05);
}

TEST(RadarPreintegrate, ConstantVelocityLinearity) {
  const Vec3 v(0.7, -0.2, 0.1);
  const YprAngles att(0.1, -0.05, 0.4);
  std::vector<RadarPreintMeasurement> ms(2);
  ms[0] = {make_estimate(v), att, 0.05};
  ms[1] = {make_estimate(v), att, 0.06};
  const auto p = radar_preintegrate(ms, Vec3::Zero());
  // Constant attitude: R_rel = I, delta_p = v * (dt1 + dt2).
  EXPECT_LT((p.delta_p - v * 0.11).norm(), 1e-14);
  EXPECT_LT((p.d_dp_d_bias + 0.11 * Mat3::Identity()).norm(), 1e-14);
}

TEST(RadarPreintegrate, MatchesDenseSubstepIntegrator) {
  for (int trial = 0; trial < 5; ++trial) {
    const auto ms = random_window(8);
    const Vec3 bias = random_vec3(rng, 0.02);
    const auto p = radar_preintegrate(ms, bias);

    // Same model on a 10x finer grid degenerates to the identical sum.
    const Rot3 R_ref = ypr_compose(ms.front().attitude);
    Vec3 dense = Vec3::Zero();
    for (const auto& m : ms) {
      const Rot3 R_rel = R_ref.transpose() * ypr_compose(m.attitude);
      for (int s = 0; s < 10; ++s) {
        dense += R_rel * (m.estimate.v_hat - bias) * (m.dt / 10.0);
      }
    }
    EXPECT_LT((p.delta_p - dense).norm(), 1e-12);
  }
}

TEST(RadarPreintegrate, EmptyWindowThrows) {
  EXPECT_THROW(radar_preintegrate({}, Vec3::Zero()), EmptyWindowError);
}

TEST(RadarPreintegrate, CovarianceIsPsd) {
  const auto p = radar_preintegrate(random_window(6), Vec3::Zero());
  Eigen::SelfAdjointEigenSolver<Mat9> eig(p.cov);
  EXPECT_GE(eig.eigenvalues().minCoeff(), 0.0);
  EXPECT_LT((p.cov - p.cov.transpose()).norm(), 1e-15);
}

TEST(RadarResidual, ZeroOnSelfConsistentTrajectory) {
  for (int trial = 0; trial < 10; ++trial) {
    const auto ms = random_window(5);
    const Vec3 u_ref = random_vec3(rng, 1.0);
    const auto preint = radar_preintegrate(ms, Vec3::Zero(), u_ref);

    NavState si, sj;
    const YprAngles att_i = ms.front().attitude;
    si.roll = att_i.roll;
    si.pitch = att_i.pitch;
    si.yaw = att_i.yaw;
    si.p = random_vec3(rng, 3.0);
    si.v = si.rotation() * u_ref;

    const YprAngles att_j = ms.back().attitude;
    sj.roll = att_j.roll;
    sj.pitch = att_j.pitch;
    sj.yaw = att_j.yaw;
    // States generated by integrating the same measurements.
    sj.p = si.p + si.v * preint.dt_total +
           si.rotation() * (preint.delta_p - u_ref * preint.dt_total);
    sj.v = preint.last_v;

    const auto r = radar_residual_4dof(si, sj, preint);
    EXPECT_LT(r.r_dp.norm(), 1e-10);
    EXPECT_LT(r.r_v.norm(), 1e-10);
    EXPECT_LT(r.r_db.norm(), 1e-10);
  }
}

TEST(RadarResidual, EqualBiasesZeroBiasResidual) {
  const auto preint = radar_preintegrate(random_window(4), Vec3::Zero());
  NavState si = test::random_state(rng);
  NavState sj = test::random_state(rng);
  sj.bias_radar = si.bias_radar;
  const auto r = radar_residual_4dof(si, sj, preint);
  EXPECT_EQ(r.r_db, Vec3::Zero());
}

TEST(RadarResidual, IdentityAttitudeTranslationLinearity) {
  const auto preint = radar_preintegrate(random_window(4), Vec3::Zero());
  NavState si, sj;
  si.p = Vec3(1, 2, 3);
  sj.p = Vec3(2, 2, 3);
  const auto r0 = radar_residual_4dof(si, sj, preint);
  NavState sj2 = sj;
  sj2.p.z() += 0.25;
  const auto r1 = radar_residual_4dof(si, sj2, preint);
  EXPECT_NEAR(r1.r_dp.z() - r0.r_dp.z(), 0.25, 1e-14);
  EXPECT_NEAR(r1.r_dp.x(), r0.r_dp.x(), 1e-14);
  EXPECT_NEAR(r1.r_dp.y(), r0.r_dp.y(), 1e-14);
}

TEST(RadarJacobian, MatchesFiniteDifferences) {
  for (int trial = 0; trial < 10; ++trial) {
    const auto preint = radar_preintegrate(random_window(5), random_vec3(rng, 0.02),
                                           random_vec3(rng, 1.0));
    NavState si = test::random_state(rng);
    NavState sj = test::random_state(rng);

    const auto J = stack_jacobian(radar_jacobian_4dof(si, sj, preint));
    const auto f = [&](const Eigen::VectorXd& x) {
      NavState a = si, b = sj;
      unpack_states(x, &a, &b);
      return stack_residual(radar_residual_4dof(a, b, preint));
    };
    const auto Jfd = numeric_jacobian(f, pack_states(si, sj), 1e-6);
    EXPECT_TRUE(matrices_close(J, Jfd, 1e-5));
  }
}

TEST(RadarJacobian, ZeroRelativeTranslationZeroYawBlock) {
  std::vector<RadarPreintMeasurement> ms(1);
  ms[0] = {make_estimate(Vec3::Zero()), YprAngles(), 0.05};
  const auto preint = radar_preintegrate(ms, Vec3::Zero());
  NavState si = test::random_state(rng);
  NavState sj = si;
  sj.p = si.p + si.v * preint.dt_total;  // u = 0
  const auto J = radar_jacobian_4dof(si, sj, preint);
  EXPECT_LT(J.r_dp_d_yaw_i.norm(), 1e-14);
}

TEST(RadarJacobian, YawBlockSignSpotCheck) {
  std::vector<RadarPreintMeasurement> ms(1);
  ms[0] = {make_estimate(Vec3::Zero()), YprAngles(), 0.05};
  const auto preint = radar_preintegrate(ms, Vec3::Zero());
  NavState si, sj;  // identity attitudes
  si.v = Vec3::Zero();
  sj.p = si.p + Vec3(1, 0, 0);  // u = (1,0,0)
  const auto J = radar_jacobian_4dof(si, sj, preint);
  EXPECT_LT((J.r_dp_d_yaw_i - Vec3(0, -1, 0)).norm(), 1e-14);

  // Verified against finite differences.
  const auto f = [&](const Eigen::VectorXd& x) {
    NavState a = si;
    a.yaw = x[0];
    return stack_residual(radar_residual_4dof(a, sj, preint));
  };
  Eigen::VectorXd x0(1);
  x0 << 0.0;
  const auto Jfd = numeric_jacobian(f, x0, 1e-6);
  EXPECT_LT((Jfd.col(0).head<3>() - Vec3(0, -1, 0)).norm(), 1e-8);
}

TEST(RadarJacobian, RollPitchBlocksStructurallyZero) {
  const auto preint = radar_preintegrate(random_window(3), Vec3::Zero());
  const auto J =
      radar_jacobian_4dof(test::random_state(rng), test::random_state(rng), preint);
  EXPECT_EQ(J.r_dp_d_roll_i, Vec3::Zero());
  EXPECT_EQ(J.r_dp_d_pitch_i, Vec3::Zero());
  EXPECT_EQ(J.r_dp_d_roll_j, Vec3::Zero());
  EXPECT_EQ(J.r_dp_d_pitch_j, Vec3::Zero());
  EXPECT_EQ(J.r_dp_d_yaw_j, Vec3::Zero());
  EXPECT_EQ(J.r_v_d_yaw_i, Vec3::Zero());
  EXPECT_EQ(J.r_v_d_yaw_j, Vec3::Zero());
}

TEST(RadarBiasCorrection, FirstOrderCorrectionIsExact) {
  // The model is linear in the bias, so the first-order correction matches a
  // re-preintegration exactly; checked across decreasing perturbations.
  for (const double mag : {1e-2, 1e-3, 1e-4}) {
    const auto ms = random_window(6);
    const Vec3 b0 = random_vec3(rng, 0.02);
    const Vec3 db = random_vec3(rng, 1.0).normalized() * mag;
    const auto p0 = radar_preintegrate(ms, b0);
    const auto p1 = radar_preintegrate(ms, b0 + db);

    const Vec3 corrected_dp = p0.delta_p + p0.d_dp_d_bias * db;
    const Vec3 corrected_v = p0.last_v + p0.d_v_d_bias * db;
    EXPECT_LT((corrected_dp - p1.delta_p).norm(), 1e-12 + mag * mag);
    EXPECT_LT((corrected_v - p1.last_v).norm(), 1e-12 + mag * mag);
  }
}

TEST(RadarBiasCorrection, ResidualConsistentUnderBiasShift) {
  // Residual evaluated with the corrected preintegration equals the residual
  // with a re-preintegrated measurement at the new bias.
  const auto ms = random_window(5);
  const Vec3 b0 = Vec3(0.01, -0.02, 0.005);
  NavState si = test::random_state(rng);
  NavState sj = test::random_state(rng);

  const auto p0 = radar_preintegrate(ms, b0);
  const auto p1 = radar_preintegrate(ms, sj.bias_radar);
  const auto r0 = radar_residual_4dof(si, sj, p0);
  const auto r1 = radar_residual_4dof(si, sj, p1);
  EXPECT_LT((r0.r_dp - r1.r_dp).norm(), 1e-12);
  EXPECT_LT((r0.r_v - r1.r_v).norm(), 1e-12);
}
