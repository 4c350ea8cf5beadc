#include "ralo/synth.hpp"

#include <gtest/gtest.h>

#include "ralo/radar_ego.hpp"

using namespace ralo;

namespace {

SynthScenario line_scenario() {
  SynthScenario sc;
  sc.shape = "line";
  sc.duration = 4.0;
  sc.speed = 0.8;
  sc.seed = 11;
  return sc;
}

}  // namespace

TEST(SynthGenerate, DeterministicPerSeed) {
  const auto a = synth_generate(line_scenario());
  const auto b = synth_generate(line_scenario());
  ASSERT_EQ(a.log.radar.size(), b.log.radar.size());
  for (std::size_t k = 0; k < a.log.radar.size(); ++k) {
    ASSERT_EQ(a.log.radar[k].points.size(), b.log.radar[k].points.size());
    for (std::size_t i = 0; i < a.log.radar[k].points.size(); ++i) {
      EXPECT_EQ(a.log.radar[k].points[i].position, b.log.radar[k].points[i].position);
      EXPECT_EQ(a.log.radar[k].points[i].doppler, b.log.radar[k].points[i].doppler);
    }
  }
  ASSERT_EQ(a.log.joints.size(), b.log.joints.size());
  for (std::size_t i = 0; i < a.log.joints.size(); ++i) {
    EXPECT_EQ(a.log.joints[i].angles, b.log.joints[i].angles);
    EXPECT_EQ(a.log.joints[i].velocities, b.log.joints[i].velocities);
  }
}

TEST(SynthGenerate, SeedChangesData) {
  auto sc = line_scenario();
  const auto a = synth_generate(sc);
  sc.seed = 12;
  const auto b = synth_generate(sc);
  EXPECT_NE(a.log.radar[1].points[0].doppler, b.log.radar[1].points[0].doppler);
}

TEST(SynthGenerate, ZeroVelocityScenario) {
  SynthScenario sc = line_scenario();
  sc.speed = 0.0;
  sc.speed_wobble = 0.0;
  const auto r = synth_generate(sc);
  for (const auto& scan : r.log.radar) {
    for (const auto& p : scan.points) EXPECT_NEAR(p.doppler, 0.0, 1e-12);
  }
  double worst_qdot = 0.0;
  for (const auto& js : r.log.joints) {
    worst_qdot = std::max(worst_qdot, js.velocities.cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst_qdot, 1e-9);
}

TEST(SynthGenerate, EgoVelocityRecoverableOnEveryScan) {
  const auto r = synth_generate(line_scenario());
  RansacParams params;
  ASSERT_EQ(r.log.radar.size(), r.gt_velocity.size());
  for (std::size_t k = 0; k < r.log.radar.size(); ++k) {
    const auto est = estimate_ego_velocity(r.log.radar[k], params);
    ASSERT_TRUE(est.valid) << "scan " << k;
    const Vec3 v_body = r.ground_truth[k].R.transpose() * r.gt_velocity[k];
    EXPECT_LT((est.v_hat - v_body).norm(), 1e-8) << "scan " << k;
  }
}

TEST(SynthGenerate, LegPipelineRecoversVelocityExactly) {
  // The keystone property: on noiseless sagittal logs the leg velocity
  // pipeline reproduces the ground-truth body velocity to numerical noise.
  SynthScenario sc = line_scenario();
  sc.stair_count = 4;
  sc.stair_start = 1.0;
  sc.shape = "stair";
  const auto r = synth_generate(sc);

  LegOdometer odometer(r.leg_model);
  double worst = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < r.log.joints.size(); ++i) {
    const auto& js = r.log.joints[i];
    const auto& cs = r.log.contacts[i];
    const Rot3 R_WB = r.log.imu[i].orientation;  // same grid
    const auto feet = odometer.process(js, cs, R_WB);
    const auto fused = fuse_leg_velocity(feet);
    if (!fused) continue;
    // Backward-looking target velocity.
    int k = static_cast<int>(js.timestamp / 0.05 + 1e-9);
    if (js.timestamp <= k * 0.05 + 1e-12) k -= 1;
    k = std::clamp(k, 0, static_cast<int>(r.gt_velocity.size()) - 2);
    const Vec3 v_true = r.gt_velocity[k + 1];
    worst = std::max(worst, (fused->v - v_true).norm());
    ++used;
  }
  EXPECT_GT(used, 600);
  EXPECT_LT(worst, 1e-10);
}

TEST(SynthGenerate, RollingLogApproximatelyConsistent) {
  SynthScenario sc;
  sc.shape = "curve";
  sc.duration = 6.0;
  sc.speed = 0.7;
  sc.turn_rate = 0.25;
  sc.foot_radius = 0.03;
  sc.seed = 5;
  const auto r = synth_generate(sc);

  LegOdometer odometer(r.leg_model);
  double worst = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < r.log.joints.size(); ++i) {
    const auto& js = r.log.joints[i];
    const Rot3 R_WB = r.log.imu[i].orientation;
    const auto feet = odometer.process(js, r.log.contacts[i], R_WB);
    const auto fused = fuse_leg_velocity(feet);
    if (!fused) continue;
    int k = static_cast<int>(js.timestamp / 0.05 + 1e-9);
    if (js.timestamp <= k * 0.05 + 1e-12) k -= 1;
    k = std::clamp(k, 0, static_cast<int>(r.gt_velocity.size()) - 2);
    worst = std::max(worst, (fused->v - r.gt_velocity[k + 1]).norm());
    ++used;
  }
  EXPECT_GT(used, 1000);
  EXPECT_LT(worst, 2e-2);  // kinematic discretization only
}

TEST(SynthGenerate, StairElevationExactByConstruction) {
  SynthScenario sc;
  sc.shape = "stair";
  sc.duration = 20.0;
  sc.speed = 0.8;
  sc.speed_wobble = 0.0;
  sc.stair_count = 5;
  sc.stair_riser = 0.15;
  sc.stair_start = 3.0;
  const auto r = synth_generate(sc);
  const double dz = r.ground_truth.back().p.z() - r.ground_truth.front().p.z();
  EXPECT_NEAR(dz, 5 * 0.15, 1e-9);
}

TEST(SynthGenerate, OutliersInjectedAtRequestedRate) {
  SynthScenario sc = line_scenario();
  sc.outlier_fraction = 0.3;
  const auto r = synth_generate(sc);
  int total = 0, bad = 0;
  for (std::size_t k = 0; k < r.log.radar.size(); ++k) {
    const Vec3 v_body = r.ground_truth[k].R.transpose() * r.gt_velocity[k];
    for (const auto& p : r.log.radar[k].points) {
      ++total;
      if (std::abs(p.doppler + p.position.normalized().dot(v_body)) > 1e-6) ++bad;
    }
  }
  EXPECT_GT(total, 1000);
  const double rate = static_cast<double>(bad) / total;
  EXPECT_GT(rate, 0.2);
  EXPECT_LT(rate, 0.4);
}

TEST(SynthGenerate, InfeasibleTerrainThrows) {
  SynthScenario sc = line_scenario();
  sc.shape = "stair";
  sc.stair_count = 3;
  sc.stair_riser = 1.2;  // beyond leg reach
  sc.stair_start = 1.0;
  EXPECT_THROW(synth_generate(sc), InfeasibleIkError);
}

TEST(SynthGenerate, SaveLoadPreservesConsistency) {
  // Disk round trip keeps the log usable at micro precision.
  const auto r = synth_generate(line_scenario());
  const std::string dir = "/tmp/ralo_synth_roundtrip";
  save_log(r.log, dir);
  const SensorLog back = load_log(dir);
  ASSERT_EQ(back.radar.size(), r.log.radar.size());
  RansacParams params;
  for (std::size_t k = 0; k < back.radar.size(); k += 10) {
    const auto est = estimate_ego_velocity(back.radar[k], params);
    ASSERT_TRUE(est.valid);
    const Vec3 v_body = r.ground_truth[k].R.transpose() * r.gt_velocity[k];
    EXPECT_LT((est.v_hat - v_body).norm(), 1e-8);
  }
}
