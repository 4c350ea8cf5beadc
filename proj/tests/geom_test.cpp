#include "ralo/geom.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ralo;

namespace {

std::mt19937_64 rng(42);

Vec3 random_vec3(double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Vec3(u(rng), u(rng), u(rng));
}

}  // namespace

TEST(Skew, ZeroVector) {
  EXPECT_EQ(skew(Vec3::Zero()), Mat3::Zero());
}

TEST(Skew, UnitZCrossProduct) {
  const Vec3 mapped = skew(Vec3(0, 0, 1)) * Vec3(1, 0, 0);
  EXPECT_NEAR((mapped - Vec3(0, 1, 0)).norm(), 0.0, 1e-15);
}

TEST(Skew, MatchesCrossProduct) {
  for (int i = 0; i < 50; ++i) {
    const Vec3 v = random_vec3(5.0), w = random_vec3(5.0);
    const Vec3 direct = v.cross(w);
    EXPECT_NEAR((skew(v) * w - direct).norm(), 0.0, 1e-13);
  }
}

TEST(Skew, Antisymmetric) {
  for (int i = 0; i < 20; ++i) {
    const Mat3 s = skew(random_vec3(10.0));
    EXPECT_EQ(s.transpose(), (-s).eval());
  }
}

TEST(So3Exp, Identity) {
  EXPECT_NEAR((so3_exp(Vec3::Zero()) - Mat3::Identity()).norm(), 0.0, 0.0);
}

TEST(So3Exp, QuarterTurnAboutZ) {
  const Rot3 R = so3_exp(Vec3(0, 0, M_PI / 2));
  EXPECT_NEAR((R * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm(), 0.0, 1e-15);
}

TEST(So3Exp, SmallAngleMatchesSeries) {
  const Vec3 w = Vec3(0.5, -0.3, 0.2).normalized() * 1e-10;
  const Rot3 series = Mat3::Identity() + skew(w);
  EXPECT_LT((so3_exp(w) - series).norm(), 1e-15);
}

TEST(So3Exp, InverseProperty) {
  for (int i = 0; i < 30; ++i) {
    const Vec3 v = random_vec3(3.0);
    EXPECT_LT((so3_exp(v) * so3_exp(-v) - Mat3::Identity()).norm(), 1e-12);
  }
}

TEST(So3Exp, ProducesRotations) {
  for (int i = 0; i < 30; ++i) {
    EXPECT_TRUE(is_rotation(so3_exp(random_vec3(4.0))));
  }
}

TEST(So3Log, Identity) {
  EXPECT_EQ(so3_log(Mat3::Identity()), Vec3::Zero());
}

TEST(So3Log, RoundTripRandom) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Vec3 v = random_vec3(1.0).normalized() * (u(rng) * (M_PI - 1e-6));
    EXPECT_LT((so3_log(so3_exp(v)) - v).norm(), 1e-9) << v.transpose();
  }
}

TEST(So3Log, ExpLogIsIdentityOnRotations) {
  for (int i = 0; i < 100; ++i) {
    const Rot3 R = so3_exp(random_vec3(3.0));
    EXPECT_LT((so3_exp(so3_log(R)) - R).norm(), 1e-9);
  }
}

TEST(So3Log, PiAboutX) {
  const Rot3 R = so3_exp(Vec3(M_PI, 0, 0));
  bool degraded = false;
  const Vec3 v = so3_log(R, &degraded);
  EXPECT_TRUE(degraded);
  EXPECT_LT((v.cwiseAbs() - Vec3(M_PI, 0, 0)).norm(), 1e-9);
  EXPECT_LT((so3_exp(v) - R).norm(), 1e-9);
}

TEST(So3Log, NormBoundedByPi) {
  for (int i = 0; i < 50; ++i) {
    const Rot3 R = so3_exp(random_vec3(10.0));
    EXPECT_LE(so3_log(R).norm(), M_PI + 1e-12);
  }
}

TEST(YprCompose, IdentityAtZero) {
  EXPECT_LT((ypr_compose(YprAngles()) - Mat3::Identity()).norm(), 1e-15);
}

TEST(YprCompose, PureYawKeepsZColumn) {
  const Rot3 R = ypr_compose(YprAngles(0, 0, 0.7));
  EXPECT_LT((R.col(2) - Vec3(0, 0, 1)).norm(), 1e-15);
  EXPECT_LT((R - so3_exp(Vec3(0, 0, 0.7))).norm(), 1e-15);
}

TEST(YprCompose, AlwaysProperRotation) {
  std::uniform_real_distribution<double> u(-M_PI, M_PI);
  for (int i = 0; i < 50; ++i) {
    EXPECT_TRUE(is_rotation(ypr_compose(YprAngles(u(rng), u(rng), u(rng)))));
  }
}

TEST(YprDecompose, Identity) {
  const YprAngles a = ypr_decompose(Mat3::Identity());
  EXPECT_EQ(a.roll, 0.0);
  EXPECT_EQ(a.pitch, 0.0);
  EXPECT_EQ(a.yaw, 0.0);
}

TEST(YprDecompose, RoundTripKnownAngles) {
  const YprAngles in(0.1, -0.2, 0.3);
  const YprAngles out = ypr_decompose(ypr_compose(in));
  EXPECT_NEAR(out.roll, 0.1, 1e-9);
  EXPECT_NEAR(out.pitch, -0.2, 1e-9);
  EXPECT_NEAR(out.yaw, 0.3, 1e-9);
}

TEST(YprDecompose, RoundTripRandomAwayFromGimbal) {
  std::uniform_real_distribution<double> ur(-M_PI + 1e-3, M_PI - 1e-3);
  std::uniform_real_distribution<double> up(-M_PI / 2 + 1e-2, M_PI / 2 - 1e-2);
  for (int i = 0; i < 100; ++i) {
    const YprAngles in(ur(rng), up(rng), ur(rng));
    const Rot3 R = ypr_compose(in);
    const YprAngles out = ypr_decompose(R);
    EXPECT_LT((ypr_compose(out) - R).norm(), 1e-9);
    EXPECT_NEAR(out.roll, in.roll, 1e-9);
    EXPECT_NEAR(out.pitch, in.pitch, 1e-9);
    EXPECT_NEAR(out.yaw, in.yaw, 1e-9);
  }
}

TEST(YprDecompose, GimbalLockThrows) {
  EXPECT_THROW(ypr_decompose(ypr_compose(YprAngles(0.0, M_PI / 2, 0.0))),
               GimbalLockError);
}

TEST(YprAngles, NormalizedToHalfOpenInterval) {
  const YprAngles a(3 * M_PI, -M_PI, 2 * M_PI);
  EXPECT_NEAR(a.roll, M_PI, 1e-12);
  EXPECT_NEAR(a.pitch, M_PI, 1e-12);  // -pi wraps to +pi
  EXPECT_NEAR(a.yaw, 0.0, 1e-12);
  EXPECT_GT(a.pitch, -M_PI);
  EXPECT_LE(a.pitch, M_PI);
}

TEST(WrapAngle, HalfOpenInterval) {
  EXPECT_NEAR(wrap_angle(M_PI), M_PI, 0.0);
  EXPECT_NEAR(wrap_angle(-M_PI), M_PI, 0.0);
  EXPECT_NEAR(wrap_angle(3 * M_PI / 2), -M_PI / 2, 1e-12);
}
