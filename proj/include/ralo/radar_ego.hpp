// Per-scan 3D ego-velocity from a single chip radar: two-staged decoupled
// RANSAC (xy plane first, then the z direction with the horizontal velocity
// held fixed) followed by a least-squares refinement over the surviving
// inliers.
//
// Measurement model for a static point at position p with unit direction
// d = p/|p|: doppler = -d^T v (closing targets report negative radial
// velocity). The xy stage evaluates the full 3D direction in its residual,
// -(x v_x + y v_y)/|p|, which coincides with the classic sinusoid in
// theta_xy when z = 0 and stays unbiased for high-elevation points.

#ifndef RALO_RADAR_EGO_HPP_
#define RALO_RADAR_EGO_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "ralo/geom.hpp"

namespace ralo {

struct RadarPoint {
  Vec3 position = Vec3::Zero();  // m, sensor frame
  double doppler = 0.0;          // m/s, radial velocity, positive = receding
  double intensity = -1.0;       // dB, -1 when absent
};

struct RadarScan {
  double timestamp = 0.0;  // s
  std::vector<RadarPoint> points;
};

struct RansacParams {
  int max_iterations_xy = 100;
  int max_iterations_xz = 50;
  double inlier_threshold_xy = 0.15;  // m/s
  double inlier_threshold_xz = 0.15;  // m/s
  int min_points = 5;
  double min_inlier_ratio = 0.2;
  double sigma_doppler = 0.1;  // m/s, drives the LSQ covariance
  bool use_xz_stage = true;    // ablation switch: false = single-RANSAC baseline
};

struct EgoVelEstimate {
  Vec3 v_hat = Vec3::Zero();     // m/s, sensor/body frame
  std::vector<bool> inlier_mask; // per scan point
  Mat3 covariance = Mat3::Zero();
  bool valid = false;
  bool vz_degenerate = false;    // xz consensus empty, z variance inflated
};

struct RansacXyResult {
  double v_x = 0.0;
  double v_y = 0.0;
  std::vector<int> inliers;
  bool valid = false;
};

struct RansacXzResult {
  double v_z = 0.0;
  std::vector<int> inliers;
  bool valid = false;
  bool degenerate = false;  // consensus empty, v_z pinned to 0
};

namespace detail {

inline double residual_xy(const RadarPoint& p, double vx, double vy) {
  return p.doppler + (p.position.x() * vx + p.position.y() * vy) / p.position.norm();
}

inline double residual_xyz(const RadarPoint& p, double vx, double vy, double vz) {
  return p.doppler +
         (p.position.x() * vx + p.position.y() * vy + p.position.z() * vz) /
             p.position.norm();
}

// Sampling is seeded from the scan timestamp so runs are reproducible.
inline std::uint64_t scan_seed(double timestamp, std::uint64_t stage) {
  const auto ns = static_cast<std::uint64_t>(std::llround(timestamp * 1e9));
  return (ns ^ 0x9e3779b97f4a7c15ULL) + stage * 0xbf58476d1ce4e5b9ULL;
}

}  // namespace detail

/// xy-plane stage: 2-point RANSAC over (v_x, v_y) with a least-squares refit
/// on the consensus set. Points with zero horizontal range are unusable.
inline RansacXyResult ransac_xy(const RadarScan& scan, const RansacParams& params) {
  RansacXyResult out;
  std::vector<int> usable;
  usable.reserve(scan.points.size());
  for (int i = 0; i < static_cast<int>(scan.points.size()); ++i) {
    const auto& p = scan.points[i].position;
    if (p.head<2>().norm() > 0.0 && p.norm() > 0.0) usable.push_back(i);
  }
  if (static_cast<int>(usable.size()) < params.min_points) return out;

  std::mt19937_64 rng(detail::scan_seed(scan.timestamp, 1));
  std::uniform_int_distribution<std::size_t> pick(0, usable.size() - 1);

  const double thr = params.inlier_threshold_xy;
  int best_count = -1;
  double best_vx = 0.0, best_vy = 0.0;
  for (int it = 0; it < params.max_iterations_xy; ++it) {
    const int ia = usable[pick(rng)];
    const int ib = usable[pick(rng)];
    if (ia == ib) continue;
    const auto& a = scan.points[ia];
    const auto& b = scan.points[ib];
    // Two-point hypothesis: solve the 2x2 system d_xy^T v = -doppler.
    Eigen::Matrix2d A;
    A << a.position.x() / a.position.norm(), a.position.y() / a.position.norm(),
         b.position.x() / b.position.norm(), b.position.y() / b.position.norm();
    if (std::abs(A.determinant()) < 1e-9) continue;
    const Eigen::Vector2d v = A.inverse() * Eigen::Vector2d(-a.doppler, -b.doppler);
    int count = 0;
    for (int i : usable) {
      if (std::abs(detail::residual_xy(scan.points[i], v.x(), v.y())) <= thr) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best_vx = v.x();
      best_vy = v.y();
    }
  }
  if (best_count < params.min_points ||
      best_count < params.min_inlier_ratio * static_cast<double>(usable.size())) {
    return out;
  }

  // Refit on the consensus set, then recompute it with the refined model;
  // repeat until the set stabilizes.
  double vx = best_vx, vy = best_vy;
  std::vector<int> inliers;
  for (int round = 0; round < 5; ++round) {
    std::vector<int> next;
    for (int i : usable) {
      if (std::abs(detail::residual_xy(scan.points[i], vx, vy)) <= thr) {
        next.push_back(i);
      }
    }
    if (static_cast<int>(next.size()) < 2) break;
    Eigen::Matrix2d AtA = Eigen::Matrix2d::Zero();
    Eigen::Vector2d Atb = Eigen::Vector2d::Zero();
    for (int i : next) {
      const auto& p = scan.points[i];
      const Eigen::Vector2d d = p.position.head<2>() / p.position.norm();
      AtA += d * d.transpose();
      Atb += d * (-p.doppler);
    }
    if (std::abs(AtA.determinant()) < 1e-12) break;
    const Eigen::Vector2d v = AtA.ldlt().solve(Atb);
    const bool settled = (next == inliers);
    vx = v.x();
    vy = v.y();
    inliers = std::move(next);
    if (settled) break;
  }
  // Final membership under the returned model.
  inliers.clear();
  for (int i : usable) {
    if (std::abs(detail::residual_xy(scan.points[i], vx, vy)) <= thr) {
      inliers.push_back(i);
    }
  }
  if (static_cast<int>(inliers.size()) < params.min_points ||
      inliers.size() < params.min_inlier_ratio * usable.size()) {
    return out;
  }
  out.v_x = vx;
  out.v_y = vy;
  out.inliers = std::move(inliers);
  out.valid = true;
  return out;
}

/// z-direction stage: 1-point RANSAC over v_z with (v_x, v_y) held fixed.
/// Rejects points whose elevation is inconsistent with the hypothesis; the
/// returned inliers are always a subset of xy_inliers. The v_z = 0 hypothesis
/// is always evaluated, so all-planar scans keep every point.
inline RansacXzResult ransac_xz(const RadarScan& scan,
                                const std::vector<int>& xy_inliers, double v_x,
                                double v_y, const RansacParams& params) {
  RansacXzResult out;
  if (xy_inliers.empty() || !std::isfinite(v_x) || !std::isfinite(v_y)) return out;

  std::mt19937_64 rng(detail::scan_seed(scan.timestamp, 2));
  std::uniform_int_distribution<std::size_t> pick(0, xy_inliers.size() - 1);
  const double thr = params.inlier_threshold_xz;

  auto count_inliers = [&](double vz) {
    int count = 0;
    for (int i : xy_inliers) {
      if (std::abs(detail::residual_xyz(scan.points[i], v_x, v_y, vz)) <= thr) {
        ++count;
      }
    }
    return count;
  };

  double best_vz = 0.0;
  int best_count = count_inliers(0.0);
  for (int it = 0; it < params.max_iterations_xz; ++it) {
    const auto& p = scan.points[xy_inliers[pick(rng)]];
    const double r = p.position.norm();
    if (std::abs(p.position.z()) < 1e-6 * r) continue;
    const double vz =
        (-p.doppler * r - p.position.x() * v_x - p.position.y() * v_y) /
        p.position.z();
    const int count = count_inliers(vz);
    if (count > best_count) {
      best_count = count;
      best_vz = vz;
    }
  }
  if (best_count == 0) {
    // Nothing fits even v_z = 0: keep the xy set, flag the axis degenerate.
    out.v_z = 0.0;
    out.inliers = xy_inliers;
    out.valid = true;
    out.degenerate = true;
    return out;
  }

  // 1-parameter least-squares refit over the consensus, then recompute.
  double vz = best_vz;
  for (int round = 0; round < 5; ++round) {
    double num = 0.0, den = 0.0;
    int members = 0;
    for (int i : xy_inliers) {
      if (std::abs(detail::residual_xyz(scan.points[i], v_x, v_y, vz)) > thr) continue;
      ++members;
      const auto& p = scan.points[i];
      const double r = p.position.norm();
      const double dz = p.position.z() / r;
      num += dz * (-p.doppler - (p.position.x() * v_x + p.position.y() * v_y) / r);
      den += dz * dz;
    }
    if (members == 0 || den < 1e-12) break;
    const double next = num / den;
    if (std::abs(next - vz) < 1e-14) {
      vz = next;
      break;
    }
    vz = next;
  }
  out.v_z = vz;
  for (int i : xy_inliers) {
    if (std::abs(detail::residual_xyz(scan.points[i], v_x, v_y, vz)) <= thr) {
      out.inliers.push_back(i);
    }
  }
  if (out.inliers.empty()) {
    out.v_z = 0.0;
    out.inliers = xy_inliers;
    out.degenerate = true;
  }
  out.valid = true;
  return out;
}

/// Full 3-parameter least squares over the given inlier set. Covariance is
/// sigma_doppler^2 (A^T A)^-1; rank deficiency (condition number of A^T A
/// above 1e8) yields valid = false.
inline EgoVelEstimate lsq_velocity(const RadarScan& scan,
                                   const std::vector<int>& inliers,
                                   double sigma_doppler = 0.1) {
  EgoVelEstimate out;
  out.inlier_mask.assign(scan.points.size(), false);
  if (static_cast<int>(inliers.size()) < 3) return out;

  Mat3 AtA = Mat3::Zero();
  Vec3 Atb = Vec3::Zero();
  for (int i : inliers) {
    const auto& p = scan.points[i];
    const Vec3 d = p.position / p.position.norm();
    AtA += d * d.transpose();
    Atb += d * (-p.doppler);
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(AtA);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (lo <= 0.0 || hi / lo > 1e8) return out;  // coplanar directions

  out.v_hat = AtA.ldlt().solve(Atb);
  out.covariance = sigma_doppler * sigma_doppler * AtA.inverse();
  for (int i : inliers) out.inlier_mask[i] = true;
  out.valid = true;
  return out;
}

/// Composes the two RANSAC stages and the LSQ refinement. Failures are
/// encoded in the valid flag (never thrown) so the estimator can skip the
/// scan.
inline EgoVelEstimate estimate_ego_velocity(const RadarScan& scan,
                                            const RansacParams& params) {
  const RansacXyResult xy = ransac_xy(scan, params);
  if (!xy.valid) {
    EgoVelEstimate out;
    out.inlier_mask.assign(scan.points.size(), false);
    return out;
  }
  std::vector<int> inliers = xy.inliers;
  bool vz_degenerate = false;
  if (params.use_xz_stage) {
    const RansacXzResult xz = ransac_xz(scan, xy.inliers, xy.v_x, xy.v_y, params);
    if (xz.valid) {
      inliers = xz.inliers;
      vz_degenerate = xz.degenerate;
    }
  }
  EgoVelEstimate out = lsq_velocity(scan, inliers, params.sigma_doppler);
  out.vz_degenerate = vz_degenerate;
  if (out.valid && vz_degenerate) {
    out.covariance(2, 2) += 100.0 * params.sigma_doppler * params.sigma_doppler;
  }
  return out;
}

}  // namespace ralo

#endif  // RALO_RADAR_EGO_HPP_
