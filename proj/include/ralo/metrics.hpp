// Trajectory metrics: ATE (translation, rotation, z-only) and RTE over
// fixed-path-length sub-trajectories, with translation+yaw (posyaw)
// alignment consistent with 4-DoF estimation.

#ifndef RALO_METRICS_HPP_
#define RALO_METRICS_HPP_

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ralo/geom.hpp"
#include "ralo/io.hpp"

namespace ralo {

struct InsufficientOverlapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TooShortError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class AlignMode { kPosYaw, kNone };

inline std::string to_string(AlignMode m) {
  return m == AlignMode::kPosYaw ? "posyaw" : "none";
}

struct PosYawTransform {
  double yaw = 0.0;
  Vec3 translation = Vec3::Zero();

  Rot3 rotation() const { return so3_exp(Vec3(0, 0, yaw)); }
  Vec3 apply(const Vec3& p) const { return rotation() * p + translation; }
};

struct MetricsReport {
  double ate_t = 0.0;      // m
  double ate_r = 0.0;      // deg
  double rte_t = 0.0;      // m
  double rte_r = 0.0;      // deg
  double ate_z = 0.0;      // m
  AlignMode align = AlignMode::kPosYaw;
  double sub_length = 10.0;  // m
  int matched_pairs = 0;
  int dropped_poses = 0;
};

namespace metrics_detail {

struct PosePair {
  TrajectoryPose est;
  TrajectoryPose ref;
};

// Nearest-neighbour association within 20 ms; unmatched poses are dropped.
inline std::vector<PosePair> associate(const Trajectory& est, const Trajectory& ref,
                                       int* dropped = nullptr,
                                       double max_dt = 0.02) {
  std::vector<PosePair> out;
  int miss = 0;
  std::size_t j = 0;
  for (const auto& e : est) {
    while (j + 1 < ref.size() &&
           std::abs(ref[j + 1].timestamp - e.timestamp) <=
               std::abs(ref[j].timestamp - e.timestamp)) {
      ++j;
    }
    if (!ref.empty() && std::abs(ref[j].timestamp - e.timestamp) <= max_dt) {
      out.push_back({e, ref[j]});
    } else {
      ++miss;
    }
  }
  if (dropped) *dropped = miss;
  return out;
}

inline double yaw_of(const Rot3& R) { return std::atan2(R(1, 0), R(0, 0)); }

inline double geodesic_deg(const Rot3& a, const Rot3& b) {
  return so3_log(a.transpose() * b).norm() * 180.0 / M_PI;
}

// Translation+yaw minimizing the position RMSE over the pairs.
inline PosYawTransform fit_posyaw(const std::vector<PosePair>& pairs) {
  Vec3 ce = Vec3::Zero(), cr = Vec3::Zero();
  for (const auto& pr : pairs) {
    ce += pr.est.p;
    cr += pr.ref.p;
  }
  ce /= pairs.size();
  cr /= pairs.size();
  double cross = 0.0, dot = 0.0;
  for (const auto& pr : pairs) {
    const Vec3 e = pr.est.p - ce;
    const Vec3 r = pr.ref.p - cr;
    cross += e.x() * r.y() - e.y() * r.x();
    dot += e.x() * r.x() + e.y() * r.y();
  }
  PosYawTransform T;
  T.yaw = (cross == 0.0 && dot == 0.0) ? 0.0 : std::atan2(cross, dot);
  T.translation = cr - T.rotation() * ce;
  return T;
}

}  // namespace metrics_detail

/// Least-squares translation+yaw aligning `est` onto `ref`. Requires at least
/// two time-associated pose pairs.
inline PosYawTransform align_posyaw(const Trajectory& est, const Trajectory& ref) {
  const auto pairs = metrics_detail::associate(est, ref);
  if (pairs.size() < 2) {
    throw InsufficientOverlapError("align_posyaw: fewer than 2 associated pairs");
  }
  return metrics_detail::fit_posyaw(pairs);
}

/// Absolute trajectory error after optional posyaw alignment:
/// (RMSE position, RMSE geodesic rotation angle in degrees, RMSE z error).
inline std::tuple<double, double, double> ate(const Trajectory& est,
                                              const Trajectory& ref,
                                              AlignMode align = AlignMode::kPosYaw,
                                              MetricsReport* report = nullptr) {
  int dropped = 0;
  const auto pairs = metrics_detail::associate(est, ref, &dropped);
  if (pairs.size() < 2) {
    throw InsufficientOverlapError("ate: fewer than 2 associated pairs");
  }
  PosYawTransform T;
  if (align == AlignMode::kPosYaw) T = metrics_detail::fit_posyaw(pairs);

  double sum_t = 0.0, sum_r = 0.0, sum_z = 0.0;
  for (const auto& pr : pairs) {
    const Vec3 err = T.apply(pr.est.p) - pr.ref.p;
    sum_t += err.squaredNorm();
    sum_z += err.z() * err.z();
    const double ang = metrics_detail::geodesic_deg(pr.ref.R, T.rotation() * pr.est.R);
    sum_r += ang * ang;
  }
  const double n = static_cast<double>(pairs.size());
  const double ate_t = std::sqrt(sum_t / n);
  const double ate_r = std::sqrt(sum_r / n);
  const double ate_z = std::sqrt(sum_z / n);
  if (report) {
    report->ate_t = ate_t;
    report->ate_r = ate_r;
    report->ate_z = ate_z;
    report->align = align;
    report->matched_pairs = static_cast<int>(pairs.size());
    report->dropped_poses = dropped;
  }
  return {ate_t, ate_r, ate_z};
}

/// Relative trajectory error: for every start pose, the sub-trajectory of the
/// given reference path length is aligned by its first pose (translation +
/// yaw) and the end-pose error recorded; RMSE over all sub-trajectories.
inline std::pair<double, double> rte(const Trajectory& est, const Trajectory& ref,
                                     double sub_length = 10.0,
                                     MetricsReport* report = nullptr) {
  using metrics_detail::yaw_of;
  const auto pairs = metrics_detail::associate(est, ref);
  if (pairs.size() < 2) {
    throw InsufficientOverlapError("rte: fewer than 2 associated pairs");
  }
  // Cumulative reference path length.
  std::vector<double> arc(pairs.size(), 0.0);
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    arc[i] = arc[i - 1] + (pairs[i].ref.p - pairs[i - 1].ref.p).norm();
  }
  if (arc.back() < sub_length) {
    throw TooShortError("rte: trajectory shorter than sub_length");
  }

  double sum_t = 0.0, sum_r = 0.0;
  int count = 0;
  std::size_t end = 0;
  for (std::size_t start = 0; start < pairs.size(); ++start) {
    if (end < start) end = start;
    while (end < pairs.size() && arc[end] - arc[start] < sub_length) ++end;
    if (end == pairs.size()) break;

    PosYawTransform T;
    T.yaw = wrap_angle(yaw_of(pairs[start].ref.R) - yaw_of(pairs[start].est.R));
    T.translation = pairs[start].ref.p - T.rotation() * pairs[start].est.p;

    const Vec3 err = T.apply(pairs[end].est.p) - pairs[end].ref.p;
    sum_t += err.squaredNorm();
    const double ang =
        metrics_detail::geodesic_deg(pairs[end].ref.R, T.rotation() * pairs[end].est.R);
    sum_r += ang * ang;
    ++count;
  }
  if (count == 0) throw TooShortError("rte: no full-length sub-trajectory");
  const double rte_t = std::sqrt(sum_t / count);
  const double rte_r = std::sqrt(sum_r / count);
  if (report) {
    report->rte_t = rte_t;
    report->rte_r = rte_r;
    report->sub_length = sub_length;
  }
  return {rte_t, rte_r};
}

/// Full report; the CSV row follows the header
/// `ate_t,ate_r,rte_t,rte_r,ate_z,align,sub_length`.
inline MetricsReport evaluate_trajectories(const Trajectory& est, const Trajectory& ref,
                                           AlignMode align = AlignMode::kPosYaw,
                                           double sub_length = 10.0) {
  MetricsReport report;
  ate(est, ref, align, &report);
  try {
    rte(est, ref, sub_length, &report);
  } catch (const TooShortError&) {
    report.rte_t = report.rte_r = 0.0;
    report.sub_length = sub_length;
  }
  return report;
}

inline std::string metrics_csv_header() {
  return "ate_t,ate_r,rte_t,rte_r,ate_z,align,sub_length";
}

inline std::string metrics_csv_row(const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g,%.9g,%s,%.9g", r.ate_t,
                r.ate_r, r.rte_t, r.rte_r, r.ate_z, to_string(r.align).c_str(),
                r.sub_length);
  return buf;
}

}  // namespace ralo

#endif  // RALO_METRICS_HPP_
