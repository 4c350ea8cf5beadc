// Sensor-log ingestion and trajectory I/O.
//
// On-disk layout: a directory of CSVs with fixed column order --
//   radar.csv    t,x,y,z,doppler,intensity,scan_id
//   imu.csv      t,wx,wy,wz,ax,ay,az[,qw,qx,qy,qz]
//   joints.csv   t,q0..q11,dq0..dq11
//   contacts.csv t,c0,c1,c2,c3
//   gt.txt       TUM trajectory (optional)
//   meta.txt     key = value conventions (optional; doppler_sign)
// Trajectories use the TUM convention `timestamp tx ty tz qx qy qz qw`,
// 9 significant digits.

#ifndef RALO_IO_HPP_
#define RALO_IO_HPP_

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "ralo/config.hpp"
#include "ralo/geom.hpp"
#include "ralo/leg_kin.hpp"
#include "ralo/radar_ego.hpp"

namespace ralo {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MonotonicityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ImuSample {
  double timestamp = 0.0;
  Vec3 angular_velocity = Vec3::Zero();     // rad/s, body frame
  Vec3 linear_acceleration = Vec3::Zero();  // m/s^2, specific force
  Rot3 orientation = Mat3::Identity();      // optional attitude output
  bool has_orientation = false;
};

struct TrajectoryPose {
  double timestamp = 0.0;
  Vec3 p = Vec3::Zero();
  Rot3 R = Mat3::Identity();
};

using Trajectory = std::vector<TrajectoryPose>;

struct SensorLog {
  std::vector<RadarScan> radar;
  std::vector<ImuSample> imu;
  std::vector<JointState> joints;
  std::vector<ContactState> contacts;
  Trajectory ground_truth;
  double doppler_sign = -1.0;  // doppler = sign * d^T v for static points
};

namespace io_detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline double parse_double(const std::string& s, const std::string& file, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == 0) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(file + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
}

inline void check_header(const std::vector<std::string>& got,
                         const std::vector<std::string>& expect_prefix,
                         const std::string& file) {
  if (got.size() < expect_prefix.size()) {
    throw SchemaError(file + ": expected columns " +
                      std::to_string(expect_prefix.size()) + ", got " +
                      std::to_string(got.size()));
  }
  for (std::size_t i = 0; i < expect_prefix.size(); ++i) {
    if (got[i] != expect_prefix[i]) {
      throw SchemaError(file + ": column " + std::to_string(i) + " is '" + got[i] +
                        "', expected '" + expect_prefix[i] + "'");
    }
  }
}

inline std::string fmt_time(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9f", t);
  return buf;
}

inline std::string fmt_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace io_detail

/// One pose per line: `timestamp tx ty tz qx qy qz qw`, 9 significant digits.
inline void write_trajectory(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  char buf[256];
  for (const auto& pose : traj) {
    Eigen::Quaterniond q(pose.R);
    q.normalize();
    std::snprintf(buf, sizeof(buf), "%.9f %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n",
                  pose.timestamp, pose.p.x(), pose.p.y(), pose.p.z(), q.x(), q.y(),
                  q.z(), q.w());
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

inline Trajectory read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  Trajectory traj;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    TrajectoryPose pose;
    double qx, qy, qz, qw;
    if (!(ss >> pose.timestamp >> pose.p.x() >> pose.p.y() >> pose.p.z() >> qx >>
          qy >> qz >> qw)) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad pose line");
    }
    Eigen::Quaterniond q(qw, qx, qy, qz);
    if (q.norm() < 1e-9) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": zero quaternion");
    }
    pose.R = q.normalized().toRotationMatrix();
    if (!traj.empty() && pose.timestamp < traj.back().timestamp) {
      throw MonotonicityError(path + ":" + std::to_string(lineno) +
                              ": timestamps not sorted");
    }
    traj.push_back(pose);
  }
  return traj;
}

/// Parses and validates a sensor-log directory. Streams must be time-sorted;
/// the offending row is named otherwise.
inline SensorLog load_log(const std::string& dir) {
  namespace fs = std::filesystem;
  using io_detail::check_header;
  using io_detail::parse_double;
  using io_detail::split;

  if (!fs::is_directory(dir)) throw IoError("not a log directory: " + dir);
  SensorLog log;

  const std::string meta_path = dir + "/meta.txt";
  if (fs::exists(meta_path)) {
    const Config meta = Config::from_file(meta_path);
    log.doppler_sign = meta.get_double("doppler_sign", -1.0);
  }

  {
    const std::string path = dir + "/radar.csv";
    std::ifstream in(path);
    if (!in) throw IoError("missing file: " + path);
    std::string line;
    int lineno = 0;
    std::getline(in, line);
    ++lineno;
    check_header(split(line, ','), {"t", "x", "y", "z", "doppler", "intensity",
                                    "scan_id"}, path);
    long prev_scan = -1;
    double prev_t = -1e300;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto f = split(line, ',');
      if (f.size() != 7) {
        throw SchemaError(path + ":" + std::to_string(lineno) + ": expected 7 columns");
      }
      const double t = parse_double(f[0], path, lineno);
      const long scan_id = static_cast<long>(parse_double(f[6], path, lineno));
      if (scan_id != prev_scan) {
        if (t <= prev_t) {
          throw MonotonicityError(path + ":" + std::to_string(lineno) +
                                  ": scan timestamps not strictly increasing");
        }
        log.radar.emplace_back();
        log.radar.back().timestamp = t;
        prev_scan = scan_id;
        prev_t = t;
      }
      RadarPoint p;
      p.position = Vec3(parse_double(f[1], path, lineno),
                        parse_double(f[2], path, lineno),
                        parse_double(f[3], path, lineno));
      p.doppler = parse_double(f[4], path, lineno);
      if (log.doppler_sign > 0) p.doppler = -p.doppler;  // internal: -d^T v
      p.intensity = parse_double(f[5], path, lineno);
      if (p.position.norm() > 0.0) log.radar.back().points.push_back(p);
    }
  }

  {
    const std::string path = dir + "/imu.csv";
    std::ifstream in(path);
    if (!in) throw IoError("missing file: " + path);
    std::string line;
    int lineno = 0;
    std::getline(in, line);
    ++lineno;
    const auto header = split(line, ',');
    check_header(header, {"t", "wx", "wy", "wz", "ax", "ay", "az"}, path);
    const bool with_quat = header.size() >= 11;
    double prev_t = -1e300;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto f = split(line, ',');
      if (f.size() != (with_quat ? 11u : 7u)) {
        throw SchemaError(path + ":" + std::to_string(lineno) + ": bad column count");
      }
      ImuSample s;
      s.timestamp = parse_double(f[0], path, lineno);
      if (s.timestamp <= prev_t) {
        throw MonotonicityError(path + ":" + std::to_string(lineno) +
                                ": imu timestamps not sorted");
      }
      prev_t = s.timestamp;
      for (int k = 0; k < 3; ++k) {
        s.angular_velocity[k] = parse_double(f[1 + k], path, lineno);
        s.linear_acceleration[k] = parse_double(f[4 + k], path, lineno);
      }
      if (with_quat) {
        const Eigen::Quaterniond q(parse_double(f[7], path, lineno),
                                   parse_double(f[8], path, lineno),
                                   parse_double(f[9], path, lineno),
                                   parse_double(f[10], path, lineno));
        s.orientation = q.normalized().toRotationMatrix();
        s.has_orientation = true;
      }
      log.imu.push_back(s);
    }
  }

  {
    const std::string path = dir + "/joints.csv";
    std::ifstream in(path);
    if (!in) throw IoError("missing file: " + path);
    std::string line;
    int lineno = 0;
    std::getline(in, line);
    ++lineno;
    check_header(split(line, ','), {"t", "q0"}, path);
    double prev_t = -1e300;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto f = split(line, ',');
      if (f.size() != 25) {
        throw SchemaError(path + ":" + std::to_string(lineno) + ": expected 25 columns");
      }
      JointState s;
      s.timestamp = parse_double(f[0], path, lineno);
      if (s.timestamp <= prev_t) {
        throw MonotonicityError(path + ":" + std::to_string(lineno) +
                                ": joint timestamps not sorted");
      }
      prev_t = s.timestamp;
      for (int k = 0; k < 12; ++k) {
        s.angles[k] = parse_double(f[1 + k], path, lineno);
        s.velocities[k] = parse_double(f[13 + k], path, lineno);
      }
      log.joints.push_back(s);
    }
  }

  {
    const std::string path = dir + "/contacts.csv";
    std::ifstream in(path);
    if (!in) throw IoError("missing file: " + path);
    std::string line;
    int lineno = 0;
    std::getline(in, line);
    ++lineno;
    check_header(split(line, ','), {"t", "c0", "c1", "c2", "c3"}, path);
    double prev_t = -1e300;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto f = split(line, ',');
      if (f.size() != 5) {
        throw SchemaError(path + ":" + std::to_string(lineno) + ": expected 5 columns");
      }
      ContactState s;
      s.timestamp = parse_double(f[0], path, lineno);
      if (s.timestamp <= prev_t) {
        throw MonotonicityError(path + ":" + std::to_string(lineno) +
                                ": contact timestamps not sorted");
      }
      prev_t = s.timestamp;
      for (int k = 0; k < 4; ++k) {
        s.in_contact[k] = parse_double(f[1 + k], path, lineno) != 0.0;
      }
      log.contacts.push_back(s);
    }
  }

  const std::string gt_path = dir + "/gt.txt";
  if (fs::exists(gt_path)) log.ground_truth = read_trajectory(gt_path);
  return log;
}

/// Writes a SensorLog as the CSV directory schema; load_log of the result
/// reproduces the parsed values.
inline void save_log(const SensorLog& log, const std::string& dir) {
  namespace fs = std::filesystem;
  using io_detail::fmt_time;
  using io_detail::fmt_value;
  fs::create_directories(dir);

  {
    std::ofstream out(dir + "/radar.csv");
    if (!out) throw IoError("cannot write " + dir + "/radar.csv");
    out << "t,x,y,z,doppler,intensity,scan_id\n";
    long scan_id = 0;
    for (const auto& scan : log.radar) {
      for (const auto& p : scan.points) {
        const double doppler = log.doppler_sign > 0 ? -p.doppler : p.doppler;
        out << fmt_time(scan.timestamp) << ',' << fmt_value(p.position.x()) << ','
            << fmt_value(p.position.y()) << ',' << fmt_value(p.position.z()) << ','
            << fmt_value(doppler) << ',' << fmt_value(p.intensity) << ','
            << scan_id << '\n';
      }
      ++scan_id;
    }
  }
  {
    std::ofstream out(dir + "/imu.csv");
    const bool with_quat = !log.imu.empty() && log.imu.front().has_orientation;
    out << "t,wx,wy,wz,ax,ay,az";
    if (with_quat) out << ",qw,qx,qy,qz";
    out << '\n';
    for (const auto& s : log.imu) {
      out << fmt_time(s.timestamp);
      for (int k = 0; k < 3; ++k) out << ',' << fmt_value(s.angular_velocity[k]);
      for (int k = 0; k < 3; ++k) out << ',' << fmt_value(s.linear_acceleration[k]);
      if (with_quat) {
        Eigen::Quaterniond q(s.orientation);
        q.normalize();
        out << ',' << fmt_value(q.w()) << ',' << fmt_value(q.x()) << ','
            << fmt_value(q.y()) << ',' << fmt_value(q.z());
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(dir + "/joints.csv");
    out << "t";
    for (int k = 0; k < 12; ++k) out << ",q" << k;
    for (int k = 0; k < 12; ++k) out << ",dq" << k;
    out << '\n';
    for (const auto& s : log.joints) {
      out << fmt_time(s.timestamp);
      for (int k = 0; k < 12; ++k) out << ',' << fmt_value(s.angles[k]);
      for (int k = 0; k < 12; ++k) out << ',' << fmt_value(s.velocities[k]);
      out << '\n';
    }
  }
  {
    std::ofstream out(dir + "/contacts.csv");
    out << "t,c0,c1,c2,c3\n";
    for (const auto& s : log.contacts) {
      out << fmt_time(s.timestamp);
      for (int k = 0; k < 4; ++k) out << ',' << (s.in_contact[k] ? 1 : 0);
      out << '\n';
    }
  }
  {
    std::ofstream out(dir + "/meta.txt");
    out << "doppler_sign = " << (log.doppler_sign > 0 ? "1" : "-1") << '\n';
    out << "radar_rate_hz = 20\nimu_rate_hz = 100\njoint_rate_hz = 180\n";
    out << "frame = body\nunits = s,m,rad\n";
  }
  if (!log.ground_truth.empty()) write_trajectory(log.ground_truth, dir + "/gt.txt");
}

}  // namespace ralo

#endif  // RALO_IO_HPP_
