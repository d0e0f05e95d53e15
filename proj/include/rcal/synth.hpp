#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rcal/correspondence.hpp"
#include "rcal/geometry.hpp"
#include "rcal/solver.hpp"

namespace rcal {

enum class TrajectoryKind { Linear, Circular, Waypoints };

// Target motion in the radar frame. Linear: start + velocity * t. Circular:
// horizontal circle around `center` at angular_rate, starting at `phase`.
// Waypoints: piecewise-linear through (time, point) pairs, clamped at the ends.
struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::Linear;
  std::int64_t object_id = 0;
  std::string class_label;

  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();

  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.0;
  double angular_rate = 0.0;
  double phase = 0.0;

  std::vector<double> waypoint_times;
  std::vector<Eigen::Vector3d> waypoints;

  Eigen::Vector3d position_at(double t) const {
    switch (kind) {
      case TrajectoryKind::Linear:
        return start + t * velocity;
      case TrajectoryKind::Circular: {
        const double a = phase + angular_rate * t;
        return center + Eigen::Vector3d(radius * std::cos(a), radius * std::sin(a), 0.0);
      }
      case TrajectoryKind::Waypoints: {
        if (waypoints.empty()) {
          throw ConfigError("TrajectorySpec: waypoints trajectory without waypoints");
        }
        if (t <= waypoint_times.front()) return waypoints.front();
        if (t >= waypoint_times.back()) return waypoints.back();
        const auto it = std::upper_bound(waypoint_times.begin(), waypoint_times.end(), t);
        const std::size_t hi = static_cast<std::size_t>(it - waypoint_times.begin());
        const std::size_t lo = hi - 1;
        const double span = waypoint_times[hi] - waypoint_times[lo];
        const double alpha = span > 0.0 ? (t - waypoint_times[lo]) / span : 0.0;
        return (1.0 - alpha) * waypoints[lo] + alpha * waypoints[hi];
      }
    }
    throw ConfigError("TrajectorySpec: unknown trajectory kind");
  }

  void validate() const {
    if (kind == TrajectoryKind::Waypoints) {
      if (waypoints.size() < 2 || waypoints.size() != waypoint_times.size()) {
        throw ConfigError("TrajectorySpec: waypoints need >= 2 (time, point) pairs");
      }
      for (std::size_t i = 1; i < waypoint_times.size(); ++i) {
        if (!(waypoint_times[i] > waypoint_times[i - 1])) {
          throw ConfigError("TrajectorySpec: waypoint times must be strictly increasing");
        }
      }
    }
    if (kind == TrajectoryKind::Circular && !(radius >= 0.0)) {
      throw ConfigError("TrajectorySpec: radius must be >= 0");
    }
  }
};

struct SceneConfig {
  ExtrinsicPose true_pose;
  CameraIntrinsics k;
  int image_w = 1280;
  int image_h = 720;
  int n_frames = 1;
  double frame_rate = 30.0;
  std::vector<TrajectorySpec> targets;
  double pixel_noise_sigma = 0.0;
  double radar_range_sigma = 0.0;
  double radar_azimuth_sigma = 0.0;
  double radar_elevation_sigma = 0.0;
  double outlier_fraction = 0.0;
  double outlier_offset_px = 500.0;
  std::uint64_t seed = 0;

  void validate() const {
    k.validate();
    true_pose.validate();
    if (n_frames < 1) throw ConfigError("SceneConfig: n_frames must be >= 1");
    if (!(frame_rate > 0.0)) throw ConfigError("SceneConfig: frame_rate must be > 0");
    if (image_w < 1 || image_h < 1) throw ConfigError("SceneConfig: image dimensions must be positive");
    if (pixel_noise_sigma < 0.0 || radar_range_sigma < 0.0 || radar_azimuth_sigma < 0.0 ||
        radar_elevation_sigma < 0.0) {
      throw ConfigError("SceneConfig: noise sigmas must be >= 0");
    }
    if (!(outlier_fraction >= 0.0) || !(outlier_fraction < 1.0)) {
      throw ConfigError("SceneConfig: outlier_fraction must lie in [0,1)");
    }
    if (!(outlier_offset_px > 0.0)) {
      throw ConfigError("SceneConfig: outlier_offset_px must be > 0");
    }
    for (const TrajectorySpec& t : targets) t.validate();
  }
};

struct SyntheticDataset {
  std::vector<CameraDetection> camera_detections;
  std::vector<RadarDetection> radar_detections;
  ExtrinsicPose truth_pose;
  std::vector<char> outlier_flags;  // parallel to radar_detections
};

struct PoseError {
  double rotation_rad = 0.0;
  double translation_m = 0.0;
};

// Geodesic rotation distance plus Euclidean translation distance.
inline PoseError pose_error(const ExtrinsicPose& estimate, const ExtrinsicPose& truth) {
  estimate.validate();
  truth.validate();
  const Eigen::Matrix3d delta = estimate.rotation * truth.rotation.transpose();
  return PoseError{matrix_to_axis_angle(delta).angle(),
                   (estimate.translation - truth.translation).norm()};
}

namespace detail {

inline void spherical_from_cartesian(const Eigen::Vector3d& p, double& range, double& azimuth,
                                     double& elevation) {
  range = p.norm();
  azimuth = std::atan2(p.x(), p.y());
  elevation = range > 0.0 ? std::asin(std::clamp(p.z() / range, -1.0, 1.0)) : 0.0;
}

}  // namespace detail

// Simulate the rig: per frame and target, emit a radar detection (true point
// plus spherical noise, possibly displaced into a gross outlier) and a camera
// detection (exact projection plus pixel noise, dropped when it falls outside
// the image). Fully deterministic given the seed; the per-frame random stream
// is derived from (seed, frame_id).
inline SyntheticDataset generate_scene(const SceneConfig& cfg) {
  cfg.validate();

  SyntheticDataset out;
  out.truth_pose = cfg.true_pose;

  for (int frame = 0; frame < cfg.n_frames; ++frame) {
    const double t = static_cast<double>(frame) / cfg.frame_rate;
    std::mt19937_64 rng =
        rcal::detail::iteration_rng(cfg.seed, static_cast<std::uint64_t>(frame));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (const TrajectorySpec& target : cfg.targets) {
      const Eigen::Vector3d p_true = target.position_at(t);
      const double true_depth = (cfg.true_pose.rotation * p_true + cfg.true_pose.translation).z();
      if (true_depth <= 0.5) {
        throw ConfigError("generate_scene: trajectory reaches depth <= 0.5 m at frame " +
                          std::to_string(frame));
      }

      // radar stream: spherical noise around the true point
      double range, azimuth, elevation;
      detail::spherical_from_cartesian(p_true, range, azimuth, elevation);
      range = std::max(0.0, range + cfg.radar_range_sigma * gauss(rng));
      azimuth += cfg.radar_azimuth_sigma * gauss(rng);
      elevation += cfg.radar_elevation_sigma * gauss(rng);
      RadarPoint p_radar = radar_polar_to_cartesian(range, azimuth, elevation);

      const PixelPoint q_true = project(cfg.k, cfg.true_pose, RadarPoint::from(p_true)).pixel;

      // camera stream: exact projection of the true point plus pixel noise
      const double noise_u = cfg.pixel_noise_sigma * gauss(rng);
      const double noise_v = cfg.pixel_noise_sigma * gauss(rng);

      bool flagged = false;
      if (cfg.outlier_fraction > 0.0 && unit(rng) < cfg.outlier_fraction) {
        // Displace the radar detection so its projection lands at least
        // outlier_offset_px away from the true pixel, at the detection's depth.
        const double direction = 2.0 * M_PI * unit(rng);
        const double magnitude = cfg.outlier_offset_px * (1.0 + unit(rng));
        const double depth = std::max(
            0.5, (cfg.true_pose.rotation * p_radar.vec() + cfg.true_pose.translation).z());
        const Eigen::Vector3d pixel_h(q_true.u + magnitude * std::cos(direction),
                                      q_true.v + magnitude * std::sin(direction), 1.0);
        const Eigen::Vector3d cam_point = depth * (cfg.k.inverse_matrix() * pixel_h);
        p_radar = RadarPoint::from(cfg.true_pose.rotation.transpose() *
                                   (cam_point - cfg.true_pose.translation));
        flagged = true;
      }

      out.radar_detections.push_back(
          RadarDetection{frame, t, p_radar, target.object_id, std::nullopt});
      out.outlier_flags.push_back(flagged ? 1 : 0);

      const PixelPoint q{q_true.u + noise_u, q_true.v + noise_v};
      if (q.u >= 0.0 && q.u < cfg.image_w && q.v >= 0.0 && q.v < cfg.image_h) {
        out.camera_detections.push_back(
            CameraDetection{frame, t, q, target.object_id, target.class_label});
      }
    }
  }

  if (out.camera_detections.empty()) {
    throw EmptySceneError("generate_scene: configuration produced no visible detections");
  }
  return out;
}

}  // namespace rcal
