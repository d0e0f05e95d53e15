#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "rcal/error.hpp"

// Coordinate conventions used throughout:
//   radar frame:  x right, y forward (boresight), z up
//   camera frame: x right, y down, z forward (optical axis)
// The pinhole model is distortion-free; K maps camera coordinates to pixels.

namespace rcal {

// Depths below this are treated as "on the camera plane": projection undefined.
inline constexpr double kMinDepth = 1e-9;

// Finite stand-in residual/distance for points that project behind the camera.
inline constexpr double kBehindCameraSentinelPx = 1e6;

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d k;
    k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  Eigen::Matrix3d inverse_matrix() const {
    Eigen::Matrix3d inv;
    inv << 1.0 / fx, -skew / (fx * fy), (skew * cy - cx * fy) / (fx * fy),
        0.0, 1.0 / fy, -cy / fy,
        0.0, 0.0, 1.0;
    return inv;
  }

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) ||
        !std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(skew)) {
      throw InvalidArgumentError("CameraIntrinsics: fx and fy must be positive and all fields finite");
    }
  }
};

struct ExtrinsicPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Matrix<double, 3, 4> matrix() const {
    Eigen::Matrix<double, 3, 4> q;
    q.leftCols<3>() = rotation;
    q.col(3) = translation;
    return q;
  }

  // R must be orthonormal with det +1 to 1e-9 elementwise.
  void validate() const {
    if (!rotation.allFinite() || !translation.allFinite()) {
      throw InvalidArgumentError("ExtrinsicPose: non-finite entries");
    }
    const Eigen::Matrix3d gram = rotation * rotation.transpose();
    if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
      throw InvalidArgumentError("ExtrinsicPose: rotation is not orthonormal");
    }
    if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
      throw InvalidArgumentError("ExtrinsicPose: rotation determinant is not +1");
    }
  }
};

struct RadarPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Eigen::Vector3d vec() const { return {x, y, z}; }
  static RadarPoint from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;

  Eigen::Vector2d vec() const { return {u, v}; }
  bool finite() const { return std::isfinite(u) && std::isfinite(v); }
};

// Rotation axis scaled by the angle in radians; canonical magnitude is [0, pi].
struct AxisAngle {
  Eigen::Vector3d r = Eigen::Vector3d::Zero();

  double angle() const { return r.norm(); }
};

inline Eigen::Matrix3d skew_matrix(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

// Rodrigues formula. Below the small-angle threshold the two trigonometric
// coefficients are replaced by their second-order series so the map stays
// continuous through r = 0.
inline Eigen::Matrix3d axis_angle_to_matrix(const AxisAngle& aa) {
  if (!aa.r.allFinite()) {
    throw InvalidArgumentError("axis_angle_to_matrix: non-finite input");
  }
  const double theta = aa.r.norm();
  const Eigen::Matrix3d k = skew_matrix(aa.r);
  if (theta < 1e-8) {
    return Eigen::Matrix3d::Identity() + k + 0.5 * (k * k);
  }
  const double theta2 = theta * theta;
  return Eigen::Matrix3d::Identity() + (std::sin(theta) / theta) * k +
         ((1.0 - std::cos(theta)) / theta2) * (k * k);
}

// Inverse of the Rodrigues map, canonical angle in [0, pi]. Rotations close to
// pi are recovered from the symmetric part, where the usual skew-part formula
// loses the axis.
inline AxisAngle matrix_to_axis_angle(const Eigen::Matrix3d& rot) {
  if (!rot.allFinite()) {
    throw InvalidArgumentError("matrix_to_axis_angle: non-finite input");
  }
  const Eigen::Matrix3d gram = rot * rot.transpose();
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
      std::abs(rot.determinant() - 1.0) > 1e-6) {
    throw InvalidArgumentError("matrix_to_axis_angle: input is not a rotation matrix");
  }

  const double cos_theta =
      std::clamp((rot.trace() - 1.0) * 0.5, -1.0, 1.0);
  const Eigen::Vector3d w(0.5 * (rot(2, 1) - rot(1, 2)),
                          0.5 * (rot(0, 2) - rot(2, 0)),
                          0.5 * (rot(1, 0) - rot(0, 1)));
  // ||w|| = sin(theta) for theta in [0, pi]; atan2 keeps the angle accurate
  // where acos of the trace loses digits (both ends of the range).
  const double theta = std::atan2(w.norm(), cos_theta);

  if (theta < 1e-7) {
    // w = sin(theta) * axis; below this angle w and theta*axis agree to O(1e-21).
    return AxisAngle{w};
  }

  if (theta > M_PI - 1e-3) {
    // outer-product extraction: aa^T = (sym(R) - cos * I) / (1 - cos)
    const Eigen::Matrix3d outer =
        ((0.5 * (rot + rot.transpose())) - cos_theta * Eigen::Matrix3d::Identity()) /
        (1.0 - cos_theta);
    int k = 0;
    outer.diagonal().maxCoeff(&k);
    Eigen::Vector3d axis;
    axis[k] = std::sqrt(std::max(outer(k, k), 0.0));
    for (int i = 0; i < 3; ++i) {
      if (i != k) axis[i] = outer(i, k) / axis[k];
    }
    axis.normalize();
    const double align = w.dot(axis);
    if (align < -1e-12) {
      axis = -axis;
    } else if (align <= 1e-12) {
      // theta == pi: r and -r are the same rotation; pick the representative
      // whose first non-negligible component is positive.
      for (int i = 0; i < 3; ++i) {
        if (std::abs(axis[i]) > 1e-6) {
          if (axis[i] < 0.0) axis = -axis;
          break;
        }
      }
    }
    return AxisAngle{theta * axis};
  }

  return AxisAngle{(theta / w.norm()) * w};
}

struct Projection {
  PixelPoint pixel;
  double depth = 0.0;  // meters along the camera z axis
};

// Pinhole projection of a radar point: c = R*p + T, s = c_z,
// pixel = ((fx*c_x + skew*c_y)/s + cx, fy*c_y/s + cy).
// The depth is returned so callers can reject behind-camera points themselves.
inline Projection project(const CameraIntrinsics& k, const ExtrinsicPose& pose,
                          const RadarPoint& p) {
  if (!p.finite()) {
    throw InvalidArgumentError("project: non-finite radar point");
  }
  const Eigen::Vector3d c = pose.rotation * p.vec() + pose.translation;
  const double s = c.z();
  if (std::abs(s) < kMinDepth) {
    throw ProjectionUndefinedError("project: point lies on the camera plane");
  }
  return Projection{
      PixelPoint{(k.fx * c.x() + k.skew * c.y()) / s + k.cx, k.fy * c.y() / s + k.cy},
      s};
}

// Spherical radar detection to Cartesian. Azimuth 0 is boresight (+y),
// positive toward +x; elevation positive toward +z.
inline RadarPoint radar_polar_to_cartesian(double range, double azimuth, double elevation) {
  if (!(range >= 0.0) || !std::isfinite(range) || !std::isfinite(azimuth) ||
      !std::isfinite(elevation)) {
    throw InvalidArgumentError("radar_polar_to_cartesian: range must be finite and >= 0");
  }
  const double cos_el = std::cos(elevation);
  return RadarPoint{range * cos_el * std::sin(azimuth),
                    range * cos_el * std::cos(azimuth),
                    range * std::sin(elevation)};
}

// Orthogonal polar factor with det +1, the closest rotation in Frobenius norm.
// When the plain polar factor mirrors, the column of the smallest singular
// value is flipped.
inline Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) {
    throw InvalidArgumentError("nearest_rotation: non-finite input");
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sigma = svd.singularValues();
  if (!(sigma(2) > 0.0) || sigma(0) / sigma(2) > 1e12) {
    throw DegenerateInputError("nearest_rotation: matrix is rank deficient");
  }
  Eigen::Matrix3d u = svd.matrixU();
  if ((u * svd.matrixV().transpose()).determinant() < 0.0) {
    u.col(2) = -u.col(2);
  }
  return u * svd.matrixV().transpose();
}

}  // namespace rcal
