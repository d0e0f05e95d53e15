#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rcal/correspondence.hpp"
#include "rcal/geometry.hpp"
#include "rcal/metrics.hpp"

namespace rcal {

struct RansacConfig {
  int max_iterations = 2000;
  double inlier_threshold = 20.0;  // pixels
  int min_sample = 6;
  double confidence = 0.999;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_iterations < 1) throw ConfigError("RansacConfig: max_iterations must be >= 1");
    if (!(inlier_threshold > 0.0)) throw ConfigError("RansacConfig: inlier_threshold must be > 0");
    if (min_sample < 6) throw ConfigError("RansacConfig: min_sample must be >= 6");
    if (!(confidence > 0.0) || !(confidence < 1.0)) {
      throw ConfigError("RansacConfig: confidence must lie in (0,1)");
    }
  }
};

struct LmConfig {
  int max_iterations = 100;
  double initial_damping = 1e-3;
  double damping_up = 10.0;
  double damping_down = 0.1;
  double cost_tol = 1e-10;
  double param_tol = 1e-10;

  void validate() const {
    if (max_iterations < 1) throw ConfigError("LmConfig: max_iterations must be >= 1");
    if (!(initial_damping > 0.0)) throw ConfigError("LmConfig: initial_damping must be > 0");
    if (!(damping_up > 1.0)) throw ConfigError("LmConfig: damping_up must be > 1");
    if (!(damping_down > 0.0) || !(damping_down < 1.0)) {
      throw ConfigError("LmConfig: damping_down must lie in (0,1)");
    }
    if (!(cost_tol > 0.0) || !(param_tol > 0.0)) {
      throw ConfigError("LmConfig: tolerances must be > 0");
    }
  }
};

struct PoseEstimate {
  ExtrinsicPose pose;
  std::vector<char> inlier_mask;  // one flag per input correspondence
  int iterations_used = 0;
  double final_cost = 0.0;  // 0.5 * ||residuals||^2 over the masked-in points
  bool converged = false;
};

using Vector6d = Eigen::Matrix<double, 6, 1>;

// 6-vector pose chart: axis-angle stacked on translation.
inline Vector6d pose_to_vector(const ExtrinsicPose& pose) {
  Vector6d v;
  v.head<3>() = matrix_to_axis_angle(pose.rotation).r;
  v.tail<3>() = pose.translation;
  return v;
}

inline ExtrinsicPose vector_to_pose(const Vector6d& v) {
  return ExtrinsicPose{axis_angle_to_matrix(AxisAngle{v.head<3>()}), v.tail<3>()};
}

// Stacked (u, v) reprojection residuals in input order. Points with
// non-positive depth contribute the large finite sentinel instead of failing,
// so RANSAC can score hypotheses that put points behind the camera.
inline Eigen::VectorXd residuals(const ExtrinsicPose& pose, const CameraIntrinsics& k,
                                 const std::vector<Correspondence>& corrs) {
  Eigen::VectorXd r(2 * static_cast<Eigen::Index>(corrs.size()));
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const Eigen::Vector3d c = pose.rotation * corrs[i].radar.vec() + pose.translation;
    const double s = c.z();
    if (s < kMinDepth) {
      r(2 * i) = kBehindCameraSentinelPx;
      r(2 * i + 1) = kBehindCameraSentinelPx;
      continue;
    }
    r(2 * i) = (k.fx * c.x() + k.skew * c.y()) / s + k.cx - corrs[i].pixel.u;
    r(2 * i + 1) = k.fy * c.y() / s + k.cy - corrs[i].pixel.v;
  }
  return r;
}

// Analytic Jacobian of the stacked residuals with respect to the 6-vector
// pose chart. Columns 0..2 differentiate the axis-angle block, 3..5 the
// translation. Rotation derivative follows the closed form
//   dR/dr_i = (r_i [r]x + [r x (I - R) e_i]x) / ||r||^2 * R
// with the skew limit at r -> 0.
inline Eigen::MatrixXd pose_jacobian(const Vector6d& pose6, const CameraIntrinsics& k,
                                     const std::vector<Correspondence>& corrs) {
  const Eigen::Vector3d r = pose6.head<3>();
  const Eigen::Vector3d t = pose6.tail<3>();
  const Eigen::Matrix3d rot = axis_angle_to_matrix(AxisAngle{r});
  const double n2 = r.squaredNorm();

  Eigen::Matrix3d dcoeff[3];
  if (n2 < 1e-16) {
    // limit: d(R X)/dr = -[X]x, folded in below through R X ~= X
    dcoeff[0] = dcoeff[1] = dcoeff[2] = Eigen::Matrix3d::Zero();
  } else {
    const Eigen::Matrix3d rx = skew_matrix(r);
    const Eigen::Matrix3d i_minus_rot = Eigen::Matrix3d::Identity() - rot;
    for (int i = 0; i < 3; ++i) {
      const Eigen::Vector3d v = r.cross(i_minus_rot.col(i));
      dcoeff[i] = (r(i) * rx + skew_matrix(v)) / n2;
    }
  }

  Eigen::MatrixXd jac(2 * static_cast<Eigen::Index>(corrs.size()), 6);
  for (std::size_t p = 0; p < corrs.size(); ++p) {
    const Eigen::Vector3d x = corrs[p].radar.vec();
    const Eigen::Vector3d rx_pt = rot * x;
    const Eigen::Vector3d c = rx_pt + t;
    const double s = c.z();
    if (s < kMinDepth) {
      throw LinearizationError("pose_jacobian: point has non-positive depth");
    }

    Eigen::Matrix3d drot_x;  // d(R x)/dr, one column per axis-angle component
    if (n2 < 1e-16) {
      drot_x = -skew_matrix(x);
    } else {
      for (int i = 0; i < 3; ++i) drot_x.col(i) = dcoeff[i] * rx_pt;
    }

    const double inv_s = 1.0 / s;
    const Eigen::RowVector3d du_dc(k.fx * inv_s, k.skew * inv_s,
                                   -(k.fx * c.x() + k.skew * c.y()) * inv_s * inv_s);
    const Eigen::RowVector3d dv_dc(0.0, k.fy * inv_s, -k.fy * c.y() * inv_s * inv_s);

    jac.block<1, 3>(2 * p, 0) = du_dc * drot_x;
    jac.block<1, 3>(2 * p, 3) = du_dc;
    jac.block<1, 3>(2 * p + 1, 0) = dv_dc * drot_x;
    jac.block<1, 3>(2 * p + 1, 3) = dv_dc;
  }
  return jac;
}

namespace detail {

// Hartley-style similarity normalization: centroid to origin, mean distance
// to sqrt(dim).
template <int Dim>
inline Eigen::Matrix<double, Dim + 1, Dim + 1> normalizing_similarity(
    const std::vector<Eigen::Matrix<double, Dim, 1>>& pts) {
  Eigen::Matrix<double, Dim, 1> centroid = Eigen::Matrix<double, Dim, 1>::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 1e-12)) {
    throw DegenerateInputError("dlt_pose: point set collapses to a single point");
  }
  const double scale = std::sqrt(static_cast<double>(Dim)) / mean_dist;
  Eigen::Matrix<double, Dim + 1, Dim + 1> t = Eigen::Matrix<double, Dim + 1, Dim + 1>::Identity();
  t.template topLeftCorner<Dim, Dim>() *= scale;
  t.template topRightCorner<Dim, 1>() = -scale * centroid;
  return t;
}

struct InlierStats {
  std::vector<char> mask;
  int count = 0;
  double rms = 0.0;  // over inliers only
};

inline InlierStats score_inliers(const ExtrinsicPose& pose, const CameraIntrinsics& k,
                                 const std::vector<Correspondence>& corrs, double threshold) {
  InlierStats stats;
  stats.mask.assign(corrs.size(), 0);
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double d = reprojection_distance(pose, k, corrs[i]);
    if (d < threshold) {
      stats.mask[i] = 1;
      ++stats.count;
      sum_sq += d * d;
    }
  }
  stats.rms = stats.count > 0 ? std::sqrt(sum_sq / stats.count) : 0.0;
  return stats;
}

inline double half_squared_norm(const Eigen::VectorXd& v) { return 0.5 * v.squaredNorm(); }

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Per-iteration generator derived from (seed, iteration) so the sampling
// sequence does not depend on evaluation order.
inline std::mt19937_64 iteration_rng(std::uint64_t seed, std::uint64_t iteration) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(iteration)));
}

}  // namespace detail

// Direct linear transform over >= 6 correspondences: solve the stacked
// homogeneous system for [R|T] up to scale in K-normalized coordinates, then
// recover scale and sign and orthonormalize the rotation block.
inline ExtrinsicPose dlt_pose(const std::vector<Correspondence>& corrs,
                              const CameraIntrinsics& k) {
  if (corrs.size() < 6) {
    throw InsufficientDataError("dlt_pose: need at least 6 correspondences");
  }
  k.validate();
  const std::size_t n = corrs.size();
  const Eigen::Matrix3d k_inv = k.inverse_matrix();

  std::vector<Eigen::Vector2d> pix(n);
  std::vector<Eigen::Vector3d> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d h = k_inv * Eigen::Vector3d(corrs[i].pixel.u, corrs[i].pixel.v, 1.0);
    pix[i] = h.head<2>() / h.z();
    pts[i] = corrs[i].radar.vec();
  }

  const Eigen::Matrix3d t2 = detail::normalizing_similarity<2>(pix);
  const Eigen::Matrix4d t3 = detail::normalizing_similarity<3>(pts);

  Eigen::MatrixXd a(2 * n, 12);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d xh = t2 * Eigen::Vector3d(pix[i].x(), pix[i].y(), 1.0);
    const Eigen::Vector4d ph = t3 * pts[i].homogeneous();
    const double u = xh.x() / xh.z();
    const double v = xh.y() / xh.z();
    a.row(2 * i) << ph.transpose(), Eigen::RowVector4d::Zero(), -u * ph.transpose();
    a.row(2 * i + 1) << Eigen::RowVector4d::Zero(), ph.transpose(), -v * ph.transpose();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double s_largest = sigma(0);
  const double s_second_smallest = sigma(10);
  const double s_smallest = sigma(11);
  if (!(s_second_smallest > 1e-9 * s_largest) ||
      s_smallest / s_second_smallest > 0.99) {
    throw DegenerateInputError("dlt_pose: degenerate point configuration");
  }

  const Eigen::VectorXd p_vec = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> p_norm;
  p_norm.row(0) = p_vec.segment<4>(0).transpose();
  p_norm.row(1) = p_vec.segment<4>(4).transpose();
  p_norm.row(2) = p_vec.segment<4>(8).transpose();

  Eigen::Matrix<double, 3, 4> p = t2.inverse() * p_norm * t3;

  // Sign: the majority of points must land in front of the camera.
  int positive = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (p.row(2).dot(pts[i].homogeneous()) > 0.0) ++positive;
  }
  if (2 * positive < static_cast<int>(n)) p = -p;

  const Eigen::Matrix3d m = p.leftCols<3>();
  Eigen::JacobiSVD<Eigen::Matrix3d> msvd(m);
  const double scale = msvd.singularValues().mean();
  if (!(scale > 0.0)) {
    throw DegenerateInputError("dlt_pose: zero-scale projection matrix");
  }

  ExtrinsicPose pose;
  try {
    pose.rotation = nearest_rotation(m);
  } catch (const DegenerateInputError&) {
    throw DegenerateInputError("dlt_pose: rotation block is rank deficient");
  }

  // Re-solve the translation for the coerced rotation: with R fixed the
  // projection constraints are linear in T, and this absorbs most of the
  // damage the orthonormalization does to a noisy projective fit. On exact
  // data it reproduces the scaled fourth column.
  Eigen::MatrixXd at(2 * n, 3);
  Eigen::VectorXd bt(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d rx = pose.rotation * pts[i];
    const double u = pix[i].x();
    const double v = pix[i].y();
    at.row(2 * i) << 1.0, 0.0, -u;
    bt(2 * i) = u * rx.z() - rx.x();
    at.row(2 * i + 1) << 0.0, 1.0, -v;
    bt(2 * i + 1) = v * rx.z() - rx.y();
  }
  pose.translation = at.colPivHouseholderQr().solve(bt);
  if (!pose.translation.allFinite()) {
    pose.translation = p.col(3) / scale;
  }
  return pose;
}

// Robust initialization: repeatedly fit dlt_pose to random minimal samples,
// score by inlier count (ties broken by lower inlier RMS), stop early once the
// adaptive iteration bound for the configured confidence is met, then refit on
// the best consensus set and recompute the mask against the returned pose.
inline PoseEstimate ransac_pose(const std::vector<Correspondence>& corrs,
                                const CameraIntrinsics& k, const RansacConfig& cfg) {
  cfg.validate();
  const std::size_t n = corrs.size();
  if (static_cast<int>(n) < cfg.min_sample) {
    throw InsufficientDataError("ransac_pose: fewer correspondences than min_sample");
  }

  bool have_best = false;
  ExtrinsicPose best_pose;
  detail::InlierStats best_stats;
  int iterations = 0;

  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), 0);
  std::vector<Correspondence> sample(static_cast<std::size_t>(cfg.min_sample));

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    ++iterations;
    std::mt19937_64 rng = detail::iteration_rng(cfg.seed, static_cast<std::uint64_t>(iter));

    // partial Fisher-Yates draw of min_sample distinct indices
    for (int j = 0; j < cfg.min_sample; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, n - 1);
      std::swap(indices[j], indices[pick(rng)]);
      sample[j] = corrs[indices[j]];
    }
    std::sort(indices.begin(), indices.end());

    ExtrinsicPose hypothesis;
    try {
      hypothesis = dlt_pose(sample, k);
    } catch (const DegenerateInputError&) {
      continue;
    }

    detail::InlierStats stats = detail::score_inliers(hypothesis, k, corrs, cfg.inlier_threshold);
    if (stats.count < cfg.min_sample) continue;
    if (!have_best || stats.count > best_stats.count ||
        (stats.count == best_stats.count && stats.rms < best_stats.rms)) {
      have_best = true;
      best_pose = hypothesis;
      best_stats = std::move(stats);
    }

    // adaptive stop: iterations needed to hit an all-inlier sample with
    // probability `confidence`, given the best inlier ratio seen so far
    const double w = static_cast<double>(best_stats.count) / static_cast<double>(n);
    const double p_good = std::pow(w, cfg.min_sample);
    if (p_good >= 1.0 - 1e-12) break;
    const double needed = std::log(1.0 - cfg.confidence) / std::log(1.0 - p_good);
    if (static_cast<double>(iter + 1) >= needed) break;
  }

  if (!have_best) {
    throw NoConsensusError("ransac_pose: no hypothesis reached min_sample inliers");
  }

  // Guarded refit on the consensus set, iterated until the inlier set
  // stabilizes. The consensus of a mediocre hypothesis is a spatially biased
  // subset that can drag the algebraic refit off the model, so a refit is
  // only adopted when it does not lose consensus (same ordering as the
  // hypothesis search). A degenerate consensus keeps the current pose.
  ExtrinsicPose final_pose = best_pose;
  detail::InlierStats final_stats = best_stats;
  for (int round = 0; round < 10; ++round) {
    std::vector<Correspondence> consensus;
    consensus.reserve(static_cast<std::size_t>(final_stats.count));
    for (std::size_t i = 0; i < n; ++i) {
      if (final_stats.mask[i]) consensus.push_back(corrs[i]);
    }
    ExtrinsicPose refit;
    try {
      refit = dlt_pose(consensus, k);
    } catch (const DegenerateInputError&) {
      break;
    }
    detail::InlierStats refit_stats =
        detail::score_inliers(refit, k, corrs, cfg.inlier_threshold);
    if (refit_stats.count > final_stats.count ||
        (refit_stats.count == final_stats.count && refit_stats.rms < final_stats.rms)) {
      final_pose = refit;
      final_stats = std::move(refit_stats);
    } else {
      break;
    }
  }

  PoseEstimate estimate;
  estimate.pose = final_pose;
  estimate.iterations_used = iterations;
  estimate.converged = true;

  std::vector<Correspondence> final_inliers;
  final_inliers.reserve(static_cast<std::size_t>(final_stats.count));
  for (std::size_t i = 0; i < n; ++i) {
    if (final_stats.mask[i]) final_inliers.push_back(corrs[i]);
  }
  estimate.final_cost = final_inliers.empty()
                            ? 0.0
                            : detail::half_squared_norm(residuals(final_pose, k, final_inliers));
  estimate.inlier_mask = std::move(final_stats.mask);
  return estimate;
}

// Levenberg-Marquardt refinement of 0.5*||residuals||^2 over the 6-vector
// chart, with multiplicative identity-scaled damping. Terminates on relative
// cost decrease below cost_tol, step norm below param_tol, or max_iterations.
// The accepted-cost sequence is non-increasing by construction.
// `accepted_costs`, when given, records the initial cost and every accepted
// step's cost.
inline PoseEstimate lm_refine(const ExtrinsicPose& initial, const CameraIntrinsics& k,
                              const std::vector<Correspondence>& corrs, const LmConfig& cfg,
                              std::vector<double>* accepted_costs = nullptr) {
  cfg.validate();
  k.validate();
  initial.validate();
  if (corrs.size() < 4) {
    throw InsufficientDataError("lm_refine: need at least 4 correspondences");
  }
  for (const Correspondence& c : corrs) {
    const double depth = (initial.rotation * c.radar.vec() + initial.translation).z();
    if (depth < kMinDepth) {
      throw LinearizationError("lm_refine: point behind camera under initial pose");
    }
  }

  Vector6d theta = pose_to_vector(initial);
  Eigen::VectorXd r = residuals(vector_to_pose(theta), k, corrs);
  double cost = detail::half_squared_norm(r);
  if (accepted_costs) accepted_costs->push_back(cost);

  double lambda = cfg.initial_damping;
  bool converged = false;
  int iterations = 0;
  bool jacobian_stale = true;
  Eigen::MatrixXd jac;
  Eigen::Matrix<double, 6, 6> jtj;
  Vector6d jtr;

  while (iterations < cfg.max_iterations) {
    ++iterations;
    if (jacobian_stale) {
      jac = pose_jacobian(theta, k, corrs);
      jtj = jac.transpose() * jac;
      jtr = jac.transpose() * r;
      jacobian_stale = false;
    }

    Eigen::Matrix<double, 6, 6> damped = jtj;
    damped.diagonal().array() += lambda;
    const Vector6d delta = damped.ldlt().solve(-jtr);
    if (!delta.allFinite()) {
      lambda *= cfg.damping_up;
      continue;
    }
    if (delta.norm() < cfg.param_tol) {
      converged = true;
      break;
    }

    const Vector6d candidate = theta + delta;
    const Eigen::VectorXd r_new = residuals(vector_to_pose(candidate), k, corrs);
    const double cost_new = detail::half_squared_norm(r_new);
    if (cost_new < cost) {
      const double relative_decrease = (cost - cost_new) / std::max(cost, 1e-300);
      theta = candidate;
      r = r_new;
      cost = cost_new;
      lambda *= cfg.damping_down;
      jacobian_stale = true;
      if (accepted_costs) accepted_costs->push_back(cost);
      if (relative_decrease < cfg.cost_tol) {
        converged = true;
        break;
      }
    } else {
      lambda *= cfg.damping_up;
    }
  }

  PoseEstimate estimate;
  estimate.pose = vector_to_pose(theta);
  estimate.inlier_mask.assign(corrs.size(), 1);
  estimate.iterations_used = iterations;
  estimate.final_cost = cost;
  estimate.converged = converged;
  return estimate;
}

// Two-step estimation: RANSAC initialization, then LM refinement on the
// inliers with the mask recomputed against the refined pose at the RANSAC
// threshold. The refine/recompute step repeats until the mask stabilizes
// (a premature RANSAC consensus can hand LM a subset of the true inliers;
// the recompute then grows the mask and one more refinement pass picks up
// the rest). The returned mask and cost belong to the final pose.
inline PoseEstimate calibrate(const std::vector<Correspondence>& corrs,
                              const CameraIntrinsics& k, const RansacConfig& ransac_cfg,
                              const LmConfig& lm_cfg) {
  const PoseEstimate initial = ransac_pose(corrs, k, ransac_cfg);

  ExtrinsicPose pose = initial.pose;
  std::vector<char> mask = initial.inlier_mask;
  int lm_iterations = 0;
  bool converged = false;

  for (int round = 0; round < 5; ++round) {
    std::vector<Correspondence> inliers;
    inliers.reserve(corrs.size());
    for (std::size_t i = 0; i < corrs.size(); ++i) {
      if (mask[i]) inliers.push_back(corrs[i]);
    }
    if (round > 0 && inliers.size() < 4) break;

    const PoseEstimate refined = lm_refine(pose, k, inliers, lm_cfg);
    pose = refined.pose;
    lm_iterations += refined.iterations_used;
    converged = refined.converged;

    detail::InlierStats stats =
        detail::score_inliers(pose, k, corrs, ransac_cfg.inlier_threshold);
    const bool stable = stats.mask == mask;
    mask = std::move(stats.mask);
    if (stable) break;
  }

  std::vector<Correspondence> final_inliers;
  final_inliers.reserve(corrs.size());
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (mask[i]) final_inliers.push_back(corrs[i]);
  }

  PoseEstimate estimate;
  estimate.pose = pose;
  estimate.inlier_mask = std::move(mask);
  estimate.iterations_used = lm_iterations;
  estimate.converged = converged;
  estimate.final_cost = final_inliers.empty()
                            ? 0.0
                            : detail::half_squared_norm(residuals(pose, k, final_inliers));
  return estimate;
}

}  // namespace rcal
