#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "rcal/correspondence.hpp"
#include "rcal/geometry.hpp"

namespace rcal {

// Euclidean pixel distance between a correspondence's observed pixel and the
// projection of its radar point. Behind-camera points get the finite sentinel.
inline double reprojection_distance(const ExtrinsicPose& pose, const CameraIntrinsics& k,
                                    const Correspondence& corr) {
  Projection proj;
  try {
    proj = project(k, pose, corr.radar);
  } catch (const ProjectionUndefinedError&) {
    return kBehindCameraSentinelPx;
  }
  if (proj.depth <= 0.0) {
    return kBehindCameraSentinelPx;
  }
  return std::hypot(proj.pixel.u - corr.pixel.u, proj.pixel.v - corr.pixel.v);
}

// Root-mean-square reprojection error in pixels:
//   sqrt( (1/N) * sum ||p_observed - p_projected||^2 )
inline double rmsre(const ExtrinsicPose& pose, const CameraIntrinsics& k,
                    const std::vector<Correspondence>& corrs) {
  if (corrs.empty()) {
    throw EmptySetError("rmsre: no correspondences");
  }
  double sum_sq = 0.0;
  for (const Correspondence& c : corrs) {
    const double d = reprojection_distance(pose, k, c);
    sum_sq += d * d;
  }
  return std::sqrt(sum_sq / static_cast<double>(corrs.size()));
}

// Mean Euclidean reprojection error in pixels.
inline double mare(const ExtrinsicPose& pose, const CameraIntrinsics& k,
                   const std::vector<Correspondence>& corrs) {
  if (corrs.empty()) {
    throw EmptySetError("mare: no correspondences");
  }
  double sum = 0.0;
  for (const Correspondence& c : corrs) {
    sum += reprojection_distance(pose, k, c);
  }
  return sum / static_cast<double>(corrs.size());
}

struct PerPointError {
  std::size_t index = 0;
  double distance = 0.0;
  bool is_inlier = false;
};

struct EvaluationReport {
  double mare_all = 0.0;
  double rmsre_all = 0.0;
  double mare_inliers = 0.0;
  double rmsre_inliers = 0.0;
  std::size_t n_all = 0;
  std::size_t n_inliers = 0;
  std::vector<PerPointError> per_point;
};

// Full all-points / inliers breakdown. A point is an inlier iff its distance
// is strictly below the threshold. With zero inliers the inlier metrics are 0.
inline EvaluationReport evaluate(const ExtrinsicPose& pose, const CameraIntrinsics& k,
                                 const std::vector<Correspondence>& corrs,
                                 double inlier_threshold_px) {
  if (corrs.empty()) {
    throw EmptySetError("evaluate: no correspondences");
  }
  EvaluationReport report;
  report.n_all = corrs.size();
  report.per_point.reserve(corrs.size());

  double sum_all = 0.0;
  double sum_sq_all = 0.0;
  double sum_in = 0.0;
  double sum_sq_in = 0.0;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double d = reprojection_distance(pose, k, corrs[i]);
    const bool inlier = d < inlier_threshold_px;
    report.per_point.push_back(PerPointError{i, d, inlier});
    sum_all += d;
    sum_sq_all += d * d;
    if (inlier) {
      ++report.n_inliers;
      sum_in += d;
      sum_sq_in += d * d;
    }
  }
  const double n_all = static_cast<double>(report.n_all);
  report.mare_all = sum_all / n_all;
  report.rmsre_all = std::sqrt(sum_sq_all / n_all);
  if (report.n_inliers > 0) {
    const double n_in = static_cast<double>(report.n_inliers);
    report.mare_inliers = sum_in / n_in;
    report.rmsre_inliers = std::sqrt(sum_sq_in / n_in);
  }
  return report;
}

}  // namespace rcal
