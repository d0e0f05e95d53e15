#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "test_support.hpp"

using namespace rcal;

namespace {

std::vector<Correspondence> with_pixel_noise(std::vector<Correspondence> corrs, double sigma,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (Correspondence& c : corrs) {
    c.pixel.u += gauss(rng);
    c.pixel.v += gauss(rng);
  }
  return corrs;
}

std::vector<Correspondence> displace_outliers(std::vector<Correspondence> corrs,
                                              const std::vector<std::size_t>& indices,
                                              double min_offset_px, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> extra(0.0, min_offset_px);
  for (std::size_t i : indices) {
    const double a = angle(rng);
    const double m = min_offset_px + extra(rng);
    corrs[i].pixel.u += m * std::cos(a);
    corrs[i].pixel.v += m * std::sin(a);
  }
  return corrs;
}

std::vector<Correspondence> collinear_correspondences(const ExtrinsicPose& pose,
                                                      const CameraIntrinsics& k, std::size_t n) {
  // points on a 3-D line well in front of the camera
  const Eigen::Vector3d anchor_cam(-1.5, -0.5, 6.0);
  const Eigen::Vector3d direction_cam(0.35, 0.12, 1.1);
  std::vector<Correspondence> corrs;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d cam = anchor_cam + static_cast<double>(i) * direction_cam;
    const RadarPoint p = RadarPoint::from(pose.rotation.transpose() * (cam - pose.translation));
    corrs.push_back(Correspondence{project(k, pose, p).pixel, p, static_cast<std::int64_t>(i), 1.0});
  }
  return corrs;
}

}  // namespace

TEST_CASE("dlt_pose recovers the generating pose from exact data") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(401);
  for (int trial = 0; trial < 50; ++trial) {
    const ExtrinsicPose truth = testutil::random_pose(rng);
    const auto corrs = testutil::exact_correspondences(rng, truth, k, 8);
    const ExtrinsicPose recovered = dlt_pose(corrs, k);
    const PoseError err = pose_error(recovered, truth);
    REQUIRE(err.rotation_rad < 1e-6);
    REQUIRE(err.translation_m < 1e-6);
  }
}

TEST_CASE("dlt_pose identity rotation with forward offset") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(402);
  ExtrinsicPose truth;
  truth.translation = Eigen::Vector3d(0.0, 0.0, 3.0);
  const auto corrs = testutil::exact_correspondences(rng, truth, k, 8);
  const PoseError err = pose_error(dlt_pose(corrs, k), truth);
  REQUIRE(err.rotation_rad < 1e-6);
  REQUIRE(err.translation_m < 1e-6);
}

TEST_CASE("dlt_pose needs six correspondences") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(403);
  const ExtrinsicPose truth = testutil::random_pose(rng);
  const auto corrs = testutil::exact_correspondences(rng, truth, k, 5);
  REQUIRE_THROWS_AS(dlt_pose(corrs, k), InsufficientDataError);
}

TEST_CASE("dlt_pose rejects collinear configurations") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  const ExtrinsicPose pose = testutil::rig_pose();
  const auto corrs = collinear_correspondences(pose, k, 8);
  REQUIRE_THROWS_AS(dlt_pose(corrs, k), DegenerateInputError);
}

TEST_CASE("ransac_pose separates gross outliers exactly") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(404);
  const ExtrinsicPose truth = testutil::rig_pose();
  auto corrs = testutil::exact_correspondences(rng, truth, k, 24);
  const std::vector<std::size_t> outliers{3, 11, 19};
  corrs = displace_outliers(std::move(corrs), outliers, 500.0, 405);

  RansacConfig cfg;
  cfg.seed = 406;
  const PoseEstimate estimate = ransac_pose(corrs, k, cfg);
  REQUIRE(estimate.converged);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const bool expected_inlier =
        std::find(outliers.begin(), outliers.end(), i) == outliers.end();
    REQUIRE(static_cast<bool>(estimate.inlier_mask[i]) == expected_inlier);
  }
  const PoseError err = pose_error(estimate.pose, truth);
  REQUIRE(err.rotation_rad < 1e-4);
  REQUIRE(err.translation_m < 1e-4);

  // brute-force cross-check of the mask against the recovered pose
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double d = reprojection_distance(estimate.pose, k, corrs[i]);
    REQUIRE(static_cast<bool>(estimate.inlier_mask[i]) == (d < cfg.inlier_threshold));
  }
}

TEST_CASE("ransac_pose on clean data equals the all-points DLT") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(407);
  const ExtrinsicPose truth = testutil::random_pose(rng);
  const auto corrs = testutil::exact_correspondences(rng, truth, k, 20);

  RansacConfig cfg;
  cfg.seed = 408;
  const PoseEstimate estimate = ransac_pose(corrs, k, cfg);
  for (char flag : estimate.inlier_mask) REQUIRE(flag == 1);

  const ExtrinsicPose direct = dlt_pose(corrs, k);
  REQUIRE((estimate.pose.rotation - direct.rotation).cwiseAbs().maxCoeff() < 1e-9);
  REQUIRE((estimate.pose.translation - direct.translation).norm() < 1e-9);
}

TEST_CASE("ransac_pose is bitwise deterministic for a fixed seed") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(409);
  const ExtrinsicPose truth = testutil::rig_pose();
  auto corrs = with_pixel_noise(testutil::exact_correspondences(rng, truth, k, 30), 3.0, 410);

  RansacConfig cfg;
  cfg.seed = 411;
  const PoseEstimate a = ransac_pose(corrs, k, cfg);
  const PoseEstimate b = ransac_pose(corrs, k, cfg);
  REQUIRE(a.pose.rotation == b.pose.rotation);
  REQUIRE(a.pose.translation == b.pose.translation);
  REQUIRE(a.inlier_mask == b.inlier_mask);
  REQUIRE(a.iterations_used == b.iterations_used);
  REQUIRE(a.final_cost == b.final_cost);
}

TEST_CASE("ransac_pose rejects undersized input") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(412);
  const auto corrs = testutil::exact_correspondences(rng, testutil::rig_pose(), k, 5);
  REQUIRE_THROWS_AS(ransac_pose(corrs, k, RansacConfig{}), InsufficientDataError);
}

TEST_CASE("ransac_pose reports no consensus when every sample is degenerate") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  const auto corrs = collinear_correspondences(testutil::rig_pose(), k, 9);
  RansacConfig cfg;
  cfg.max_iterations = 200;
  REQUIRE_THROWS_AS(ransac_pose(corrs, k, cfg), NoConsensusError);
}

TEST_CASE("residuals are zero for a perfect pose and follow input order") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(413);
  const ExtrinsicPose pose = testutil::random_pose(rng);
  const auto corrs = testutil::exact_correspondences(rng, pose, k, 9);
  const Eigen::VectorXd r = residuals(pose, k, corrs);
  REQUIRE(r.size() == 18);
  REQUIRE(r.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("residuals hand example (3,4)") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  // projects to (840,460); observed at (837,456) leaves residual (3,4)
  const Correspondence c{PixelPoint{837.0, 456.0}, RadarPoint{1.0, 0.5, 5.0}, 0, 1.0};
  const Eigen::VectorXd r = residuals(ExtrinsicPose{}, k, {c});
  REQUIRE(std::abs(r(0) - 3.0) < 1e-9);
  REQUIRE(std::abs(r(1) - 4.0) < 1e-9);
}

TEST_CASE("residuals use the sentinel for behind-camera points") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  const Correspondence c{PixelPoint{640.0, 360.0}, RadarPoint{0.0, 0.0, -4.0}, 0, 1.0};
  const Eigen::VectorXd r = residuals(ExtrinsicPose{}, k, {c});
  REQUIRE(r(0) == kBehindCameraSentinelPx);
  REQUIRE(r(1) == kBehindCameraSentinelPx);
}

TEST_CASE("pose_jacobian matches central finite differences") {
  const CameraIntrinsics k{980.0, 1010.0, 645.0, 355.0, 0.3};
  std::mt19937_64 rng(414);
  for (int trial = 0; trial < 20; ++trial) {
    const ExtrinsicPose pose = testutil::random_pose(rng);
    const auto corrs = testutil::exact_correspondences(rng, pose, k, 20);
    const Vector6d theta = pose_to_vector(pose);
    const Eigen::MatrixXd jac = pose_jacobian(theta, k, corrs);

    const double h = 1e-6;
    double max_rel = 0.0;
    for (int p = 0; p < 6; ++p) {
      Vector6d plus = theta;
      Vector6d minus = theta;
      plus(p) += h;
      minus(p) -= h;
      const Eigen::VectorXd fd =
          (residuals(vector_to_pose(plus), k, corrs) - residuals(vector_to_pose(minus), k, corrs)) /
          (2.0 * h);
      for (Eigen::Index row = 0; row < fd.size(); ++row) {
        const double rel = std::abs(jac(row, p) - fd(row)) / std::max(1.0, std::abs(fd(row)));
        max_rel = std::max(max_rel, rel);
      }
    }
    REQUIRE(max_rel < 1e-4);
  }
}

TEST_CASE("pose_jacobian translation columns at identity rotation") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  const std::vector<Correspondence> corrs{
      {PixelPoint{0.0, 0.0}, RadarPoint{1.0, 0.5, 5.0}, 0, 1.0},
      {PixelPoint{0.0, 0.0}, RadarPoint{-2.0, 1.0, 8.0}, 0, 1.0},
  };
  const Eigen::MatrixXd jac = pose_jacobian(Vector6d::Zero(), k, corrs);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double x = corrs[i].radar.x;
    const double y = corrs[i].radar.y;
    const double z = corrs[i].radar.z;
    REQUIRE(std::abs(jac(2 * i, 3) - k.fx / z) < 1e-12);
    REQUIRE(std::abs(jac(2 * i, 4) - 0.0) < 1e-12);
    REQUIRE(std::abs(jac(2 * i, 5) + k.fx * x / (z * z)) < 1e-12);
    REQUIRE(std::abs(jac(2 * i + 1, 3) - 0.0) < 1e-12);
    REQUIRE(std::abs(jac(2 * i + 1, 4) - k.fy / z) < 1e-12);
    REQUIRE(std::abs(jac(2 * i + 1, 5) + k.fy * y / (z * z)) < 1e-12);
  }
}

TEST_CASE("pose_jacobian duplicates rows for duplicated correspondences") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(415);
  const ExtrinsicPose pose = testutil::random_pose(rng);
  const Correspondence c = testutil::exact_correspondence(rng, pose, k);
  const Eigen::MatrixXd jac = pose_jacobian(pose_to_vector(pose), k, {c, c});
  REQUIRE((jac.topRows<2>() - jac.bottomRows<2>()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pose_jacobian refuses non-positive depth") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  const Correspondence behind{PixelPoint{0.0, 0.0}, RadarPoint{0.0, 0.0, -3.0}, 0, 1.0};
  REQUIRE_THROWS_AS(pose_jacobian(Vector6d::Zero(), k, {behind}), LinearizationError);
}

TEST_CASE("lm_refine converges from a perturbed start on exact data") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(416);
  for (int trial = 0; trial < 10; ++trial) {
    const ExtrinsicPose truth = testutil::rig_pose();
    const auto corrs = testutil::exact_correspondences(rng, truth, k, 30);

    ExtrinsicPose initial;
    const double two_deg = 2.0 * M_PI / 180.0;
    initial.rotation =
        axis_angle_to_matrix(AxisAngle{two_deg * testutil::random_unit(rng)}) * truth.rotation;
    initial.translation = truth.translation + 0.1 * testutil::random_unit(rng);

    const PoseEstimate refined = lm_refine(initial, k, corrs, LmConfig{});
    REQUIRE(refined.converged);
    const PoseError err = pose_error(refined.pose, truth);
    REQUIRE(err.rotation_rad < 1e-6);
    REQUIRE(err.translation_m < 1e-6);
  }
}

TEST_CASE("lm_refine at the optimum stops immediately") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(417);
  const ExtrinsicPose truth = testutil::random_pose(rng);
  const auto corrs = testutil::exact_correspondences(rng, truth, k, 15);
  const PoseEstimate refined = lm_refine(truth, k, corrs, LmConfig{});
  REQUIRE(refined.converged);
  REQUIRE(refined.iterations_used <= 2);
  const PoseError err = pose_error(refined.pose, truth);
  REQUIRE(err.rotation_rad < 1e-9);
  REQUIRE(err.translation_m < 1e-9);
}

TEST_CASE("lm_refine accepted costs never increase") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(418);
  for (int trial = 0; trial < 25; ++trial) {
    const ExtrinsicPose truth = testutil::rig_pose();
    auto corrs = with_pixel_noise(testutil::exact_correspondences(rng, truth, k, 40), 2.0,
                                  500 + static_cast<std::uint64_t>(trial));
    ExtrinsicPose initial;
    initial.rotation =
        axis_angle_to_matrix(AxisAngle{0.05 * testutil::random_unit(rng)}) * truth.rotation;
    initial.translation = truth.translation + 0.2 * testutil::random_unit(rng);

    std::vector<double> costs;
    const PoseEstimate refined = lm_refine(initial, k, corrs, LmConfig{}, &costs);
    REQUIRE(costs.size() >= 1);
    for (std::size_t i = 1; i < costs.size(); ++i) REQUIRE(costs[i] <= costs[i - 1]);
    REQUIRE(refined.final_cost <= costs.front());
  }
}

TEST_CASE("lm_refine noise floor matches the residual dof correction") {
  // with sigma = 2 and N = 100 points (2N residual components, 6 parameters)
  // the expected per-component residual RMS is sigma*sqrt(1 - 6/(2N)) ~= 1.97
  const CameraIntrinsics k = testutil::default_intrinsics();
  const ExtrinsicPose truth = testutil::rig_pose();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(600 + seed);
    auto corrs =
        with_pixel_noise(testutil::exact_correspondences(rng, truth, k, 100), 2.0, 700 + seed);
    const PoseEstimate refined = lm_refine(truth, k, corrs, LmConfig{});
    const double rms = std::sqrt(refined.final_cost / static_cast<double>(corrs.size()));
    REQUIRE(rms > 0.7 * 2.0);
    REQUIRE(rms < 1.3 * 2.0);
  }
}

TEST_CASE("lm_refine input validation") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(419);
  const ExtrinsicPose pose = testutil::random_pose(rng);
  const auto corrs = testutil::exact_correspondences(rng, pose, k, 3);
  REQUIRE_THROWS_AS(lm_refine(pose, k, corrs, LmConfig{}), InsufficientDataError);

  std::vector<Correspondence> with_behind = testutil::exact_correspondences(rng, ExtrinsicPose{}, k, 4);
  with_behind.push_back(Correspondence{PixelPoint{0.0, 0.0}, RadarPoint{0.0, 0.0, -2.0}, 0, 1.0});
  REQUIRE_THROWS_AS(lm_refine(ExtrinsicPose{}, k, with_behind, LmConfig{}), LinearizationError);
}

TEST_CASE("calibrate refines at least as well as RANSAC alone") {
  // clean points are exact here, so both stages sit at the optimum and the
  // LM stage must not drift away from it
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(420);
  const ExtrinsicPose truth = testutil::rig_pose();
  auto corrs = displace_outliers(testutil::exact_correspondences(rng, truth, k, 24), {2, 9, 17},
                                 500.0, 422);

  RansacConfig rcfg;
  rcfg.seed = 423;
  const PoseEstimate coarse = ransac_pose(corrs, k, rcfg);
  const PoseEstimate fine = calibrate(corrs, k, rcfg, LmConfig{});

  const PoseError coarse_err = pose_error(coarse.pose, truth);
  const PoseError fine_err = pose_error(fine.pose, truth);
  REQUIRE(fine_err.rotation_rad <= coarse_err.rotation_rad + 1e-9);
  REQUIRE(fine_err.translation_m <= coarse_err.translation_m + 1e-9);
}

TEST_CASE("calibrate on exact data drives the cost to zero") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(424);
  const ExtrinsicPose truth = testutil::random_pose(rng);
  const auto corrs = testutil::exact_correspondences(rng, truth, k, 20);
  const PoseEstimate estimate = calibrate(corrs, k, RansacConfig{}, LmConfig{});
  REQUIRE(estimate.final_cost < 1e-12);
  for (char flag : estimate.inlier_mask) REQUIRE(flag == 1);
}

TEST_CASE("calibrate is bitwise deterministic") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(425);
  const ExtrinsicPose truth = testutil::rig_pose();
  auto corrs = with_pixel_noise(testutil::exact_correspondences(rng, truth, k, 30), 2.0, 426);

  RansacConfig rcfg;
  rcfg.seed = 427;
  const PoseEstimate a = calibrate(corrs, k, rcfg, LmConfig{});
  const PoseEstimate b = calibrate(corrs, k, rcfg, LmConfig{});
  REQUIRE(a.pose.rotation == b.pose.rotation);
  REQUIRE(a.pose.translation == b.pose.translation);
  REQUIRE(a.inlier_mask == b.inlier_mask);
  REQUIRE(a.final_cost == b.final_cost);
}

TEST_CASE("calibrate links the LM objective to the inlier RMSRE") {
  const CameraIntrinsics k = testutil::default_intrinsics();
  std::mt19937_64 rng(428);
  const ExtrinsicPose truth = testutil::rig_pose();
  auto corrs = with_pixel_noise(testutil::exact_correspondences(rng, truth, k, 40), 3.0, 429);

  RansacConfig rcfg;
  rcfg.seed = 430;
  const PoseEstimate estimate = calibrate(corrs, k, rcfg, LmConfig{});
  std::vector<Correspondence> inliers;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (estimate.inlier_mask[i]) inliers.push_back(corrs[i]);
  }
  REQUIRE(!inliers.empty());
  const double rms_from_cost =
      std::sqrt(2.0 * estimate.final_cost / static_cast<double>(inliers.size()));
  const double rms_direct = rmsre(estimate.pose, k, inliers);
  REQUIRE(std::abs(rms_from_cost - rms_direct) < 1e-9);
}
