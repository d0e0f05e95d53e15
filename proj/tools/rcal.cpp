// rcal: command-line surface of the radar-camera extrinsic calibration
// toolkit. Subcommands cover the whole pipeline: synthesize a ground-truth
// scene, calibrate from detection streams, project a radar stream through a
// calibration, and evaluate a calibration on held-out data.
//
// Exit codes: 0 ok, 2 config/input error, 3 no consensus, 4 insufficient data.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rcal/rcal.hpp"

namespace {

namespace fs = std::filesystem;

std::string utc_timestamp_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct SynthArgs {
  std::string config_path;
  std::string out_dir;
};

struct CalibrateArgs {
  std::string camera_csv;
  std::string radar_csv;
  std::string intrinsics_json;
  std::string out_dir = ".";
  std::string matcher = "id";
  std::string prior_path;
  double gate_px = 80.0;
  int block_size = 20;
  int stride_blocks = 2;
  double ransac_threshold = 20.0;
  int ransac_iterations = 2000;
  double confidence = 0.999;
  std::uint64_t seed = 0;
  double window_seconds = 60.0;
  std::string timestamp;
};

struct ProjectArgs {
  std::string calibration_json;
  std::string radar_csv;
  std::string out_path = "projected.csv";
};

struct EvaluateArgs {
  std::string calibration_json;
  std::string camera_csv;
  std::string radar_csv;
  std::string matcher = "id";
  double gate_px = 80.0;
  double inlier_threshold = -1.0;  // <0: use the artifact's RANSAC threshold
  std::string out_path = "report.json";
};

rcal::MatcherConfig make_matcher(const std::string& name, double gate_px,
                                 const std::optional<rcal::ExtrinsicPose>& prior) {
  rcal::MatcherConfig cfg;
  cfg.gate_px = gate_px;
  if (name == "id") {
    cfg.strategy = rcal::MatchStrategy::IdOracle;
  } else if (name == "nearest") {
    cfg.strategy = rcal::MatchStrategy::NearestPrior;
    cfg.prior_pose = prior;
  } else {
    throw rcal::ConfigError("unknown matcher '" + name + "' (expected 'id' or 'nearest')");
  }
  return cfg;
}

int run_synth(const SynthArgs& args) {
  const rcal::SceneConfig cfg = rcal::read_scene_config(args.config_path);
  const rcal::SyntheticDataset data = rcal::generate_scene(cfg);

  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  rcal::write_camera_detections(data.camera_detections, (dir / "camera.csv").string());
  rcal::write_radar_detections(data.radar_detections, (dir / "radar.csv").string());
  rcal::write_truth(data.truth_pose, cfg, (dir / "truth.json").string());
  rcal::write_intrinsics(rcal::IntrinsicsSpec{cfg.k, cfg.image_w, cfg.image_h},
                         (dir / "intrinsics.json").string());

  std::cout << "wrote " << data.camera_detections.size() << " camera detections, "
            << data.radar_detections.size() << " radar detections over " << cfg.n_frames
            << " frames to " << args.out_dir << "\n";
  return 0;
}

int run_calibrate(const CalibrateArgs& args) {
  const rcal::IntrinsicsSpec intr = rcal::read_intrinsics(args.intrinsics_json);
  std::vector<rcal::CameraDetection> camera = rcal::read_camera_detections(args.camera_csv);
  std::vector<rcal::RadarDetection> radar = rcal::read_radar_detections(args.radar_csv);
  const std::size_t camera_total = camera.size();
  const std::size_t radar_total = radar.size();

  std::erase_if(camera, [&](const rcal::CameraDetection& d) {
    return !(d.timestamp < args.window_seconds);
  });
  std::erase_if(radar, [&](const rcal::RadarDetection& d) {
    return !(d.timestamp < args.window_seconds);
  });
  std::cout << "window < " << args.window_seconds << " s: using " << camera.size() << " of "
            << camera_total << " camera detections, " << radar.size() << " of " << radar_total
            << " radar detections\n";

  std::optional<rcal::ExtrinsicPose> prior;
  if (!args.prior_path.empty()) {
    prior = rcal::read_calibration(args.prior_path).pose;
  }
  const rcal::MatcherConfig matcher = make_matcher(args.matcher, args.gate_px, prior);

  const std::vector<rcal::Correspondence> matched =
      rcal::associate(camera, radar, intr.k, matcher);
  const std::vector<rcal::Correspondence> sampled = rcal::block_sample(
      matched, intr.image_w, intr.image_h, args.block_size, args.stride_blocks);
  std::cout << "correspondences: " << matched.size() << " matched, " << sampled.size()
            << " after block sampling (grid coverage "
            << rcal::spatial_coverage(matched, intr.image_w, intr.image_h, args.block_size)
            << ")\n";

  rcal::RansacConfig ransac_cfg;
  ransac_cfg.max_iterations = args.ransac_iterations;
  ransac_cfg.inlier_threshold = args.ransac_threshold;
  ransac_cfg.confidence = args.confidence;
  ransac_cfg.seed = args.seed;
  if (sampled.size() < static_cast<std::size_t>(ransac_cfg.min_sample)) {
    throw rcal::InsufficientDataError(
        "have " + std::to_string(sampled.size()) + " sampled correspondences, need at least " +
        std::to_string(ransac_cfg.min_sample));
  }
  rcal::LmConfig lm_cfg;

  const rcal::PoseEstimate estimate = rcal::calibrate(sampled, intr.k, ransac_cfg, lm_cfg);
  const rcal::EvaluationReport report =
      rcal::evaluate(estimate.pose, intr.k, sampled, ransac_cfg.inlier_threshold);

  rcal::CalibrationArtifact artifact;
  artifact.k = intr.k;
  artifact.pose = estimate.pose;
  artifact.axis_angle = rcal::matrix_to_axis_angle(estimate.pose.rotation);
  artifact.metrics = report;
  artifact.config.matcher = args.matcher;
  artifact.config.gate_px = args.gate_px;
  artifact.config.block_size = args.block_size;
  artifact.config.stride_blocks = args.stride_blocks;
  artifact.config.window_seconds = args.window_seconds;
  artifact.config.ransac = ransac_cfg;
  artifact.config.lm = lm_cfg;
  artifact.created = args.timestamp.empty() ? utc_timestamp_now() : args.timestamp;

  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  rcal::write_calibration(artifact, (dir / "calibration.json").string());
  rcal::write_report(report, ransac_cfg.inlier_threshold, (dir / "report.json").string());
  rcal::write_overlay(estimate.pose, intr.k, sampled, ransac_cfg.inlier_threshold,
                      (dir / "overlay.csv").string());

  std::cout << "inliers: " << report.n_inliers << " of " << report.n_all
            << ", inlier RMSRE " << report.rmsre_inliers << " px, LM "
            << (estimate.converged ? "converged" : "stopped at iteration limit") << " after "
            << estimate.iterations_used << " iterations\n";
  return 0;
}

int run_project(const ProjectArgs& args) {
  const rcal::CalibrationArtifact artifact = rcal::read_calibration(args.calibration_json);
  const std::vector<rcal::RadarDetection> radar = rcal::read_radar_detections(args.radar_csv);
  rcal::write_projected(artifact.pose, artifact.k, radar, args.out_path);
  std::cout << "projected " << radar.size() << " radar detections to " << args.out_path << "\n";
  return 0;
}

int run_evaluate(const EvaluateArgs& args) {
  const rcal::CalibrationArtifact artifact = rcal::read_calibration(args.calibration_json);
  const std::vector<rcal::CameraDetection> camera = rcal::read_camera_detections(args.camera_csv);
  const std::vector<rcal::RadarDetection> radar = rcal::read_radar_detections(args.radar_csv);

  const rcal::MatcherConfig matcher = make_matcher(args.matcher, args.gate_px, artifact.pose);
  const std::vector<rcal::Correspondence> corrs =
      rcal::associate(camera, radar, artifact.k, matcher);
  if (corrs.empty()) {
    throw rcal::InsufficientDataError("no correspondences matched for evaluation");
  }

  const double threshold = args.inlier_threshold > 0.0 ? args.inlier_threshold
                                                       : artifact.config.ransac.inlier_threshold;
  const rcal::EvaluationReport report = rcal::evaluate(artifact.pose, artifact.k, corrs, threshold);
  rcal::write_report(report, threshold, args.out_path);

  std::cout << "evaluated " << report.n_all << " correspondences: MARE " << report.mare_all
            << " px, RMSRE " << report.rmsre_all << " px (inliers: " << report.n_inliers
            << ", RMSRE " << report.rmsre_inliers << " px)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radar-camera extrinsic calibration toolkit"};
  app.name("rcal");
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scene with ground truth");
  synth->add_option("config", synth_args.config_path, "scene configuration JSON")->required();
  synth->add_option("out_dir", synth_args.out_dir, "output directory")->required();

  CalibrateArgs cal_args;
  CLI::App* cal = app.add_subcommand("calibrate", "estimate the radar-camera extrinsic pose");
  cal->add_option("camera_csv", cal_args.camera_csv, "camera detection stream")->required();
  cal->add_option("radar_csv", cal_args.radar_csv, "radar detection stream")->required();
  cal->add_option("intrinsics_json", cal_args.intrinsics_json, "camera intrinsics")->required();
  cal->add_option("--out-dir", cal_args.out_dir, "output directory");
  cal->add_option("--matcher", cal_args.matcher, "association strategy: id or nearest");
  cal->add_option("--prior", cal_args.prior_path, "calibration JSON used as prior for --matcher nearest");
  cal->add_option("--gate-px", cal_args.gate_px, "association gate in pixels");
  cal->add_option("--block-size", cal_args.block_size, "sampling block size in pixels");
  cal->add_option("--stride-blocks", cal_args.stride_blocks, "keep every n-th block per axis");
  cal->add_option("--ransac-threshold", cal_args.ransac_threshold, "inlier threshold in pixels");
  cal->add_option("--ransac-iterations", cal_args.ransac_iterations, "RANSAC iteration cap");
  cal->add_option("--confidence", cal_args.confidence, "RANSAC confidence in (0,1)");
  cal->add_option("--seed", cal_args.seed, "RANSAC random seed");
  cal->add_option("--window-seconds", cal_args.window_seconds,
                  "use only detections with timestamp below this");
  cal->add_option("--timestamp", cal_args.timestamp,
                  "timestamp recorded in the artifact (default: current UTC time)");

  ProjectArgs proj_args;
  CLI::App* proj = app.add_subcommand("project", "project a radar stream through a calibration");
  proj->add_option("calibration_json", proj_args.calibration_json, "calibration artifact")->required();
  proj->add_option("radar_csv", proj_args.radar_csv, "radar detection stream")->required();
  proj->add_option("--out", proj_args.out_path, "output CSV path");

  EvaluateArgs eval_args;
  CLI::App* eval = app.add_subcommand("evaluate", "evaluate a calibration on matched detections");
  eval->add_option("calibration_json", eval_args.calibration_json, "calibration artifact")->required();
  eval->add_option("camera_csv", eval_args.camera_csv, "camera detection stream")->required();
  eval->add_option("radar_csv", eval_args.radar_csv, "radar detection stream")->required();
  eval->add_option("--matcher", eval_args.matcher,
                   "association strategy: id or nearest (prior = artifact pose)");
  eval->add_option("--gate-px", eval_args.gate_px, "association gate in pixels");
  eval->add_option("--inlier-threshold", eval_args.inlier_threshold,
                   "inlier threshold in pixels (default: artifact's RANSAC threshold)");
  eval->add_option("--out", eval_args.out_path, "output report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (cal->parsed()) return run_calibrate(cal_args);
    if (proj->parsed()) return run_project(proj_args);
    if (eval->parsed()) return run_evaluate(eval_args);
  } catch (const rcal::NoConsensusError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const rcal::InsufficientDataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const rcal::EmptySetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const rcal::CalibError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
