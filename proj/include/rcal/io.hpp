#pragma once

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rcal/correspondence.hpp"
#include "rcal/geometry.hpp"
#include "rcal/metrics.hpp"
#include "rcal/solver.hpp"
#include "rcal/synth.hpp"

// File schemas. Detection streams are CSV with a fixed header; structured
// artifacts are JSON. All writers are byte-deterministic: fixed key order,
// fixed indentation, floats at 17 significant digits (enough for a lossless
// double round trip). The only wall-clock field is the artifact timestamp,
// which callers inject.

namespace rcal {

inline constexpr std::string_view kToolName = "rcal";
inline constexpr std::string_view kToolVersion = "0.1.0";

inline constexpr std::string_view kCameraCsvHeader = "frame_id,timestamp,u,v,object_id,class";
inline constexpr std::string_view kRadarCsvHeader = "frame_id,timestamp,x,y,z,object_id,doppler";
inline constexpr std::string_view kOverlayCsvHeader =
    "frame_id,u_gt,v_gt,u_proj,v_proj,distance,is_inlier";
inline constexpr std::string_view kProjectedCsvHeader = "frame_id,timestamp,u,v,depth,valid";

inline std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

// Everything needed to rerun or audit a calibration.
struct PipelineConfig {
  std::string matcher = "id";
  double gate_px = 80.0;
  int block_size = 20;
  int stride_blocks = 2;
  double window_seconds = 60.0;
  RansacConfig ransac;
  LmConfig lm;
};

struct CalibrationArtifact {
  CameraIntrinsics k;
  ExtrinsicPose pose;
  AxisAngle axis_angle;       // redundant encoding of pose.rotation
  EvaluationReport metrics;   // summary only; per_point is not serialized
  PipelineConfig config;
  std::string tool_version{kToolVersion};
  std::string created;        // ISO 8601, injected by the caller
};

struct IntrinsicsSpec {
  CameraIntrinsics k;
  int image_w = 0;
  int image_h = 0;
};

namespace detail {

// ---- deterministic JSON emission ----

class JsonOut {
 public:
  void object_open() {
    pre_value();
    out_ += '{';
    stack_.push_back(true);
  }
  void object_close() {
    stack_.pop_back();
    newline_indent();
    out_ += '}';
  }
  void array_open() {
    pre_value();
    out_ += '[';
    stack_.push_back(true);
  }
  void array_close() {
    stack_.pop_back();
    newline_indent();
    out_ += ']';
  }
  void key(std::string_view name) {
    separator();
    newline_indent();
    out_ += '"';
    escape_into(name);
    out_ += "\": ";
    pending_key_ = true;
  }
  void number(double v) {
    if (!std::isfinite(v)) throw InvalidArgumentError("JsonOut: non-finite number");
    pre_value();
    out_ += format_double(v);
  }
  void integer(std::int64_t v) {
    pre_value();
    out_ += std::to_string(v);
  }
  void unsigned_integer(std::uint64_t v) {
    pre_value();
    out_ += std::to_string(v);
  }
  void boolean(bool v) {
    pre_value();
    out_ += v ? "true" : "false";
  }
  void string(std::string_view v) {
    pre_value();
    out_ += '"';
    escape_into(v);
    out_ += '"';
  }
  std::string take() {
    out_ += '\n';
    return std::move(out_);
  }

 private:
  void separator() {
    if (!stack_.back()) out_ += ',';
    stack_.back() = false;
  }
  void pre_value() {
    if (pending_key_) {
      pending_key_ = false;
      return;
    }
    if (!stack_.empty()) {
      separator();
      newline_indent();
    }
  }
  void newline_indent() {
    out_ += '\n';
    out_.append(2 * stack_.size(), ' ');
  }
  void escape_into(std::string_view s) {
    for (char c : s) {
      switch (c) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\n': out_ += "\\n"; break;
        case '\r': out_ += "\\r"; break;
        case '\t': out_ += "\\t"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "\\u%04x", c);
            out_ += buf;
          } else {
            out_ += c;
          }
      }
    }
  }

  std::string out_;
  std::vector<bool> stack_;  // per level: no element emitted yet
  bool pending_key_ = false;
};

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open for writing: " + path);
  file << content;
  if (!file) throw IoError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << file.rdbuf();
  return ss.str();
}

// ---- CSV parsing ----

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

[[noreturn]] inline void parse_fail(const std::string& path, std::size_t line, std::size_t col,
                                    const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
}

inline double parse_double_field(const std::string& field, const std::string& path,
                                 std::size_t line, std::size_t col) {
  if (field.empty()) parse_fail(path, line, col, "empty numeric field");
  std::size_t consumed = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &consumed);
  } catch (const std::exception&) {
    parse_fail(path, line, col, "not a number: '" + field + "'");
  }
  if (consumed != field.size()) parse_fail(path, line, col, "not a number: '" + field + "'");
  if (!std::isfinite(v)) parse_fail(path, line, col, "non-finite value: '" + field + "'");
  return v;
}

inline std::int64_t parse_int_field(const std::string& field, const std::string& path,
                                    std::size_t line, std::size_t col) {
  if (field.empty()) parse_fail(path, line, col, "empty integer field");
  std::size_t consumed = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(field, &consumed);
  } catch (const std::exception&) {
    parse_fail(path, line, col, "not an integer: '" + field + "'");
  }
  if (consumed != field.size()) parse_fail(path, line, col, "not an integer: '" + field + "'");
  return v;
}

struct CsvReader {
  std::string path;
  std::ifstream file;
  std::size_t line_no = 0;

  CsvReader(const std::string& p, std::string_view expected_header) : path(p), file(p) {
    if (!file) throw IoError("cannot open: " + path);
    std::string header;
    if (!std::getline(file, header)) {
      throw SchemaError(path + ":1: missing header, expected '" + std::string(expected_header) + "'");
    }
    if (!header.empty() && header.back() == '\r') header.pop_back();
    line_no = 1;
    if (header != expected_header) {
      throw SchemaError(path + ":1: bad header, expected '" + std::string(expected_header) +
                        "' got '" + header + "'");
    }
  }

  bool next(std::vector<std::string>& fields, std::size_t expected_fields) {
    std::string line;
    while (std::getline(file, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      fields = split_csv_line(line);
      if (fields.size() != expected_fields) {
        parse_fail(path, line_no, fields.size(),
                   "expected " + std::to_string(expected_fields) + " fields, got " +
                       std::to_string(fields.size()));
      }
      return true;
    }
    return false;
  }
};

// ---- JSON fragment writers ----

inline void write_pose_fields(JsonOut& j, const ExtrinsicPose& pose, const AxisAngle& aa) {
  j.key("rotation");
  j.array_open();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) j.number(pose.rotation(r, c));
  }
  j.array_close();
  j.key("translation");
  j.array_open();
  for (int i = 0; i < 3; ++i) j.number(pose.translation(i));
  j.array_close();
  j.key("axis_angle");
  j.array_open();
  for (int i = 0; i < 3; ++i) j.number(aa.r(i));
  j.array_close();
}

inline void write_intrinsics_fields(JsonOut& j, const CameraIntrinsics& k) {
  j.key("fx");
  j.number(k.fx);
  j.key("fy");
  j.number(k.fy);
  j.key("cx");
  j.number(k.cx);
  j.key("cy");
  j.number(k.cy);
  j.key("skew");
  j.number(k.skew);
}

inline Eigen::Vector3d json_vec3(const nlohmann::json& arr, const std::string& what) {
  if (!arr.is_array() || arr.size() != 3) {
    throw ConfigError(what + " must be an array of 3 numbers");
  }
  return {arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>()};
}

inline ExtrinsicPose parse_pose_json(const nlohmann::json& node, const std::string& what) {
  ExtrinsicPose pose;
  if (node.contains("rotation")) {
    const auto& rot = node.at("rotation");
    if (!rot.is_array() || rot.size() != 9) {
      throw ConfigError(what + ".rotation must be an array of 9 numbers (row-major)");
    }
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) pose.rotation(r, c) = rot[3 * r + c].get<double>();
    }
  } else if (node.contains("axis_angle")) {
    pose.rotation =
        axis_angle_to_matrix(AxisAngle{json_vec3(node.at("axis_angle"), what + ".axis_angle")});
  } else {
    throw ConfigError(what + " needs either 'rotation' or 'axis_angle'");
  }
  pose.translation = json_vec3(node.at("translation"), what + ".translation");
  return pose;
}

}  // namespace detail

// ---- detection streams ----

inline std::vector<CameraDetection> read_camera_detections(const std::string& path) {
  detail::CsvReader reader(path, kCameraCsvHeader);
  std::vector<CameraDetection> out;
  std::vector<std::string> f;
  while (reader.next(f, 6)) {
    CameraDetection d;
    d.frame_id = detail::parse_int_field(f[0], path, reader.line_no, 1);
    if (d.frame_id < 0) detail::parse_fail(path, reader.line_no, 1, "frame_id must be >= 0");
    d.timestamp = detail::parse_double_field(f[1], path, reader.line_no, 2);
    d.center.u = detail::parse_double_field(f[2], path, reader.line_no, 3);
    d.center.v = detail::parse_double_field(f[3], path, reader.line_no, 4);
    if (!f[4].empty()) d.object_id = detail::parse_int_field(f[4], path, reader.line_no, 5);
    d.class_label = f[5];
    out.push_back(std::move(d));
  }
  return out;
}

inline std::vector<RadarDetection> read_radar_detections(const std::string& path) {
  detail::CsvReader reader(path, kRadarCsvHeader);
  std::vector<RadarDetection> out;
  std::vector<std::string> f;
  while (reader.next(f, 7)) {
    RadarDetection d;
    d.frame_id = detail::parse_int_field(f[0], path, reader.line_no, 1);
    if (d.frame_id < 0) detail::parse_fail(path, reader.line_no, 1, "frame_id must be >= 0");
    d.timestamp = detail::parse_double_field(f[1], path, reader.line_no, 2);
    d.point.x = detail::parse_double_field(f[2], path, reader.line_no, 3);
    d.point.y = detail::parse_double_field(f[3], path, reader.line_no, 4);
    d.point.z = detail::parse_double_field(f[4], path, reader.line_no, 5);
    if (!f[5].empty()) d.object_id = detail::parse_int_field(f[5], path, reader.line_no, 6);
    if (!f[6].empty()) d.doppler = detail::parse_double_field(f[6], path, reader.line_no, 7);
    out.push_back(d);
  }
  return out;
}

inline void write_camera_detections(const std::vector<CameraDetection>& dets,
                                    const std::string& path) {
  std::string out{kCameraCsvHeader};
  out += '\n';
  for (const CameraDetection& d : dets) {
    out += std::to_string(d.frame_id);
    out += ',';
    out += format_double(d.timestamp);
    out += ',';
    out += format_double(d.center.u);
    out += ',';
    out += format_double(d.center.v);
    out += ',';
    if (d.object_id) out += std::to_string(*d.object_id);
    out += ',';
    out += d.class_label;
    out += '\n';
  }
  detail::write_text_file(path, out);
}

inline void write_radar_detections(const std::vector<RadarDetection>& dets,
                                   const std::string& path) {
  std::string out{kRadarCsvHeader};
  out += '\n';
  for (const RadarDetection& d : dets) {
    out += std::to_string(d.frame_id);
    out += ',';
    out += format_double(d.timestamp);
    out += ',';
    out += format_double(d.point.x);
    out += ',';
    out += format_double(d.point.y);
    out += ',';
    out += format_double(d.point.z);
    out += ',';
    if (d.object_id) out += std::to_string(*d.object_id);
    out += ',';
    if (d.doppler) out += format_double(*d.doppler);
    out += '\n';
  }
  detail::write_text_file(path, out);
}

// ---- calibration artifact ----

inline void write_calibration(const CalibrationArtifact& artifact, const std::string& path) {
  detail::JsonOut j;
  j.object_open();
  j.key("tool");
  j.string(kToolName);
  j.key("version");
  j.string(artifact.tool_version);
  j.key("created");
  j.string(artifact.created);
  j.key("intrinsics");
  j.object_open();
  detail::write_intrinsics_fields(j, artifact.k);
  j.object_close();
  j.key("pose");
  j.object_open();
  detail::write_pose_fields(j, artifact.pose, artifact.axis_angle);
  j.object_close();
  j.key("metrics");
  j.object_open();
  j.key("n_all");
  j.unsigned_integer(artifact.metrics.n_all);
  j.key("n_inliers");
  j.unsigned_integer(artifact.metrics.n_inliers);
  j.key("mare_all");
  j.number(artifact.metrics.mare_all);
  j.key("rmsre_all");
  j.number(artifact.metrics.rmsre_all);
  j.key("mare_inliers");
  j.number(artifact.metrics.mare_inliers);
  j.key("rmsre_inliers");
  j.number(artifact.metrics.rmsre_inliers);
  j.object_close();
  j.key("config");
  j.object_open();
  j.key("matcher");
  j.string(artifact.config.matcher);
  j.key("gate_px");
  j.number(artifact.config.gate_px);
  j.key("block_size");
  j.integer(artifact.config.block_size);
  j.key("stride_blocks");
  j.integer(artifact.config.stride_blocks);
  j.key("window_seconds");
  j.number(artifact.config.window_seconds);
  j.key("ransac");
  j.object_open();
  j.key("max_iterations");
  j.integer(artifact.config.ransac.max_iterations);
  j.key("inlier_threshold");
  j.number(artifact.config.ransac.inlier_threshold);
  j.key("min_sample");
  j.integer(artifact.config.ransac.min_sample);
  j.key("confidence");
  j.number(artifact.config.ransac.confidence);
  j.key("seed");
  j.unsigned_integer(artifact.config.ransac.seed);
  j.object_close();
  j.key("lm");
  j.object_open();
  j.key("max_iterations");
  j.integer(artifact.config.lm.max_iterations);
  j.key("initial_damping");
  j.number(artifact.config.lm.initial_damping);
  j.key("damping_up");
  j.number(artifact.config.lm.damping_up);
  j.key("damping_down");
  j.number(artifact.config.lm.damping_down);
  j.key("cost_tol");
  j.number(artifact.config.lm.cost_tol);
  j.key("param_tol");
  j.number(artifact.config.lm.param_tol);
  j.object_close();
  j.object_close();
  j.object_close();
  detail::write_text_file(path, j.take());
}

inline CalibrationArtifact read_calibration(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptArtifactError(path + ": not valid JSON: " + e.what());
  }

  CalibrationArtifact artifact;
  try {
    artifact.tool_version = doc.at("version").get<std::string>();
    artifact.created = doc.at("created").get<std::string>();
    const auto& ki = doc.at("intrinsics");
    artifact.k.fx = ki.at("fx").get<double>();
    artifact.k.fy = ki.at("fy").get<double>();
    artifact.k.cx = ki.at("cx").get<double>();
    artifact.k.cy = ki.at("cy").get<double>();
    artifact.k.skew = ki.at("skew").get<double>();

    const auto& pose = doc.at("pose");
    const auto& rot = pose.at("rotation");
    const auto& tr = pose.at("translation");
    const auto& aa = pose.at("axis_angle");
    if (!rot.is_array() || rot.size() != 9 || !tr.is_array() || tr.size() != 3 ||
        !aa.is_array() || aa.size() != 3) {
      throw CorruptArtifactError(path + ": malformed pose block");
    }
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) artifact.pose.rotation(r, c) = rot[3 * r + c].get<double>();
    }
    for (int i = 0; i < 3; ++i) artifact.pose.translation(i) = tr[i].get<double>();
    for (int i = 0; i < 3; ++i) artifact.axis_angle.r(i) = aa[i].get<double>();

    const auto& metrics = doc.at("metrics");
    artifact.metrics.n_all = metrics.at("n_all").get<std::size_t>();
    artifact.metrics.n_inliers = metrics.at("n_inliers").get<std::size_t>();
    artifact.metrics.mare_all = metrics.at("mare_all").get<double>();
    artifact.metrics.rmsre_all = metrics.at("rmsre_all").get<double>();
    artifact.metrics.mare_inliers = metrics.at("mare_inliers").get<double>();
    artifact.metrics.rmsre_inliers = metrics.at("rmsre_inliers").get<double>();

    const auto& cfg = doc.at("config");
    artifact.config.matcher = cfg.at("matcher").get<std::string>();
    artifact.config.gate_px = cfg.at("gate_px").get<double>();
    artifact.config.block_size = cfg.at("block_size").get<int>();
    artifact.config.stride_blocks = cfg.at("stride_blocks").get<int>();
    artifact.config.window_seconds = cfg.at("window_seconds").get<double>();
    const auto& rc = cfg.at("ransac");
    artifact.config.ransac.max_iterations = rc.at("max_iterations").get<int>();
    artifact.config.ransac.inlier_threshold = rc.at("inlier_threshold").get<double>();
    artifact.config.ransac.min_sample = rc.at("min_sample").get<int>();
    artifact.config.ransac.confidence = rc.at("confidence").get<double>();
    artifact.config.ransac.seed = rc.at("seed").get<std::uint64_t>();
    const auto& lc = cfg.at("lm");
    artifact.config.lm.max_iterations = lc.at("max_iterations").get<int>();
    artifact.config.lm.initial_damping = lc.at("initial_damping").get<double>();
    artifact.config.lm.damping_up = lc.at("damping_up").get<double>();
    artifact.config.lm.damping_down = lc.at("damping_down").get<double>();
    artifact.config.lm.cost_tol = lc.at("cost_tol").get<double>();
    artifact.config.lm.param_tol = lc.at("param_tol").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptArtifactError(path + ": missing or mistyped field: " + e.what());
  }

  try {
    artifact.pose.validate();
  } catch (const InvalidArgumentError& e) {
    throw CorruptArtifactError(path + ": " + e.what());
  }
  artifact.k.validate();
  return artifact;
}

// ---- evaluation report ----

inline void write_report(const EvaluationReport& report, double inlier_threshold_px,
                         const std::string& path) {
  detail::JsonOut j;
  j.object_open();
  j.key("n_all");
  j.unsigned_integer(report.n_all);
  j.key("n_inliers");
  j.unsigned_integer(report.n_inliers);
  j.key("inlier_threshold_px");
  j.number(inlier_threshold_px);
  j.key("mare_all");
  j.number(report.mare_all);
  j.key("rmsre_all");
  j.number(report.rmsre_all);
  j.key("mare_inliers");
  j.number(report.mare_inliers);
  j.key("rmsre_inliers");
  j.number(report.rmsre_inliers);
  j.key("per_point");
  j.array_open();
  for (const PerPointError& p : report.per_point) {
    j.object_open();
    j.key("index");
    j.unsigned_integer(p.index);
    j.key("distance");
    j.number(p.distance);
    j.key("is_inlier");
    j.boolean(p.is_inlier);
    j.object_close();
  }
  j.array_close();
  j.object_close();
  detail::write_text_file(path, j.take());
}

// ---- overlay and projection CSVs ----

// The data behind projected-vs-observed plots: one row per correspondence.
inline void write_overlay(const ExtrinsicPose& pose, const CameraIntrinsics& k,
                          const std::vector<Correspondence>& corrs, double inlier_threshold_px,
                          const std::string& path) {
  std::string out{kOverlayCsvHeader};
  out += '\n';
  for (const Correspondence& c : corrs) {
    const Eigen::Vector3d cam = pose.rotation * c.radar.vec() + pose.translation;
    const double s = cam.z();
    double u_proj = std::numeric_limits<double>::quiet_NaN();
    double v_proj = std::numeric_limits<double>::quiet_NaN();
    if (std::abs(s) >= kMinDepth) {
      u_proj = (k.fx * cam.x() + k.skew * cam.y()) / s + k.cx;
      v_proj = k.fy * cam.y() / s + k.cy;
    }
    const double distance = reprojection_distance(pose, k, c);
    out += std::to_string(c.frame_id);
    out += ',';
    out += format_double(c.pixel.u);
    out += ',';
    out += format_double(c.pixel.v);
    out += ',';
    out += format_double(u_proj);
    out += ',';
    out += format_double(v_proj);
    out += ',';
    out += format_double(distance);
    out += ',';
    out += (distance < inlier_threshold_px) ? '1' : '0';
    out += '\n';
  }
  detail::write_text_file(path, out);
}

// Projection of a raw radar stream through a calibrated pose. Rows with
// depth below the minimum are marked invalid.
inline void write_projected(const ExtrinsicPose& pose, const CameraIntrinsics& k,
                            const std::vector<RadarDetection>& dets, const std::string& path) {
  std::string out{kProjectedCsvHeader};
  out += '\n';
  for (const RadarDetection& d : dets) {
    const Eigen::Vector3d cam = pose.rotation * d.point.vec() + pose.translation;
    const double s = cam.z();
    double u = std::numeric_limits<double>::quiet_NaN();
    double v = std::numeric_limits<double>::quiet_NaN();
    if (std::abs(s) >= kMinDepth) {
      u = (k.fx * cam.x() + k.skew * cam.y()) / s + k.cx;
      v = k.fy * cam.y() / s + k.cy;
    }
    out += std::to_string(d.frame_id);
    out += ',';
    out += format_double(d.timestamp);
    out += ',';
    out += format_double(u);
    out += ',';
    out += format_double(v);
    out += ',';
    out += format_double(s);
    out += ',';
    out += (s >= kMinDepth) ? '1' : '0';
    out += '\n';
  }
  detail::write_text_file(path, out);
}

// ---- intrinsics file ----

inline IntrinsicsSpec read_intrinsics(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": not valid JSON: " + e.what());
  }
  IntrinsicsSpec spec;
  try {
    spec.k.fx = doc.at("fx").get<double>();
    spec.k.fy = doc.at("fy").get<double>();
    spec.k.cx = doc.at("cx").get<double>();
    spec.k.cy = doc.at("cy").get<double>();
    spec.k.skew = doc.value("skew", 0.0);
    spec.image_w = doc.at("image_width").get<int>();
    spec.image_h = doc.at("image_height").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": missing or mistyped field: " + e.what());
  }
  spec.k.validate();
  if (spec.image_w < 1 || spec.image_h < 1) {
    throw ConfigError(path + ": image dimensions must be positive");
  }
  return spec;
}

inline void write_intrinsics(const IntrinsicsSpec& spec, const std::string& path) {
  detail::JsonOut j;
  j.object_open();
  detail::write_intrinsics_fields(j, spec.k);
  j.key("image_width");
  j.integer(spec.image_w);
  j.key("image_height");
  j.integer(spec.image_h);
  j.object_close();
  detail::write_text_file(path, j.take());
}

// ---- scene configuration and truth ----

inline SceneConfig parse_scene_config(const nlohmann::json& doc) {
  SceneConfig cfg;
  try {
    cfg.seed = doc.value("seed", std::uint64_t{0});
    cfg.n_frames = doc.at("n_frames").get<int>();
    cfg.frame_rate = doc.value("frame_rate", 30.0);
    cfg.image_w = doc.at("image_width").get<int>();
    cfg.image_h = doc.at("image_height").get<int>();
    const auto& ki = doc.at("intrinsics");
    cfg.k.fx = ki.at("fx").get<double>();
    cfg.k.fy = ki.at("fy").get<double>();
    cfg.k.cx = ki.at("cx").get<double>();
    cfg.k.cy = ki.at("cy").get<double>();
    cfg.k.skew = ki.value("skew", 0.0);
    cfg.true_pose = detail::parse_pose_json(doc.at("true_pose"), "true_pose");
    cfg.pixel_noise_sigma = doc.value("pixel_noise_sigma", 0.0);
    cfg.radar_range_sigma = doc.value("radar_range_sigma", 0.0);
    cfg.radar_azimuth_sigma = doc.value("radar_azimuth_sigma", 0.0);
    cfg.radar_elevation_sigma = doc.value("radar_elevation_sigma", 0.0);
    cfg.outlier_fraction = doc.value("outlier_fraction", 0.0);
    cfg.outlier_offset_px = doc.value("outlier_offset_px", 500.0);
    for (const auto& t : doc.at("targets")) {
      TrajectorySpec spec;
      spec.object_id = t.at("object_id").get<std::int64_t>();
      spec.class_label = t.value("class", std::string{});
      const std::string kind = t.at("kind").get<std::string>();
      if (kind == "linear") {
        spec.kind = TrajectoryKind::Linear;
        spec.start = detail::json_vec3(t.at("start"), "target.start");
        spec.velocity = detail::json_vec3(t.at("velocity"), "target.velocity");
      } else if (kind == "circular") {
        spec.kind = TrajectoryKind::Circular;
        spec.center = detail::json_vec3(t.at("center"), "target.center");
        spec.radius = t.at("radius").get<double>();
        spec.angular_rate = t.at("angular_rate").get<double>();
        spec.phase = t.value("phase", 0.0);
      } else if (kind == "waypoints") {
        spec.kind = TrajectoryKind::Waypoints;
        for (const auto& tv : t.at("times")) spec.waypoint_times.push_back(tv.get<double>());
        for (const auto& pv : t.at("points")) {
          spec.waypoints.push_back(detail::json_vec3(pv, "target.points[]"));
        }
      } else {
        throw ConfigError("target.kind must be linear, circular, or waypoints");
      }
      cfg.targets.push_back(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene config: missing or mistyped field: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const InvalidArgumentError& e) {
    throw ConfigError(std::string("scene config: ") + e.what());
  }
  return cfg;
}

inline SceneConfig read_scene_config(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": not valid JSON: " + e.what());
  }
  return parse_scene_config(doc);
}

namespace detail {

inline void write_scene_config_fields(JsonOut& j, const SceneConfig& cfg) {
  j.key("seed");
  j.unsigned_integer(cfg.seed);
  j.key("n_frames");
  j.integer(cfg.n_frames);
  j.key("frame_rate");
  j.number(cfg.frame_rate);
  j.key("image_width");
  j.integer(cfg.image_w);
  j.key("image_height");
  j.integer(cfg.image_h);
  j.key("intrinsics");
  j.object_open();
  write_intrinsics_fields(j, cfg.k);
  j.object_close();
  j.key("true_pose");
  j.object_open();
  write_pose_fields(j, cfg.true_pose, matrix_to_axis_angle(cfg.true_pose.rotation));
  j.object_close();
  j.key("pixel_noise_sigma");
  j.number(cfg.pixel_noise_sigma);
  j.key("radar_range_sigma");
  j.number(cfg.radar_range_sigma);
  j.key("radar_azimuth_sigma");
  j.number(cfg.radar_azimuth_sigma);
  j.key("radar_elevation_sigma");
  j.number(cfg.radar_elevation_sigma);
  j.key("outlier_fraction");
  j.number(cfg.outlier_fraction);
  j.key("outlier_offset_px");
  j.number(cfg.outlier_offset_px);
  j.key("targets");
  j.array_open();
  for (const TrajectorySpec& t : cfg.targets) {
    j.object_open();
    j.key("object_id");
    j.integer(t.object_id);
    j.key("class");
    j.string(t.class_label);
    switch (t.kind) {
      case TrajectoryKind::Linear:
        j.key("kind");
        j.string("linear");
        j.key("start");
        j.array_open();
        for (int i = 0; i < 3; ++i) j.number(t.start(i));
        j.array_close();
        j.key("velocity");
        j.array_open();
        for (int i = 0; i < 3; ++i) j.number(t.velocity(i));
        j.array_close();
        break;
      case TrajectoryKind::Circular:
        j.key("kind");
        j.string("circular");
        j.key("center");
        j.array_open();
        for (int i = 0; i < 3; ++i) j.number(t.center(i));
        j.array_close();
        j.key("radius");
        j.number(t.radius);
        j.key("angular_rate");
        j.number(t.angular_rate);
        j.key("phase");
        j.number(t.phase);
        break;
      case TrajectoryKind::Waypoints:
        j.key("kind");
        j.string("waypoints");
        j.key("times");
        j.array_open();
        for (double tv : t.waypoint_times) j.number(tv);
        j.array_close();
        j.key("points");
        j.array_open();
        for (const Eigen::Vector3d& p : t.waypoints) {
          j.array_open();
          for (int i = 0; i < 3; ++i) j.number(p(i));
          j.array_close();
        }
        j.array_close();
        break;
    }
    j.object_close();
  }
  j.array_close();
}

}  // namespace detail

// Ground-truth sidecar written next to synthetic detection streams.
inline void write_truth(const ExtrinsicPose& truth_pose, const SceneConfig& cfg,
                        const std::string& path) {
  detail::JsonOut j;
  j.object_open();
  j.key("pose");
  j.object_open();
  detail::write_pose_fields(j, truth_pose, matrix_to_axis_angle(truth_pose.rotation));
  j.object_close();
  j.key("scene_config");
  j.object_open();
  detail::write_scene_config_fields(j, cfg);
  j.object_close();
  j.object_close();
  detail::write_text_file(path, j.take());
}

inline ExtrinsicPose read_truth_pose(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": not valid JSON: " + e.what());
  }
  ExtrinsicPose pose;
  try {
    pose = detail::parse_pose_json(doc.at("pose"), "pose");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": missing or mistyped field: " + e.what());
  }
  pose.validate();
  return pose;
}

}  // namespace rcal
