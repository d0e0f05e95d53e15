#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "rcal/geometry.hpp"

namespace rcal {

struct CameraDetection {
  std::int64_t frame_id = 0;
  double timestamp = 0.0;
  PixelPoint center;
  std::optional<std::int64_t> object_id;
  std::string class_label;  // empty = absent
};

struct RadarDetection {
  std::int64_t frame_id = 0;
  double timestamp = 0.0;
  RadarPoint point;
  std::optional<std::int64_t> object_id;
  std::optional<double> doppler;  // m/s, radial
};

// One radar point paired with the pixel observation of the same object.
struct Correspondence {
  PixelPoint pixel;
  RadarPoint radar;
  std::int64_t frame_id = 0;
  double match_score = 1.0;
};

enum class MatchStrategy {
  IdOracle,      // pair detections sharing (frame_id, object_id)
  NearestPrior,  // project radar through a prior pose, greedy nearest pixel
};

struct MatcherConfig {
  MatchStrategy strategy = MatchStrategy::IdOracle;
  std::optional<ExtrinsicPose> prior_pose;
  double gate_px = 80.0;
  bool require_one_to_one = true;

  void validate() const {
    if (!(gate_px > 0.0)) {
      throw ConfigError("MatcherConfig: gate_px must be positive");
    }
    if (strategy == MatchStrategy::NearestPrior && !prior_pose.has_value()) {
      throw ConfigError("MatcherConfig: NearestPrior requires prior_pose");
    }
  }
};

namespace detail {

inline bool correspondence_order(const Correspondence& a, const Correspondence& b) {
  return std::tie(a.frame_id, a.pixel.u, a.pixel.v) <
         std::tie(b.frame_id, b.pixel.u, b.pixel.v);
}

// Deterministic ordering of the raw detection streams so association does not
// depend on input order.
inline std::vector<std::size_t> sorted_camera_indices(const std::vector<CameraDetection>& dets) {
  std::vector<std::size_t> idx(dets.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& da = dets[a];
    const auto& db = dets[b];
    const std::int64_t ida = da.object_id.value_or(-1);
    const std::int64_t idb = db.object_id.value_or(-1);
    return std::tie(da.frame_id, da.center.u, da.center.v, ida) <
           std::tie(db.frame_id, db.center.u, db.center.v, idb);
  });
  return idx;
}

inline std::vector<std::size_t> sorted_radar_indices(const std::vector<RadarDetection>& dets) {
  std::vector<std::size_t> idx(dets.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& da = dets[a];
    const auto& db = dets[b];
    const std::int64_t ida = da.object_id.value_or(-1);
    const std::int64_t idb = db.object_id.value_or(-1);
    return std::tie(da.frame_id, da.point.x, da.point.y, da.point.z, ida) <
           std::tie(db.frame_id, db.point.x, db.point.y, db.point.z, idb);
  });
  return idx;
}

}  // namespace detail

// Match per-frame detections into point correspondences. Detections are only
// paired within the same frame_id; output is sorted by (frame_id, u, v).
inline std::vector<Correspondence> associate(const std::vector<CameraDetection>& camera,
                                             const std::vector<RadarDetection>& radar,
                                             const CameraIntrinsics& k,
                                             const MatcherConfig& cfg) {
  cfg.validate();
  k.validate();

  const std::vector<std::size_t> cam_order = detail::sorted_camera_indices(camera);
  const std::vector<std::size_t> rad_order = detail::sorted_radar_indices(radar);

  std::vector<Correspondence> out;

  if (cfg.strategy == MatchStrategy::IdOracle) {
    // Group by (frame_id, object_id) and zip camera/radar members in sorted
    // order; detections without an id cannot be matched by the oracle.
    struct Key {
      std::int64_t frame;
      std::int64_t id;
      bool operator<(const Key& o) const { return std::tie(frame, id) < std::tie(o.frame, o.id); }
    };
    std::vector<std::pair<Key, std::size_t>> cam_keys;
    std::vector<std::pair<Key, std::size_t>> rad_keys;
    for (std::size_t i : cam_order) {
      if (camera[i].object_id) cam_keys.push_back({{camera[i].frame_id, *camera[i].object_id}, i});
    }
    for (std::size_t i : rad_order) {
      if (radar[i].object_id) rad_keys.push_back({{radar[i].frame_id, *radar[i].object_id}, i});
    }
    std::stable_sort(cam_keys.begin(), cam_keys.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::stable_sort(rad_keys.begin(), rad_keys.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    std::size_t ci = 0;
    std::size_t ri = 0;
    while (ci < cam_keys.size() && ri < rad_keys.size()) {
      if (cam_keys[ci].first < rad_keys[ri].first) {
        ++ci;
      } else if (rad_keys[ri].first < cam_keys[ci].first) {
        ++ri;
      } else {
        const auto& cd = camera[cam_keys[ci].second];
        const auto& rd = radar[rad_keys[ri].second];
        out.push_back(Correspondence{cd.center, rd.point, cd.frame_id, 1.0});
        ++ci;
        ++ri;
      }
    }
  } else {
    const ExtrinsicPose& prior = *cfg.prior_pose;
    struct Candidate {
      double distance;
      std::size_t cam_rank;
      std::size_t rad_rank;
      std::size_t cam_idx;
      std::size_t rad_idx;
    };

    // Frame-by-frame greedy matching in ascending distance order.
    std::size_t cam_begin = 0;
    std::size_t rad_begin = 0;
    while (cam_begin < cam_order.size() && rad_begin < rad_order.size()) {
      const std::int64_t cf = camera[cam_order[cam_begin]].frame_id;
      const std::int64_t rf = radar[rad_order[rad_begin]].frame_id;
      if (cf < rf) {
        ++cam_begin;
        continue;
      }
      if (rf < cf) {
        ++rad_begin;
        continue;
      }
      const std::int64_t frame = cf;
      std::size_t cam_end = cam_begin;
      while (cam_end < cam_order.size() && camera[cam_order[cam_end]].frame_id == frame) ++cam_end;
      std::size_t rad_end = rad_begin;
      while (rad_end < rad_order.size() && radar[rad_order[rad_end]].frame_id == frame) ++rad_end;

      std::vector<Candidate> candidates;
      for (std::size_t rr = rad_begin; rr < rad_end; ++rr) {
        const RadarDetection& rd = radar[rad_order[rr]];
        Projection proj;
        try {
          proj = project(k, prior, rd.point);
        } catch (const ProjectionUndefinedError&) {
          continue;
        }
        if (proj.depth <= 0.0) continue;  // behind the camera under the prior
        for (std::size_t cc = cam_begin; cc < cam_end; ++cc) {
          const CameraDetection& cd = camera[cam_order[cc]];
          const double d = std::hypot(proj.pixel.u - cd.center.u, proj.pixel.v - cd.center.v);
          if (d > cfg.gate_px) continue;
          candidates.push_back({d, cc, rr, cam_order[cc], rad_order[rr]});
        }
      }
      std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(a.distance, a.cam_rank, a.rad_rank) <
               std::tie(b.distance, b.cam_rank, b.rad_rank);
      });

      std::vector<char> cam_used(cam_end - cam_begin, 0);
      std::vector<char> rad_used(rad_end - rad_begin, 0);
      for (const Candidate& c : candidates) {
        if (cfg.require_one_to_one &&
            (cam_used[c.cam_rank - cam_begin] || rad_used[c.rad_rank - rad_begin])) {
          continue;
        }
        if (!cfg.require_one_to_one && rad_used[c.rad_rank - rad_begin]) {
          continue;  // each radar detection still pairs at most once
        }
        cam_used[c.cam_rank - cam_begin] = 1;
        rad_used[c.rad_rank - rad_begin] = 1;
        out.push_back(Correspondence{camera[c.cam_idx].center, radar[c.rad_idx].point, frame,
                                     1.0 - c.distance / cfg.gate_px});
      }

      cam_begin = cam_end;
      rad_begin = rad_end;
    }
  }

  std::sort(out.begin(), out.end(), detail::correspondence_order);
  return out;
}

// Spatially subsample correspondences: partition the image into
// block_size x block_size cells, keep every stride_blocks-th cell in both
// axes, and per kept cell return the single correspondence nearest the cell
// center. Pixels outside the image are dropped.
inline std::vector<Correspondence> block_sample(const std::vector<Correspondence>& corrs,
                                                int image_w, int image_h,
                                                int block_size = 20, int stride_blocks = 2) {
  if (block_size < 1) {
    throw InvalidArgumentError("block_sample: block_size must be >= 1");
  }
  if (stride_blocks < 1) {
    throw InvalidArgumentError("block_sample: stride_blocks must be >= 1");
  }
  if (image_w < 1 || image_h < 1) {
    throw InvalidArgumentError("block_sample: image dimensions must be positive");
  }

  struct Best {
    double distance;
    std::int64_t frame_id;
    double u;
    double v;
    std::size_t index;
  };
  const int blocks_x = (image_w + block_size - 1) / block_size;
  std::vector<std::optional<Best>> best;
  std::vector<std::int64_t> cells;  // selected cells with a hit, insertion keyed

  // cell id -> slot
  const int blocks_y = (image_h + block_size - 1) / block_size;
  best.assign(static_cast<std::size_t>(blocks_x) * blocks_y, std::nullopt);

  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const PixelPoint& p = corrs[i].pixel;
    if (!(p.u >= 0.0) || !(p.v >= 0.0) || p.u >= image_w || p.v >= image_h) continue;
    const int bx = static_cast<int>(p.u / block_size);
    const int by = static_cast<int>(p.v / block_size);
    if (bx % stride_blocks != 0 || by % stride_blocks != 0) continue;
    const double cu = (bx + 0.5) * block_size;
    const double cv = (by + 0.5) * block_size;
    const double d = std::hypot(p.u - cu, p.v - cv);
    const std::size_t slot = static_cast<std::size_t>(by) * blocks_x + bx;
    const Best cand{d, corrs[i].frame_id, p.u, p.v, i};
    if (!best[slot]) {
      best[slot] = cand;
      cells.push_back(static_cast<std::int64_t>(slot));
    } else {
      const Best& cur = *best[slot];
      if (std::tie(cand.distance, cand.frame_id, cand.u, cand.v) <
          std::tie(cur.distance, cur.frame_id, cur.u, cur.v)) {
        best[slot] = cand;
      }
    }
  }

  std::vector<Correspondence> out;
  out.reserve(cells.size());
  for (std::int64_t slot : cells) {
    out.push_back(corrs[best[static_cast<std::size_t>(slot)]->index]);
  }
  std::sort(out.begin(), out.end(), detail::correspondence_order);
  return out;
}

// Fraction of grid cells that contain at least one correspondence pixel.
inline double spatial_coverage(const std::vector<Correspondence>& corrs, int image_w,
                               int image_h, int block_size) {
  if (block_size < 1) {
    throw InvalidArgumentError("spatial_coverage: block_size must be >= 1");
  }
  if (image_w < 1 || image_h < 1) {
    throw InvalidArgumentError("spatial_coverage: image dimensions must be positive");
  }
  const int blocks_x = (image_w + block_size - 1) / block_size;
  const int blocks_y = (image_h + block_size - 1) / block_size;
  std::vector<char> occupied(static_cast<std::size_t>(blocks_x) * blocks_y, 0);
  for (const Correspondence& c : corrs) {
    const PixelPoint& p = c.pixel;
    if (!(p.u >= 0.0) || !(p.v >= 0.0) || p.u >= image_w || p.v >= image_h) continue;
    const int bx = static_cast<int>(p.u / block_size);
    const int by = static_cast<int>(p.v / block_size);
    occupied[static_cast<std::size_t>(by) * blocks_x + bx] = 1;
  }
  std::size_t count = 0;
  for (char o : occupied) count += o;
  return static_cast<double>(count) / (static_cast<double>(blocks_x) * blocks_y);
}

}  // namespace rcal
