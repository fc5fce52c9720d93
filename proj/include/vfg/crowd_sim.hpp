#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vfg/errors.hpp"
#include "vfg/geometry.hpp"
#include "vfg/nms.hpp"
#include "vfg/random.hpp"

namespace vfg {

struct SceneConfig {
  std::uint64_t seed = 0;
  std::size_t n_instances = 8;
  double width = 1280.0;
  double height = 720.0;
  // Target IoU between a new instance's full box and its anchor. Zero means
  // pairwise-disjoint placement. Capped at 0.75 so a residual visible sliver
  // always survives between similarly sized neighbours.
  double crowd_level = 0.5;
  double min_aspect = 0.35;  // full-box w/h
  double max_aspect = 0.45;
  double min_height_frac = 0.25;  // full-box height as fraction of scene height
  double max_height_frac = 0.55;
  double head_w_frac = 0.35;  // head box relative to the full box
  double head_h_frac = 0.20;
  double head_y_frac = 0.10;  // head center depth below the full-box top
  double min_visible_frac = 0.10;
  std::size_t max_attempts = 1000;
};

struct SceneInstance {
  BBox full;
  BBox visible;
  BBox head;
  std::size_t depth = 0;  // placement order; larger sits behind smaller
  int anchor = -1;        // chain predecessor, -1 for the first or disjoint mode
  int occluder = -1;      // dominant occluder, -1 when fully visible
};

struct SyntheticScene {
  SceneConfig config;
  std::vector<SceneInstance> instances;
  std::vector<PairedDetection> detections;  // exact GT replay, score 1
};

// Largest axis-aligned rectangle inside target that avoids occluder: one of
// the four slabs left/right/above/below their intersection. Every candidate
// is disjoint from the occluder box itself, not just from the intersection.
inline BBox best_residual_rect(const BBox& target, const BBox& occluder) {
  const double ix1 = std::max(target.x, occluder.x);
  const double iy1 = std::max(target.y, occluder.y);
  const double ix2 = std::min(target.x2(), occluder.x2());
  const double iy2 = std::min(target.y2(), occluder.y2());
  if (ix1 >= ix2 || iy1 >= iy2) return target;

  const BBox candidates[4] = {
      {target.x, target.y, ix1 - target.x, target.h},          // left slab
      {ix2, target.y, target.x2() - ix2, target.h},            // right slab
      {target.x, target.y, target.w, iy1 - target.y},          // top slab
      {target.x, iy2, target.w, target.y2() - iy2},            // bottom slab
  };
  BBox best{target.x, target.y, 0.0, 0.0};
  double best_area = -1.0;
  for (const BBox& c : candidates) {
    const double a = std::max(0.0, c.w) * std::max(0.0, c.h);
    if (a > best_area) {
      best_area = a;
      best = c;
    }
  }
  if (best.w < 0.0) best.w = 0.0;
  if (best.h < 0.0) best.h = 0.0;
  return best;
}

inline BBox head_box(const BBox& full, const SceneConfig& cfg) {
  const double hw = cfg.head_w_frac * full.w;
  const double hh = cfg.head_h_frac * full.h;
  const double cx = full.x + 0.5 * full.w;
  const double cy = full.y + cfg.head_y_frac * full.h;
  return {cx - 0.5 * hw, cy - 0.5 * hh, hw, hh};
}

namespace detail {

inline void validate_scene_config(const SceneConfig& cfg) {
  if (cfg.n_instances == 0) throw Error("scene config: n_instances must be positive");
  if (cfg.width <= 0.0 || cfg.height <= 0.0) {
    throw Error("scene config: scene dimensions must be positive");
  }
  if (cfg.crowd_level < 0.0 || cfg.crowd_level > 0.75) {
    throw Error("scene config: crowd_level must lie in [0, 0.75]");
  }
  if (cfg.min_aspect <= 0.0 || cfg.max_aspect < cfg.min_aspect) {
    throw Error("scene config: invalid aspect range");
  }
  if (cfg.min_height_frac <= 0.0 || cfg.max_height_frac < cfg.min_height_frac ||
      cfg.max_height_frac > 1.0) {
    throw Error("scene config: invalid height fraction range");
  }
  if (cfg.min_visible_frac < 0.0 || cfg.min_visible_frac >= 1.0) {
    throw Error("scene config: min_visible_frac must lie in [0, 1)");
  }
  if (cfg.max_attempts == 0) throw Error("scene config: max_attempts must be positive");
}

inline bool inside_scene(const BBox& b, const SceneConfig& cfg) {
  return b.x >= 0.0 && b.y >= 0.0 && b.x2() <= cfg.width && b.y2() <= cfg.height;
}

inline BBox centered_box(double cx, double cy, double w, double h) {
  return {cx - 0.5 * w, cy - 0.5 * h, w, h};
}

// Slide a w-by-h box away from the anchor's center along (dx, dy) until its
// IoU with the anchor hits the target. IoU is continuous and non-increasing
// in the travel distance, and concentric same-scale boxes overlap far above
// any admissible target, so the bracket always exists.
inline BBox place_at_target_iou(const BBox& anchor, double w, double h, double dx, double dy,
                                double target) {
  const double acx = anchor.x + 0.5 * anchor.w;
  const double acy = anchor.y + 0.5 * anchor.h;
  const double norm = std::sqrt(dx * dx + dy * dy);
  dx /= norm;
  dy /= norm;

  double lo = 0.0;
  double hi = anchor.w + anchor.h + w + h;  // boxes fully apart, IoU 0
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const BBox probe = centered_box(acx + mid * dx, acy + mid * dy, w, h);
    if (iou(anchor, probe) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return centered_box(acx + 0.5 * (lo + hi) * dx, acy + 0.5 * (lo + hi) * dy, w, h);
}

}  // namespace detail

// Deterministic scene synthesis. Instances are placed front to back: each
// new one chains off a random earlier instance at the configured overlap,
// so placing it never changes the visibility of anything already placed.
// The visible box is the largest slab of the full box clear of the dominant
// (maximum intersection) occluder among the earlier instances.
inline SyntheticScene generate_scene(const SceneConfig& cfg) {
  detail::validate_scene_config(cfg);
  StableRng rng(cfg.seed);
  SyntheticScene scene;
  scene.config = cfg;

  for (std::size_t i = 0; i < cfg.n_instances; ++i) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
      double h;
      double w;
      int anchor = -1;
      BBox full{};

      if (i == 0 || cfg.crowd_level == 0.0) {
        h = cfg.height * rng.uniform(cfg.min_height_frac, cfg.max_height_frac);
        w = h * rng.uniform(cfg.min_aspect, cfg.max_aspect);
        if (w > cfg.width || h > cfg.height) continue;
        full = {rng.uniform(0.0, cfg.width - w), rng.uniform(0.0, cfg.height - h), w, h};
        if (cfg.crowd_level == 0.0 && i > 0) {
          bool clear = true;
          for (const SceneInstance& prev : scene.instances) {
            if (intersection(prev.full, full) > 0.0) {
              clear = false;
              break;
            }
          }
          if (!clear) continue;
        }
      } else {
        anchor = static_cast<int>(rng.uniform_index(i));
        const BBox& abox = scene.instances[static_cast<std::size_t>(anchor)].full;
        // Stay close to the anchor's scale so the concentric IoU comfortably
        // exceeds the target and the bisection bracket holds.
        h = abox.h * rng.uniform(0.95, 1.05);
        h = std::clamp(h, cfg.min_height_frac * cfg.height, cfg.max_height_frac * cfg.height);
        const double anchor_aspect = abox.w / abox.h;
        double aspect = anchor_aspect + rng.uniform(-0.02, 0.02);
        aspect = std::clamp(aspect, cfg.min_aspect, cfg.max_aspect);
        w = h * aspect;

        // Mostly horizontal separation; crowds spread sideways.
        const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
        const double angle = rng.uniform(-0.3, 0.3);
        full = detail::place_at_target_iou(abox, w, h, side * std::cos(angle),
                                           std::sin(angle), cfg.crowd_level);
        if (!detail::inside_scene(full, cfg)) continue;
      }

      int occluder = -1;
      double occluder_overlap = 0.0;
      for (std::size_t j = 0; j < scene.instances.size(); ++j) {
        const double ov = intersection(scene.instances[j].full, full);
        if (ov > occluder_overlap) {
          occluder_overlap = ov;
          occluder = static_cast<int>(j);
        }
      }
      BBox visible = full;
      if (occluder >= 0) {
        visible = best_residual_rect(full, scene.instances[static_cast<std::size_t>(occluder)].full);
      }
      if (area(visible) < cfg.min_visible_frac * area(full)) continue;

      SceneInstance inst;
      inst.full = full;
      inst.visible = visible;
      inst.head = head_box(full, cfg);
      inst.depth = i;
      inst.anchor = anchor;
      inst.occluder = occluder;
      scene.instances.push_back(inst);
      placed = true;
    }
    if (!placed) {
      throw PlacementFailureError("instance " + std::to_string(i) + " after " +
                                  std::to_string(cfg.max_attempts) + " attempts (seed " +
                                  std::to_string(cfg.seed) + ")");
    }
  }
  for (const SceneInstance& inst : scene.instances) {
    scene.detections.push_back({inst.visible, inst.full, 1.0, 0});
  }
  return scene;
}

struct DetectionNoise {
  double center_sigma = 0.0;  // box centers, in units of the box dimension
  double size_sigma = 0.0;    // log-scale size jitter
  double score_sigma = 0.0;   // additive score noise on top of the jitter term
  double fp_rate = 0.0;       // probability of one spurious box per scene
  double fn_rate = 0.0;       // per-instance drop probability
};

// Detector emulation over a scene. Scores decrease with the full-box center
// jitter (score = clamp(1 - jitter/gate, 0.05, 1) plus additive noise, gate
// half the box height), so suppression order tracks localization quality.
// With all-zero noise this returns the GT replay exactly. The draw count per
// instance is constant, so results are bit-reproducible per seed.
inline std::vector<PairedDetection> perturb_detections(const SyntheticScene& scene,
                                                       const DetectionNoise& noise,
                                                       std::uint64_t seed) {
  StableRng rng(seed);
  std::vector<PairedDetection> dets;
  for (const SceneInstance& inst : scene.instances) {
    const bool drop = rng.bernoulli(noise.fn_rate);
    const double fdx = noise.center_sigma * inst.full.w * rng.normal();
    const double fdy = noise.center_sigma * inst.full.h * rng.normal();
    const double fw = inst.full.w * std::exp(noise.size_sigma * rng.normal());
    const double fh = inst.full.h * std::exp(noise.size_sigma * rng.normal());
    const double vdx = noise.center_sigma * inst.visible.w * rng.normal();
    const double vdy = noise.center_sigma * inst.visible.h * rng.normal();
    const double vw = inst.visible.w * std::exp(noise.size_sigma * rng.normal());
    const double vh = inst.visible.h * std::exp(noise.size_sigma * rng.normal());
    const double score_noise = noise.score_sigma * rng.normal();
    if (drop) continue;

    // Corner plus deltas keeps the zero-noise case bit-exact.
    PairedDetection d;
    d.full = {inst.full.x + fdx + 0.5 * (inst.full.w - fw),
              inst.full.y + fdy + 0.5 * (inst.full.h - fh), fw, fh};
    d.visible = {inst.visible.x + vdx + 0.5 * (inst.visible.w - vw),
                 inst.visible.y + vdy + 0.5 * (inst.visible.h - vh), vw, vh};
    const double gate = 0.5 * inst.full.h;
    const double jitter = std::sqrt(fdx * fdx + fdy * fdy);
    d.score = std::clamp(1.0 - jitter / gate + score_noise, 0.05, 1.0);
    d.class_id = 0;
    dets.push_back(d);
  }
  if (rng.bernoulli(noise.fp_rate)) {
    const SceneConfig& cfg = scene.config;
    const double h = cfg.height * rng.uniform(cfg.min_height_frac, cfg.max_height_frac);
    const double w = h * rng.uniform(cfg.min_aspect, cfg.max_aspect);
    if (w <= cfg.width && h <= cfg.height) {
      PairedDetection d;
      d.full = {rng.uniform(0.0, cfg.width - w), rng.uniform(0.0, cfg.height - h), w, h};
      d.visible = d.full;
      d.score = rng.uniform(0.1, 0.9);
      d.class_id = 0;
      dets.push_back(d);
    }
  }
  return dets;
}

struct PreservationCounts {
  std::size_t kept_by_vfg = 0;
  std::size_t kept_by_greedy_full = 0;
  std::size_t gt_count = 0;
};

struct PreservationResult {
  std::vector<PreservationCounts> per_scene;
  PreservationCounts aggregate;
};

inline PreservationCounts preservation_counts(const std::vector<PairedDetection>& dets,
                                              std::size_t gt_count, double nms_thresh) {
  PreservationCounts counts;
  counts.gt_count = gt_count;
  counts.kept_by_vfg = vfg_nms(dets, nms_thresh).size();
  std::vector<ScoredBox> full_boxes;
  full_boxes.reserve(dets.size());
  for (const PairedDetection& d : dets) full_boxes.push_back({d.full, d.score, d.class_id});
  counts.kept_by_greedy_full = greedy_nms(full_boxes, nms_thresh).size();
  return counts;
}

// Head-to-head suppression study: the same noisy detections deduplicated
// once by pair-aware suppression keyed on visible boxes, once by plain
// greedy suppression on full boxes. Scene s uses seed base+s for geometry
// and a seed derived from it for the noise.
inline PreservationResult nms_preservation_experiment(const SceneConfig& base,
                                                      const DetectionNoise& noise,
                                                      double nms_thresh,
                                                      std::size_t n_scenes = 1) {
  PreservationResult result;
  for (std::size_t s = 0; s < n_scenes; ++s) {
    SceneConfig cfg = base;
    cfg.seed = base.seed + s;
    const SyntheticScene scene = generate_scene(cfg);
    const std::vector<PairedDetection> dets =
        perturb_detections(scene, noise, cfg.seed * 0x9e3779b97f4a7c15ULL + 1);
    const PreservationCounts counts =
        preservation_counts(dets, scene.instances.size(), nms_thresh);
    result.aggregate.kept_by_vfg += counts.kept_by_vfg;
    result.aggregate.kept_by_greedy_full += counts.kept_by_greedy_full;
    result.aggregate.gt_count += counts.gt_count;
    result.per_scene.push_back(counts);
  }
  return result;
}

}  // namespace vfg
