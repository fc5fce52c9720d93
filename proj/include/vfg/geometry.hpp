#pragma once

#include <algorithm>
#include <cmath>

#include "vfg/errors.hpp"

namespace vfg {

// Axis-aligned box stored as (left, top, width, height), matching the ODGT
// annotation convention. Corner coordinates are derived on demand.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double x2() const { return x + w; }
  double y2() const { return y + h; }
  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }

  static BBox from_corners(double x1, double y1, double x2, double y2) {
    return BBox{x1, y1, x2 - x1, y2 - y1};
  }

  bool operator==(const BBox& other) const = default;
};

inline bool is_valid(const BBox& b) {
  return std::isfinite(b.x) && std::isfinite(b.y) && b.w >= 0.0 && b.h >= 0.0;
}

inline double area(const BBox& b) { return b.w * b.h; }

inline double intersection(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x, b.x);
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

inline double union_area(const BBox& a, const BBox& b) {
  return area(a) + area(b) - intersection(a, b);
}

// Intersection over union in [0, 1]. A pair of zero-area boxes yields 0 so
// degenerate detections never match anything.
inline double iou(const BBox& a, const BBox& b) {
  const double inter = intersection(a, b);
  const double uni = area(a) + area(b) - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

inline bool contains_point(const BBox& b, double px, double py) {
  return px >= b.x && px <= b.x2() && py >= b.y && py <= b.y2();
}

struct OcclusionStats {
  double occlusion = 0.0;     // 1 - visible_area / full_area, in [0, 1]
  double visible_area = 0.0;  // pixels^2
  double full_area = 0.0;     // pixels^2
};

// Occlusion fraction of an instance given its visible and full boxes.
// Annotated visible boxes occasionally exceed the full box, so the visible
// area is clamped to the full area before dividing.
inline OcclusionStats occlusion_ratio(const BBox& visible, const BBox& full) {
  const double full_area = area(full);
  if (full_area <= 0.0) throw ZeroFullAreaError();
  const double vis_area = area(visible);
  const double clamped = std::min(vis_area, full_area);
  OcclusionStats stats;
  stats.visible_area = vis_area;
  stats.full_area = full_area;
  stats.occlusion = std::clamp(1.0 - clamped / full_area, 0.0, 1.0);
  return stats;
}

}  // namespace vfg
