#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "vfg/geometry.hpp"

namespace vfg {

struct ScoredBox {
  BBox box;
  double score = 0.0;
  int class_id = 0;
};

// Coupled (visible, full) detection as produced by a VFG head.
struct PairedDetection {
  BBox visible;
  BBox full;
  double score = 0.0;
  int class_id = 0;
};

// Indices of the boxes greedy NMS keeps, in descending score order. Score
// ties break toward the lower input index so the result is deterministic.
// Suppression is per class: boxes of different class_id never interact.
inline std::vector<std::size_t> greedy_nms_indices(const std::vector<ScoredBox>& dets,
                                                   double thresh) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&dets](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  std::vector<std::size_t> kept;
  kept.reserve(dets.size());
  for (std::size_t idx : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (dets[k].class_id != dets[idx].class_id) continue;
      if (iou(dets[k].box, dets[idx].box) > thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

inline std::vector<ScoredBox> greedy_nms(const std::vector<ScoredBox>& dets, double thresh) {
  std::vector<ScoredBox> out;
  for (std::size_t idx : greedy_nms_indices(dets, thresh)) out.push_back(dets[idx]);
  return out;
}

// Linear soft-NMS: instead of discarding an overlapping box outright, decay
// its score by (1 - IoU) whenever IoU >= thresh with the selected box, and
// drop any box whose score sits below score_floor. Scores never increase.
// Pool order preserves input order, so equal scores resolve to the lower
// input index.
inline std::vector<ScoredBox> soft_nms_linear(const std::vector<ScoredBox>& dets,
                                              double thresh, double score_floor = 0.001) {
  std::vector<ScoredBox> pool;
  pool.reserve(dets.size());
  for (const ScoredBox& d : dets) {
    if (d.score >= score_floor) pool.push_back(d);
  }

  std::vector<ScoredBox> out;
  while (!pool.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pool.size(); ++i) {
      if (pool[i].score > pool[best].score) best = i;
    }
    ScoredBox sel = pool[best];
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
    out.push_back(sel);

    for (auto it = pool.begin(); it != pool.end();) {
      if (it->class_id == sel.class_id) {
        const double ov = iou(sel.box, it->box);
        if (ov >= thresh) it->score *= 1.0 - ov;
      }
      if (it->score < score_floor) {
        it = pool.erase(it);
      } else {
        ++it;
      }
    }
  }
  return out;
}

// VFG-NMS: run greedy NMS on the visible boxes with the pairs' scores and
// keep the whole pair wherever its visible box survives. Output in
// descending score order, like greedy_nms.
inline std::vector<PairedDetection> vfg_nms(const std::vector<PairedDetection>& dets,
                                            double thresh) {
  std::vector<ScoredBox> visible;
  visible.reserve(dets.size());
  for (const PairedDetection& d : dets) visible.push_back({d.visible, d.score, d.class_id});
  std::vector<PairedDetection> out;
  for (std::size_t idx : greedy_nms_indices(visible, thresh)) out.push_back(dets[idx]);
  return out;
}

}  // namespace vfg
