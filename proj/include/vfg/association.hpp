#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "vfg/errors.hpp"
#include "vfg/geometry.hpp"
#include "vfg/hungarian.hpp"

namespace vfg {

// Parameters of the geometric-distance cost. The expected part anchor sits
// at the top-center of the body box by default (head centroids cluster
// there); the gate is scale-adaptive unless an absolute pixel gate is set.
struct DistanceCostParams {
  double anchor_x_frac = 0.5;      // anchor x = body.x + anchor_x_frac * body.w
  double anchor_y_frac = 0.1;      // anchor y = body.y + anchor_y_frac * body.h
  double gate_px = 0.0;            // absolute gate; used when > 0
  double gate_height_scale = 0.5;  // otherwise gate_i = scale * body height
};

// Cost rho_{i,j} = Euclidean distance from body i's part anchor to part j's
// center. Entries beyond the gate, or whose part center falls outside the
// body box, are infeasible.
inline CostMatrix build_cost_distance(const std::vector<BBox>& bodies,
                                      const std::vector<BBox>& parts,
                                      const DistanceCostParams& params = {}) {
  if (bodies.empty()) throw EmptyInputError("bodies");
  if (parts.empty()) throw EmptyInputError("parts");
  CostMatrix m(bodies.size(), parts.size());
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const BBox& body = bodies[i];
    const double ax = body.x + params.anchor_x_frac * body.w;
    const double ay = body.y + params.anchor_y_frac * body.h;
    const double gate = params.gate_px > 0.0 ? params.gate_px : params.gate_height_scale * body.h;
    for (std::size_t j = 0; j < parts.size(); ++j) {
      const double px = parts[j].cx();
      const double py = parts[j].cy();
      const double dist = std::hypot(px - ax, py - ay);
      if (dist > gate || !contains_point(body, px, py)) {
        m.at(i, j) = m.infeasible_cost;
      } else {
        m.at(i, j) = dist;
      }
    }
  }
  return m;
}

inline CostMatrix build_cost_distance(const std::vector<BBox>& bodies,
                                      const std::vector<BBox>& parts, double gate_px) {
  DistanceCostParams params;
  params.gate_px = gate_px;
  return build_cost_distance(bodies, parts, params);
}

// Cost rho_{i,j} = 1 - IoU(a_i, b_j); pairs with IoU < min_iou are infeasible.
inline CostMatrix build_cost_iou(const std::vector<BBox>& boxes_a,
                                 const std::vector<BBox>& boxes_b, double min_iou) {
  if (boxes_a.empty()) throw EmptyInputError("boxes_a");
  if (boxes_b.empty()) throw EmptyInputError("boxes_b");
  if (min_iou < 0.0 || min_iou >= 1.0) throw Error("build_cost_iou: min_iou must be in [0, 1)");
  CostMatrix m(boxes_a.size(), boxes_b.size());
  for (std::size_t i = 0; i < boxes_a.size(); ++i) {
    for (std::size_t j = 0; j < boxes_b.size(); ++j) {
      const double ov = iou(boxes_a[i], boxes_b[j]);
      m.at(i, j) = ov < min_iou ? m.infeasible_cost : 1.0 - ov;
    }
  }
  return m;
}

enum class CostMetric { distance, iou };

struct AssociateParams {
  CostMetric metric = CostMetric::distance;
  DistanceCostParams distance;
  double min_iou = 0.1;
};

struct AssociationResult {
  std::vector<std::pair<BBox, BBox>> matched;  // (body, part)
  std::vector<std::pair<std::size_t, std::size_t>> matched_indices;
  std::vector<BBox> unmatched_bodies;
  std::vector<BBox> unmatched_parts;
  std::vector<std::size_t> unmatched_body_indices;
  std::vector<std::size_t> unmatched_part_indices;
};

// Cost building + Hungarian solve; assignment pairs that landed on an
// infeasible entry are demoted to unmatched. Every input box ends up in
// exactly one output list.
inline AssociationResult associate(const std::vector<BBox>& bodies,
                                   const std::vector<BBox>& parts,
                                   const AssociateParams& params = {}) {
  AssociationResult result;
  std::vector<bool> body_used(bodies.size(), false);
  std::vector<bool> part_used(parts.size(), false);

  if (!bodies.empty() && !parts.empty()) {
    const CostMatrix m = params.metric == CostMetric::distance
                             ? build_cost_distance(bodies, parts, params.distance)
                             : build_cost_iou(bodies, parts, params.min_iou);
    const Assignment assignment = hungarian_solve(m);
    for (const auto& [i, j] : assignment.pairs) {
      if (m.at(i, j) >= m.infeasible_cost) continue;
      result.matched.emplace_back(bodies[i], parts[j]);
      result.matched_indices.emplace_back(i, j);
      body_used[i] = true;
      part_used[j] = true;
    }
  }
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    if (!body_used[i]) {
      result.unmatched_bodies.push_back(bodies[i]);
      result.unmatched_body_indices.push_back(i);
    }
  }
  for (std::size_t j = 0; j < parts.size(); ++j) {
    if (!part_used[j]) {
      result.unmatched_parts.push_back(parts[j]);
      result.unmatched_part_indices.push_back(j);
    }
  }
  return result;
}

struct BoxPair {
  BBox body;
  BBox part;
};

struct AssociationScore {
  double recall = 0.0;
  double precision = 0.0;
  std::size_t matched = 0;
};

// Association recall/precision. A predicted pair matches a ground-truth pair
// when IoU(body_gt, body) >= thresh_body and IoU(part_gt, part) >= thresh_part;
// a one-to-one Hungarian matching on combined pair cost keeps each ground
// truth from being consumed twice. Empty ground truth scores recall 1 by
// convention; an empty prediction list reports precision 0.
inline AssociationScore eval_association(const std::vector<BoxPair>& gt_pairs,
                                         const std::vector<BoxPair>& pred_pairs,
                                         double thresh_body = 0.5, double thresh_part = 0.5) {
  AssociationScore score;
  if (!gt_pairs.empty() && !pred_pairs.empty()) {
    CostMatrix m(pred_pairs.size(), gt_pairs.size());
    for (std::size_t k = 0; k < pred_pairs.size(); ++k) {
      for (std::size_t g = 0; g < gt_pairs.size(); ++g) {
        const double iou_body = iou(pred_pairs[k].body, gt_pairs[g].body);
        const double iou_part = iou(pred_pairs[k].part, gt_pairs[g].part);
        if (iou_body >= thresh_body && iou_part >= thresh_part) {
          m.at(k, g) = (1.0 - iou_body) + (1.0 - iou_part);
        } else {
          m.at(k, g) = m.infeasible_cost;
        }
      }
    }
    const Assignment assignment = hungarian_solve(m);
    for (const auto& [k, g] : assignment.pairs) {
      if (m.at(k, g) < m.infeasible_cost) ++score.matched;
    }
  }
  score.recall = gt_pairs.empty() ? 1.0
                                  : static_cast<double>(score.matched) /
                                        static_cast<double>(gt_pairs.size());
  score.precision = pred_pairs.empty() ? 0.0
                                       : static_cast<double>(score.matched) /
                                             static_cast<double>(pred_pairs.size());
  return score;
}

}  // namespace vfg
