#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "vfg/errors.hpp"
#include "vfg/geometry.hpp"

namespace vfg {

// Box in center form (cx, cy, w, h).
struct CenterBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool operator==(const CenterBox& other) const = default;
};

inline CenterBox to_center(const BBox& b) {
  return CenterBox{b.x + 0.5 * b.w, b.y + 0.5 * b.h, b.w, b.h};
}

inline BBox to_corner(const CenterBox& c) {
  return BBox{c.cx - 0.5 * c.w, c.cy - 0.5 * c.h, c.w, c.h};
}

// Visible-box proposal: the reference frame for both halves of the paired
// regression target. Width and height must be positive.
struct Proposal {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
};

// Ground truth of one instance as a coupled (visible, full) pair of center
// boxes. All sizes must be positive.
struct PairedGroundTruth {
  CenterBox visible;
  CenterBox full;
};

// Eight regression deltas: visible center/size followed by full center/size.
// The full-box deltas are normalized by the same proposal width/height as the
// visible ones, and the proposal center doubles as the full-box reference
// point since only visible proposals exist.
struct RegressionTarget {
  double dx_v = 0.0;
  double dy_v = 0.0;
  double dw_v = 0.0;
  double dh_v = 0.0;
  double dx_f = 0.0;
  double dy_f = 0.0;
  double dw_f = 0.0;
  double dh_f = 0.0;

  std::array<double, 8> as_array() const {
    return {dx_v, dy_v, dw_v, dh_v, dx_f, dy_f, dw_f, dh_f};
  }
};

inline RegressionTarget encode_targets(const Proposal& p, const PairedGroundTruth& gt) {
  if (p.w <= 0.0 || p.h <= 0.0) throw NonPositiveSizeError("proposal");
  if (gt.visible.w <= 0.0 || gt.visible.h <= 0.0) throw NonPositiveSizeError("visible ground truth");
  if (gt.full.w <= 0.0 || gt.full.h <= 0.0) throw NonPositiveSizeError("full ground truth");
  RegressionTarget t;
  t.dx_v = (gt.visible.cx - p.cx) / p.w;
  t.dy_v = (gt.visible.cy - p.cy) / p.h;
  t.dw_v = std::log(gt.visible.w / p.w);
  t.dh_v = std::log(gt.visible.h / p.h);
  t.dx_f = (gt.full.cx - p.cx) / p.w;
  t.dy_f = (gt.full.cy - p.cy) / p.h;
  t.dw_f = std::log(gt.full.w / p.w);
  t.dh_f = std::log(gt.full.h / p.h);
  return t;
}

// Exact algebraic inverse of encode_targets.
inline PairedGroundTruth decode_targets(const Proposal& p, const RegressionTarget& t) {
  PairedGroundTruth gt;
  gt.visible.cx = p.cx + t.dx_v * p.w;
  gt.visible.cy = p.cy + t.dy_v * p.h;
  gt.visible.w = p.w * std::exp(t.dw_v);
  gt.visible.h = p.h * std::exp(t.dh_v);
  gt.full.cx = p.cx + t.dx_f * p.w;
  gt.full.cy = p.cy + t.dy_f * p.h;
  gt.full.w = p.w * std::exp(t.dw_f);
  gt.full.h = p.h * std::exp(t.dh_f);
  return gt;
}

// Smooth-L1 with transition point 1: 0.5 x^2 inside (-1, 1), |x| - 0.5 outside.
inline double smooth_l1(double x) {
  const double ax = std::abs(x);
  if (ax < 1.0) return 0.5 * x * x;
  return ax - 0.5;
}

inline double smooth_l1_grad(double x) {
  if (std::abs(x) < 1.0) return x;
  return std::copysign(1.0, x);
}

enum class ClsLossMode {
  softmax_ce,  // softmax cross-entropy, the two-stage convention
  focal,       // sigmoid focal loss with alpha = 0.25, gamma = 2
};

// Inputs for the per-RoI multi-task loss. Scores are raw logits, one per
// class; batch averaging is the caller's concern.
struct LossInputs {
  std::vector<double> class_scores;
  int true_class = 0;
  RegressionTarget predicted;
  RegressionTarget target;
  double loc_weight = 3.0;
};

namespace detail {

inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double softmax_cross_entropy(const std::vector<double>& logits, int label) {
  double max_logit = logits[0];
  for (double s : logits) max_logit = std::max(max_logit, s);
  double sum = 0.0;
  for (double s : logits) sum += std::exp(s - max_logit);
  return max_logit + std::log(sum) - logits[static_cast<std::size_t>(label)];
}

inline double focal_loss(const std::vector<double>& logits, int label,
                         double alpha = 0.25, double gamma = 2.0) {
  double total = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    const double s = logits[j];
    // log sigmoid(s) = -softplus(-s);  log(1 - sigmoid(s)) = -softplus(s)
    const double p = 1.0 / (1.0 + std::exp(-s));
    if (static_cast<int>(j) == label) {
      total += alpha * std::pow(1.0 - p, gamma) * softplus(-s);
    } else {
      total += (1.0 - alpha) * std::pow(p, gamma) * softplus(s);
    }
  }
  return total;
}

}  // namespace detail

// L = L_cls(c, c*) + lambda_loc * sum_i smooth_l1(t_i - t*_i) over the eight
// target dimensions.
inline double multi_task_loss(const LossInputs& inp, ClsLossMode cls_mode) {
  if (inp.class_scores.empty() || inp.true_class < 0 ||
      static_cast<std::size_t>(inp.true_class) >= inp.class_scores.size()) {
    throw LabelOutOfRangeError(inp.true_class, inp.class_scores.size());
  }
  for (double s : inp.class_scores) {
    if (!std::isfinite(s)) throw Error("multi_task_loss: non-finite class score");
  }
  double cls = 0.0;
  switch (cls_mode) {
    case ClsLossMode::softmax_ce:
      cls = detail::softmax_cross_entropy(inp.class_scores, inp.true_class);
      break;
    case ClsLossMode::focal:
      cls = detail::focal_loss(inp.class_scores, inp.true_class);
      break;
  }
  const auto t = inp.predicted.as_array();
  const auto ts = inp.target.as_array();
  double loc = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) loc += smooth_l1(t[i] - ts[i]);
  return cls + inp.loc_weight * loc;
}

}  // namespace vfg
