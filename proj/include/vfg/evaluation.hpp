#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vfg/errors.hpp"
#include "vfg/geometry.hpp"
#include "vfg/nms.hpp"

namespace vfg {

// ln(0) guard for the log-average miss rate; below anything observable at
// desk scale.
inline constexpr double kMissRateFloor = 1e-4;

struct GroundTruthInstance {
  BBox full;
  std::optional<BBox> visible;
  std::optional<BBox> head;
  bool ignore = false;

  double height() const { return full.h; }
};

struct EvalImage {
  std::string id;
  std::vector<ScoredBox> dets;
  std::vector<GroundTruthInstance> gts;
};

enum class MatchKind { tp, fp, ignored };

struct DetMatch {
  double score = 0.0;
  MatchKind kind = MatchKind::fp;
  int gt_index = -1;  // matched ground truth, -1 for plain false positives
};

// Per-image outcome of the greedy matching protocol. dets are in processing
// order (descending score, ties by input index); num_gt counts non-ignore
// instances only.
struct ImageMatchLog {
  std::vector<DetMatch> dets;
  std::size_t num_gt = 0;
};

// Greedy score-ordered matching: each detection takes the unmatched
// non-ignore ground truth of highest IoU >= iou_thresh; failing that, the
// best ignore instance absorbs it without credit or penalty; otherwise it is
// a false positive. Ignore instances are never consumed and never count as
// false negatives.
inline ImageMatchLog match_detections(const std::vector<ScoredBox>& dets,
                                      const std::vector<GroundTruthInstance>& gts,
                                      double iou_thresh) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&dets](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });

  ImageMatchLog log;
  for (const GroundTruthInstance& gt : gts) {
    if (!gt.ignore) ++log.num_gt;
  }

  std::vector<bool> gt_matched(gts.size(), false);
  for (std::size_t idx : order) {
    const ScoredBox& det = dets[idx];
    int best_gt = -1;
    double best_iou = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].ignore || gt_matched[g]) continue;
      const double ov = iou(det.box, gts[g].full);
      if (ov >= iou_thresh && ov > best_iou) {
        best_iou = ov;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0) {
      gt_matched[static_cast<std::size_t>(best_gt)] = true;
      log.dets.push_back({det.score, MatchKind::tp, best_gt});
      continue;
    }
    int best_ignore = -1;
    double best_ignore_iou = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (!gts[g].ignore) continue;
      const double ov = iou(det.box, gts[g].full);
      if (ov >= iou_thresh && ov > best_ignore_iou) {
        best_ignore_iou = ov;
        best_ignore = static_cast<int>(g);
      }
    }
    if (best_ignore >= 0) {
      log.dets.push_back({det.score, MatchKind::ignored, best_ignore});
    } else {
      log.dets.push_back({det.score, MatchKind::fp, -1});
    }
  }
  return log;
}

inline std::vector<ImageMatchLog> match_all(const std::vector<EvalImage>& images,
                                            double iou_thresh) {
  std::vector<ImageMatchLog> logs;
  logs.reserve(images.size());
  for (const EvalImage& img : images) {
    logs.push_back(match_detections(img.dets, img.gts, iou_thresh));
  }
  return logs;
}

namespace detail {

// (score, is_tp) for every counted detection across images, sorted by
// descending score. The concatenation order is the image order, so equal
// scores resolve deterministically; the metrics themselves only depend on
// per-score-group counts.
inline std::vector<std::pair<double, bool>> counted_dets(const std::vector<ImageMatchLog>& logs) {
  std::vector<std::pair<double, bool>> flat;
  for (const ImageMatchLog& log : logs) {
    for (const DetMatch& d : log.dets) {
      if (d.kind == MatchKind::ignored) continue;
      flat.emplace_back(d.score, d.kind == MatchKind::tp);
    }
  }
  std::stable_sort(flat.begin(), flat.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  return flat;
}

inline std::size_t total_gt(const std::vector<ImageMatchLog>& logs) {
  std::size_t n = 0;
  for (const ImageMatchLog& log : logs) n += log.num_gt;
  return n;
}

}  // namespace detail

// Area under the interpolated precision/recall curve with 101-point recall
// interpolation. Precision/recall points are taken at distinct score
// thresholds, which keeps the value independent of the input order of
// equal-score detections.
inline double average_precision(const std::vector<ImageMatchLog>& logs) {
  const std::size_t n_gt = detail::total_gt(logs);
  if (n_gt == 0) throw NoGroundTruthError();
  const auto flat = detail::counted_dets(logs);

  struct PrPoint {
    double recall;
    double precision;
  };
  std::vector<PrPoint> points;
  std::size_t cum_tp = 0;
  std::size_t cum_fp = 0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (flat[i].second) {
      ++cum_tp;
    } else {
      ++cum_fp;
    }
    const bool group_end = i + 1 == flat.size() || flat[i + 1].first != flat[i].first;
    if (group_end) {
      points.push_back({static_cast<double>(cum_tp) / static_cast<double>(n_gt),
                        static_cast<double>(cum_tp) / static_cast<double>(cum_tp + cum_fp)});
    }
  }
  if (points.empty()) return 0.0;

  // Suffix max of precision; recall is non-decreasing along the point list.
  std::vector<double> best_from(points.size());
  double running = 0.0;
  for (std::size_t i = points.size(); i-- > 0;) {
    running = std::max(running, points[i].precision);
    best_from[i] = running;
  }
  double sum = 0.0;
  std::size_t lo = 0;
  for (int k = 0; k <= 100; ++k) {
    const double r = static_cast<double>(k) / 100.0;
    while (lo < points.size() && points[lo].recall < r) ++lo;
    if (lo < points.size()) sum += best_from[lo];
  }
  return sum / 101.0;
}

// Fraction of non-ignore ground truth matched by any detection.
inline double detection_recall(const std::vector<ImageMatchLog>& logs) {
  const std::size_t n_gt = detail::total_gt(logs);
  if (n_gt == 0) throw NoGroundTruthError();
  std::size_t tp = 0;
  for (const ImageMatchLog& log : logs) {
    for (const DetMatch& d : log.dets) {
      if (d.kind == MatchKind::tp) ++tp;
    }
  }
  return static_cast<double>(tp) / static_cast<double>(n_gt);
}

struct FppiCurvePoint {
  double fppi = 0.0;
  double miss_rate = 1.0;
  double score_threshold = 0.0;
};

// Miss rate vs. false positives per image, one point per distinct score
// threshold, ordered by descending threshold (FPPI non-decreasing). With no
// detections the curve degenerates to a single all-miss point.
inline std::vector<FppiCurvePoint> fppi_curve(const std::vector<ImageMatchLog>& logs,
                                              std::size_t n_images) {
  if (n_images == 0) throw EmptyCurveError();
  const std::size_t n_gt = detail::total_gt(logs);
  if (n_gt == 0) throw NoGroundTruthError();
  const auto flat = detail::counted_dets(logs);

  std::vector<FppiCurvePoint> curve;
  if (flat.empty()) {
    curve.push_back({0.0, 1.0, std::numeric_limits<double>::infinity()});
    return curve;
  }
  std::size_t cum_tp = 0;
  std::size_t cum_fp = 0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (flat[i].second) {
      ++cum_tp;
    } else {
      ++cum_fp;
    }
    const bool group_end = i + 1 == flat.size() || flat[i + 1].first != flat[i].first;
    if (group_end) {
      FppiCurvePoint p;
      p.fppi = static_cast<double>(cum_fp) / static_cast<double>(n_images);
      p.miss_rate = 1.0 - static_cast<double>(cum_tp) / static_cast<double>(n_gt);
      p.score_threshold = flat[i].first;
      curve.push_back(p);
    }
  }
  return curve;
}

// MR^-2: geometric mean of the miss rate sampled at 9 FPPI reference points
// spaced evenly in log10 over [1e-2, 1]. Each reference takes the miss rate
// of the last curve point with fppi <= reference, falling back to the first
// point when every fppi exceeds it. Miss rates are floored before the log.
inline double log_average_miss_rate(const std::vector<FppiCurvePoint>& curve,
                                    double miss_rate_floor = kMissRateFloor) {
  if (curve.empty()) throw EmptyCurveError();
  double log_sum = 0.0;
  constexpr int kNumRefs = 9;
  for (int i = 0; i < kNumRefs; ++i) {
    const double ref = std::pow(10.0, -2.0 + 2.0 * static_cast<double>(i) /
                                           static_cast<double>(kNumRefs - 1));
    double sampled = curve.front().miss_rate;
    for (const FppiCurvePoint& p : curve) {
      if (p.fppi <= ref) sampled = p.miss_rate;
    }
    log_sum += std::log(std::max(sampled, miss_rate_floor));
  }
  return std::exp(log_sum / kNumRefs);
}

// Evaluation subset over occlusion and height. Height bounds are
// [min_height, max_height); occlusion bounds carry explicit open/closed
// flags because the benchmark definitions mix both (Bare occ <= 0.10,
// Partial 0.10 < occ < 0.35).
struct SubsetFilter {
  std::string name = "All";
  double occ_lo = 0.0;
  double occ_hi = 1.0;
  bool occ_lo_open = false;
  bool occ_hi_open = false;
  double min_height = 0.0;
  double max_height = std::numeric_limits<double>::infinity();

  bool occlusion_active() const {
    return occ_lo > 0.0 || occ_lo_open || occ_hi < 1.0 || occ_hi_open;
  }

  bool contains(double occlusion, double height) const {
    if (height < min_height || height >= max_height) return false;
    if (occ_lo_open ? occlusion <= occ_lo : occlusion < occ_lo) return false;
    if (occ_hi_open ? occlusion >= occ_hi : occlusion > occ_hi) return false;
    return true;
  }

  static SubsetFilter reasonable() {
    return {"Reasonable", 0.0, 0.35, false, true, 50.0,
            std::numeric_limits<double>::infinity()};
  }
  static SubsetFilter small() {
    return {"Small", 0.0, 1.0, false, false, 50.0, 75.0};
  }
  static SubsetFilter heavy() {
    return {"Heavy", 0.35, 1.0, false, false, 0.0,
            std::numeric_limits<double>::infinity()};
  }
  static SubsetFilter partial() {
    return {"Partial", 0.10, 0.35, true, true, 0.0,
            std::numeric_limits<double>::infinity()};
  }
  static SubsetFilter bare() {
    return {"Bare", 0.0, 0.10, false, false, 0.0,
            std::numeric_limits<double>::infinity()};
  }
  static SubsetFilter all() {
    return {"All", 0.0, 0.8, false, false, 20.0,
            std::numeric_limits<double>::infinity()};
  }

  static std::optional<SubsetFilter> by_name(std::string name) {
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (name == "reasonable") return reasonable();
    if (name == "small") return small();
    if (name == "heavy") return heavy();
    if (name == "partial") return partial();
    if (name == "bare") return bare();
    if (name == "all") return all();
    return std::nullopt;
  }
};

// Instances outside the subset become ignore regions: they are not counted
// as false negatives, and detections landing only on them stay neutral.
// Occlusion is evaluated only when the filter constrains it and the height
// gate passed, so height-only subsets work without visible annotations.
inline std::vector<GroundTruthInstance> apply_subset(
    const std::vector<GroundTruthInstance>& gts, const SubsetFilter& filter) {
  std::vector<GroundTruthInstance> out = gts;
  for (std::size_t i = 0; i < out.size(); ++i) {
    GroundTruthInstance& gt = out[i];
    if (gt.ignore) continue;
    if (area(gt.full) <= 0.0) {
      gt.ignore = true;
      continue;
    }
    const double h = gt.height();
    if (h < filter.min_height || h >= filter.max_height) {
      gt.ignore = true;
      continue;
    }
    double occ = 0.0;
    if (filter.occlusion_active()) {
      if (!gt.visible.has_value()) {
        throw MissingVisibleBoxError("instance " + std::to_string(i) + " of subset " +
                                     filter.name);
      }
      occ = occlusion_ratio(*gt.visible, gt.full).occlusion;
    }
    gt.ignore = !filter.contains(occ, h);
  }
  return out;
}

inline std::vector<double> coco_iou_thresholds() {
  std::vector<double> out;
  for (int i = 0; i <= 9; ++i) out.push_back(static_cast<double>(50 + 5 * i) / 100.0);
  return out;
}

struct EvalOptions {
  double iou_thresh = 0.5;  // base threshold for recall, MR^-2, match logs
  double min_score = 0.05;
  double mr_floor = kMissRateFloor;
  std::vector<double> map_thresholds = coco_iou_thresholds();
};

struct ImageMatchSummary {
  std::string id;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct SubsetMetrics {
  std::string subset;
  double map = 0.0;
  double ap50 = 0.0;
  double recall = 0.0;
  double mr2 = 1.0;
  std::size_t num_images = 0;
  std::size_t num_gt = 0;
  std::vector<ImageMatchSummary> images;  // at the base IoU threshold
};

struct EvalReport {
  EvalOptions options;
  std::vector<SubsetMetrics> subsets;
};

namespace detail {

inline std::vector<EvalImage> filter_images(const std::vector<EvalImage>& images,
                                            const SubsetFilter& filter, double min_score) {
  std::vector<EvalImage> out;
  out.reserve(images.size());
  for (const EvalImage& img : images) {
    EvalImage copy;
    copy.id = img.id;
    for (const ScoredBox& d : img.dets) {
      if (d.score >= min_score) copy.dets.push_back(d);
    }
    copy.gts = apply_subset(img.gts, filter);
    out.push_back(std::move(copy));
  }
  return out;
}

}  // namespace detail

inline SubsetMetrics evaluate_subset(const std::vector<EvalImage>& images,
                                     const SubsetFilter& filter, const EvalOptions& opts = {}) {
  const std::vector<EvalImage> filtered = detail::filter_images(images, filter, opts.min_score);

  SubsetMetrics m;
  m.subset = filter.name;
  m.num_images = filtered.size();

  const std::vector<ImageMatchLog> base_logs = match_all(filtered, opts.iou_thresh);
  m.num_gt = detail::total_gt(base_logs);
  m.recall = detection_recall(base_logs);
  m.mr2 = log_average_miss_rate(fppi_curve(base_logs, filtered.size()), opts.mr_floor);
  m.ap50 = opts.iou_thresh == 0.5 ? average_precision(base_logs)
                                  : average_precision(match_all(filtered, 0.5));
  double ap_sum = 0.0;
  for (double t : opts.map_thresholds) {
    ap_sum += t == opts.iou_thresh ? average_precision(base_logs)
                                   : average_precision(match_all(filtered, t));
  }
  m.map = opts.map_thresholds.empty() ? 0.0 : ap_sum / static_cast<double>(opts.map_thresholds.size());

  for (std::size_t i = 0; i < filtered.size(); ++i) {
    ImageMatchSummary s;
    s.id = filtered[i].id;
    for (const DetMatch& d : base_logs[i].dets) {
      if (d.kind == MatchKind::tp) ++s.tp;
      if (d.kind == MatchKind::fp) ++s.fp;
    }
    s.fn = base_logs[i].num_gt - s.tp;
    m.images.push_back(std::move(s));
  }
  return m;
}

inline EvalReport evaluate(const std::vector<EvalImage>& images,
                           const std::vector<SubsetFilter>& subsets,
                           const EvalOptions& opts = {}) {
  EvalReport report;
  report.options = opts;
  for (const SubsetFilter& f : subsets) {
    report.subsets.push_back(evaluate_subset(images, f, opts));
  }
  return report;
}

struct SweepRow {
  double iou_thresh = 0.0;
  double mr2 = 1.0;
  double ap = 0.0;
};

// Metrics recomputed per IoU threshold along a strictly increasing grid;
// raising the threshold can only lose true positives, so MR^-2 is
// non-decreasing and AP non-increasing along the rows.
inline std::vector<SweepRow> sweep_iou(const std::vector<EvalImage>& images,
                                       const std::vector<double>& iou_grid,
                                       const EvalOptions& opts = {}) {
  for (std::size_t i = 0; i < iou_grid.size(); ++i) {
    if (iou_grid[i] <= 0.0 || iou_grid[i] >= 1.0) {
      throw Error("sweep_iou: grid values must lie in (0, 1)");
    }
    if (i > 0 && iou_grid[i] <= iou_grid[i - 1]) {
      throw Error("sweep_iou: grid must be strictly increasing");
    }
  }
  std::vector<EvalImage> filtered;
  filtered.reserve(images.size());
  for (const EvalImage& img : images) {
    EvalImage copy;
    copy.id = img.id;
    for (const ScoredBox& d : img.dets) {
      if (d.score >= opts.min_score) copy.dets.push_back(d);
    }
    copy.gts = img.gts;
    filtered.push_back(std::move(copy));
  }
  std::vector<SweepRow> rows;
  for (double t : iou_grid) {
    const std::vector<ImageMatchLog> logs = match_all(filtered, t);
    SweepRow row;
    row.iou_thresh = t;
    row.ap = average_precision(logs);
    row.mr2 = log_average_miss_rate(fppi_curve(logs, filtered.size()), opts.mr_floor);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace vfg
