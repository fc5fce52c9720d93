#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"

#include "vfg/association.hpp"
#include "vfg/crowd_sim.hpp"
#include "vfg/errors.hpp"
#include "vfg/evaluation.hpp"
#include "vfg/nms.hpp"
#include "vfg/odgt_io.hpp"
#include "vfg/random.hpp"

namespace vfg::cli {

namespace detail {

// VFG_LOG=info or VFG_LOG=debug enables progress notes on stderr.
inline int log_level() {
  const char* env = std::getenv("VFG_LOG");
  if (env == nullptr) return 0;
  const std::string v = env;
  if (v == "debug") return 2;
  if (v == "info") return 1;
  return 0;
}

inline void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[info] " << msg << "\n";
}

inline std::vector<SubsetFilter> parse_subsets(const std::string& csv) {
  std::vector<SubsetFilter> subsets;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    const std::optional<SubsetFilter> f = SubsetFilter::by_name(token);
    if (!f) throw Error("unknown subset name: " + token);
    subsets.push_back(*f);
  }
  if (subsets.empty()) throw Error("no subsets requested");
  return subsets;
}

inline std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> grid;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    try {
      std::size_t pos = 0;
      const double v = std::stod(token, &pos);
      if (pos != token.size()) throw std::invalid_argument(token);
      grid.push_back(v);
    } catch (const std::exception&) {
      throw Error("invalid grid value: " + token);
    }
  }
  if (grid.empty()) throw Error("empty IoU grid");
  return grid;
}

inline void require_written(const std::ofstream& out, const std::string& path) {
  if (!out) throw Error("failed to write " + path);
}

struct EvalArgs {
  std::string gt_path;
  std::string dt_path;
  std::string out_json = "report.json";
  std::string out_csv;
  std::string subsets = "Reasonable,Bare,Partial,Heavy,All";
  double iou = 0.5;
  double min_score = 0.05;
};

inline void run_eval(const EvalArgs& args) {
  const std::vector<AnnotationRecord> gt = load_annotations_file(args.gt_path);
  const std::vector<DetectionRecord> dt = load_detections_file(args.dt_path);
  const std::vector<EvalImage> images = build_eval_images(gt, dt);
  log_info("loaded " + std::to_string(images.size()) + " images");

  EvalOptions opts;
  opts.iou_thresh = args.iou;
  opts.min_score = args.min_score;

  // A subset that filters away every instance is unremarkable on small
  // inputs; report it as empty instead of failing the run.
  EvalReport report;
  report.options = opts;
  std::vector<std::string> empty_subsets;
  for (const SubsetFilter& f : parse_subsets(args.subsets)) {
    try {
      report.subsets.push_back(evaluate_subset(images, f, opts));
    } catch (const NoGroundTruthError&) {
      empty_subsets.push_back(f.name);
    }
  }

  std::cout << std::left << std::setw(12) << "subset" << std::right << std::setw(8) << "mAP"
            << std::setw(8) << "AP50" << std::setw(8) << "recall" << std::setw(8) << "MR^-2"
            << std::setw(8) << "gt" << "\n";
  std::cout << std::fixed << std::setprecision(4);
  for (const SubsetMetrics& m : report.subsets) {
    std::cout << std::left << std::setw(12) << m.subset << std::right << std::setw(8) << m.map
              << std::setw(8) << m.ap50 << std::setw(8) << m.recall << std::setw(8) << m.mr2
              << std::setw(8) << m.num_gt << "\n";
  }
  for (const std::string& name : empty_subsets) {
    std::cout << std::left << std::setw(12) << name << "  (no eligible instances)\n";
  }

  std::ofstream out(args.out_json);
  if (!out) throw Error("cannot open output file: " + args.out_json);
  ordered_json j = report_to_json(report);
  j["empty_subsets"] = empty_subsets;
  out << j.dump(2) << "\n";
  require_written(out, args.out_json);
  if (!args.out_csv.empty()) {
    std::ofstream csv(args.out_csv);
    if (!csv) throw Error("cannot open output file: " + args.out_csv);
    write_report_csv(csv, report);
    require_written(csv, args.out_csv);
  }
}

struct NmsArgs {
  std::string dt_path;
  std::string out_path;
  std::string mode = "greedy";
  double thresh = 0.5;
  double score_floor = 0.001;
};

inline void run_nms(const NmsArgs& args) {
  const std::vector<DetectionRecord> dt = load_detections_file(args.dt_path);
  std::vector<DetectionRecord> filtered;
  filtered.reserve(dt.size());
  for (const DetectionRecord& rec : dt) {
    DetectionRecord out_rec;
    out_rec.id = rec.id;
    if (args.mode == "vfg") {
      const std::vector<PairedDetection> pairs = to_paired_detections(rec);
      for (const PairedDetection& d : vfg_nms(pairs, args.thresh)) {
        DtBoxRecord box;
        box.score = d.score;
        box.fbox = d.full;
        box.vbox = d.visible;
        out_rec.boxes.push_back(std::move(box));
      }
    } else {
      std::vector<ScoredBox> boxes;
      boxes.reserve(rec.boxes.size());
      for (const DtBoxRecord& b : rec.boxes) boxes.push_back({b.fbox, b.score, 0});
      std::vector<ScoredBox> kept;
      if (args.mode == "greedy") {
        kept = greedy_nms(boxes, args.thresh);
      } else if (args.mode == "soft") {
        kept = soft_nms_linear(boxes, args.thresh, args.score_floor);
      } else {
        throw Error("unknown nms mode: " + args.mode + " (expected greedy, soft, or vfg)");
      }
      for (const ScoredBox& b : kept) {
        DtBoxRecord box;
        box.score = b.score;
        box.fbox = b.box;
        out_rec.boxes.push_back(std::move(box));
      }
    }
    filtered.push_back(std::move(out_rec));
  }
  save_detections_file(args.out_path, filtered);
  log_info("wrote " + args.out_path);
}

struct AssociateArgs {
  std::string gt_path;
  std::string dt_path;
  std::string out_path = "association.json";
  std::string parts = "head";  // head -> hbox, visible -> vbox
  std::string metric;          // default depends on parts
  bool gt_as_pred = false;
  std::uint64_t seed = 0;
  double thresh_body = 0.5;
  double thresh_part = 0.5;
  double min_iou = 0.1;
};

inline void run_associate(const AssociateArgs& args) {
  if (args.parts != "head" && args.parts != "visible") {
    throw Error("unknown parts selector: " + args.parts + " (expected head or visible)");
  }
  const bool use_head = args.parts == "head";
  std::string metric = args.metric;
  if (metric.empty()) metric = use_head ? "distance" : "iou";
  if (metric != "distance" && metric != "iou") {
    throw Error("unknown metric: " + metric + " (expected distance or iou)");
  }
  if (!args.gt_as_pred && args.dt_path.empty()) {
    throw Error("associate needs --dt unless --gt-as-pred is set");
  }

  AssociateParams params;
  params.metric = metric == "distance" ? CostMetric::distance : CostMetric::iou;
  params.min_iou = args.min_iou;

  const std::vector<AnnotationRecord> gt = load_annotations_file(args.gt_path);
  std::vector<DetectionRecord> dt;
  if (!args.gt_as_pred) dt = load_detections_file(args.dt_path);
  std::unordered_map<std::string, const DetectionRecord*> dt_index;
  for (const DetectionRecord& rec : dt) dt_index.emplace(rec.id, &rec);

  StableRng rng(args.seed);
  ordered_json out_images = ordered_json::array();
  std::size_t total_gt = 0;
  std::size_t total_pred = 0;
  std::size_t total_matched = 0;

  for (const AnnotationRecord& rec : gt) {
    std::vector<BoxPair> gt_pairs;
    for (const GtBoxRecord& box : rec.boxes) {
      if (box.ignore) continue;
      const std::optional<BBox>& part = use_head ? box.hbox : box.vbox;
      if (part) gt_pairs.push_back({box.fbox, *part});
    }

    std::vector<BBox> bodies;
    std::vector<BBox> parts;
    if (args.gt_as_pred) {
      for (const BoxPair& p : gt_pairs) {
        bodies.push_back(p.body);
        parts.push_back(p.part);
      }
      // Forget the pairing: the association has to rediscover it from
      // geometry alone.
      for (std::size_t i = parts.size(); i > 1; --i) {
        std::swap(parts[i - 1], parts[rng.uniform_index(i)]);
      }
    } else {
      const auto it = dt_index.find(rec.id);
      if (it != dt_index.end()) {
        for (const DtBoxRecord& box : it->second->boxes) bodies.push_back(box.fbox);
      }
      for (const BoxPair& p : gt_pairs) parts.push_back(p.part);
    }

    AssociationResult result;
    if (!bodies.empty() && !parts.empty()) {
      result = associate(bodies, parts, params);
    } else {
      result.unmatched_bodies = bodies;
      result.unmatched_parts = parts;
    }

    std::vector<BoxPair> pred_pairs;
    for (const auto& m : result.matched) pred_pairs.push_back({m.first, m.second});
    const AssociationScore score =
        eval_association(gt_pairs, pred_pairs, args.thresh_body, args.thresh_part);

    total_gt += gt_pairs.size();
    total_pred += pred_pairs.size();
    total_matched += score.matched;

    ordered_json ij;
    ij["ID"] = rec.id;
    ij["gt_pairs"] = gt_pairs.size();
    ij["pred_pairs"] = pred_pairs.size();
    ij["matched"] = score.matched;
    ij["pairs"] = ordered_json::array();
    for (const auto& [body, part] : result.matched) {
      ordered_json pj;
      pj["body"] = ordered_json::array({body.x, body.y, body.w, body.h});
      pj["part"] = ordered_json::array({part.x, part.y, part.w, part.h});
      ij["pairs"].push_back(std::move(pj));
    }
    out_images.push_back(std::move(ij));
  }

  const double recall =
      total_gt == 0 ? 1.0 : static_cast<double>(total_matched) / static_cast<double>(total_gt);
  const double precision =
      total_pred == 0 ? 0.0
                      : static_cast<double>(total_matched) / static_cast<double>(total_pred);

  ordered_json j;
  j["parts"] = args.parts;
  j["metric"] = metric;
  j["gt_as_pred"] = args.gt_as_pred;
  j["recall"] = recall;
  j["precision"] = precision;
  j["matched"] = total_matched;
  j["gt_pairs"] = total_gt;
  j["pred_pairs"] = total_pred;
  j["images"] = std::move(out_images);

  std::ofstream out(args.out_path);
  if (!out) throw Error("cannot open output file: " + args.out_path);
  out << j.dump(2) << "\n";
  require_written(out, args.out_path);

  std::cout << std::fixed << std::setprecision(4) << "recall " << recall << "  precision "
            << precision << "  (" << total_matched << "/" << total_gt << " pairs)\n";
}

struct SimulateArgs {
  std::string out_dir = ".";
  std::size_t scenes = 10;
  std::uint64_t seed = 0;
  std::size_t instances = 8;
  double crowd = 0.5;
  double width = 1280.0;
  double height = 720.0;
  double min_visible = 0.1;
  double noise_center = 0.0;
  double noise_size = 0.0;
  double noise_score = 0.0;
  double fp_rate = 0.0;
  double fn_rate = 0.0;
  double nms_thresh = 0.5;
};

inline std::string scene_id(std::size_t index) {
  std::ostringstream ss;
  ss << "scene_" << std::setw(6) << std::setfill('0') << index;
  return ss.str();
}

inline void run_simulate(const SimulateArgs& args) {
  if (args.scenes == 0) throw Error("simulate needs at least one scene");
  std::filesystem::create_directories(args.out_dir);

  SceneConfig base;
  base.seed = args.seed;
  base.n_instances = args.instances;
  base.width = args.width;
  base.height = args.height;
  base.crowd_level = args.crowd;
  base.min_visible_frac = args.min_visible;

  DetectionNoise noise;
  noise.center_sigma = args.noise_center;
  noise.size_sigma = args.noise_size;
  noise.score_sigma = args.noise_score;
  noise.fp_rate = args.fp_rate;
  noise.fn_rate = args.fn_rate;

  std::vector<AnnotationRecord> gt_records;
  std::vector<DetectionRecord> dt_records;
  PreservationResult preservation;

  for (std::size_t s = 0; s < args.scenes; ++s) {
    SceneConfig cfg = base;
    cfg.seed = base.seed + s;
    const SyntheticScene scene = generate_scene(cfg);
    const std::vector<PairedDetection> dets =
        perturb_detections(scene, noise, cfg.seed * 0x9e3779b97f4a7c15ULL + 1);

    AnnotationRecord gt_rec;
    gt_rec.id = scene_id(s);
    for (const SceneInstance& inst : scene.instances) {
      GtBoxRecord box;
      box.fbox = inst.full;
      box.vbox = inst.visible;
      box.hbox = inst.head;
      gt_rec.boxes.push_back(std::move(box));
    }
    gt_records.push_back(std::move(gt_rec));

    DetectionRecord dt_rec;
    dt_rec.id = scene_id(s);
    for (const PairedDetection& d : dets) {
      DtBoxRecord box;
      box.score = d.score;
      box.fbox = d.full;
      box.vbox = d.visible;
      dt_rec.boxes.push_back(std::move(box));
    }
    dt_records.push_back(std::move(dt_rec));

    const PreservationCounts counts =
        preservation_counts(dets, scene.instances.size(), args.nms_thresh);
    preservation.aggregate.kept_by_vfg += counts.kept_by_vfg;
    preservation.aggregate.kept_by_greedy_full += counts.kept_by_greedy_full;
    preservation.aggregate.gt_count += counts.gt_count;
    preservation.per_scene.push_back(counts);
  }

  const std::filesystem::path dir(args.out_dir);
  save_annotations_file((dir / "gt.odgt").string(), gt_records);
  save_detections_file((dir / "dt.odgt").string(), dt_records);

  ordered_json j;
  j["scenes"] = args.scenes;
  j["seed"] = args.seed;
  j["nms_thresh"] = args.nms_thresh;
  j["aggregate"] = {{"kept_by_vfg", preservation.aggregate.kept_by_vfg},
                    {"kept_by_greedy_full", preservation.aggregate.kept_by_greedy_full},
                    {"gt_count", preservation.aggregate.gt_count}};
  j["per_scene"] = ordered_json::array();
  for (const PreservationCounts& c : preservation.per_scene) {
    j["per_scene"].push_back({{"kept_by_vfg", c.kept_by_vfg},
                              {"kept_by_greedy_full", c.kept_by_greedy_full},
                              {"gt_count", c.gt_count}});
  }
  const std::string summary_path = (dir / "preservation.json").string();
  std::ofstream out(summary_path);
  if (!out) throw Error("cannot open output file: " + summary_path);
  out << j.dump(2) << "\n";
  require_written(out, summary_path);

  std::cout << "wrote " << args.scenes << " scenes: kept_by_vfg "
            << preservation.aggregate.kept_by_vfg << ", kept_by_greedy_full "
            << preservation.aggregate.kept_by_greedy_full << ", gt_count "
            << preservation.aggregate.gt_count << "\n";
}

struct SweepArgs {
  std::string gt_path;
  std::string dt_path;
  std::string out_path = "sweep.csv";
  std::string grid;
  double min_score = 0.05;
};

inline void run_sweep(const SweepArgs& args) {
  const std::vector<AnnotationRecord> gt = load_annotations_file(args.gt_path);
  const std::vector<DetectionRecord> dt = load_detections_file(args.dt_path);
  const std::vector<EvalImage> images = build_eval_images(gt, dt);

  const std::vector<double> grid =
      args.grid.empty() ? coco_iou_thresholds() : parse_grid(args.grid);
  EvalOptions opts;
  opts.min_score = args.min_score;
  const std::vector<SweepRow> rows = sweep_iou(images, grid, opts);

  std::ofstream out(args.out_path);
  if (!out) throw Error("cannot open output file: " + args.out_path);
  write_sweep_csv(out, rows);
  require_written(out, args.out_path);

  std::cout << std::fixed << std::setprecision(4);
  for (const SweepRow& row : rows) {
    std::cout << "iou " << row.iou_thresh << "  mr2 " << row.mr2 << "  ap " << row.ap << "\n";
  }
}

}  // namespace detail

// Entry point shared by the binary and the tests. args excludes the program
// name. Returns 0 only when every requested artifact was written.
inline int run_command(const std::vector<std::string>& args) {
  CLI::App app{"detection post-processing and evaluation toolkit"};
  app.require_subcommand(1);

  detail::EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "evaluate detections against annotations");
  eval->add_option("--gt", eval_args.gt_path, "annotation file (odgt)")->required();
  eval->add_option("--dt", eval_args.dt_path, "detection file (odgt)")->required();
  eval->add_option("--out", eval_args.out_json, "JSON report path");
  eval->add_option("--csv", eval_args.out_csv, "optional CSV report path");
  eval->add_option("--subsets", eval_args.subsets, "comma-separated subset names");
  eval->add_option("--iou", eval_args.iou, "matching IoU threshold")
      ->check(CLI::Range(0.0, 1.0));
  eval->add_option("--min-score", eval_args.min_score, "detection score cutoff")
      ->check(CLI::Range(0.0, 1.0));
  eval->callback([&eval_args]() { detail::run_eval(eval_args); });

  detail::NmsArgs nms_args;
  CLI::App* nms = app.add_subcommand("nms", "filter detections by non-maximum suppression");
  nms->add_option("--dt", nms_args.dt_path, "detection file (odgt)")->required();
  nms->add_option("--out", nms_args.out_path, "filtered detection file")->required();
  nms->add_option("--mode", nms_args.mode, "greedy, soft, or vfg");
  nms->add_option("--thresh", nms_args.thresh, "suppression IoU threshold")
      ->check(CLI::Range(0.0, 1.0));
  nms->add_option("--score-floor", nms_args.score_floor, "soft mode drop threshold")
      ->check(CLI::Range(0.0, 1.0));
  nms->callback([&nms_args]() { detail::run_nms(nms_args); });

  detail::AssociateArgs assoc_args;
  CLI::App* assoc = app.add_subcommand("associate", "pair body boxes with part boxes");
  assoc->add_option("--gt", assoc_args.gt_path, "annotation file (odgt)")->required();
  assoc->add_option("--dt", assoc_args.dt_path, "detection file supplying body boxes");
  assoc->add_option("--out", assoc_args.out_path, "pair report path");
  assoc->add_option("--parts", assoc_args.parts, "part source: head or visible");
  assoc->add_option("--metric", assoc_args.metric, "distance or iou");
  assoc->add_flag("--gt-as-pred", assoc_args.gt_as_pred,
                  "use shuffled GT parts as predictions");
  assoc->add_option("--seed", assoc_args.seed, "shuffle seed");
  assoc->add_option("--thresh-body", assoc_args.thresh_body, "body IoU threshold")
      ->check(CLI::Range(0.0, 1.0));
  assoc->add_option("--thresh-part", assoc_args.thresh_part, "part IoU threshold")
      ->check(CLI::Range(0.0, 1.0));
  assoc->add_option("--min-iou", assoc_args.min_iou, "IoU-metric feasibility gate")
      ->check(CLI::Range(0.0, 1.0));
  assoc->callback([&assoc_args]() { detail::run_associate(assoc_args); });

  detail::SimulateArgs sim_args;
  CLI::App* sim = app.add_subcommand("simulate", "generate synthetic crowd scenes");
  sim->add_option("--out-dir", sim_args.out_dir, "output directory")->required();
  sim->add_option("--scenes", sim_args.scenes, "number of scenes");
  sim->add_option("--seed", sim_args.seed, "base seed");
  sim->add_option("--instances", sim_args.instances, "instances per scene");
  sim->add_option("--crowd", sim_args.crowd, "target pairwise full-box IoU")
      ->check(CLI::Range(0.0, 0.75));
  sim->add_option("--width", sim_args.width, "scene width in pixels");
  sim->add_option("--height", sim_args.height, "scene height in pixels");
  sim->add_option("--min-visible", sim_args.min_visible, "minimum visible-area fraction")
      ->check(CLI::Range(0.0, 1.0));
  sim->add_option("--noise-center", sim_args.noise_center, "center jitter sigma");
  sim->add_option("--noise-size", sim_args.noise_size, "size jitter sigma");
  sim->add_option("--noise-score", sim_args.noise_score, "additive score noise sigma");
  sim->add_option("--fp-rate", sim_args.fp_rate, "false positive rate")
      ->check(CLI::Range(0.0, 1.0));
  sim->add_option("--fn-rate", sim_args.fn_rate, "false negative rate")
      ->check(CLI::Range(0.0, 1.0));
  sim->add_option("--nms-thresh", sim_args.nms_thresh, "preservation experiment threshold")
      ->check(CLI::Range(0.0, 1.0));
  sim->callback([&sim_args]() { detail::run_simulate(sim_args); });

  detail::SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand("sweep", "metrics along an IoU threshold grid");
  sweep->add_option("--gt", sweep_args.gt_path, "annotation file (odgt)")->required();
  sweep->add_option("--dt", sweep_args.dt_path, "detection file (odgt)")->required();
  sweep->add_option("--out", sweep_args.out_path, "CSV output path");
  sweep->add_option("--grid", sweep_args.grid, "comma-separated IoU thresholds");
  sweep->add_option("--min-score", sweep_args.min_score, "detection score cutoff")
      ->check(CLI::Range(0.0, 1.0));
  sweep->callback([&sweep_args]() { detail::run_sweep(sweep_args); });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

inline int run_command(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_command(args);
}

}  // namespace vfg::cli
