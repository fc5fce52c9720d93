#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "vfg/errors.hpp"
#include "vfg/evaluation.hpp"
#include "vfg/geometry.hpp"
#include "vfg/nms.hpp"

namespace vfg {

using ordered_json = nlohmann::ordered_json;

// Line-delimited JSON annotation format. Each line is one image:
//   {"ID": ..., "gtboxes": [{"tag", "fbox": [x,y,w,h], "vbox", "hbox",
//                            "extra": {"ignore": 0|1}}, ...]}
// Detection files use "dtboxes" with a "score" per box. Boxes with a tag
// other than "person" are treated as ignore regions.

struct GtBoxRecord {
  std::string tag = "person";
  BBox fbox{};
  std::optional<BBox> vbox;
  std::optional<BBox> hbox;
  bool ignore = false;
};

struct AnnotationRecord {
  std::string id;
  std::vector<GtBoxRecord> boxes;
};

struct DtBoxRecord {
  std::string tag = "person";
  double score = 0.0;
  BBox fbox{};
  std::optional<BBox> vbox;
};

struct DetectionRecord {
  std::string id;
  std::vector<DtBoxRecord> boxes;
};

namespace detail {

inline BBox parse_box(const ordered_json& j, std::size_t line, const std::string& field) {
  if (!j.is_array() || j.size() != 4) {
    throw ParseError(line, field + " must be a 4-element [x, y, w, h] array");
  }
  double v[4];
  for (std::size_t i = 0; i < 4; ++i) {
    if (!j[i].is_number()) throw ParseError(line, field + " must contain numbers");
    v[i] = j[i].get<double>();
    if (!std::isfinite(v[i])) throw ParseError(line, field + " must be finite");
  }
  if (v[2] < 0.0 || v[3] < 0.0) {
    throw ParseError(line, field + " has negative width or height");
  }
  return {v[0], v[1], v[2], v[3]};
}

inline ordered_json parse_line(const std::string& text, std::size_t line) {
  ordered_json j = ordered_json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ParseError(line, "invalid JSON");
  if (!j.is_object()) throw ParseError(line, "each line must be a JSON object");
  return j;
}

inline std::string parse_id(const ordered_json& j, std::size_t line) {
  if (!j.contains("ID") || !j["ID"].is_string()) {
    throw ParseError(line, "missing string field ID");
  }
  return j["ID"].get<std::string>();
}

inline ordered_json box_json(const BBox& b) {
  return ordered_json::array({b.x, b.y, b.w, b.h});
}

}  // namespace detail

inline std::vector<AnnotationRecord> load_annotations(std::istream& in) {
  std::vector<AnnotationRecord> records;
  std::unordered_set<std::string> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty() || text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const ordered_json j = detail::parse_line(text, line);
    AnnotationRecord rec;
    rec.id = detail::parse_id(j, line);
    if (!seen.insert(rec.id).second) throw DuplicateImageIdError(rec.id);
    if (j.contains("gtboxes")) {
      if (!j["gtboxes"].is_array()) throw ParseError(line, "gtboxes must be an array");
      std::size_t idx = 0;
      for (const ordered_json& bj : j["gtboxes"]) {
        const std::string field = "gtboxes[" + std::to_string(idx) + "]";
        if (!bj.is_object()) throw ParseError(line, field + " must be an object");
        if (!bj.contains("fbox")) throw ParseError(line, field + ".fbox is required");
        GtBoxRecord box;
        if (bj.contains("tag")) {
          if (!bj["tag"].is_string()) throw ParseError(line, field + ".tag must be a string");
          box.tag = bj["tag"].get<std::string>();
        }
        box.fbox = detail::parse_box(bj["fbox"], line, field + ".fbox");
        if (bj.contains("vbox")) box.vbox = detail::parse_box(bj["vbox"], line, field + ".vbox");
        if (bj.contains("hbox")) box.hbox = detail::parse_box(bj["hbox"], line, field + ".hbox");
        if (bj.contains("extra") && bj["extra"].is_object() && bj["extra"].contains("ignore")) {
          const ordered_json& ig = bj["extra"]["ignore"];
          if (ig.is_boolean()) {
            box.ignore = ig.get<bool>();
          } else if (ig.is_number_integer()) {
            box.ignore = ig.get<int>() != 0;
          } else {
            throw ParseError(line, field + ".extra.ignore must be 0, 1, or a boolean");
          }
        }
        if (box.tag != "person") box.ignore = true;
        rec.boxes.push_back(std::move(box));
        ++idx;
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<DetectionRecord> load_detections(std::istream& in) {
  std::vector<DetectionRecord> records;
  std::unordered_set<std::string> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty() || text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const ordered_json j = detail::parse_line(text, line);
    DetectionRecord rec;
    rec.id = detail::parse_id(j, line);
    if (!seen.insert(rec.id).second) throw DuplicateImageIdError(rec.id);
    if (j.contains("dtboxes")) {
      if (!j["dtboxes"].is_array()) throw ParseError(line, "dtboxes must be an array");
      std::size_t idx = 0;
      for (const ordered_json& bj : j["dtboxes"]) {
        const std::string field = "dtboxes[" + std::to_string(idx) + "]";
        if (!bj.is_object()) throw ParseError(line, field + " must be an object");
        if (!bj.contains("fbox")) throw ParseError(line, field + ".fbox is required");
        if (!bj.contains("score") || !bj["score"].is_number()) {
          throw ParseError(line, field + ".score is required and must be a number");
        }
        DtBoxRecord box;
        if (bj.contains("tag")) {
          if (!bj["tag"].is_string()) throw ParseError(line, field + ".tag must be a string");
          box.tag = bj["tag"].get<std::string>();
        }
        box.score = bj["score"].get<double>();
        if (!std::isfinite(box.score) || box.score < 0.0 || box.score > 1.0) {
          throw ParseError(line, field + ".score must lie in [0, 1]");
        }
        box.fbox = detail::parse_box(bj["fbox"], line, field + ".fbox");
        if (bj.contains("vbox")) box.vbox = detail::parse_box(bj["vbox"], line, field + ".vbox");
        rec.boxes.push_back(std::move(box));
        ++idx;
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<AnnotationRecord> load_annotations_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open annotation file: " + path);
  return load_annotations(in);
}

inline std::vector<DetectionRecord> load_detections_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open detection file: " + path);
  return load_detections(in);
}

inline void save_annotations(std::ostream& out, const std::vector<AnnotationRecord>& records) {
  for (const AnnotationRecord& rec : records) {
    ordered_json j;
    j["ID"] = rec.id;
    j["gtboxes"] = ordered_json::array();
    for (const GtBoxRecord& box : rec.boxes) {
      ordered_json bj;
      bj["tag"] = box.tag;
      bj["fbox"] = detail::box_json(box.fbox);
      if (box.vbox) bj["vbox"] = detail::box_json(*box.vbox);
      if (box.hbox) bj["hbox"] = detail::box_json(*box.hbox);
      bj["extra"] = ordered_json{{"ignore", box.ignore ? 1 : 0}};
      j["gtboxes"].push_back(std::move(bj));
    }
    out << j.dump() << "\n";
  }
}

inline void save_detections(std::ostream& out, const std::vector<DetectionRecord>& records) {
  for (const DetectionRecord& rec : records) {
    ordered_json j;
    j["ID"] = rec.id;
    j["dtboxes"] = ordered_json::array();
    for (const DtBoxRecord& box : rec.boxes) {
      ordered_json bj;
      bj["tag"] = box.tag;
      bj["score"] = box.score;
      bj["fbox"] = detail::box_json(box.fbox);
      if (box.vbox) bj["vbox"] = detail::box_json(*box.vbox);
      j["dtboxes"].push_back(std::move(bj));
    }
    out << j.dump() << "\n";
  }
}

inline void save_annotations_file(const std::string& path,
                                  const std::vector<AnnotationRecord>& records) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open output file: " + path);
  save_annotations(out, records);
}

inline void save_detections_file(const std::string& path,
                                 const std::vector<DetectionRecord>& records) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open output file: " + path);
  save_detections(out, records);
}

inline GroundTruthInstance to_instance(const GtBoxRecord& box) {
  return {box.fbox, box.vbox, box.hbox, box.ignore};
}

// Join annotations and detections by image ID. Every detection record must
// name an annotated image; annotated images without detections evaluate
// with an empty detection list.
inline std::vector<EvalImage> build_eval_images(const std::vector<AnnotationRecord>& gt,
                                                const std::vector<DetectionRecord>& dt) {
  std::unordered_map<std::string, std::size_t> index;
  std::vector<EvalImage> images;
  images.reserve(gt.size());
  for (const AnnotationRecord& rec : gt) {
    EvalImage img;
    img.id = rec.id;
    for (const GtBoxRecord& box : rec.boxes) img.gts.push_back(to_instance(box));
    index.emplace(rec.id, images.size());
    images.push_back(std::move(img));
  }
  for (const DetectionRecord& rec : dt) {
    const auto it = index.find(rec.id);
    if (it == index.end()) {
      throw Error("detections reference unknown image ID: " + rec.id);
    }
    for (const DtBoxRecord& box : rec.boxes) {
      images[it->second].dets.push_back({box.fbox, box.score, 0});
    }
  }
  return images;
}

// Paired boxes for pair-aware suppression; every detection needs a vbox.
inline std::vector<PairedDetection> to_paired_detections(const DetectionRecord& rec) {
  std::vector<PairedDetection> out;
  out.reserve(rec.boxes.size());
  for (std::size_t i = 0; i < rec.boxes.size(); ++i) {
    const DtBoxRecord& box = rec.boxes[i];
    if (!box.vbox) {
      throw MissingVisibleBoxError("detection " + std::to_string(i) + " of image " + rec.id);
    }
    out.push_back({*box.vbox, box.fbox, box.score, 0});
  }
  return out;
}

namespace detail {

inline std::string number_repr(double x) { return ordered_json(x).dump(); }

}  // namespace detail

inline ordered_json report_to_json(const EvalReport& report) {
  ordered_json j;
  j["options"] = {{"iou_thresh", report.options.iou_thresh},
                  {"min_score", report.options.min_score},
                  {"mr_floor", report.options.mr_floor},
                  {"map_thresholds", report.options.map_thresholds}};
  j["subsets"] = ordered_json::array();
  for (const SubsetMetrics& m : report.subsets) {
    ordered_json sj;
    sj["subset"] = m.subset;
    sj["map"] = m.map;
    sj["ap50"] = m.ap50;
    sj["recall"] = m.recall;
    sj["mr2"] = m.mr2;
    sj["num_images"] = m.num_images;
    sj["num_gt"] = m.num_gt;
    sj["images"] = ordered_json::array();
    for (const ImageMatchSummary& s : m.images) {
      sj["images"].push_back(
          {{"id", s.id}, {"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn}});
    }
    j["subsets"].push_back(std::move(sj));
  }
  return j;
}

inline void write_report_json(std::ostream& out, const EvalReport& report) {
  out << report_to_json(report).dump(2) << "\n";
}

inline void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << "subset,map,ap50,recall,mr2,num_images,num_gt\n";
  for (const SubsetMetrics& m : report.subsets) {
    out << m.subset << ',' << detail::number_repr(m.map) << ',' << detail::number_repr(m.ap50)
        << ',' << detail::number_repr(m.recall) << ',' << detail::number_repr(m.mr2) << ','
        << m.num_images << ',' << m.num_gt << "\n";
  }
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "iou_thresh,mr2,ap\n";
  for (const SweepRow& row : rows) {
    out << detail::number_repr(row.iou_thresh) << ',' << detail::number_repr(row.mr2) << ','
        << detail::number_repr(row.ap) << "\n";
  }
}

}  // namespace vfg
