#include "vfg/odgt_io.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "vfg/evaluation.hpp"
#include "vfg/random.hpp"

namespace vfg {
namespace {

std::vector<AnnotationRecord> parse_gt(const std::string& text) {
  std::istringstream in(text);
  return load_annotations(in);
}

std::vector<DetectionRecord> parse_dt(const std::string& text) {
  std::istringstream in(text);
  return load_detections(in);
}

TEST(LoadAnnotations, ParsesACompleteRecord) {
  const auto recs = parse_gt(
      R"({"ID": "img1", "gtboxes": [{"tag": "person", "fbox": [1, 2, 10, 20],)"
      R"( "vbox": [1, 2, 10, 15], "hbox": [3, 2, 4, 5], "extra": {"ignore": 0}}]})"
      "\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].id, "img1");
  ASSERT_EQ(recs[0].boxes.size(), 1u);
  const GtBoxRecord& box = recs[0].boxes[0];
  EXPECT_EQ(box.tag, "person");
  EXPECT_EQ(box.fbox, (BBox{1, 2, 10, 20}));
  ASSERT_TRUE(box.vbox.has_value());
  EXPECT_EQ(*box.vbox, (BBox{1, 2, 10, 15}));
  ASSERT_TRUE(box.hbox.has_value());
  EXPECT_FALSE(box.ignore);
}

TEST(LoadAnnotations, OptionalBoxesStayEmpty) {
  const auto recs = parse_gt(R"({"ID": "img1", "gtboxes": [{"fbox": [0, 0, 5, 5]}]})" "\n");
  ASSERT_EQ(recs[0].boxes.size(), 1u);
  EXPECT_FALSE(recs[0].boxes[0].vbox.has_value());
  EXPECT_FALSE(recs[0].boxes[0].hbox.has_value());
  EXPECT_EQ(recs[0].boxes[0].tag, "person");  // default
}

TEST(LoadAnnotations, SkipsBlankLines) {
  const auto recs = parse_gt(
      "\n  \t\n"
      R"({"ID": "a", "gtboxes": []})"
      "\n\n"
      R"({"ID": "b"})"
      "\n");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].id, "a");
  EXPECT_EQ(recs[1].id, "b");
}

TEST(LoadAnnotations, InvalidJsonNamesTheLine) {
  try {
    parse_gt(R"({"ID": "a"})" "\nnot json\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.reason(), "invalid JSON");
  }
}

TEST(LoadAnnotations, MissingIdThrows) {
  EXPECT_THROW(parse_gt(R"({"gtboxes": []})" "\n"), ParseError);
  EXPECT_THROW(parse_gt(R"({"ID": 7})" "\n"), ParseError);
}

TEST(LoadAnnotations, WrongArityBoxNamesTheField) {
  try {
    parse_gt(R"({"ID": "a", "gtboxes": [{"fbox": [1, 2, 3]}]})" "\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(e.reason().find("gtboxes[0].fbox"), std::string::npos);
  }
}

TEST(LoadAnnotations, NegativeSizeThrows) {
  try {
    parse_gt(R"({"ID": "a", "gtboxes": [{"fbox": [0, 0, -1, 5]}]})" "\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(e.reason().find("negative width or height"), std::string::npos);
  }
}

TEST(LoadAnnotations, NonNumericBoxEntryThrows) {
  EXPECT_THROW(parse_gt(R"({"ID": "a", "gtboxes": [{"fbox": [0, 0, "w", 5]}]})" "\n"),
               ParseError);
}

TEST(LoadAnnotations, DuplicateIdThrows) {
  EXPECT_THROW(parse_gt(R"({"ID": "a"})" "\n" R"({"ID": "a"})" "\n"), DuplicateImageIdError);
}

TEST(LoadAnnotations, NonPersonTagBecomesIgnore) {
  const auto recs = parse_gt(
      R"({"ID": "a", "gtboxes": [{"tag": "mask", "fbox": [0, 0, 5, 5]},)"
      R"( {"tag": "person", "fbox": [10, 0, 5, 5]}]})"
      "\n");
  EXPECT_TRUE(recs[0].boxes[0].ignore);
  EXPECT_FALSE(recs[0].boxes[1].ignore);
}

TEST(LoadAnnotations, IgnoreAcceptsIntAndBool) {
  const auto recs = parse_gt(
      R"({"ID": "a", "gtboxes": [)"
      R"({"fbox": [0, 0, 5, 5], "extra": {"ignore": 1}},)"
      R"({"fbox": [0, 0, 5, 5], "extra": {"ignore": true}},)"
      R"({"fbox": [0, 0, 5, 5], "extra": {"ignore": 0}}]})"
      "\n");
  EXPECT_TRUE(recs[0].boxes[0].ignore);
  EXPECT_TRUE(recs[0].boxes[1].ignore);
  EXPECT_FALSE(recs[0].boxes[2].ignore);
  EXPECT_THROW(
      parse_gt(R"({"ID": "a", "gtboxes": [{"fbox": [0,0,5,5], "extra": {"ignore": "y"}}]})"
               "\n"),
      ParseError);
}

TEST(LoadDetections, ParsesScoresAndOptionalVbox) {
  const auto recs = parse_dt(
      R"({"ID": "a", "dtboxes": [{"score": 0.75, "fbox": [0, 0, 5, 5], "vbox": [0, 0, 5, 3]},)"
      R"( {"score": 1, "fbox": [9, 9, 2, 2]}]})"
      "\n");
  ASSERT_EQ(recs.size(), 1u);
  ASSERT_EQ(recs[0].boxes.size(), 2u);
  EXPECT_EQ(recs[0].boxes[0].score, 0.75);
  ASSERT_TRUE(recs[0].boxes[0].vbox.has_value());
  EXPECT_FALSE(recs[0].boxes[1].vbox.has_value());
}

TEST(LoadDetections, ScoreIsRequiredAndBounded) {
  EXPECT_THROW(parse_dt(R"({"ID": "a", "dtboxes": [{"fbox": [0, 0, 5, 5]}]})" "\n"),
               ParseError);
  EXPECT_THROW(
      parse_dt(R"({"ID": "a", "dtboxes": [{"score": 1.5, "fbox": [0, 0, 5, 5]}]})" "\n"),
      ParseError);
  EXPECT_THROW(
      parse_dt(R"({"ID": "a", "dtboxes": [{"score": -0.1, "fbox": [0, 0, 5, 5]}]})" "\n"),
      ParseError);
}

TEST(LoadDetections, DuplicateIdThrows) {
  EXPECT_THROW(parse_dt(R"({"ID": "a"})" "\n" R"({"ID": "a"})" "\n"), DuplicateImageIdError);
}

TEST(Roundtrip, AnnotationsSurviveSaveAndLoad) {
  StableRng rng(71);
  std::vector<AnnotationRecord> records;
  for (int i = 0; i < 20; ++i) {
    AnnotationRecord rec;
    rec.id = "img" + std::to_string(i);
    const std::size_t n = rng.uniform_index(5);
    for (std::size_t b = 0; b < n; ++b) {
      GtBoxRecord box;
      box.tag = rng.bernoulli(0.8) ? "person" : "mask";
      box.fbox = {rng.uniform(0, 500), rng.uniform(0, 500), rng.uniform(1, 80),
                  rng.uniform(1, 200)};
      if (rng.bernoulli(0.7)) {
        box.vbox = BBox{box.fbox.x, box.fbox.y, box.fbox.w, box.fbox.h * rng.uniform01()};
      }
      if (rng.bernoulli(0.5)) box.hbox = BBox{box.fbox.x, box.fbox.y, 5, 5};
      box.ignore = box.tag != "person" || rng.bernoulli(0.2);
      rec.boxes.push_back(box);
    }
    records.push_back(rec);
  }

  std::ostringstream out;
  save_annotations(out, records);
  const auto back = parse_gt(out.str());

  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(back[i].id, records[i].id);
    ASSERT_EQ(back[i].boxes.size(), records[i].boxes.size());
    for (std::size_t b = 0; b < records[i].boxes.size(); ++b) {
      const GtBoxRecord& want = records[i].boxes[b];
      const GtBoxRecord& got = back[i].boxes[b];
      EXPECT_EQ(got.tag, want.tag);
      EXPECT_EQ(got.fbox, want.fbox);  // shortest-roundtrip doubles: bit exact
      EXPECT_EQ(got.vbox, want.vbox);
      EXPECT_EQ(got.hbox, want.hbox);
      EXPECT_EQ(got.ignore, want.ignore);
    }
  }
}

TEST(Roundtrip, DetectionsSurviveSaveAndLoad) {
  StableRng rng(72);
  std::vector<DetectionRecord> records;
  for (int i = 0; i < 20; ++i) {
    DetectionRecord rec;
    rec.id = "img" + std::to_string(i);
    const std::size_t n = rng.uniform_index(5);
    for (std::size_t b = 0; b < n; ++b) {
      DtBoxRecord box;
      box.score = rng.uniform01();
      box.fbox = {rng.uniform(0, 500), rng.uniform(0, 500), rng.uniform(1, 80),
                  rng.uniform(1, 200)};
      if (rng.bernoulli(0.6)) box.vbox = box.fbox;
      rec.boxes.push_back(box);
    }
    records.push_back(rec);
  }

  std::ostringstream out;
  save_detections(out, records);
  const auto back = parse_dt(out.str());

  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    ASSERT_EQ(back[i].boxes.size(), records[i].boxes.size());
    for (std::size_t b = 0; b < records[i].boxes.size(); ++b) {
      EXPECT_EQ(back[i].boxes[b].score, records[i].boxes[b].score);
      EXPECT_EQ(back[i].boxes[b].fbox, records[i].boxes[b].fbox);
      EXPECT_EQ(back[i].boxes[b].vbox, records[i].boxes[b].vbox);
    }
  }
}

TEST(Roundtrip, SavedOutputIsOneLinePerRecord) {
  std::vector<AnnotationRecord> records(3);
  records[0].id = "a";
  records[1].id = "b";
  records[2].id = "c";
  std::ostringstream out;
  save_annotations(out, records);
  const std::string text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(BuildEvalImages, JoinsDetectionsOntoAnnotatedImages) {
  const auto gt = parse_gt(
      R"({"ID": "a", "gtboxes": [{"fbox": [0, 0, 10, 20]}]})"
      "\n"
      R"({"ID": "b", "gtboxes": [{"fbox": [5, 5, 10, 20]}]})"
      "\n");
  const auto dt = parse_dt(R"({"ID": "b", "dtboxes": [{"score": 0.9, "fbox": [5, 5, 10, 20]}]})"
                           "\n");
  const auto images = build_eval_images(gt, dt);
  ASSERT_EQ(images.size(), 2u);
  EXPECT_EQ(images[0].id, "a");
  EXPECT_TRUE(images[0].dets.empty());
  ASSERT_EQ(images[1].dets.size(), 1u);
  EXPECT_EQ(images[1].dets[0].score, 0.9);
  ASSERT_EQ(images[1].gts.size(), 1u);
}

TEST(BuildEvalImages, UnknownDetectionIdThrows) {
  const auto gt = parse_gt(R"({"ID": "a"})" "\n");
  const auto dt = parse_dt(R"({"ID": "zzz", "dtboxes": []})" "\n");
  EXPECT_THROW(build_eval_images(gt, dt), Error);
}

TEST(BuildEvalImages, IgnoreFlagsFlowThroughToMatching) {
  const auto gt = parse_gt(
      R"({"ID": "a", "gtboxes": [{"fbox": [0, 0, 10, 20], "extra": {"ignore": 1}},)"
      R"( {"fbox": [50, 0, 10, 20]}]})"
      "\n");
  const auto dt = parse_dt(
      R"({"ID": "a", "dtboxes": [{"score": 0.9, "fbox": [0, 0, 10, 20]},)"
      R"( {"score": 0.8, "fbox": [50, 0, 10, 20]}]})"
      "\n");
  const auto images = build_eval_images(gt, dt);
  const auto log = match_detections(images[0].dets, images[0].gts, 0.5);
  EXPECT_EQ(log.num_gt, 1u);  // the ignore region is not a countable target
  EXPECT_EQ(log.dets[0].kind, MatchKind::ignored);
  EXPECT_EQ(log.dets[1].kind, MatchKind::tp);
  EXPECT_EQ(average_precision({log}), 1.0);
}

TEST(ToPairedDetections, RequiresVisibleBoxes) {
  const auto ok = parse_dt(
      R"({"ID": "a", "dtboxes": [{"score": 0.9, "fbox": [0, 0, 10, 20], "vbox": [0, 0, 10, 10]}]})"
      "\n");
  const auto pairs = to_paired_detections(ok[0]);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].visible, (BBox{0, 0, 10, 10}));
  EXPECT_EQ(pairs[0].full, (BBox{0, 0, 10, 20}));

  const auto bad = parse_dt(
      R"({"ID": "a", "dtboxes": [{"score": 0.9, "fbox": [0, 0, 10, 20], "vbox": [0, 0, 10, 10]},)"
      R"( {"score": 0.8, "fbox": [5, 0, 10, 20]}]})"
      "\n");
  try {
    to_paired_detections(bad[0]);
    FAIL() << "expected MissingVisibleBoxError";
  } catch (const MissingVisibleBoxError& e) {
    EXPECT_NE(std::string(e.what()).find("detection 1"), std::string::npos);
  }
}

TEST(LoadFiles, MissingFileThrows) {
  EXPECT_THROW(load_annotations_file("/nonexistent/path/gt.odgt"), Error);
  EXPECT_THROW(load_detections_file("/nonexistent/path/dt.odgt"), Error);
}

TEST(ReportWriters, CsvRowsFollowTheHeader) {
  EvalReport report;
  SubsetMetrics m;
  m.subset = "Reasonable";
  m.map = 0.5;
  m.ap50 = 0.75;
  m.recall = 1.0;
  m.mr2 = 0.25;
  m.num_images = 3;
  m.num_gt = 7;
  report.subsets.push_back(m);

  std::ostringstream csv;
  write_report_csv(csv, report);
  EXPECT_EQ(csv.str(), "subset,map,ap50,recall,mr2,num_images,num_gt\nReasonable,0.5,0.75,1.0,0.25,3,7\n");
}

TEST(ReportWriters, JsonCarriesOptionsAndSubsets) {
  EvalReport report;
  report.options.iou_thresh = 0.5;
  SubsetMetrics m;
  m.subset = "All";
  m.images.push_back({"img0", 2, 1, 0});
  report.subsets.push_back(m);

  std::ostringstream out;
  write_report_json(out, report);
  const ordered_json j = ordered_json::parse(out.str());
  EXPECT_EQ(j["options"]["iou_thresh"], 0.5);
  ASSERT_EQ(j["subsets"].size(), 1u);
  EXPECT_EQ(j["subsets"][0]["subset"], "All");
  EXPECT_EQ(j["subsets"][0]["images"][0]["tp"], 2);
}

TEST(ReportWriters, SweepCsvShape) {
  std::vector<SweepRow> rows{{0.5, 0.25, 0.9}, {0.75, 0.5, 0.6}};
  std::ostringstream out;
  write_sweep_csv(out, rows);
  EXPECT_EQ(out.str(), "iou_thresh,mr2,ap\n0.5,0.25,0.9\n0.75,0.5,0.6\n");
}

}  // namespace
}  // namespace vfg
