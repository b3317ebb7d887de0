#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "oracles.hpp"
#include "ovprop/errors.hpp"
#include "ovprop/harness/eval.hpp"

using namespace ovprop;
using namespace ovprop::harness;
using boxes::Box3D;
using boxes::Detection;

namespace {

Scene scene_with(std::vector<GtBox3D> gt, std::string id = "s") {
  Scene s;
  s.id = std::move(id);
  s.gt3d = std::move(gt);
  s.vocabulary = {{"chair", Split::base}, {"table", Split::base}, {"lamp", Split::novel}};
  return s;
}

Box3D unit_box(double x) { return Box3D::make(x, 0, 0.5, 1, 1, 1, 0); }

Detection det(const Box3D& b, int cls, double score) { return {b, std::nullopt, cls, score, boxes::Source::model}; }

EvalReport run(const std::vector<Detection>& dets, const Scene& scene, EvalParams p = {}) {
  const std::vector<std::vector<Detection>> d{dets};
  const std::vector<Scene> s{scene};
  return evaluate(d, s, p);
}

}  // namespace

TEST(AveragePrecision, Examples) {
  EXPECT_EQ(average_precision({true}, 1, Interpolation::continuous), 1.0);
  EXPECT_EQ(average_precision({true, false}, 1, Interpolation::continuous), 1.0);
  EXPECT_EQ(average_precision({false, true}, 1, Interpolation::continuous), 0.5);
  EXPECT_EQ(average_precision({}, 3, Interpolation::continuous), 0.0);
  EXPECT_EQ(average_precision({true}, 2, Interpolation::continuous), 0.5);
  EXPECT_THROW(average_precision({true}, 0, Interpolation::continuous), InvalidArgument);
}

TEST(AveragePrecision, ElevenPointOnSingleDetection) {
  EXPECT_EQ(average_precision({true}, 1, Interpolation::eleven_point), 1.0);
  EXPECT_EQ(average_precision({true}, 1, Interpolation::eleven_point),
            average_precision({true}, 1, Interpolation::continuous));
  EXPECT_DOUBLE_EQ(average_precision({false, true}, 1, Interpolation::eleven_point), 0.5);
}

TEST(AveragePrecision, MatchesDefinitionOnEveryShortSequence) {
  for (int len = 0; len <= 10; ++len) {
    for (int mask = 0; mask < (1 << len); ++mask) {
      std::vector<bool> tp(len);
      int hits = 0;
      for (int i = 0; i < len; ++i) hits += (tp[i] = (mask >> i) & 1);
      for (int extra : {0, 1, 3}) {
        const auto num_gt = static_cast<std::size_t>(hits + extra);
        if (num_gt == 0) continue;
        EXPECT_NEAR(average_precision(tp, num_gt, Interpolation::continuous),
                    oracle::ap_definition(tp, num_gt), 1e-12);
        EXPECT_NEAR(average_precision(tp, num_gt, Interpolation::eleven_point),
                    oracle::ap_eleven_definition(tp, num_gt), 1e-12);
      }
    }
  }
}

TEST(AveragePrecision, PromotingATruePositiveNeverLowersAp) {
  oracle::Gen g(12);
  for (int trial = 0; trial < 500; ++trial) {
    const int len = g.integer(2, 30);
    std::vector<bool> tp(len);
    std::size_t hits = 0;
    for (int i = 0; i < len; ++i) hits += (tp[i] = g.uniform(0, 1) < 0.5);
    const std::size_t num_gt = hits + g.integer(1, 5);
    // Swap an adjacent (FP, TP) pair so the TP ranks higher.
    for (int i = 0; i + 1 < len; ++i) {
      if (!tp[i] && tp[i + 1]) {
        auto better = tp;
        better[i] = true;
        better[i + 1] = false;
        for (auto mode : {Interpolation::continuous, Interpolation::eleven_point}) {
          EXPECT_GE(average_precision(better, num_gt, mode) + 1e-12, average_precision(tp, num_gt, mode));
        }
        break;
      }
    }
  }
}

TEST(Evaluate, PerfectDetectionsScoreOne) {
  const auto scene = scene_with({{0, unit_box(0)}, {1, unit_box(3)}, {2, unit_box(6)}});
  const auto r = run({det(unit_box(0), 0, 0.9), det(unit_box(3), 1, 0.8), det(unit_box(6), 2, 0.7)}, scene);
  EXPECT_EQ(r.ap_all, 1.0);
  EXPECT_EQ(r.ap_base, 1.0);
  EXPECT_EQ(r.ap_novel, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.num_gt, 3u);
  EXPECT_EQ(r.num_tp, 3u);
  EXPECT_TRUE(r.excluded_classes.empty());
}

TEST(Evaluate, RankOrderDecidesAp) {
  const auto scene = scene_with({{0, unit_box(0)}});
  const auto tp_first = run({det(unit_box(0), 0, 0.9), det(unit_box(5), 0, 0.5)}, scene);
  EXPECT_EQ(tp_first.per_class[0].ap, 1.0);
  const auto fp_first = run({det(unit_box(0), 0, 0.5), det(unit_box(5), 0, 0.9)}, scene);
  EXPECT_EQ(fp_first.per_class[0].ap, 0.5);
}

TEST(Evaluate, DuplicateDetectionIsFalsePositive) {
  const auto scene = scene_with({{0, unit_box(0)}});
  const auto r = run({det(unit_box(0), 0, 0.9), det(unit_box(0), 0, 0.8)}, scene);
  EXPECT_EQ(r.per_class[0].num_tp, 1u);
  EXPECT_EQ(r.per_class[0].num_det, 2u);
  EXPECT_EQ(r.per_class[0].ap, 1.0);
}

TEST(Evaluate, WrongClassDoesNotMatch) {
  const auto scene = scene_with({{0, unit_box(0)}});
  const auto r = run({det(unit_box(0), 1, 0.9)}, scene);
  EXPECT_EQ(r.num_tp, 0u);
  EXPECT_EQ(r.per_class[0].ap, 0.0);
}

TEST(Evaluate, ThresholdIsInclusive) {
  // Offset 0.6 along x: intersection 0.4, union 1.6, IoU 0.25 exactly.
  const auto scene = scene_with({{0, Box3D::make(0, 0, 0.5, 1, 1, 1, 0)}});
  const auto shifted = Box3D::make(0.6, 0, 0.5, 1, 1, 1, 0);
  EXPECT_NEAR(boxes::iou_3d(scene.gt3d[0].box, shifted), 0.25, 1e-15);
  EvalParams p;
  p.iou_threshold = boxes::iou_3d(scene.gt3d[0].box, shifted);
  EXPECT_EQ(run({det(shifted, 0, 0.9)}, scene, p).num_tp, 1u);
  p.iou_threshold = std::nextafter(p.iou_threshold, 1.0);
  EXPECT_EQ(run({det(shifted, 0, 0.9)}, scene, p).num_tp, 0u);
}

TEST(Evaluate, ClassesWithoutGroundTruthAreExcluded) {
  const auto scene = scene_with({{0, unit_box(0)}});
  const auto r = run({det(unit_box(0), 0, 0.9), det(unit_box(4), 2, 0.9)}, scene);
  EXPECT_EQ(r.excluded_classes, (std::vector<int>{1, 2}));
  EXPECT_FALSE(r.per_class[2].ap.has_value());
  EXPECT_EQ(r.per_class[2].num_det, 1u);
  EXPECT_EQ(r.ap_all, 1.0);
  EXPECT_EQ(r.ap_base, 1.0);
  EXPECT_FALSE(r.ap_novel.has_value());
}

TEST(Evaluate, ApAllIsMeanOverClassesWithGroundTruth) {
  const auto scene = scene_with({{0, unit_box(0)}, {1, unit_box(3)}, {2, unit_box(6)}});
  const auto r = run({det(unit_box(0), 0, 0.9), det(unit_box(20), 1, 0.9), det(unit_box(3), 1, 0.5)}, scene);
  ASSERT_TRUE(r.ap_all.has_value());
  EXPECT_DOUBLE_EQ(*r.ap_all, (1.0 + 0.5 + 0.0) / 3.0);
  EXPECT_DOUBLE_EQ(*r.ap_base, 0.75);
  EXPECT_EQ(r.ap_novel, 0.0);
  EXPECT_DOUBLE_EQ(r.recall, 2.0 / 3.0);
}

TEST(Evaluate, UnknownClassAndShapeErrors) {
  const auto scene = scene_with({{0, unit_box(0)}});
  EXPECT_THROW(run({det(unit_box(0), 7, 0.9)}, scene), InvalidArgument);
  const std::vector<std::vector<Detection>> two(2);
  const std::vector<Scene> one{scene};
  EXPECT_THROW(evaluate(two, one), InvalidArgument);
  auto other = scene_with({}, "t");
  other.vocabulary.pop_back();
  const std::vector<Scene> mixed{scene, other};
  EXPECT_THROW(evaluate(two, mixed), InvalidArgument);
}

TEST(Evaluate, MatchingIsPerScene) {
  // Same box in two scenes: the detection in scene 1 cannot claim scene 0's GT.
  const std::vector<Scene> scenes{scene_with({{0, unit_box(0)}}, "a"), scene_with({}, "b")};
  const std::vector<std::vector<Detection>> dets{{}, {det(unit_box(0), 0, 0.9)}};
  const auto r = evaluate(dets, scenes);
  EXPECT_EQ(r.num_tp, 0u);
  EXPECT_EQ(r.per_class[0].num_det, 1u);
}

TEST(Evaluate, InvariantToDetectionOrderWithinScene) {
  oracle::Gen g(41);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<GtBox3D> gt;
    for (int i = 0; i < 6; ++i) gt.push_back({g.integer(0, 2), unit_box(3.0 * i)});
    const auto scene = scene_with(gt);
    std::vector<Detection> dets;
    for (int i = 0; i < 12; ++i) {
      const auto b = Box3D::make(3.0 * g.integer(0, 6) + g.uniform(-0.5, 0.5), g.uniform(-0.3, 0.3), 0.5, 1, 1,
                                 1, g.uniform(-1, 1));
      dets.push_back(det(b, g.integer(0, 2), g.uniform(0, 1)));  // distinct scores almost surely
    }
    const auto a = run(dets, scene);
    std::shuffle(dets.begin(), dets.end(), g.engine());
    const auto b = run(dets, scene);
    EXPECT_EQ(a.ap_all, b.ap_all);
    EXPECT_EQ(a.num_tp, b.num_tp);
  }
}
