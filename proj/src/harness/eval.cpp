#include "ovprop/harness/eval.hpp"

#include <algorithm>

#include "ovprop/errors.hpp"

namespace ovprop::harness {
namespace {

struct RankedDet {
  double score;
  std::size_t scene;
  std::size_t index;
};

std::optional<double> mean_of(const std::vector<ClassResult>& rows, std::optional<Split> split) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (!r.ap || (split && r.split != *split)) continue;
    sum += *r.ap;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

double average_precision(const std::vector<bool>& is_tp, std::size_t num_gt,
                         Interpolation interpolation) {
  if (num_gt == 0) throw InvalidArgument("average_precision: no ground truth");
  const std::size_t n = is_tp.size();
  std::vector<double> recall(n), precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_tp[i]) ++tp;
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }

  if (interpolation == Interpolation::eleven_point) {
    double sum = 0.0;
    for (int k = 0; k <= 10; ++k) {
      const double r = k / 10.0;
      double best = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (recall[i] >= r) best = std::max(best, precision[i]);
      }
      sum += best;
    }
    return sum / 11.0;
  }

  // Monotone envelope from the right, then sum precision over recall steps.
  std::vector<double> envelope = precision;
  for (std::size_t i = n; i-- > 1;) envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * envelope[i];
    prev_recall = recall[i];
  }
  return ap;
}

EvalReport evaluate(std::span<const std::vector<boxes::Detection>> dets,
                    std::span<const Scene> scenes, const EvalParams& params) {
  if (dets.size() != scenes.size()) {
    throw InvalidArgument("evaluate: one detection list per scene is required");
  }
  if (!(params.iou_threshold >= 0.0 && params.iou_threshold <= 1.0)) {
    throw InvalidArgument("evaluate: iou_threshold must lie in [0, 1]");
  }
  EvalReport report;
  report.params = params;
  if (scenes.empty()) return report;

  const auto& vocab = scenes.front().vocabulary;
  for (const auto& s : scenes) {
    if (s.vocabulary != vocab) throw InvalidArgument("evaluate: scenes disagree on vocabulary");
  }
  const auto num_classes = static_cast<int>(vocab.size());
  for (const auto& list : dets) {
    for (const auto& d : list) {
      if (d.class_id < 0 || d.class_id >= num_classes) {
        throw InvalidArgument("evaluate: detection class_id " + std::to_string(d.class_id) +
                              " is not in the vocabulary");
      }
    }
  }

  for (int cls = 0; cls < num_classes; ++cls) {
    ClassResult row;
    row.class_id = cls;
    row.name = vocab[cls].name;
    row.split = vocab[cls].split;

    // Per-scene ground truth and IoU tables for this class.
    std::vector<std::vector<boxes::Box3D>> gt(scenes.size());
    std::vector<RankedDet> ranked;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      for (const auto& g : scenes[s].gt3d) {
        if (g.class_id == cls) gt[s].push_back(g.box);
      }
      row.num_gt += gt[s].size();
      for (std::size_t i = 0; i < dets[s].size(); ++i) {
        if (dets[s][i].class_id != cls) continue;
        ranked.push_back({dets[s][i].score, s, i});
      }
    }
    row.num_det = ranked.size();
    if (row.num_gt == 0) {
      report.excluded_classes.push_back(cls);
      report.per_class.push_back(row);
      continue;
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedDet& a, const RankedDet& b) { return a.score > b.score; });

    std::vector<std::vector<double>> ious(scenes.size());
    std::vector<std::vector<std::size_t>> col_of(scenes.size());
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      std::vector<boxes::Box3D> boxes_s;
      for (std::size_t i = 0; i < dets[s].size(); ++i) {
        if (dets[s][i].class_id != cls) continue;
        col_of[s].resize(dets[s].size(), 0);
        col_of[s][i] = boxes_s.size();
        boxes_s.push_back(dets[s][i].box3d);
      }
      ious[s] = boxes::cross_iou_3d(boxes_s, gt[s], params.iou_mode);
    }

    std::vector<std::vector<char>> taken(scenes.size());
    for (std::size_t s = 0; s < scenes.size(); ++s) taken[s].assign(gt[s].size(), 0);
    std::vector<bool> flags;
    flags.reserve(ranked.size());
    for (const auto& r : ranked) {
      const std::size_t n_gt = gt[r.scene].size();
      const std::size_t row_i = col_of[r.scene][r.index];
      double best = -1.0;
      std::size_t best_g = 0;
      for (std::size_t g = 0; g < n_gt; ++g) {
        const double iou = ious[r.scene][row_i * n_gt + g];
        if (iou > best) {
          best = iou;
          best_g = g;
        }
      }
      const bool tp = n_gt > 0 && best >= params.iou_threshold && !taken[r.scene][best_g];
      if (tp) taken[r.scene][best_g] = 1;
      flags.push_back(tp);
    }
    row.num_tp = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
    row.ap = average_precision(flags, row.num_gt, params.interpolation);
    report.num_gt += row.num_gt;
    report.num_tp += row.num_tp;
    report.per_class.push_back(row);
  }

  report.ap_all = mean_of(report.per_class, std::nullopt);
  report.ap_base = mean_of(report.per_class, Split::base);
  report.ap_novel = mean_of(report.per_class, Split::novel);
  report.recall = report.num_gt == 0
                      ? 0.0
                      : static_cast<double>(report.num_tp) / static_cast<double>(report.num_gt);
  return report;
}

}  // namespace ovprop::harness
