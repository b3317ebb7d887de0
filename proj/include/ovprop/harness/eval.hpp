#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ovprop/boxes.hpp"
#include "ovprop/harness/scene.hpp"

namespace ovprop::harness {

enum class Interpolation {
  continuous,    // area under the monotone precision envelope
  eleven_point,  // mean of max precision at recall >= 0, 0.1, ..., 1
};

struct EvalParams {
  double iou_threshold = 0.25;
  Interpolation interpolation = Interpolation::continuous;
  boxes::IoUMode iou_mode = boxes::IoUMode::rotated;
};

struct ClassResult {
  int class_id = 0;
  std::string name;
  Split split = Split::base;
  std::size_t num_gt = 0;
  std::size_t num_det = 0;
  std::size_t num_tp = 0;
  std::optional<double> ap;  // absent when the class has no ground truth
};

struct EvalReport {
  EvalParams params;
  std::vector<ClassResult> per_class;
  std::optional<double> ap_base;
  std::optional<double> ap_novel;
  std::optional<double> ap_all;
  double recall = 0.0;  // matched ground truth / all ground truth
  std::size_t num_gt = 0;
  std::size_t num_tp = 0;
  std::vector<int> excluded_classes;  // classes without ground truth
};

// AP from a ranked list of TP/FP flags. `num_gt` must be positive.
double average_precision(const std::vector<bool>& is_tp, std::size_t num_gt,
                         Interpolation interpolation);

// Detections are grouped per scene (dets[i] belongs to scenes[i]). Matching
// per class: detections in descending score order (ties by scene, then input
// index) take their best-IoU ground truth of that class; a hit at or above
// the threshold on an unmatched box is a TP, anything else an FP. Class means
// skip classes without ground truth. Throws InvalidArgument on unknown class
// ids or mismatched vocabularies.
EvalReport evaluate(std::span<const std::vector<boxes::Detection>> dets,
                    std::span<const Scene> scenes, const EvalParams& params = {});

}  // namespace ovprop::harness
