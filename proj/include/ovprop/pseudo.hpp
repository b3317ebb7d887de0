#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ovprop/boxes.hpp"
#include "ovprop/geom.hpp"

namespace ovprop::pseudo {

// Dense row-major cost matrix.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// row_to_col[r] is the column assigned to row r, or nullopt.
struct Assignment {
  std::vector<std::optional<std::size_t>> row_to_col;

  // Sum of cost(r, row_to_col[r]) over assigned rows, accumulated in row order.
  double total_cost(const CostMatrix& cost) const;
};

// Cost given to padding cells when the matrix is not square.
inline constexpr double kPaddingCost = 10.0;

// Minimum-cost one-to-one assignment of min(rows, cols) pairs. Among optimal
// assignments the lexicographically smallest row_to_col vector is returned.
// Throws InvalidArgument on non-finite entries.
Assignment hungarian(const CostMatrix& cost);

// cost[i][j] = 1 - iou_2d(gt[i], pred_boxes[j]).
CostMatrix build_cost_matrix(std::span<const boxes::Box2D> gt,
                             std::span<const boxes::Box2D> pred_boxes);

// A class-agnostic 3D prediction with its image footprint.
struct AgnosticPrediction {
  boxes::Box3D box3d;
  boxes::Box2D box2d;
  double score = 0.0;
  // Simulation provenance: index of the ground-truth box this prediction was
  // derived from, or nullopt for spurious boxes and file-provided predictions.
  std::optional<std::size_t> origin;
};

enum class Branch { primary, noisy };

std::string to_string(Branch b);

struct PseudoLabel {
  int class_id = 0;
  boxes::Box2D box2d;  // the annotated one
  boxes::Box3D box3d;  // the matched prediction's
  double match_iou = 0.0;
  double score = 0.0;  // the matched prediction's score
  Branch branch = Branch::noisy;
  std::size_t gt_index = 0;
  std::size_t pred_index = 0;
};

struct AnnotatedBox {
  int class_id = 0;
  boxes::Box2D box2d;
};

struct UnmatchedGt {
  std::size_t gt_index = 0;
  std::string reason;  // "no-prediction" or "below-gate"
};

struct PseudoLabelResult {
  std::vector<PseudoLabel> labels;
  std::vector<UnmatchedGt> unmatched;
};

// Default gate: pairs with 2D IoU below 0.25 are rejected.
inline constexpr double kDefaultMaxCost = 0.75;

// Hungarian matching on build_cost_matrix; a pair is kept when
// iou >= 1 - max_cost.
PseudoLabelResult make_pseudo_labels(std::span<const AnnotatedBox> gt,
                                     std::span<const AgnosticPrediction> preds,
                                     double max_cost = kDefaultMaxCost);

struct NoiseSpec {
  double center_sigma = 0.0;  // meters, per axis
  double size_sigma = 0.0;    // log-normal scale factor sigma
  double yaw_sigma = 0.0;     // radians
  double drop_prob = 0.0;
  double spurious_rate = 0.0;  // expected spurious boxes per ground-truth box
  double spurious_margin = 2.0;  // meters around the ground-truth extent
};

// Stand-in for a class-agnostic detector: perturbs ground truth, drops and
// adds boxes, and computes footprints. Predictions whose footprint is invalid
// in `camera` are omitted. Seeded and reproducible.
std::vector<AgnosticPrediction> simulate_agnostic_predictions(std::span<const boxes::Box3D> gt,
                                                              const geom::CameraModel& camera,
                                                              const NoiseSpec& noise,
                                                              std::uint64_t seed);

}  // namespace ovprop::pseudo
