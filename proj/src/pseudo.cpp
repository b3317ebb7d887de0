#include "ovprop/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ovprop/errors.hpp"
#include "ovprop/rng.hpp"

namespace ovprop::pseudo {
namespace {

// O(n^3) shortest-augmenting-path Hungarian method with row/column
// potentials on a square matrix. Returns row -> column plus the potentials.
struct SquareSolution {
  std::vector<std::size_t> row_to_col;
  std::vector<double> u;  // row potentials
  std::vector<double> v;  // column potentials
};

SquareSolution solve_square(const CostMatrix& a) {
  const std::size_t n = a.rows();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based internally; index 0 is the virtual source column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  SquareSolution out;
  out.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) out.row_to_col[p[j] - 1] = j - 1;
  out.u.assign(u.begin() + 1, u.end());
  out.v.assign(v.begin() + 1, v.end());
  return out;
}

// Moves an optimal assignment to the lexicographically smallest optimal one.
// Optimal assignments are exactly the perfect matchings on tight edges
// (zero reduced cost under optimal potentials); rows are fixed in order to
// the smallest column that still admits a tight perfect matching.
class LexRefiner {
 public:
  LexRefiner(const CostMatrix& a, SquareSolution& sol, double tol)
      : a_(a), sol_(sol), tol_(tol), n_(a.rows()), col_to_row_(n_) {
    for (std::size_t r = 0; r < n_; ++r) col_to_row_[sol_.row_to_col[r]] = r;
  }

  void run() {
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t current = sol_.row_to_col[i];
      for (std::size_t j = 0; j < current; ++j) {
        if (!tight(i, j)) continue;
        const std::size_t r = col_to_row_[j];
        if (r < i) continue;  // owned by a fixed row
        fixed_row_ = i;
        reserved_col_ = j;
        target_col_ = current;
        visited_.assign(n_, 0);
        if (reroute(r)) {
          sol_.row_to_col[i] = j;
          col_to_row_[j] = i;
          break;
        }
      }
    }
  }

 private:
  bool tight(std::size_t r, std::size_t c) const {
    return a_(r, c) - sol_.u[r] - sol_.v[c] <= tol_;
  }

  // Finds a new column for row r along tight edges, ending at target_col_.
  bool reroute(std::size_t r) {
    for (std::size_t c = 0; c < n_; ++c) {
      if (visited_[c] || c == reserved_col_ || !tight(r, c)) continue;
      visited_[c] = 1;
      const std::size_t owner = col_to_row_[c];
      if (c == target_col_ || (owner > fixed_row_ && reroute(owner))) {
        sol_.row_to_col[r] = c;
        col_to_row_[c] = r;
        return true;
      }
    }
    return false;
  }

  const CostMatrix& a_;
  SquareSolution& sol_;
  double tol_;
  std::size_t n_;
  std::vector<std::size_t> col_to_row_;
  std::vector<char> visited_;
  std::size_t fixed_row_ = 0;
  std::size_t reserved_col_ = 0;
  std::size_t target_col_ = 0;
};

}  // namespace

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw InvalidArgument("CostMatrix: data size does not match shape");
  }
}

double Assignment::total_cost(const CostMatrix& cost) const {
  double total = 0.0;
  for (std::size_t r = 0; r < row_to_col.size(); ++r) {
    if (row_to_col[r]) total += cost(r, *row_to_col[r]);
  }
  return total;
}

Assignment hungarian(const CostMatrix& cost) {
  Assignment out;
  out.row_to_col.assign(cost.rows(), std::nullopt);
  if (cost.empty()) return out;

  const std::size_t n = std::max(cost.rows(), cost.cols());
  CostMatrix square(n, n, kPaddingCost);
  double scale = 1.0;
  for (std::size_t r = 0; r < cost.rows(); ++r) {
    for (std::size_t c = 0; c < cost.cols(); ++c) {
      const double x = cost(r, c);
      if (!std::isfinite(x)) throw InvalidArgument("hungarian: non-finite cost");
      square(r, c) = x;
      scale = std::max(scale, std::abs(x));
    }
  }

  SquareSolution sol = solve_square(square);
  LexRefiner(square, sol, 1e-10 * scale * static_cast<double>(n)).run();

  for (std::size_t r = 0; r < cost.rows(); ++r) {
    const std::size_t c = sol.row_to_col[r];
    if (c < cost.cols()) out.row_to_col[r] = c;
  }
  return out;
}

CostMatrix build_cost_matrix(std::span<const boxes::Box2D> gt,
                             std::span<const boxes::Box2D> pred_boxes) {
  CostMatrix cost(gt.size(), pred_boxes.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    for (std::size_t j = 0; j < pred_boxes.size(); ++j) {
      cost(i, j) = 1.0 - boxes::iou_2d(gt[i], pred_boxes[j]);
    }
  }
  return cost;
}

std::string to_string(Branch b) { return b == Branch::primary ? "primary" : "noisy"; }

PseudoLabelResult make_pseudo_labels(std::span<const AnnotatedBox> gt,
                                     std::span<const AgnosticPrediction> preds,
                                     double max_cost) {
  if (!(max_cost >= 0.0) || !std::isfinite(max_cost)) {
    throw InvalidArgument("make_pseudo_labels: max_cost must be a nonnegative real");
  }
  PseudoLabelResult out;
  if (gt.empty()) return out;
  if (preds.empty()) {
    for (std::size_t i = 0; i < gt.size(); ++i) out.unmatched.push_back({i, "no-prediction"});
    return out;
  }

  std::vector<boxes::Box2D> gt_boxes;
  std::vector<boxes::Box2D> pred_boxes;
  gt_boxes.reserve(gt.size());
  pred_boxes.reserve(preds.size());
  for (const auto& g : gt) gt_boxes.push_back(g.box2d);
  for (const auto& p : preds) pred_boxes.push_back(p.box2d);

  const CostMatrix cost = build_cost_matrix(gt_boxes, pred_boxes);
  const Assignment assignment = hungarian(cost);
  const double min_iou = 1.0 - max_cost;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto& col = assignment.row_to_col[i];
    if (!col) {
      out.unmatched.push_back({i, "no-prediction"});
      continue;
    }
    const AgnosticPrediction& pred = preds[*col];
    const double iou = boxes::iou_2d(gt[i].box2d, pred.box2d);
    if (!(iou >= min_iou)) {
      out.unmatched.push_back({i, "below-gate"});
      continue;
    }
    out.labels.push_back(PseudoLabel{gt[i].class_id, gt[i].box2d, pred.box3d, iou, pred.score,
                                     Branch::noisy, i, *col});
  }
  return out;
}

std::vector<AgnosticPrediction> simulate_agnostic_predictions(std::span<const boxes::Box3D> gt,
                                                              const geom::CameraModel& camera,
                                                              const NoiseSpec& noise,
                                                              std::uint64_t seed) {
  if (noise.center_sigma < 0.0 || noise.size_sigma < 0.0 || noise.yaw_sigma < 0.0 ||
      noise.drop_prob < 0.0 || noise.drop_prob > 1.0 || noise.spurious_rate < 0.0) {
    throw InvalidArgument("simulate_agnostic_predictions: invalid noise spec");
  }
  Rng rng(seed);
  std::vector<AgnosticPrediction> out;

  auto emit = [&](const boxes::Box3D& b, double score, std::optional<std::size_t> origin) {
    if (auto footprint = boxes::project_box3d_to_2d(b, camera)) {
      out.push_back(AgnosticPrediction{b, *footprint, score, origin});
    }
  };

  for (std::size_t i = 0; i < gt.size(); ++i) {
    // Every draw is taken unconditionally so the stream does not depend on
    // which sigmas are zero.
    const bool dropped = rng.bernoulli(noise.drop_prob);
    const double dx = rng.normal(), dy = rng.normal(), dz = rng.normal();
    const double sl = rng.normal(), sw = rng.normal(), sh = rng.normal();
    const double dyaw = rng.normal();
    const double score = rng.uniform(0.5, 1.0);
    if (dropped) continue;

    boxes::Box3D b = gt[i];
    if (noise.center_sigma > 0.0) {
      b.cx += noise.center_sigma * dx;
      b.cy += noise.center_sigma * dy;
      b.cz += noise.center_sigma * dz;
    }
    if (noise.size_sigma > 0.0) {
      b.l *= std::exp(noise.size_sigma * sl);
      b.w *= std::exp(noise.size_sigma * sw);
      b.h *= std::exp(noise.size_sigma * sh);
    }
    if (noise.yaw_sigma > 0.0) b.yaw = boxes::normalize_yaw(b.yaw + noise.yaw_sigma * dyaw);
    emit(b, score, i);
  }

  if (gt.empty() || noise.spurious_rate <= 0.0) return out;

  geom::Vec3 lo = geom::Vec3::Constant(std::numeric_limits<double>::infinity());
  geom::Vec3 hi = -lo;
  double size_lo = std::numeric_limits<double>::infinity();
  double size_hi = 0.0;
  for (const auto& b : gt) {
    lo = lo.cwiseMin(geom::Vec3(b.cx, b.cy, b.cz));
    hi = hi.cwiseMax(geom::Vec3(b.cx, b.cy, b.cz));
    size_lo = std::min({size_lo, b.l, b.w, b.h});
    size_hi = std::max({size_hi, b.l, b.w, b.h});
  }
  const double whole = std::floor(noise.spurious_rate);
  const double frac = noise.spurious_rate - whole;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int count = static_cast<int>(whole) + (rng.bernoulli(frac) ? 1 : 0);
    for (int k = 0; k < count; ++k) {
      const double cx = rng.uniform(lo.x() - noise.spurious_margin, hi.x() + noise.spurious_margin);
      const double cy = rng.uniform(lo.y() - noise.spurious_margin, hi.y() + noise.spurious_margin);
      const double cz = rng.uniform(lo.z(), hi.z());
      const double l = rng.uniform(size_lo, size_hi);
      const double w = rng.uniform(size_lo, size_hi);
      const double h = rng.uniform(size_lo, size_hi);
      const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const double score = rng.uniform(0.05, 0.5);
      emit(boxes::Box3D::make(cx, cy, cz, l, w, h, yaw), score, std::nullopt);
    }
  }
  return out;
}

}  // namespace ovprop::pseudo
