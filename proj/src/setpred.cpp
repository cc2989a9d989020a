#include "qtrack/setpred.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qtrack {

namespace {

// Shortest augmenting path with potentials, rows <= cols assumed.
std::vector<int> solve_assignment(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
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
      for (int j = 0; j <= m; ++j) {
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
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_of_col(m, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] > 0) row_of_col[j - 1] = p[j] - 1;
  }
  return row_of_col;
}

}  // namespace

MatchResult hungarian(const Eigen::MatrixXd& cost) {
  if (!cost.allFinite()) throw std::domain_error("hungarian: cost matrix must be finite");
  MatchResult res;
  if (cost.rows() == 0 || cost.cols() == 0) return res;

  const bool transposed = cost.rows() > cost.cols();
  Eigen::MatrixXd a;
  if (transposed) {
    a = cost.transpose();
  } else {
    a = cost;
  }
  const auto row_of_col = solve_assignment(a);
  for (int j = 0; j < static_cast<int>(row_of_col.size()); ++j) {
    const int i = row_of_col[j];
    if (i < 0) continue;
    const int r = transposed ? j : i;
    const int c = transposed ? i : j;
    res.pairs.emplace_back(r, c);
    res.total_cost += cost(r, c);
  }
  std::sort(res.pairs.begin(), res.pairs.end());
  return res;
}

double focal_loss(double confidence, bool is_positive, double alpha, double gamma) {
  const double p = std::clamp(confidence, 1e-8, 1.0 - 1e-8);
  if (is_positive) return -alpha * std::pow(1.0 - p, gamma) * std::log(p);
  return -(1.0 - alpha) * std::pow(p, gamma) * std::log(1.0 - p);
}

double matching_cost(double confidence, const BBox& pred, const BBox& gt, const MatchWeights& w) {
  const double cls = focal_loss(confidence, true);
  const double l1 = std::abs(pred.cx - gt.cx) + std::abs(pred.cy - gt.cy) +
                    std::abs(pred.w - gt.w) + std::abs(pred.h - gt.h);
  return w.w_cls * cls + w.w_l1 * l1 + w.w_iou * (1.0 - giou(pred, gt));
}

std::vector<QueryTarget> match_selection_targets(const std::vector<double>& confidences,
                                                 const std::vector<BBox>& boxes,
                                                 const std::vector<BBox>& gt_boxes,
                                                 const MatchWeights& weights) {
  std::vector<QueryTarget> targets(confidences.size());
  if (gt_boxes.empty() || confidences.empty()) return targets;
  Eigen::MatrixXd cost(static_cast<int>(confidences.size()), static_cast<int>(gt_boxes.size()));
  for (int i = 0; i < cost.rows(); ++i) {
    for (int j = 0; j < cost.cols(); ++j) {
      cost(i, j) = matching_cost(confidences[i], boxes[i], gt_boxes[j], weights);
    }
  }
  for (auto [row, col] : hungarian(cost).pairs) targets[row] = QueryTarget{true, col};
  return targets;
}

Assignment assign_targets(const std::vector<double>& confidences, const std::vector<BBox>& boxes,
                          const QueryLayout& layout, const DenoiseSet& dn,
                          const std::vector<int>& track_gt, const std::vector<BBox>& gt_boxes,
                          const MatchWeights& weights) {
  const int n = layout.total();
  if (static_cast<int>(confidences.size()) != n || static_cast<int>(boxes.size()) != n) {
    throw std::domain_error("assign_targets: outputs do not match layout");
  }
  if (static_cast<int>(track_gt.size()) != layout.num_track) {
    throw std::domain_error("assign_targets: correspondence table does not match track count");
  }

  Assignment out;
  out.targets.resize(n);

  // Denoising queries carry their own supervision.
  int qi = 0;
  for (const auto& group : dn.groups) {
    for (const auto& spec : group.specs) {
      if (spec.gt_index < 0 || spec.gt_index >= static_cast<int>(gt_boxes.size())) {
        throw std::domain_error("assign_targets: denoise gt_index out of range");
      }
      if (spec.polarity == NoisePolarity::Positive) {
        out.targets[qi] = QueryTarget{true, spec.gt_index};
      }
      ++qi;
    }
  }
  if (qi != layout.num_dn()) {
    throw std::domain_error("assign_targets: denoise set does not match layout");
  }

  // Track queries keep their own trajectory when it is present.
  std::vector<char> claimed(gt_boxes.size(), 0);
  for (int t = 0; t < layout.num_track; ++t) {
    const int g = track_gt[t];
    if (g >= 0) {
      if (g >= static_cast<int>(gt_boxes.size())) {
        throw std::domain_error("assign_targets: track correspondence out of range");
      }
      if (claimed[g]) throw std::domain_error("assign_targets: two tracks claim one ground truth");
      claimed[g] = 1;
      out.targets[layout.track_begin() + t] = QueryTarget{true, g};
    }
  }

  // Detection queries match the unclaimed remainder.
  std::vector<int> free_gt;
  for (int g = 0; g < static_cast<int>(gt_boxes.size()); ++g) {
    if (!claimed[g]) free_gt.push_back(g);
  }
  if (!free_gt.empty() && layout.num_det > 0) {
    Eigen::MatrixXd cost(layout.num_det, static_cast<int>(free_gt.size()));
    for (int i = 0; i < layout.num_det; ++i) {
      const int q = layout.det_begin() + i;
      for (int j = 0; j < static_cast<int>(free_gt.size()); ++j) {
        cost(i, j) = matching_cost(confidences[q], boxes[q], gt_boxes[free_gt[j]], weights);
      }
    }
    for (auto [i, j] : hungarian(cost).pairs) {
      out.targets[layout.det_begin() + i] = QueryTarget{true, free_gt[j]};
      out.det_pairs.emplace_back(i, free_gt[j]);
    }
  }
  return out;
}

}  // namespace qtrack
