#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "qtrack/denoise.hpp"
#include "qtrack/geometry.hpp"
#include "qtrack/net.hpp"

namespace qtrack {

// ---- matching --------------------------------------------------------

struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (row, col), lexicographically sorted
  double total_cost = 0.0;
};

// Minimal-cost assignment of min(rows, cols) pairs on a dense finite
// cost matrix (shortest augmenting path with potentials, O(n^3)).
MatchResult hungarian(const Eigen::MatrixXd& cost);

double focal_loss(double confidence, bool is_positive, double alpha = 0.25, double gamma = 2.0);

struct MatchWeights {
  double w_cls = 1.0;
  double w_l1 = 5.0;
  double w_iou = 2.0;
};

// w_cls * focal-style positive cost + w_l1 * L1(box) + w_iou * (1 - giou).
double matching_cost(double confidence, const BBox& pred, const BBox& gt,
                     const MatchWeights& w = {});

// ---- target assignment ------------------------------------------------

struct QueryTarget {
  bool is_object = false;
  int gt_index = -1;  // valid when is_object
};

struct Assignment {
  std::vector<QueryTarget> targets;               // one per query, canonical order
  std::vector<std::pair<int, int>> det_pairs;     // (detection slot, gt index)
};

// Track queries keep their own trajectory (or no-object when it is gone);
// detection queries are Hungarian-matched against the ground truth not
// claimed by track queries; denoising positives supervise their own
// object and negatives the no-object class.
Assignment assign_targets(const std::vector<double>& confidences, const std::vector<BBox>& boxes,
                          const QueryLayout& layout, const DenoiseSet& dn,
                          const std::vector<int>& track_gt, const std::vector<BBox>& gt_boxes,
                          const MatchWeights& weights = {});

// ---- losses -----------------------------------------------------------

struct LossWeights {
  double lambda_focal = 1.0;
  double lambda_l1 = 5.0;
  double lambda_iou = 2.0;
  double lambda_track = 1.0;
  double lambda_aux = 1.0;
  double lambda_inter = 1.0;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
};

struct LossBreakdown {
  double cls = 0.0;    // final layer focal, averaged over all queries
  double bbox = 0.0;   // final layer L1, averaged over matched pairs
  double iou = 0.0;    // final layer (1 - giou), averaged over matched pairs
  double track = 0.0;  // lambda_focal*cls + lambda_l1*bbox + lambda_iou*iou
  double aux = 0.0;
  double inter = 0.0;
  double total = 0.0;
};

template <typename S>
Var<S> pairwise_giou(Var<S> pred, Var<S> gt);

template <typename S>
struct LossResult {
  Var<S> total;
  LossBreakdown breakdown;
};

// Everything assign_targets needs, so aux layers can optionally re-match.
struct AssignContext {
  const QueryLayout* layout = nullptr;
  const DenoiseSet* dn = nullptr;
  const std::vector<int>* track_gt = nullptr;
  MatchWeights match_weights;
};

// Hungarian match of the query-selection outputs against the ground
// truth, expressed as per-token targets.
std::vector<QueryTarget> match_selection_targets(const std::vector<double>& confidences,
                                                 const std::vector<BBox>& boxes,
                                                 const std::vector<BBox>& gt_boxes,
                                                 const MatchWeights& weights = {});

template <typename S>
LossResult<S> compute_loss(Tape<S>& tape, const DecoderForwardOut<S>& outputs,
                           const Assignment& assignment, const std::vector<BBox>& gt_boxes,
                           const QuerySelection<S>* inter_sel, const LossWeights& w,
                           bool rematch_aux_layers = false, const AssignContext* ctx = nullptr,
                           const std::vector<QueryTarget>* frozen_inter_targets = nullptr);

// ---- optimizer ---------------------------------------------------------

struct AdamWConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

template <typename S>
struct AdamWState {
  std::vector<MatX<S>> m;
  std::vector<MatX<S>> v;
  long step = 0;
};

// Decoupled weight decay followed by the bias-corrected moment update.
template <typename S>
void adamw_step(std::vector<MatX<S>*>& params, const std::vector<MatX<S>>& grads,
                AdamWState<S>& state, const AdamWConfig& cfg) {
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.push_back(MatX<S>::Zero(p->rows(), p->cols()));
      state.v.push_back(MatX<S>::Zero(p->rows(), p->cols()));
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = grads[i];
    if (!g.allFinite()) {
      throw std::runtime_error("adamw_step: non-finite gradient for parameter " + std::to_string(i));
    }
    auto& p = *params[i];
    p *= static_cast<S>(1.0 - cfg.lr * cfg.weight_decay);
    state.m[i] = static_cast<S>(cfg.beta1) * state.m[i] + static_cast<S>(1.0 - cfg.beta1) * g;
    state.v[i] = static_cast<S>(cfg.beta2) * state.v[i] +
                 static_cast<S>(1.0 - cfg.beta2) * g.cwiseProduct(g).eval();
    const auto mhat = (state.m[i] / static_cast<S>(bc1)).eval();
    const auto vhat = (state.v[i] / static_cast<S>(bc2)).eval();
    p.array() -= static_cast<S>(cfg.lr) * mhat.array() /
                 (vhat.array().sqrt() + static_cast<S>(cfg.eps));
  }
}

// ---- template implementations ------------------------------------------

template <typename S>
Var<S> pairwise_giou(Var<S> pred, Var<S> gt) {
  auto half = [](Var<S> v) { return scale(v, S(0.5)); };
  auto cxp = slice_cols(pred, 0, 1), cyp = slice_cols(pred, 1, 1);
  auto wp = slice_cols(pred, 2, 1), hp = slice_cols(pred, 3, 1);
  auto cxg = slice_cols(gt, 0, 1), cyg = slice_cols(gt, 1, 1);
  auto wg = slice_cols(gt, 2, 1), hg = slice_cols(gt, 3, 1);

  auto lp = cxp - half(wp), rp = cxp + half(wp);
  auto tp = cyp - half(hp), bp = cyp + half(hp);
  auto lg = cxg - half(wg), rg = cxg + half(wg);
  auto tg = cyg - half(hg), bg = cyg + half(hg);

  auto iw = relu(emin(rp, rg) - emax(lp, lg));
  auto ih = relu(emin(bp, bg) - emax(tp, tg));
  auto inter = iw * ih;
  auto uni = wp * hp + wg * hg - inter;
  auto iou_v = inter / uni;

  auto ew = emax(rp, rg) - emin(lp, lg);
  auto eh = emax(bp, bg) - emin(tp, tg);
  auto enc = ew * eh;
  return iou_v - (enc - uni) / enc;
}

namespace detail {

// Focal sum over a confidence column given per-query polarity.
template <typename S>
Var<S> focal_sum(Var<S> conf, const std::vector<bool>& is_positive, const LossWeights& w) {
  auto& tape = *conf.tape;
  std::vector<int> pos, neg;
  for (int i = 0; i < static_cast<int>(is_positive.size()); ++i) {
    (is_positive[i] ? pos : neg).push_back(i);
  }
  auto zero = leaf(tape, MatX<S>::Zero(1, 1), "zero");
  auto total = zero;
  const S eps = S(1e-8);
  if (!pos.empty()) {
    auto p = clamp(gather_rows(conf, pos), eps, S(1) - eps);
    auto one_minus = add_const(scale(p, S(-1)), S(1));
    auto term = pow_const(one_minus, static_cast<S>(w.focal_gamma)) * log_op(p);
    total = total + scale(sum_all(term), static_cast<S>(-w.focal_alpha));
  }
  if (!neg.empty()) {
    auto p = clamp(gather_rows(conf, neg), eps, S(1) - eps);
    auto one_minus = add_const(scale(p, S(-1)), S(1));
    auto term = pow_const(p, static_cast<S>(w.focal_gamma)) * log_op(one_minus);
    total = total + scale(sum_all(term), static_cast<S>(-(1.0 - w.focal_alpha)));
  }
  return total;
}

// Raw Eq.3 component triple for one prediction layer.
template <typename S>
struct LayerLoss {
  Var<S> cls, bbox, iou;
  double cls_v = 0.0, bbox_v = 0.0, iou_v = 0.0;
};

template <typename S>
LayerLoss<S> layer_loss(Tape<S>& tape, Var<S> conf, Var<S> boxes,
                        const std::vector<QueryTarget>& targets,
                        const std::vector<BBox>& gt_boxes, const LossWeights& w) {
  const int n = static_cast<int>(targets.size());
  std::vector<bool> is_pos(n, false);
  std::vector<int> matched_rows;
  std::vector<int> matched_gt;
  for (int i = 0; i < n; ++i) {
    if (targets[i].is_object) {
      is_pos[i] = true;
      matched_rows.push_back(i);
      matched_gt.push_back(targets[i].gt_index);
    }
  }
  LayerLoss<S> out;
  auto zero = leaf(tape, MatX<S>::Zero(1, 1), "zero");
  out.cls = n > 0 ? scale(focal_sum(conf, is_pos, w), S(1.0 / n)) : zero;
  if (!matched_rows.empty()) {
    const int m = static_cast<int>(matched_rows.size());
    MatX<S> gt(m, 4);
    for (int k = 0; k < m; ++k) {
      const BBox& b = gt_boxes[matched_gt[k]];
      gt(k, 0) = static_cast<S>(b.cx);
      gt(k, 1) = static_cast<S>(b.cy);
      gt(k, 2) = static_cast<S>(b.w);
      gt(k, 3) = static_cast<S>(b.h);
    }
    auto gt_var = leaf(tape, std::move(gt), "gt_boxes");
    auto pred = gather_rows(boxes, matched_rows);
    out.bbox = scale(sum_all(abs_op(pred - gt_var)), S(1.0 / m));
    auto g = pairwise_giou(pred, gt_var);
    out.iou = scale(sum_all(add_const(scale(g, S(-1)), S(1))), S(1.0 / m));
  } else {
    out.bbox = zero;
    out.iou = zero;
  }
  out.cls_v = static_cast<double>(out.cls.val()(0, 0));
  out.bbox_v = static_cast<double>(out.bbox.val()(0, 0));
  out.iou_v = static_cast<double>(out.iou.val()(0, 0));
  return out;
}

template <typename S>
Var<S> weigh(const LayerLoss<S>& l, const LossWeights& w) {
  return scale(l.cls, static_cast<S>(w.lambda_focal)) + scale(l.bbox, static_cast<S>(w.lambda_l1)) +
         scale(l.iou, static_cast<S>(w.lambda_iou));
}

}  // namespace detail

template <typename S>
LossResult<S> compute_loss(Tape<S>& tape, const DecoderForwardOut<S>& outputs,
                           const Assignment& assignment, const std::vector<BBox>& gt_boxes,
                           const QuerySelection<S>* inter_sel, const LossWeights& w,
                           bool rematch_aux_layers, const AssignContext* ctx,
                           const std::vector<QueryTarget>* frozen_inter_targets) {
  LossResult<S> res;
  auto zero = leaf(tape, MatX<S>::Zero(1, 1), "zero");

  const int n_layers = static_cast<int>(outputs.layers.size());
  Var<S> track_term = zero;
  Var<S> aux_term = zero;
  if (n_layers > 0) {
    const auto& fin = outputs.layers.back();
    auto fl = detail::layer_loss(tape, fin.conf, fin.boxes, assignment.targets, gt_boxes, w);
    track_term = detail::weigh(fl, w);
    res.breakdown.cls = fl.cls_v;
    res.breakdown.bbox = fl.bbox_v;
    res.breakdown.iou = fl.iou_v;
    res.breakdown.track = w.lambda_focal * fl.cls_v + w.lambda_l1 * fl.bbox_v + w.lambda_iou * fl.iou_v;
    for (int l = 0; l + 1 < n_layers; ++l) {
      const auto& lay = outputs.layers[l];
      const std::vector<QueryTarget>* targets = &assignment.targets;
      Assignment layer_assign;
      if (rematch_aux_layers && ctx != nullptr) {
        std::vector<double> conf(lay.conf.val().rows());
        std::vector<BBox> boxes(conf.size());
        for (std::size_t i = 0; i < conf.size(); ++i) {
          conf[i] = static_cast<double>(lay.conf.val()(static_cast<Eigen::Index>(i), 0));
          boxes[i] = BBox{static_cast<double>(lay.boxes.val()(static_cast<Eigen::Index>(i), 0)),
                          static_cast<double>(lay.boxes.val()(static_cast<Eigen::Index>(i), 1)),
                          static_cast<double>(lay.boxes.val()(static_cast<Eigen::Index>(i), 2)),
                          static_cast<double>(lay.boxes.val()(static_cast<Eigen::Index>(i), 3))};
        }
        layer_assign = assign_targets(conf, boxes, *ctx->layout, *ctx->dn, *ctx->track_gt, gt_boxes,
                                      ctx->match_weights);
        targets = &layer_assign.targets;
      }
      auto ll = detail::layer_loss(tape, lay.conf, lay.boxes, *targets, gt_boxes, w);
      aux_term = aux_term + detail::weigh(ll, w);
    }
  }

  Var<S> inter_term = zero;
  if (inter_sel != nullptr && inter_sel->token_indices.size() > 0) {
    // Same component set over the selected tokens, matched against all
    // ground truth (no objects: everything supervises background).
    std::vector<QueryTarget> targets;
    if (frozen_inter_targets != nullptr) {
      targets = *frozen_inter_targets;
    } else {
      const int n_sel = static_cast<int>(inter_sel->token_indices.size());
      std::vector<double> conf(n_sel);
      std::vector<BBox> boxes(n_sel);
      for (int i = 0; i < n_sel; ++i) {
        conf[i] = static_cast<double>(inter_sel->selected_conf.val()(i, 0));
        boxes[i] = BBox{static_cast<double>(inter_sel->selected_boxes.val()(i, 0)),
                        static_cast<double>(inter_sel->selected_boxes.val()(i, 1)),
                        static_cast<double>(inter_sel->selected_boxes.val()(i, 2)),
                        static_cast<double>(inter_sel->selected_boxes.val()(i, 3))};
      }
      targets = match_selection_targets(conf, boxes, gt_boxes,
                                        MatchWeights{w.lambda_focal, w.lambda_l1, w.lambda_iou});
    }
    auto il = detail::layer_loss(tape, inter_sel->selected_conf, inter_sel->selected_boxes, targets,
                                 gt_boxes, w);
    inter_term = detail::weigh(il, w);
  }

  res.breakdown.aux = w.lambda_aux * static_cast<double>(aux_term.val()(0, 0));
  res.breakdown.inter = w.lambda_inter * static_cast<double>(inter_term.val()(0, 0));
  res.total = scale(track_term, static_cast<S>(w.lambda_track)) +
              scale(aux_term, static_cast<S>(w.lambda_aux)) +
              scale(inter_term, static_cast<S>(w.lambda_inter));
  res.breakdown.total = static_cast<double>(res.total.val()(0, 0));
  return res;
}

}  // namespace qtrack
