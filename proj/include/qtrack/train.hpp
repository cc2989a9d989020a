#pragma once

#include <cstdio>
#include <functional>
#include <ostream>

#include "qtrack/config.hpp"
#include "qtrack/metrics.hpp"
#include "qtrack/mot_io.hpp"
#include "qtrack/query_build.hpp"
#include "qtrack/tracker.hpp"

namespace qtrack {

template <typename S>
struct TrainResult {
  ModelParams<S> model;
  std::vector<LossBreakdown> history;
};

// One training step is teacher-forced over a frame pair: a detection-only
// pass on frame t-1 seeds the track queries (detached), then the full
// query set runs on frame t and takes the optimizer step. Training
// scenarios are generated from the seed unless an explicit dataset is
// supplied.
template <typename S>
TrainResult<S> train_model(const RunConfig& cfg, std::ostream* log = nullptr,
                           const std::vector<Scenario>* dataset = nullptr);

template <typename S>
EvalReport evaluate_model(ModelParams<S>& model, const RunConfig& cfg, int n_sequences,
                          std::uint64_t eval_stream, MaskMode mode);

enum class ModelVariant { Full, NoDenoising, FullMask };

std::string variant_name(ModelVariant v);

struct VariantOutcome {
  ModelVariant variant = ModelVariant::Full;
  double mota = 0.0;
  double idf1 = 0.0;
  int idsw = 0;
  int fp = 0;
  int fn = 0;
};

struct SeedOutcome {
  int seed_index = 0;
  std::uint64_t run_seed = 0;
  std::vector<VariantOutcome> variants;

  const VariantOutcome& get(ModelVariant v) const {
    for (const auto& o : variants) {
      if (o.variant == v) return o;
    }
    throw std::logic_error("SeedOutcome: variant not present");
  }
};

// Paired runs: every variant of one seed shares the training scenarios,
// model init, and held-out evaluation sequences.
std::vector<SeedOutcome> run_ablation(const RunConfig& base, const std::vector<ModelVariant>& variants,
                                      int n_seeds, int n_eval_sequences, int n_threads,
                                      const std::function<void(const std::string&)>& progress);

// ---- implementation -----------------------------------------------------

template <typename S>
TrainResult<S> train_model(const RunConfig& cfg, std::ostream* log,
                           const std::vector<Scenario>* dataset) {
  cfg.validate();
  std::vector<Scenario> scenarios;
  if (dataset != nullptr && !dataset->empty()) {
    scenarios = *dataset;
  } else {
    scenarios.reserve(cfg.train.num_train_scenarios);
    GridSpec grid{cfg.sim.grid_height, cfg.sim.grid_width, cfg.sim.grid_channels};
    for (int i = 0; i < cfg.train.num_train_scenarios; ++i) {
      Scenario sc = generate_scenario(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(i),
                                      cfg.sim.n_agents, cfg.sim.n_frames, cfg.sim.crossing, grid);
      sc.occlusion_iou_threshold = cfg.sim.occlusion_iou_threshold;
      scenarios.push_back(std::move(sc));
    }
  }

  TrainResult<S> out;
  out.model = init_model<S>(cfg.model, cfg.seed);
  auto registry = out.model.registry();
  std::vector<MatX<S>*> param_ptrs;
  for (auto& [name, mat] : registry) param_ptrs.push_back(mat);

  AdamWState<S> opt_state;
  AdamWConfig adamw;
  adamw.lr = cfg.train.learning_rate;
  adamw.weight_decay = cfg.train.weight_decay;

  Rng rng = substream(cfg.seed, 0x747261696eULL);
  const MaskMode mode = cfg.mask();
  LossWeights lw = cfg.loss;
  MatchWeights mw{lw.lambda_focal, lw.lambda_l1, lw.lambda_iou};

  if (log != nullptr) (*log) << "step,total,cls,bbox,iou,aux,inter\n";

  // Detached view of a trajectory carried across clip frames.
  struct Carried {
    Eigen::Matrix<S, 1, Eigen::Dynamic> content;
    BBox box;
    int agent_id;
  };

  auto gt_boxes_of = [](const FrameTruth& ft) {
    std::vector<BBox> boxes;
    for (const auto& e : ft.entries) boxes.push_back(e.box);
    return boxes;
  };
  auto agent_slot = [](const FrameTruth& ft, int agent_id) {
    for (int k = 0; k < static_cast<int>(ft.entries.size()); ++k) {
      if (ft.entries[k].agent_id == agent_id) return k;
    }
    return -1;
  };

  int step = 0;
  while (step < cfg.train.steps) {
    const auto& sc = scenarios[uniform_index(rng, scenarios.size())];
    const auto truth = ground_truth(sc);
    const int clip = std::min(cfg.train.clip_length, sc.n_frames - 1);
    const int t0 = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(sc.n_frames - clip)));

    // Every clip frame is a supervised pass; the first one has no track
    // queries (the inference bootstrap distribution) and seeds the
    // carried trajectories.
    std::vector<Carried> carried;
    for (int k = 0; k <= clip && step < cfg.train.steps; ++k) {
      const int t = t0 + k;
      std::vector<TrackQueryInput<S>> track_inputs;
      std::vector<int> track_gt;
      std::vector<TrackCorrespondence> dn_tracks;
      for (const auto& c : carried) {
        const int slot = agent_slot(truth[t], c.agent_id);
        const int idx = static_cast<int>(track_inputs.size());
        track_inputs.push_back(TrackQueryInput<S>{c.content, c.box});
        track_gt.push_back(slot);
        if (slot >= 0) dn_tracks.push_back(TrackCorrespondence{idx, slot});
      }

      Tape<S> tape;
      auto vars = lift_params(tape, out.model);
      const FeatureGrid cur = render_features(sc, t);
      const FeatureGrid prev = render_features(sc, std::max(t - 1, 0));
      const auto input = EncoderInput::from_frames(prev, cur);
      auto enc = encoder_forward(tape, vars, cfg.model, input);
      auto sel = query_selection(tape, vars, cfg.model, enc, input, cfg.model.num_det_queries);

      const auto gt_now = gt_boxes_of(truth[t]);
      DenoiseSet dn;
      if (cfg.denoise_enabled && !gt_now.empty()) {
        dn = generate_denoise_set(gt_now, dn_tracks, cfg.denoise, rng);
      }
      auto queries = build_query_set(tape, vars, cfg.model, dn, track_inputs, &sel);
      auto dec = decoder_forward(tape, vars, cfg.model, queries, enc, mode);
      const auto& fin = dec.final();

      std::vector<double> conf(queries.layout.total());
      std::vector<BBox> boxes(conf.size());
      for (std::size_t i = 0; i < conf.size(); ++i) {
        conf[i] = static_cast<double>(fin.conf.val()(static_cast<Eigen::Index>(i), 0));
        boxes[i] = BBox{static_cast<double>(fin.boxes.val()(static_cast<Eigen::Index>(i), 0)),
                        static_cast<double>(fin.boxes.val()(static_cast<Eigen::Index>(i), 1)),
                        static_cast<double>(fin.boxes.val()(static_cast<Eigen::Index>(i), 2)),
                        static_cast<double>(fin.boxes.val()(static_cast<Eigen::Index>(i), 3))};
      }
      auto assign = assign_targets(conf, boxes, queries.layout, dn, track_gt, gt_now, mw);
      AssignContext ctx{&queries.layout, &dn, &track_gt, mw};
      auto loss =
          compute_loss(tape, dec, assign, gt_now, &sel, lw, cfg.train.rematch_aux_layers, &ctx);
      tape.backward(loss.total.id);

      std::vector<MatX<S>> grads;
      grads.reserve(vars.registry.size());
      for (auto& [name, var] : vars.registry) grads.push_back(tape.grad(var.id));
      AdamWConfig step_cfg = adamw;
      if (step >= cfg.train.lr_decay_step) step_cfg.lr = adamw.lr * cfg.train.lr_decay_rate;
      adamw_step(param_ptrs, grads, opt_state, step_cfg);

      out.history.push_back(loss.breakdown);
      if (log != nullptr) {
        const auto& b = loss.breakdown;
        char buf[256];
        std::snprintf(buf, sizeof buf, "%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", step, b.total, b.cls,
                      b.bbox, b.iou, b.aux, b.inter);
        (*log) << buf;
      }
      step += 1;

      // Roll the carried set forward: keep tracked agents still present,
      // update their view from their own query row, add new matches.
      std::vector<Carried> next;
      const int t_begin = queries.layout.track_begin();
      for (std::size_t i = 0; i < carried.size(); ++i) {
        if (track_gt[i] < 0) continue;  // agent left the frame
        Carried c = carried[i];
        c.content = fin.content.val().row(t_begin + static_cast<int>(i));
        c.box = boxes[static_cast<std::size_t>(t_begin) + i];
        next.push_back(std::move(c));
      }
      for (auto [slot, gt_idx] : assign.det_pairs) {
        const int q = queries.layout.det_begin() + slot;
        if (iou(boxes[q], gt_now[gt_idx]) < cfg.train.track_source_min_iou) continue;
        if (bernoulli(rng, cfg.train.track_drop_probability)) continue;
        next.push_back(Carried{fin.content.val().row(q), boxes[q],
                               truth[t].entries[gt_idx].agent_id});
      }
      carried = std::move(next);
    }
  }
  return out;
}

template <typename S>
EvalReport evaluate_model(ModelParams<S>& model, const RunConfig& cfg, int n_sequences,
                          std::uint64_t eval_stream, MaskMode mode) {
  GridSpec grid{cfg.sim.grid_height, cfg.sim.grid_width, cfg.sim.grid_channels};
  std::vector<std::string> names;
  std::vector<std::vector<EvalFrame>> gts, preds;
  TrackerConfig tc = cfg.tracker;
  tc.n_det = cfg.model.num_det_queries;
  for (int s = 0; s < n_sequences; ++s) {
    Scenario sc = generate_scenario(eval_stream * 7778777ULL + 13ULL + static_cast<std::uint64_t>(s),
                                    cfg.sim.n_agents, cfg.sim.n_frames, cfg.sim.crossing, grid);
    sc.occlusion_iou_threshold = cfg.sim.occlusion_iou_threshold;
    const auto truth = ground_truth(sc);
    std::vector<FeatureGrid> frames;
    frames.reserve(sc.n_frames);
    for (int f = 0; f < sc.n_frames; ++f) frames.push_back(render_features(sc, f));
    const auto results = run_sequence(frames, model, tc, mode);

    std::vector<EvalFrame> gt_frames(sc.n_frames), pred_frames(sc.n_frames);
    for (int f = 0; f < sc.n_frames; ++f) {
      for (const auto& e : truth[f].entries) gt_frames[f].boxes.emplace_back(e.agent_id, e.box);
      for (const auto& e : results[f].entries) pred_frames[f].boxes.emplace_back(e.track_id, e.box);
    }
    names.push_back("eval-" + std::to_string(s));
    gts.push_back(std::move(gt_frames));
    preds.push_back(std::move(pred_frames));
  }
  return evaluate_sequences(names, gts, preds);
}

}  // namespace qtrack
