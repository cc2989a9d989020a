#pragma once

#include <vector>

#include "qtrack/net.hpp"
#include "qtrack/query_build.hpp"
#include "qtrack/setpred.hpp"

namespace qtrack {

enum class TrackState { Active, Inactive };

template <typename S>
struct Track {
  int id = 0;
  Eigen::Matrix<S, 1, Eigen::Dynamic> content;
  BBox box;
  TrackState state = TrackState::Active;
  int inactive_age = 0;
  double confidence = 0.0;
};

struct TrackerConfig {
  double lambda_d = 0.4;        // new-track threshold
  double lambda_t = 0.3;        // continuation threshold
  int patience = 10;            // frames an inactive track is retained
  double suppression_iou = 0.5; // detections overlapping a retained track above this do not spawn
  int n_det = 20;

  void validate() const {
    if (!(lambda_d > 0.0 && lambda_d < 1.0 && lambda_t > 0.0 && lambda_t < 1.0)) {
      throw std::domain_error("TrackerConfig: thresholds must lie in (0,1)");
    }
    if (patience < 0) throw std::domain_error("TrackerConfig: patience < 0");
    if (n_det < 1) throw std::domain_error("TrackerConfig: n_det < 1");
  }
};

template <typename S>
struct TrackerState {
  std::vector<Track<S>> tracks;  // retained: active plus inactive within patience
  int next_id = 1;
};

struct FrameResultEntry {
  int track_id = 0;
  BBox box;
  double confidence = 0.0;
};

struct FrameResult {
  int frame = 0;
  std::vector<FrameResultEntry> entries;  // active tracks only
};

struct StepTrace {
  QueryLayout layout;
};

// One online step: track queries for every retained trajectory plus
// detection queries from query selection, no denoising queries. Track
// queries above lambda_t stay active; below, the track freezes and ages
// out after `patience` frames. Detections above lambda_d spawn new
// tracks unless they overlap a retained track.
template <typename S>
FrameResult tracker_step(TrackerState<S>& state, const FeatureGrid& current,
                         const FeatureGrid& previous, ModelParams<S>& model,
                         const TrackerConfig& cfg, int frame_index,
                         MaskMode mask_mode = MaskMode::Cascaded, StepTrace* trace = nullptr) {
  cfg.validate();
  const ModelConfig& mc = model.config;
  if (cfg.n_det > current.tokens()) {
    throw std::logic_error("tracker_step: n_det exceeds encoder token count");
  }

  Tape<S> tape;
  auto vars = lift_params(tape, model);
  const auto input = EncoderInput::from_frames(previous, current);
  auto enc = encoder_forward(tape, vars, mc, input);
  auto sel = query_selection(tape, vars, mc, enc, input, cfg.n_det);

  std::vector<TrackQueryInput<S>> track_inputs;
  for (const auto& tr : state.tracks) {
    track_inputs.push_back(TrackQueryInput<S>{tr.content, tr.box});
  }
  DenoiseSet no_dn;  // noise generation is disabled in inference
  auto queries = build_query_set(tape, vars, mc, no_dn, track_inputs, &sel);
  if (!queries.layout.dn_group_sizes.empty()) {
    throw std::logic_error("tracker_step: inference layout must contain no denoising groups");
  }
  if (trace != nullptr) trace->layout = queries.layout;
  auto out = decoder_forward(tape, vars, mc, queries, enc, mask_mode);
  const auto& fin = out.final();

  // Track query updates.
  const int t_begin = queries.layout.track_begin();
  std::vector<Track<S>> retained;
  FrameResult result;
  result.frame = frame_index;
  for (int t = 0; t < queries.layout.num_track; ++t) {
    Track<S> tr = state.tracks[t];
    const double conf = static_cast<double>(fin.conf.val()(t_begin + t, 0));
    if (conf >= cfg.lambda_t) {
      tr.state = TrackState::Active;
      tr.inactive_age = 0;
      tr.confidence = conf;
      tr.box = BBox{static_cast<double>(fin.boxes.val()(t_begin + t, 0)),
                    static_cast<double>(fin.boxes.val()(t_begin + t, 1)),
                    static_cast<double>(fin.boxes.val()(t_begin + t, 2)),
                    static_cast<double>(fin.boxes.val()(t_begin + t, 3))};
      tr.content = fin.content.val().row(t_begin + t);
      result.entries.push_back(FrameResultEntry{tr.id, tr.box, tr.confidence});
      retained.push_back(std::move(tr));
    } else {
      // Below threshold: freeze position and embedding, age out later.
      tr.state = TrackState::Inactive;
      tr.inactive_age += 1;
      tr.confidence = conf;
      if (tr.inactive_age <= cfg.patience) retained.push_back(std::move(tr));
    }
  }

  // New tracks from confident detections, highest confidence first.
  const int d_begin = queries.layout.det_begin();
  std::vector<int> candidates;
  for (int d = 0; d < queries.layout.num_det; ++d) {
    if (static_cast<double>(fin.conf.val()(d_begin + d, 0)) >= cfg.lambda_d) candidates.push_back(d);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    return fin.conf.val()(d_begin + a, 0) > fin.conf.val()(d_begin + b, 0);
  });
  for (int d : candidates) {
    BBox box{static_cast<double>(fin.boxes.val()(d_begin + d, 0)),
             static_cast<double>(fin.boxes.val()(d_begin + d, 1)),
             static_cast<double>(fin.boxes.val()(d_begin + d, 2)),
             static_cast<double>(fin.boxes.val()(d_begin + d, 3))};
    bool suppressed = false;
    for (const auto& tr : retained) {
      if (iou(box, tr.box) >= cfg.suppression_iou) {
        suppressed = true;
        break;
      }
    }
    if (suppressed) continue;
    Track<S> tr;
    tr.id = state.next_id++;
    tr.content = fin.content.val().row(d_begin + d);
    tr.box = box;
    tr.state = TrackState::Active;
    tr.confidence = static_cast<double>(fin.conf.val()(d_begin + d, 0));
    result.entries.push_back(FrameResultEntry{tr.id, tr.box, tr.confidence});
    retained.push_back(std::move(tr));
  }

  state.tracks = std::move(retained);
  return result;
}

// Sequential fold over the rendered frames; frame 0 uses itself as its
// own previous frame.
template <typename S>
std::vector<FrameResult> run_sequence(const std::vector<FeatureGrid>& frames, ModelParams<S>& model,
                                      const TrackerConfig& cfg,
                                      MaskMode mask_mode = MaskMode::Cascaded) {
  if (frames.empty()) throw std::domain_error("run_sequence: need at least one frame");
  TrackerState<S> state;
  std::vector<FrameResult> results;
  results.reserve(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const FeatureGrid& prev = f == 0 ? frames[0] : frames[f - 1];
    results.push_back(
        tracker_step(state, frames[f], prev, model, cfg, static_cast<int>(f), mask_mode));
  }
  return results;
}

}  // namespace qtrack
