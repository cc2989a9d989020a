#pragma once

#include <optional>
#include <vector>

#include "qtrack/denoise.hpp"
#include "qtrack/net.hpp"

namespace qtrack {

// Decoder-side view of an existing trajectory: the content embedding is
// the previous frame's decoder output (numeric, detached) and the box is
// the previous predicted position.
template <typename S>
struct TrackQueryInput {
  Eigen::Matrix<S, 1, Eigen::Dynamic> content;
  BBox box;
};

// Assembles the canonical query set [denoise groups, track, detection].
// Denoising content rows come from the label embedding table unless the
// spec substitutes an active trajectory's embedding.
template <typename S>
QuerySetInputs<S> build_query_set(Tape<S>& tape, const ModelVars<S>& vars, const ModelConfig& cfg,
                                  const DenoiseSet& dn,
                                  const std::vector<TrackQueryInput<S>>& tracks,
                                  const QuerySelection<S>* detection) {
  QuerySetInputs<S> qs;
  qs.layout.dn_group_sizes = dn.group_sizes();
  qs.layout.num_track = static_cast<int>(tracks.size());
  qs.layout.num_det = detection != nullptr ? static_cast<int>(detection->token_indices.size()) : 0;
  const int n = qs.layout.total();
  if (n == 0) return qs;

  std::vector<BBox> refs;
  refs.reserve(n);

  // Content, batched into runs of rows with the same source.
  std::vector<Var<S>> content_parts;
  std::vector<int> label_run;
  MatX<S> const_run;
  int const_rows = 0;
  auto flush_labels = [&]() {
    if (label_run.empty()) return;
    content_parts.push_back(gather_rows(vars.t.label_embed, label_run));
    label_run.clear();
  };
  auto flush_consts = [&]() {
    if (const_rows == 0) return;
    content_parts.push_back(leaf(tape, MatX<S>(const_run.topRows(const_rows)), "track_content"));
    const_rows = 0;
  };
  auto push_const_row = [&](const Eigen::Matrix<S, 1, Eigen::Dynamic>& row) {
    if (const_run.rows() <= const_rows) const_run.conservativeResize(const_rows + 16, cfg.hidden_dim);
    const_run.row(const_rows++) = row;
  };

  for (const auto& group : dn.groups) {
    for (const auto& spec : group.specs) {
      refs.push_back(spec.noised_box);
      if (spec.content_source == ContentSource::TrajectoryEmbedding) {
        if (spec.track_index < 0 || spec.track_index >= static_cast<int>(tracks.size())) {
          throw std::domain_error("build_query_set: denoise track_index out of range");
        }
        flush_labels();
        push_const_row(tracks[spec.track_index].content);
      } else {
        flush_consts();
        label_run.push_back(spec.noised_label);
      }
    }
  }
  flush_labels();
  for (const auto& tr : tracks) {
    refs.push_back(tr.box);
    push_const_row(tr.content);
  }
  flush_consts();
  if (detection != nullptr && qs.layout.num_det > 0) {
    content_parts.push_back(vars.t.det_content);
    for (const auto& b : detection->ref_boxes) refs.push_back(b);
  }
  qs.content = content_parts.size() == 1 ? content_parts.front() : concat_rows(content_parts);

  std::vector<double> xs, ys, ts;
  MatX<S> ref_mat(n, 4);
  for (int i = 0; i < n; ++i) {
    xs.push_back(refs[i].cx);
    ys.push_back(refs[i].cy);
    ts.push_back(1.0);  // queries live in the current frame
    ref_mat(i, 0) = static_cast<S>(refs[i].cx);
    ref_mat(i, 1) = static_cast<S>(refs[i].cy);
    ref_mat(i, 2) = static_cast<S>(refs[i].w);
    ref_mat(i, 3) = static_cast<S>(refs[i].h);
  }
  qs.pos = leaf(tape, position_embedding_rows<S>(cfg, xs, ys, ts), "query_pos");
  qs.refs = leaf(tape, std::move(ref_mat), "query_refs");
  return qs;
}

}  // namespace qtrack
