#include "qtrack/gradcheck.hpp"

#include <algorithm>

#include "qtrack/query_build.hpp"
#include "qtrack/setpred.hpp"
#include "qtrack/simulator.hpp"

namespace qtrack {

namespace {

struct Scene {
  EncoderInput input;
  std::vector<BBox> gt;
  DenoiseSet dn;
  std::vector<TrackQueryInput<double>> tracks;
  std::vector<int> track_gt;
  std::vector<int> selected;              // frozen query-selection indices
  std::vector<BBox> frozen_refs;          // frozen detection reference boxes
  std::vector<QueryTarget> inter_targets; // frozen query-selection matching
  Assignment assignment;                  // frozen on the base parameters
  LossWeights weights;
};

double forward_loss(ModelParams<double>& params, Scene& scene, bool freeze) {
  Tape<double> tape;
  tape.set_check_finite(false);
  auto vars = lift_params(tape, params);
  auto enc = encoder_forward(tape, vars, params.config, scene.input);
  auto sel = query_selection(tape, vars, params.config, enc, scene.input,
                             static_cast<int>(scene.selected.size()), &scene.selected);
  if (freeze) {
    sel.ref_boxes = scene.frozen_refs;  // detached from the size head
  }
  auto queries = build_query_set(tape, vars, params.config, scene.dn, scene.tracks, &sel);
  auto dec = decoder_forward(tape, vars, params.config, queries, enc);

  Assignment assign;
  if (freeze) {
    assign = scene.assignment;
  } else {
    const auto& fin = dec.final();
    std::vector<double> conf(queries.layout.total());
    std::vector<BBox> boxes(conf.size());
    for (std::size_t i = 0; i < conf.size(); ++i) {
      conf[i] = fin.conf.val()(static_cast<Eigen::Index>(i), 0);
      boxes[i] = BBox{fin.boxes.val()(static_cast<Eigen::Index>(i), 0),
                      fin.boxes.val()(static_cast<Eigen::Index>(i), 1),
                      fin.boxes.val()(static_cast<Eigen::Index>(i), 2),
                      fin.boxes.val()(static_cast<Eigen::Index>(i), 3)};
    }
    assign = assign_targets(conf, boxes, queries.layout, scene.dn, scene.track_gt, scene.gt,
                            MatchWeights{scene.weights.lambda_focal, scene.weights.lambda_l1,
                                         scene.weights.lambda_iou});
    scene.assignment = assign;
    scene.frozen_refs = sel.ref_boxes;
    std::vector<double> sconf(scene.selected.size());
    std::vector<BBox> sboxes(scene.selected.size());
    for (std::size_t i = 0; i < scene.selected.size(); ++i) {
      sconf[i] = sel.selected_conf.val()(static_cast<Eigen::Index>(i), 0);
      sboxes[i] = BBox{sel.selected_boxes.val()(static_cast<Eigen::Index>(i), 0),
                       sel.selected_boxes.val()(static_cast<Eigen::Index>(i), 1),
                       sel.selected_boxes.val()(static_cast<Eigen::Index>(i), 2),
                       sel.selected_boxes.val()(static_cast<Eigen::Index>(i), 3)};
    }
    scene.inter_targets = match_selection_targets(
        sconf, sboxes, scene.gt,
        MatchWeights{scene.weights.lambda_focal, scene.weights.lambda_l1, scene.weights.lambda_iou});
  }
  auto loss = compute_loss(tape, dec, assign, scene.gt, &sel, scene.weights, false, nullptr,
                           freeze ? &scene.inter_targets : nullptr);
  return loss.total.val()(0, 0);
}

// Same frozen forward, returning analytic gradients in registry order.
std::vector<Eigen::MatrixXd> analytic_grads(ModelParams<double>& params, Scene& scene) {
  Tape<double> tape;
  auto vars = lift_params(tape, params);
  auto enc = encoder_forward(tape, vars, params.config, scene.input);
  auto sel = query_selection(tape, vars, params.config, enc, scene.input,
                             static_cast<int>(scene.selected.size()), &scene.selected);
  sel.ref_boxes = scene.frozen_refs;
  auto queries = build_query_set(tape, vars, params.config, scene.dn, scene.tracks, &sel);
  auto dec = decoder_forward(tape, vars, params.config, queries, enc);
  auto loss = compute_loss(tape, dec, scene.assignment, scene.gt, &sel, scene.weights, false,
                           nullptr, &scene.inter_targets);
  tape.backward(loss.total.id);
  std::vector<Eigen::MatrixXd> grads;
  grads.reserve(vars.registry.size());
  for (auto& [name, var] : vars.registry) grads.push_back(tape.grad(var.id));
  return grads;
}

Scene make_scene(const ModelConfig& cfg, std::uint64_t seed) {
  Scene scene;
  const GridSpec grid{6, 6, cfg.grid_channels};
  Scenario sc = generate_scenario(seed, 3, 6, /*crossing=*/false, grid);
  const auto truth = ground_truth(sc);
  scene.input = EncoderInput::from_frames(render_features(sc, 1), render_features(sc, 2));
  for (const auto& e : truth[2].entries) scene.gt.push_back(e.box);

  Rng rng = substream(seed, 0x67636b31ULL);
  // Fabricated track queries for the first two objects.
  for (int i = 0; i < 2 && i < static_cast<int>(scene.gt.size()); ++i) {
    TrackQueryInput<double> t;
    t.content.resize(cfg.hidden_dim);
    for (int j = 0; j < cfg.hidden_dim; ++j) t.content(j) = uniform_real(rng, -0.5, 0.5);
    BBox jittered = scene.gt[i];
    jittered.cx += uniform_real(rng, -0.02, 0.02);
    jittered.cy += uniform_real(rng, -0.02, 0.02);
    t.box = clamp_to_frame(jittered);
    scene.tracks.push_back(std::move(t));
    scene.track_gt.push_back(i);
  }
  std::vector<TrackCorrespondence> corr;
  for (int i = 0; i < static_cast<int>(scene.tracks.size()); ++i) {
    corr.push_back(TrackCorrespondence{i, scene.track_gt[i]});
  }
  DenoiseParams dp;
  dp.category_range = cfg.category_range;
  dp.max_positive_total = 6;  // two groups of three objects
  scene.dn = generate_denoise_set(scene.gt, corr, dp, rng);

  const int n_det = std::min(cfg.num_det_queries, grid.height * grid.width);
  std::vector<int> all(grid.height * grid.width);
  for (int i = 0; i < static_cast<int>(all.size()); ++i) all[i] = i;
  for (int i = static_cast<int>(all.size()) - 1; i > 0; --i) {
    std::swap(all[i], all[uniform_index(rng, static_cast<std::uint64_t>(i + 1))]);
  }
  scene.selected.assign(all.begin(), all.begin() + n_det);
  return scene;
}

}  // namespace

GradCheckReport gradcheck(const ModelConfig& config, std::uint64_t seed, int samples_per_group,
                          double step) {
  ModelParams<double> params = init_model<double>(config, seed);
  // Move zero-initialized tensors off their structured init to a generic
  // point: central differences need the local curvature to stay finite
  // (an all-zero bias makes empty-cell rows exactly constant and parks
  // layer norm on its degenerate point).
  {
    Rng jitter = substream(seed, 0x6a697474ULL);
    for (auto& [name, mat] : params.registry()) {
      for (Eigen::Index i = 0; i < mat->size(); ++i) {
        *(mat->data() + i) += uniform_real(jitter, -0.05, 0.05);
      }
    }
  }
  Scene scene = make_scene(config, seed ^ 0x5eedULL);

  // Freeze assignments, selection matching and reference boxes at the
  // base point so the checked function is smooth in the parameters.
  const double base = forward_loss(params, scene, /*freeze=*/false);
  const auto grads = analytic_grads(params, scene);
  // Compare at unit loss scale; the relative-error floor assumes an O(1)
  // objective and the finite-difference noise floor scales with |loss|.
  const double unit = 1.0 / std::max(1.0, std::abs(base));

  Rng rng = substream(seed, 0x67636b32ULL);
  GradCheckReport report;
  auto registry = params.registry();
  for (std::size_t g = 0; g < registry.size(); ++g) {
    auto& [name, mat] = registry[g];
    GradCheckGroup group;
    group.name = name;
    const int numel = static_cast<int>(mat->size());
    std::vector<int> coords(numel);
    for (int i = 0; i < numel; ++i) coords[i] = i;
    if (numel > samples_per_group) {
      for (int i = numel - 1; i > 0; --i) {
        std::swap(coords[i], coords[uniform_index(rng, static_cast<std::uint64_t>(i + 1))]);
      }
      coords.resize(samples_per_group);
    }
    for (int c : coords) {
      double* cell = mat->data() + c;
      const double saved = *cell;
      *cell = saved + step;
      const double up = forward_loss(params, scene, true);
      *cell = saved - step;
      const double down = forward_loss(params, scene, true);
      *cell = saved;
      const double fd = unit * (up - down) / (2.0 * step);
      const double an = unit * grads[g](c % mat->rows(), c / mat->rows());  // column-major index
      const double rel = std::abs(an - fd) / std::max({1e-6, std::abs(an), std::abs(fd)});
      group.max_rel_err = std::max(group.max_rel_err, rel);
      group.checked += 1;
    }
    report.max_rel_err = std::max(report.max_rel_err, group.max_rel_err);
    report.groups.push_back(std::move(group));
  }
  return report;
}

}  // namespace qtrack
