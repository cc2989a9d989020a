#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "qtrack/simulator.hpp"
#include "qtrack/tracker.hpp"

using namespace qtrack;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.hidden_dim = 24;
  cfg.num_heads = 4;
  cfg.num_encoder_layers = 1;
  cfg.num_decoder_layers = 2;
  cfg.ffn_dim = 32;
  cfg.num_det_queries = 6;
  return cfg;
}

TrackerConfig tracker_config() {
  TrackerConfig tc;
  tc.n_det = 6;
  return tc;
}

std::vector<FeatureGrid> render_all(const Scenario& sc) {
  std::vector<FeatureGrid> frames;
  for (int f = 0; f < sc.n_frames; ++f) frames.push_back(render_features(sc, f));
  return frames;
}

Track<double> seeded_track(int id, const BBox& box, int d) {
  Track<double> t;
  t.id = id;
  t.content = Eigen::Matrix<double, 1, Eigen::Dynamic>::Zero(d);
  t.box = box;
  return t;
}

}  // namespace

TEST_CASE("empty scene spawns nothing") {
  ModelConfig cfg = small_config();
  auto model = init_model<double>(cfg, 1);  // confidence prior ~0.01 < lambda_d
  Scenario sc;
  sc.n_frames = 3;
  sc.grid = GridSpec{8, 8, cfg.grid_channels};
  auto results = run_sequence(render_all(sc), model, tracker_config());
  for (const auto& r : results) CHECK(r.entries.empty());
}

TEST_CASE("tracks below threshold age out after patience frames") {
  ModelConfig cfg = small_config();
  auto model = init_model<double>(cfg, 2);
  model.tensors.class_b.setConstant(-10.0);  // every confidence ~ 0
  Scenario sc;
  sc.n_frames = 1;
  sc.grid = GridSpec{8, 8, cfg.grid_channels};
  FeatureGrid frame = render_features(sc, 0);

  SUBCASE("default patience keeps the frozen track that many frames") {
    TrackerConfig tc = tracker_config();
    tc.patience = 3;
    TrackerState<double> state;
    state.tracks.push_back(seeded_track(1, BBox{0.5, 0.5, 0.1, 0.1}, cfg.hidden_dim));
    state.next_id = 2;
    for (int step = 1; step <= 3; ++step) {
      auto r = tracker_step(state, frame, frame, model, tc, step);
      CHECK(r.entries.empty());  // inactive tracks are not reported
      REQUIRE(state.tracks.size() == 1);
      CHECK(state.tracks[0].state == TrackState::Inactive);
      CHECK(state.tracks[0].inactive_age == step);
      CHECK(state.tracks[0].box.cx == 0.5);  // frozen
    }
    tracker_step(state, frame, frame, model, tc, 4);
    CHECK(state.tracks.empty());  // age exceeded patience
  }
  SUBCASE("patience zero terminates on the first bad frame") {
    TrackerConfig tc = tracker_config();
    tc.patience = 0;
    TrackerState<double> state;
    state.tracks.push_back(seeded_track(1, BBox{0.5, 0.5, 0.1, 0.1}, cfg.hidden_dim));
    state.next_id = 2;
    tracker_step(state, frame, frame, model, tc, 1);
    CHECK(state.tracks.empty());
  }
}

TEST_CASE("high-confidence model: ids, suppression, determinism") {
  ModelConfig cfg = small_config();
  auto model = init_model<double>(cfg, 3);
  model.tensors.class_b.setConstant(10.0);  // every query fires
  Scenario sc = generate_scenario(4, 2, 4, false, GridSpec{8, 8, cfg.grid_channels});
  auto frames = render_all(sc);
  TrackerConfig tc = tracker_config();

  auto results = run_sequence(frames, model, tc);

  SUBCASE("ids are unique and strictly increasing by spawn order") {
    std::set<int> seen;
    int last_new = 0;
    for (const auto& r : results) {
      for (const auto& e : r.entries) {
        if (!seen.count(e.track_id)) {
          CHECK(e.track_id > last_new);
          last_new = e.track_id;
          seen.insert(e.track_id);
        }
      }
    }
    CHECK(!seen.empty());
    CHECK(*seen.begin() == 1);
  }
  SUBCASE("spawned tracks never overlap a retained track above the suppression IoU") {
    for (const auto& r : results) {
      for (std::size_t i = 0; i < r.entries.size(); ++i) {
        for (std::size_t j = i + 1; j < r.entries.size(); ++j) {
          CHECK(iou(r.entries[i].box, r.entries[j].box) < tc.suppression_iou);
        }
      }
    }
  }
  SUBCASE("identical runs are bit-identical") {
    auto again = run_sequence(frames, model, tc);
    REQUIRE(again.size() == results.size());
    for (std::size_t f = 0; f < results.size(); ++f) {
      REQUIRE(again[f].entries.size() == results[f].entries.size());
      for (std::size_t i = 0; i < results[f].entries.size(); ++i) {
        CHECK(again[f].entries[i].track_id == results[f].entries[i].track_id);
        CHECK(again[f].entries[i].box.cx == results[f].entries[i].box.cx);
        CHECK(again[f].entries[i].confidence == results[f].entries[i].confidence);
      }
    }
  }
}

TEST_CASE("each track query reports its own box") {
  ModelConfig cfg = small_config();
  auto model = init_model<double>(cfg, 5);
  model.tensors.class_b.setConstant(10.0);
  // zero box head: predictions coincide with each query's own reference
  model.tensors.box_w2.setZero();
  model.tensors.box_b2.setZero();
  Scenario sc;
  sc.n_frames = 1;
  sc.grid = GridSpec{8, 8, cfg.grid_channels};
  FeatureGrid frame = render_features(sc, 0);

  TrackerConfig tc = tracker_config();
  tc.lambda_d = 0.999999;  // block new spawns; only the seeded tracks report
  TrackerState<double> state;
  state.tracks.push_back(seeded_track(1, BBox{0.25, 0.3, 0.1, 0.1}, cfg.hidden_dim));
  state.tracks.push_back(seeded_track(2, BBox{0.75, 0.6, 0.12, 0.14}, cfg.hidden_dim));
  state.next_id = 3;
  auto r = tracker_step(state, frame, frame, model, tc, 0);
  REQUIRE(r.entries.size() == 2);
  CHECK(r.entries[0].track_id == 1);
  CHECK(r.entries[0].box.cx == doctest::Approx(0.25).epsilon(1e-5));
  CHECK(r.entries[0].box.h == doctest::Approx(0.1).epsilon(1e-4));
  CHECK(r.entries[1].track_id == 2);
  CHECK(r.entries[1].box.cx == doctest::Approx(0.75).epsilon(1e-5));
  CHECK(r.entries[1].box.h == doctest::Approx(0.14).epsilon(1e-4));
}

TEST_CASE("inference query layout never contains denoising groups") {
  ModelConfig cfg = small_config();
  auto model = init_model<double>(cfg, 6);
  Scenario sc;
  sc.n_frames = 1;
  sc.grid = GridSpec{8, 8, cfg.grid_channels};
  FeatureGrid frame = render_features(sc, 0);
  TrackerState<double> state;
  state.tracks.push_back(seeded_track(1, BBox{0.5, 0.5, 0.1, 0.1}, cfg.hidden_dim));
  StepTrace trace;
  tracker_step(state, frame, frame, model, tracker_config(), 0, MaskMode::Cascaded, &trace);
  CHECK(trace.layout.dn_group_sizes.empty());
  CHECK(trace.layout.num_track == 1);
  CHECK(trace.layout.num_det == 6);
}

TEST_CASE("run_sequence input validation") {
  ModelConfig cfg = small_config();
  auto model = init_model<double>(cfg, 7);
  CHECK_THROWS_AS(run_sequence<double>({}, model, tracker_config()), std::domain_error);
}
