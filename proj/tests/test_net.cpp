#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <fstream>

#include "qtrack/net.hpp"
#include "qtrack/query_build.hpp"
#include "qtrack/simulator.hpp"

using namespace qtrack;
using Mat = Eigen::MatrixXd;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.hidden_dim = 24;
  cfg.num_heads = 4;
  cfg.num_encoder_layers = 2;
  cfg.num_decoder_layers = 2;
  cfg.ffn_dim = 32;
  cfg.num_det_queries = 6;
  cfg.grid_channels = 4;
  return cfg;
}

struct TestScene {
  Scenario scenario;
  EncoderInput input;
  std::vector<BBox> gt;
  DenoiseSet dn;
  std::vector<TrackQueryInput<double>> tracks;
};

TestScene make_scene(const ModelConfig& cfg, std::uint64_t seed) {
  TestScene s;
  s.scenario = generate_scenario(seed, 3, 5, false, GridSpec{6, 6, cfg.grid_channels});
  s.input = EncoderInput::from_frames(render_features(s.scenario, 0), render_features(s.scenario, 1));
  for (const auto& e : ground_truth(s.scenario)[1].entries) s.gt.push_back(e.box);
  Rng rng = substream(seed, 99);
  for (int i = 0; i < 2 && i < static_cast<int>(s.gt.size()); ++i) {
    TrackQueryInput<double> t;
    t.content.resize(cfg.hidden_dim);
    for (int j = 0; j < cfg.hidden_dim; ++j) t.content(j) = uniform_real(rng, -0.5, 0.5);
    t.box = s.gt[i];
    s.tracks.push_back(std::move(t));
  }
  DenoiseParams dp;
  dp.category_range = cfg.category_range;
  dp.max_positive_total = 9;
  std::vector<TrackCorrespondence> corr;
  for (int i = 0; i < static_cast<int>(s.tracks.size()); ++i) corr.push_back({i, i});
  s.dn = generate_denoise_set(s.gt, corr, dp, rng);
  return s;
}

}  // namespace

TEST_CASE("3d sinusoidal embedding basics") {
  auto e = sinusoidal_embed_3d(0.0, 0.0, 0.0, 30);
  for (int i = 0; i < 30; i += 2) CHECK(e(i) == 0.0);      // sines
  for (int i = 1; i < 30; i += 2) CHECK(e(i) == 1.0);      // cosines
  CHECK_THROWS_AS(sinusoidal_embed_3d(0, 0, 0, 32), std::domain_error);
  CHECK_THROWS_AS(sinusoidal_embed_3d(0, 0, 0, 0), std::domain_error);

  // the time bit separates two otherwise identical tokens
  auto t0 = sinusoidal_embed_3d(0.3, 0.7, 0.0, 30);
  auto t1 = sinusoidal_embed_3d(0.3, 0.7, 1.0, 30);
  CHECK((t0 - t1).norm() > 0.5);
}

TEST_CASE("embedding similarity decays monotonically with distance") {
  const int d = 30;
  auto at = [&](double x) { return sinusoidal_embed_3d(x, 0.5, 1.0, d); };
  double prev = at(0.3).dot(at(0.3));
  for (int k = 1; k <= 40; ++k) {
    const double delta = 0.4 * k / 40.0;
    const double dot = at(0.3).dot(at(0.3 + delta));
    CHECK(dot < prev + 1e-9);
    prev = dot;
  }
}

TEST_CASE("masked attention contracts") {
  Rng rng = substream(71, 0);
  const int n = 5, d = 8, heads = 2;
  Tape<double> tape;
  AttentionBlockT<Var<double>> block;
  auto mk = [&](int r, int c) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) m(i, j) = uniform_real(rng, -0.7, 0.7);
    }
    return leaf(tape, m);
  };
  block.wq = mk(d, d);
  block.bq = mk(1, d);
  block.wk = mk(d, d);
  block.bk = mk(1, d);
  block.wv = mk(d, d);
  block.bv = mk(1, d);
  block.wo = mk(d, d);
  block.bo = mk(1, d);
  auto x = mk(n, d);

  SUBCASE("all-visible mask equals dense attention") {
    MaskMatrix all = MaskMatrix::Constant(n, n, true);
    auto masked = masked_attention(block, x, x, x, all, heads);
    auto dense = multihead_attention(block, x, x, x, nullptr, heads);
    CHECK((masked.val() - dense.val()).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("diagonal-only row reproduces its own value projection") {
    MaskMatrix diag = MaskMatrix::Constant(n, n, false);
    for (int i = 0; i < n; ++i) diag(i, i) = true;
    auto out = masked_attention(block, x, x, x, diag, heads);
    // single visible key -> attention weight 1 -> out = (x Wv + bv) Wo + bo
    auto v = add_rowwise(matmul(x, block.wv), block.bv);
    auto expect = add_rowwise(matmul(v, block.wo), block.bo);
    CHECK((out.val() - expect.val()).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("perturbing an invisible key/value leaves visible rows bit-identical") {
    MaskMatrix mask = MaskMatrix::Constant(n, n, true);
    for (int i = 0; i < n; ++i) mask(i, n - 1) = i == n - 1;  // last key invisible to others
    Mat kv = x.val();
    auto out1 = masked_attention(block, x, leaf(tape, kv), leaf(tape, kv), mask, heads);
    Mat kv2 = kv;
    kv2.row(n - 1).setConstant(123.0);
    auto out2 = masked_attention(block, x, leaf(tape, kv2), leaf(tape, kv2), mask, heads);
    for (int i = 0; i + 1 < n; ++i) {
      for (int j = 0; j < d; ++j) {
        CHECK(out1.val()(i, j) == out2.val()(i, j));
      }
    }
  }
}

TEST_CASE("encoder output matches input tokens under zero output weights") {
  ModelConfig cfg = tiny_config();
  auto params = init_model<double>(cfg, 3);
  for (auto& layer : params.tensors.encoder) {
    layer.attn.wo.setZero();
    layer.attn.bo.setZero();
    layer.ffn.w2.setZero();
    layer.ffn.b2.setZero();
  }
  TestScene scene = make_scene(cfg, 4);
  Tape<double> tape;
  auto vars = lift_params(tape, params);
  auto enc = encoder_forward(tape, vars, cfg, scene.input);
  // the residual stream reduces to the projected input tokens
  auto projected = add_rowwise(matmul(leaf(tape, Mat(scene.input.tokens)), vars.t.input_proj_w),
                               vars.t.input_proj_b);
  CHECK((enc.tokens.val() - projected.val()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(enc.tokens.val().rows() == 2 * 36);
  CHECK(enc.tokens.val().cols() == cfg.hidden_dim);
}

TEST_CASE("encoder is permutation equivariant") {
  ModelConfig cfg = tiny_config();
  auto params = init_model<double>(cfg, 5);
  TestScene scene = make_scene(cfg, 6);

  Tape<double> tape;
  auto vars = lift_params(tape, params);
  auto base = encoder_forward(tape, vars, cfg, scene.input);

  // reverse the token order along with the coordinates
  EncoderInput permuted = scene.input;
  const int n = static_cast<int>(scene.input.tokens.rows());
  for (int i = 0; i < n; ++i) {
    permuted.tokens.row(i) = scene.input.tokens.row(n - 1 - i);
    permuted.xs[i] = scene.input.xs[n - 1 - i];
    permuted.ys[i] = scene.input.ys[n - 1 - i];
    permuted.ts[i] = scene.input.ts[n - 1 - i];
  }
  auto flipped = encoder_forward(tape, vars, cfg, permuted);
  for (int i = 0; i < n; ++i) {
    CHECK((base.tokens.val().row(i) - flipped.tokens.val().row(n - 1 - i)).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("query selection ranking") {
  ModelConfig cfg = tiny_config();
  auto params = init_model<double>(cfg, 7);
  const int d = cfg.hidden_dim;
  // scoring MLP rigged to read coordinate 0 of each token
  params.tensors.score_w1.setZero();
  params.tensors.score_w1(0, 0) = 1.0;
  params.tensors.score_b1.setZero();
  params.tensors.score_w2.setZero();
  params.tensors.score_w2(0, 0) = 1.0;
  params.tensors.score_b2.setZero();
  // encoder reduced to the input projection so token contents are exact
  for (auto& layer : params.tensors.encoder) {
    layer.attn.wo.setZero();
    layer.attn.bo.setZero();
    layer.ffn.w2.setZero();
    layer.ffn.b2.setZero();
  }
  params.tensors.input_proj_w.setZero();
  params.tensors.input_proj_w(0, 0) = 1.0;  // channel 0 -> coordinate 0
  params.tensors.input_proj_b.setZero();

  EncoderInput input;
  input.tokens_per_frame = 3;
  input.tokens = Mat::Zero(6, cfg.grid_channels);
  input.tokens(3, 0) = 0.9;  // current-frame tokens carry the scores
  input.tokens(4, 0) = 0.1;
  input.tokens(5, 0) = 0.5;
  for (int f = 0; f < 2; ++f) {
    for (int i = 0; i < 3; ++i) {
      input.xs.push_back((i + 0.5) / 3.0);
      input.ys.push_back(0.5);
      input.ts.push_back(f);
    }
  }

  Tape<double> tape;
  auto vars = lift_params(tape, params);
  auto enc = encoder_forward(tape, vars, cfg, input);

  SUBCASE("scores sorted, ties by lower index") {
    auto sel = query_selection(tape, vars, cfg, enc, input, 2);
    REQUIRE(sel.token_indices.size() == 2);
    CHECK(sel.token_indices[0] == 0);
    CHECK(sel.token_indices[1] == 2);
  }
  SUBCASE("all scores equal selects the first indices") {
    EncoderInput flat = input;
    flat.tokens.setZero();
    auto enc2 = encoder_forward(tape, vars, cfg, flat);
    auto sel = query_selection(tape, vars, cfg, enc2, flat, 2);
    CHECK(sel.token_indices[0] == 0);
    CHECK(sel.token_indices[1] == 1);
  }
  SUBCASE("n_det equal to token count selects everything") {
    auto sel = query_selection(tape, vars, cfg, enc, input, 3);
    CHECK(sel.token_indices.size() == 3);
  }
  SUBCASE("n_det beyond token count is a config error") {
    CHECK_THROWS_AS(query_selection(tape, vars, cfg, enc, input, 4), std::domain_error);
  }
  SUBCASE("reference boxes sit on token centers") {
    auto sel = query_selection(tape, vars, cfg, enc, input, 2);
    CHECK(sel.ref_boxes[0].cx == doctest::Approx((0 + 0.5) / 3.0));
    CHECK(sel.ref_boxes[1].cx == doctest::Approx((2 + 0.5) / 3.0));
    for (const auto& b : sel.ref_boxes) {
      CHECK(b.w > 0.0);
      CHECK(b.w < 1.0);
    }
  }
}

TEST_CASE("decoder isolation: denoising queries cannot influence track/det outputs") {
  ModelConfig cfg = tiny_config();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto params = init_model<double>(cfg, 100 + seed);
    TestScene scene = make_scene(cfg, 200 + seed);

    auto run = [&](bool with_dn) {
      Tape<double> tape;
      auto vars = lift_params(tape, params);
      auto enc = encoder_forward(tape, vars, cfg, scene.input);
      auto sel = query_selection(tape, vars, cfg, enc, scene.input, cfg.num_det_queries);
      DenoiseSet empty;
      auto queries = build_query_set(tape, vars, cfg, with_dn ? scene.dn : empty, scene.tracks, &sel);
      auto out = decoder_forward(tape, vars, cfg, queries, enc);
      struct Snapshot {
        std::vector<Mat> conf, boxes, content;
        int offset;
      } snap;
      snap.offset = queries.layout.track_begin();
      const int tail = queries.layout.num_track + queries.layout.num_det;
      for (const auto& layer : out.layers) {
        snap.conf.push_back(layer.conf.val().middleRows(snap.offset, tail));
        snap.boxes.push_back(layer.boxes.val().middleRows(snap.offset, tail));
        snap.content.push_back(layer.content.val().middleRows(snap.offset, tail));
      }
      return snap;
    };

    auto with_dn = run(true);
    auto without = run(false);
    REQUIRE(with_dn.conf.size() == without.conf.size());
    for (std::size_t l = 0; l < with_dn.conf.size(); ++l) {
      // bit-identical, not approximately equal
      CHECK(std::memcmp(with_dn.conf[l].data(), without.conf[l].data(),
                        sizeof(double) * with_dn.conf[l].size()) == 0);
      CHECK(std::memcmp(with_dn.boxes[l].data(), without.boxes[l].data(),
                        sizeof(double) * with_dn.boxes[l].size()) == 0);
      CHECK(std::memcmp(with_dn.content[l].data(), without.content[l].data(),
                        sizeof(double) * with_dn.content[l].size()) == 0);
    }
  }
}

TEST_CASE("decoder output shapes") {
  ModelConfig cfg = tiny_config();
  auto params = init_model<double>(cfg, 9);
  TestScene scene = make_scene(cfg, 10);
  Tape<double> tape;
  auto vars = lift_params(tape, params);
  auto enc = encoder_forward(tape, vars, cfg, scene.input);
  auto sel = query_selection(tape, vars, cfg, enc, scene.input, cfg.num_det_queries);

  SUBCASE("zero queries produce an empty output") {
    DenoiseSet empty;
    auto queries = build_query_set<double>(tape, vars, cfg, empty, {}, nullptr);
    auto out = decoder_forward(tape, vars, cfg, queries, enc);
    CHECK(out.layers.empty());
  }
  SUBCASE("one layer output per decoder layer") {
    auto queries = build_query_set(tape, vars, cfg, scene.dn, scene.tracks, &sel);
    auto out = decoder_forward(tape, vars, cfg, queries, enc);
    CHECK(static_cast<int>(out.layers.size()) == cfg.num_decoder_layers);
    const int nq = queries.layout.total();
    for (const auto& layer : out.layers) {
      CHECK(layer.conf.val().rows() == nq);
      CHECK(layer.boxes.val().cols() == 4);
      // confidences in [0,1], boxes valid
      CHECK(layer.conf.val().minCoeff() >= 0.0);
      CHECK(layer.conf.val().maxCoeff() <= 1.0);
      CHECK(layer.boxes.val().minCoeff() >= 0.0);
      CHECK(layer.boxes.val().maxCoeff() <= 1.0);
    }
  }
}

TEST_CASE("checkpoint round trip preserves every tensor") {
  ModelConfig cfg = tiny_config();
  auto params = init_model<double>(cfg, 11);
  const std::string path = "test_checkpoint.qtck";
  save_checkpoint(params, path);
  auto loaded = load_checkpoint<double>(path);
  auto ra = params.registry();
  auto rb = loaded.registry();
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    CHECK(ra[i].first == rb[i].first);
    CHECK((*ra[i].second - *rb[i].second).cwiseAbs().maxCoeff() == 0.0);
  }
  // f32 load casts losslessly through the f64 container
  auto as_float = load_checkpoint<float>(path);
  CHECK(as_float.config.hidden_dim == cfg.hidden_dim);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint rejects a mismatched shape table") {
  ModelConfig cfg = tiny_config();
  auto params = init_model<double>(cfg, 12);
  const std::string path = "test_checkpoint_bad.qtck";
  save_checkpoint(params, path);
  // truncate: drop the last kilobyte
  std::ifstream is(path, std::ios::binary);
  std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  is.close();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os.write(data.data(), static_cast<std::streamsize>(data.size() - 1024));
  os.close();
  CHECK_THROWS_AS(load_checkpoint<double>(path), std::runtime_error);
  std::remove(path.c_str());
}
