#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "qtrack/denoise.hpp"
#include "qtrack/features.hpp"
#include "qtrack/geometry.hpp"
#include "qtrack/mask.hpp"
#include "qtrack/rng.hpp"
#include "qtrack/tape.hpp"

namespace qtrack {

struct ModelConfig {
  int hidden_dim = 32;
  int num_heads = 4;
  int num_encoder_layers = 2;
  int num_decoder_layers = 2;
  int ffn_dim = 64;
  int num_det_queries = 20;
  int category_range = 20;
  int grid_channels = 4;
  double dropout = 0.0;
  double pe_scale = 2.0 * std::numbers::pi;

  // Sinusoidal embedding width: the largest multiple of 6 that fits the
  // hidden dimension; remaining entries are zero padding.
  int pe_dim() const { return 6 * (hidden_dim / 6); }
  int head_dim() const { return hidden_dim / num_heads; }

  void validate() const {
    if (hidden_dim < 6) throw std::domain_error("ModelConfig: hidden_dim < 6");
    if (num_heads < 1 || hidden_dim % num_heads != 0) {
      throw std::domain_error("ModelConfig: hidden_dim must divide evenly into heads");
    }
    if (num_encoder_layers < 1 || num_decoder_layers < 1) {
      throw std::domain_error("ModelConfig: need at least one encoder and decoder layer");
    }
    if (ffn_dim < 1 || num_det_queries < 1 || grid_channels < 1) {
      throw std::domain_error("ModelConfig: non-positive dimension");
    }
    if (category_range < 0) throw std::domain_error("ModelConfig: category_range < 0");
    if (dropout < 0.0 || dropout >= 1.0) throw std::domain_error("ModelConfig: dropout outside [0,1)");
  }
};

// d/3 dims per axis (x, y, t), each axis an interleaved sin/cos ladder
// with geometric frequencies. d must be divisible by 6.
inline Eigen::VectorXd sinusoidal_embed_3d(double x, double y, double t, int d,
                                           double scale = 2.0 * std::numbers::pi) {
  if (d <= 0 || d % 6 != 0) {
    throw std::domain_error("sinusoidal_embed_3d: d must be a positive multiple of 6");
  }
  const int m = d / 3;
  Eigen::VectorXd out(d);
  auto fill = [&](int offset, double v) {
    for (int k = 0; k < m / 2; ++k) {
      const double omega = std::pow(10000.0, -2.0 * k / m);
      out(offset + 2 * k) = std::sin(v * scale * omega);
      out(offset + 2 * k + 1) = std::cos(v * scale * omega);
    }
  };
  fill(0, x);
  fill(m, y);
  fill(2 * m, t);
  return out;
}

// ---- parameter containers -------------------------------------------------

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename T>
struct AttentionBlockT {
  T wq, bq, wk, bk, wv, bv, wo, bo;
};

template <typename T>
struct FfnT {
  T w1, b1, w2, b2;
};

template <typename T>
struct LayerNormT {
  T gamma, beta;
};

template <typename T>
struct EncoderLayerT {
  LayerNormT<T> ln1;
  AttentionBlockT<T> attn;
  LayerNormT<T> ln2;
  FfnT<T> ffn;
};

template <typename T>
struct DecoderLayerT {
  LayerNormT<T> ln_sa;
  AttentionBlockT<T> self_attn;
  LayerNormT<T> ln_ca;
  AttentionBlockT<T> cross_attn;
  LayerNormT<T> ln_ffn;
  FfnT<T> ffn;
};

template <typename T>
struct ModelTensorsT {
  T input_proj_w, input_proj_b;
  std::vector<EncoderLayerT<T>> encoder;
  std::vector<DecoderLayerT<T>> decoder;
  T score_w1, score_b1, score_w2, score_b2;  // query-selection scoring MLP
  T size_w, size_b;                          // reference box width/height head
  T class_w, class_b;
  T box_w1, box_b1, box_w2, box_b2;
  T label_embed;   // (category_range + 2) x d, last row reserved for no-object
  T det_content;   // num_det_queries x d
};

template <typename T, typename Fn>
void visit_tensors(ModelTensorsT<T>& m, Fn&& fn) {
  fn("input_proj_w", m.input_proj_w);
  fn("input_proj_b", m.input_proj_b);
  auto attn = [&](const std::string& p, AttentionBlockT<T>& a) {
    fn(p + ".wq", a.wq);
    fn(p + ".bq", a.bq);
    fn(p + ".wk", a.wk);
    fn(p + ".bk", a.bk);
    fn(p + ".wv", a.wv);
    fn(p + ".bv", a.bv);
    fn(p + ".wo", a.wo);
    fn(p + ".bo", a.bo);
  };
  auto ln = [&](const std::string& p, LayerNormT<T>& l) {
    fn(p + ".gamma", l.gamma);
    fn(p + ".beta", l.beta);
  };
  auto ffn = [&](const std::string& p, FfnT<T>& f) {
    fn(p + ".w1", f.w1);
    fn(p + ".b1", f.b1);
    fn(p + ".w2", f.w2);
    fn(p + ".b2", f.b2);
  };
  for (std::size_t i = 0; i < m.encoder.size(); ++i) {
    const std::string p = "encoder." + std::to_string(i);
    ln(p + ".ln1", m.encoder[i].ln1);
    attn(p + ".attn", m.encoder[i].attn);
    ln(p + ".ln2", m.encoder[i].ln2);
    ffn(p + ".ffn", m.encoder[i].ffn);
  }
  for (std::size_t i = 0; i < m.decoder.size(); ++i) {
    const std::string p = "decoder." + std::to_string(i);
    ln(p + ".ln_sa", m.decoder[i].ln_sa);
    attn(p + ".self_attn", m.decoder[i].self_attn);
    ln(p + ".ln_ca", m.decoder[i].ln_ca);
    attn(p + ".cross_attn", m.decoder[i].cross_attn);
    ln(p + ".ln_ffn", m.decoder[i].ln_ffn);
    ffn(p + ".ffn", m.decoder[i].ffn);
  }
  fn("score_w1", m.score_w1);
  fn("score_b1", m.score_b1);
  fn("score_w2", m.score_w2);
  fn("score_b2", m.score_b2);
  fn("size_w", m.size_w);
  fn("size_b", m.size_b);
  fn("class_w", m.class_w);
  fn("class_b", m.class_b);
  fn("box_w1", m.box_w1);
  fn("box_b1", m.box_b1);
  fn("box_w2", m.box_w2);
  fn("box_b2", m.box_b2);
  fn("label_embed", m.label_embed);
  fn("det_content", m.det_content);
}

template <typename S>
struct ModelParams {
  ModelConfig config;
  ModelTensorsT<MatX<S>> tensors;

  std::vector<std::pair<std::string, MatX<S>*>> registry() {
    std::vector<std::pair<std::string, MatX<S>*>> out;
    visit_tensors(tensors, [&](const std::string& name, MatX<S>& m) { out.emplace_back(name, &m); });
    return out;
  }
};

namespace detail {

template <typename S>
MatX<S> xavier(Rng& rng, int rows, int cols) {
  const double a = std::sqrt(6.0 / (rows + cols));
  MatX<S> m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = static_cast<S>(uniform_real(rng, -a, a));
  }
  return m;
}

template <typename S>
void init_attention(Rng& rng, AttentionBlockT<MatX<S>>& a, int d) {
  a.wq = xavier<S>(rng, d, d);
  a.bq = MatX<S>::Zero(1, d);
  a.wk = xavier<S>(rng, d, d);
  a.bk = MatX<S>::Zero(1, d);
  a.wv = xavier<S>(rng, d, d);
  a.bv = MatX<S>::Zero(1, d);
  a.wo = xavier<S>(rng, d, d);
  a.bo = MatX<S>::Zero(1, d);
}

template <typename S>
void init_ffn(Rng& rng, FfnT<MatX<S>>& f, int d, int ffn_dim) {
  f.w1 = xavier<S>(rng, d, ffn_dim);
  f.b1 = MatX<S>::Zero(1, ffn_dim);
  f.w2 = xavier<S>(rng, ffn_dim, d);
  f.b2 = MatX<S>::Zero(1, d);
}

template <typename S>
void init_layernorm(LayerNormT<MatX<S>>& l, int d) {
  l.gamma = MatX<S>::Ones(1, d);
  l.beta = MatX<S>::Zero(1, d);
}

}  // namespace detail

// Focal-style prior so fresh models start with ~1% foreground confidence.
inline double confidence_prior_logit() { return std::log(0.01 / 0.99); }

template <typename S>
ModelParams<S> init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams<S> p;
  p.config = config;
  const int d = config.hidden_dim;
  Rng rng = substream(seed, 0x6d6f64656cULL);

  p.tensors.input_proj_w = detail::xavier<S>(rng, config.grid_channels, d);
  p.tensors.input_proj_b = MatX<S>::Zero(1, d);
  p.tensors.encoder.resize(config.num_encoder_layers);
  for (auto& layer : p.tensors.encoder) {
    detail::init_layernorm<S>(layer.ln1, d);
    detail::init_attention<S>(rng, layer.attn, d);
    detail::init_layernorm<S>(layer.ln2, d);
    detail::init_ffn<S>(rng, layer.ffn, d, config.ffn_dim);
  }
  p.tensors.decoder.resize(config.num_decoder_layers);
  for (auto& layer : p.tensors.decoder) {
    detail::init_layernorm<S>(layer.ln_sa, d);
    detail::init_attention<S>(rng, layer.self_attn, d);
    detail::init_layernorm<S>(layer.ln_ca, d);
    detail::init_attention<S>(rng, layer.cross_attn, d);
    detail::init_layernorm<S>(layer.ln_ffn, d);
    detail::init_ffn<S>(rng, layer.ffn, d, config.ffn_dim);
  }
  p.tensors.score_w1 = detail::xavier<S>(rng, d, d);
  p.tensors.score_b1 = MatX<S>::Zero(1, d);
  p.tensors.score_w2 = detail::xavier<S>(rng, d, 1);
  p.tensors.score_b2 = MatX<S>::Constant(1, 1, static_cast<S>(confidence_prior_logit()));
  p.tensors.size_w = detail::xavier<S>(rng, d, 2);
  // Bias so fresh reference boxes start around 0.15 of the frame.
  p.tensors.size_b = MatX<S>::Constant(1, 2, static_cast<S>(std::log(0.15 / 0.85)));
  p.tensors.class_w = detail::xavier<S>(rng, d, 1);
  p.tensors.class_b = MatX<S>::Constant(1, 1, static_cast<S>(confidence_prior_logit()));
  p.tensors.box_w1 = detail::xavier<S>(rng, d, d);
  p.tensors.box_b1 = MatX<S>::Zero(1, d);
  // Zero final box layer: initial predictions coincide with references.
  p.tensors.box_w2 = MatX<S>::Zero(d, 4);
  p.tensors.box_b2 = MatX<S>::Zero(1, 4);

  const double es = std::sqrt(3.0 / d);
  auto embed = [&](int rows) {
    MatX<S> m(rows, d);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < d; ++j) m(i, j) = static_cast<S>(uniform_real(rng, -es, es));
    }
    return m;
  };
  p.tensors.label_embed = embed(config.category_range + 2);
  p.tensors.det_content = embed(config.num_det_queries);
  return p;
}

// Tape handles for every parameter tensor, lifted once per step so that
// shared heads accumulate gradients in one place.
template <typename S>
struct ModelVars {
  ModelTensorsT<Var<S>> t;
  std::vector<std::pair<std::string, Var<S>>> registry;
};

template <typename S>
ModelVars<S> lift_params(Tape<S>& tape, ModelParams<S>& params) {
  ModelVars<S> vars;
  vars.t.encoder.resize(params.tensors.encoder.size());
  vars.t.decoder.resize(params.tensors.decoder.size());
  // visit both structures in lockstep; names are identical by construction
  std::vector<MatX<S>*> mats;
  visit_tensors(params.tensors, [&](const std::string&, MatX<S>& m) { mats.push_back(&m); });
  std::size_t k = 0;
  visit_tensors(vars.t, [&](const std::string& name, Var<S>& v) {
    v = leaf(tape, *mats[k++], "param");
    vars.registry.emplace_back(name, v);
  });
  return vars;
}

// ---- forward passes -------------------------------------------------------

template <typename S>
Var<S> linear(Var<S> x, Var<S> w, Var<S> b) {
  return add_rowwise(matmul(x, w), b);
}

// Multi-head attention. Positional embeddings are added to queries and
// keys by the caller. Pass mask == nullptr for dense attention.
template <typename S>
Var<S> multihead_attention(const AttentionBlockT<Var<S>>& p, Var<S> q_in, Var<S> k_in, Var<S> v_in,
                           const MaskMatrix* mask, int num_heads,
                           std::vector<Var<S>>* attn_trace = nullptr) {
  const int d = static_cast<int>(q_in.cols());
  const int dk = d / num_heads;
  auto q = linear(q_in, p.wq, p.bq);
  auto k = linear(k_in, p.wk, p.bk);
  auto v = linear(v_in, p.wv, p.bv);
  const S inv_sqrt_dk = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dk)));

  std::vector<Var<S>> heads;
  heads.reserve(num_heads);
  for (int h = 0; h < num_heads; ++h) {
    auto qh = slice_cols(q, h * dk, dk);
    auto kh = slice_cols(k, h * dk, dk);
    auto vh = slice_cols(v, h * dk, dk);
    auto logits = scale(matmul_nt(qh, kh), inv_sqrt_dk);
    auto attn = mask != nullptr ? masked_softmax(logits, *mask) : softmax_rows(logits);
    if (attn_trace != nullptr) attn_trace->push_back(attn);
    heads.push_back(matmul(attn, vh));
  }
  return linear(concat_cols(heads), p.wo, p.bo);
}

template <typename S>
Var<S> ffn_forward(const FfnT<Var<S>>& p, Var<S> x) {
  return linear(relu(linear(x, p.w1, p.b1)), p.w2, p.b2);
}

// Positional embedding rows for a list of (x, y, t) coordinates,
// zero-padded from pe_dim to the hidden dimension.
template <typename S>
MatX<S> position_embedding_rows(const ModelConfig& cfg, const std::vector<double>& xs,
                                const std::vector<double>& ys, const std::vector<double>& ts) {
  const int n = static_cast<int>(xs.size());
  MatX<S> pe = MatX<S>::Zero(n, cfg.hidden_dim);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd row = sinusoidal_embed_3d(xs[i], ys[i], ts[i], cfg.pe_dim(), cfg.pe_scale);
    pe.row(i).head(cfg.pe_dim()) = row.transpose().cast<S>();
  }
  return pe;
}

// Two rendered frames concatenated: previous frame tokens first (t=0),
// current frame tokens second (t=1).
struct EncoderInput {
  Eigen::MatrixXd tokens;   // (2*H*W) x channels
  std::vector<double> xs, ys, ts;
  int tokens_per_frame = 0;

  static EncoderInput from_frames(const FeatureGrid& prev, const FeatureGrid& cur);
  int current_begin() const { return tokens_per_frame; }
};

inline EncoderInput EncoderInput::from_frames(const FeatureGrid& prev, const FeatureGrid& cur) {
  if (prev.tokens() != cur.tokens() || prev.channels != cur.channels) {
    throw std::domain_error("EncoderInput: frames rendered at different resolutions");
  }
  EncoderInput in;
  in.tokens_per_frame = cur.tokens();
  in.tokens.resize(2 * cur.tokens(), cur.channels);
  in.tokens.topRows(prev.tokens()) = prev.data;
  in.tokens.bottomRows(cur.tokens()) = cur.data;
  for (int f = 0; f < 2; ++f) {
    const FeatureGrid& g = f == 0 ? prev : cur;
    for (int c = 0; c < g.tokens(); ++c) {
      in.xs.push_back(g.cell_x(c));
      in.ys.push_back(g.cell_y(c));
      in.ts.push_back(static_cast<double>(f));
    }
  }
  return in;
}

template <typename S>
struct EncoderOut {
  Var<S> tokens;  // (2*H*W) x d
  Var<S> pe;      // matching positional embeddings (constant)
};

template <typename S>
EncoderOut<S> encoder_forward(Tape<S>& tape, const ModelVars<S>& vars, const ModelConfig& cfg,
                              const EncoderInput& input) {
  auto raw = leaf(tape, input.tokens.template cast<S>().eval(), "enc_tokens");
  auto pe = leaf(tape, position_embedding_rows<S>(cfg, input.xs, input.ys, input.ts), "enc_pe");
  auto x = linear(raw, vars.t.input_proj_w, vars.t.input_proj_b);
  for (const auto& layer : vars.t.encoder) {
    auto h = layer_norm(x, layer.ln1.gamma, layer.ln1.beta);
    auto hq = h + pe;
    x = x + multihead_attention(layer.attn, hq, hq, h, nullptr, cfg.num_heads);
    auto h2 = layer_norm(x, layer.ln2.gamma, layer.ln2.beta);
    x = x + ffn_forward(layer.ffn, h2);
  }
  return {x, pe};
}

// ---- query selection ------------------------------------------------------

template <typename S>
struct QuerySelection {
  std::vector<int> token_indices;  // indices into the current-frame block, score order
  std::vector<BBox> ref_boxes;     // induced reference boxes (numeric)
  Var<S> scores;                   // score logits of current-frame tokens, (H*W) x 1
  Var<S> selected_conf;            // sigmoid scores of the selected tokens, n_det x 1
  Var<S> selected_boxes;           // n_det x 4 (cx, cy constant; w, h learned)
};

// Scores every current-frame encoder token with the scoring MLP and takes
// the top n_det (ties broken by lower token index). Reference boxes are
// centered on the token cell with the learned size head's output.
// forced_indices bypasses the ranking (finite-difference checks need a
// selection that cannot flip under perturbation).
template <typename S>
QuerySelection<S> query_selection(Tape<S>& tape, const ModelVars<S>& vars, const ModelConfig& cfg,
                                  const EncoderOut<S>& enc, const EncoderInput& input, int n_det,
                                  const std::vector<int>* forced_indices = nullptr) {
  (void)cfg;
  const int t_cur = input.tokens_per_frame;
  if (n_det > t_cur) throw std::domain_error("query_selection: n_det exceeds token count");
  auto cur = slice_rows(enc.tokens, input.current_begin(), t_cur);
  auto scores = linear(relu(linear(cur, vars.t.score_w1, vars.t.score_b1)), vars.t.score_w2,
                       vars.t.score_b2);
  auto sizes = sigmoid(linear(cur, vars.t.size_w, vars.t.size_b));

  std::vector<int> order;
  if (forced_indices != nullptr) {
    order = *forced_indices;
  } else {
    order.resize(t_cur);
    for (int i = 0; i < t_cur; ++i) order[i] = i;
    const auto& sv = scores.val();
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (sv(a, 0) != sv(b, 0)) return sv(a, 0) > sv(b, 0);
      return a < b;
    });
    order.resize(n_det);
  }

  QuerySelection<S> sel;
  sel.token_indices = order;
  sel.scores = scores;
  sel.selected_conf = sigmoid(gather_rows(scores, order));
  auto sel_sizes = gather_rows(sizes, order);

  MatX<S> centers(n_det, 2);
  for (int k = 0; k < n_det; ++k) {
    const int cell = order[k];
    const double x = input.xs[input.current_begin() + cell];
    const double y = input.ys[input.current_begin() + cell];
    centers(k, 0) = static_cast<S>(x);
    centers(k, 1) = static_cast<S>(y);
    sel.ref_boxes.push_back(BBox{x, y, static_cast<double>(sel_sizes.val()(k, 0)),
                                 static_cast<double>(sel_sizes.val()(k, 1))});
  }
  sel.selected_boxes = concat_cols<S>({leaf(tape, centers, "sel_centers"), sel_sizes});
  return sel;
}

// ---- decoder ----------------------------------------------------------

// Assembled query set in canonical layout order (denoise groups, track,
// detection). Content mixes learnable and constant rows; positions and
// references are constants.
template <typename S>
struct QuerySetInputs {
  QueryLayout layout;
  Var<S> content;   // Nq x d
  Var<S> pos;       // Nq x d positional embeddings
  Var<S> refs;      // Nq x 4 reference boxes
};

template <typename S>
struct DecoderLayerOut {
  Var<S> content;      // Nq x d
  Var<S> conf_logits;  // Nq x 1
  Var<S> conf;         // Nq x 1 sigmoid confidence
  Var<S> boxes;        // Nq x 4 center-format, sigmoid-bounded
};

template <typename S>
struct DecoderForwardOut {
  std::vector<DecoderLayerOut<S>> layers;  // one per decoder layer; back() is final
  const DecoderLayerOut<S>& final() const { return layers.back(); }
};

// Debug view of decoder attention (per layer, per head).
template <typename S>
struct DecoderTrace {
  std::vector<std::vector<Var<S>>> cross_attention;
  std::vector<std::vector<Var<S>>> self_attention;
};

template <typename S>
DecoderLayerOut<S> apply_heads(const ModelVars<S>& vars, Var<S> x, Var<S> refs) {
  DecoderLayerOut<S> out;
  out.content = x;
  out.conf_logits = linear(x, vars.t.class_w, vars.t.class_b);
  out.conf = sigmoid(out.conf_logits);
  auto offsets = linear(relu(linear(x, vars.t.box_w1, vars.t.box_b1)), vars.t.box_w2, vars.t.box_b2);
  out.boxes = sigmoid(offsets + logit(refs));
  return out;
}

template <typename S>
DecoderForwardOut<S> decoder_forward(Tape<S>& tape, const ModelVars<S>& vars,
                                     const ModelConfig& cfg, const QuerySetInputs<S>& queries,
                                     const EncoderOut<S>& enc,
                                     MaskMode mask_mode = MaskMode::Cascaded,
                                     DecoderTrace<S>* trace = nullptr) {
  (void)tape;
  DecoderForwardOut<S> out;
  if (queries.layout.total() == 0) return out;
  if (queries.layout.total() != static_cast<int>(queries.content.rows())) {
    throw std::logic_error("decoder_forward: layout does not match query count");
  }

  // A query is the sum of its content and position embeddings, so the
  // stream knows its own reference location; cross-attention keys and
  // values both carry the encoder positional embedding, so the readout
  // encodes where it looked. The box head needs both to regress offsets.
  auto x = queries.content + queries.pos;
  auto enc_keys = enc.tokens + enc.pe;
  const int total_layers = cfg.num_decoder_layers;
  for (int l = 0; l < total_layers; ++l) {
    const auto& layer = vars.t.decoder[l];
    const AttentionMask mask = build_mask(queries.layout, l, total_layers, mask_mode);

    std::vector<Var<S>> sa_trace, ca_trace;
    auto h = layer_norm(x, layer.ln_sa.gamma, layer.ln_sa.beta);
    auto hq = h + queries.pos;
    x = x + multihead_attention(layer.self_attn, hq, hq, h, &mask.visible, cfg.num_heads,
                                trace != nullptr ? &sa_trace : nullptr);

    auto h2 = layer_norm(x, layer.ln_ca.gamma, layer.ln_ca.beta);
    auto q2 = h2 + queries.pos;
    x = x + multihead_attention(layer.cross_attn, q2, enc_keys, enc_keys, nullptr, cfg.num_heads,
                                trace != nullptr ? &ca_trace : nullptr);
    if (trace != nullptr) {
      trace->self_attention.push_back(std::move(sa_trace));
      trace->cross_attention.push_back(std::move(ca_trace));
    }

    auto h3 = layer_norm(x, layer.ln_ffn.gamma, layer.ln_ffn.beta);
    x = x + ffn_forward(layer.ffn, h3);

    out.layers.push_back(apply_heads(vars, x, queries.refs));
  }
  return out;
}

// Standalone masked attention entry point used by unit tests: a single
// attention block over explicit inputs.
template <typename S>
Var<S> masked_attention(const AttentionBlockT<Var<S>>& block, Var<S> queries, Var<S> keys,
                        Var<S> values, const MaskMatrix& mask, int num_heads) {
  return multihead_attention(block, queries, keys, values, &mask, num_heads);
}

// ---- checkpoint I/O ---------------------------------------------------

template <typename S>
void save_checkpoint(ModelParams<S>& params, const std::string& path);

template <typename S>
ModelParams<S> load_checkpoint(const std::string& path);

}  // namespace qtrack
