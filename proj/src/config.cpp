#include "qtrack/config.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace qtrack {

namespace {

using Json = nlohmann::ordered_json;

// Reject unknown keys so config typos fail loudly.
void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) throw std::invalid_argument("config: unknown key '" + where + key + "'");
  }
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  if (precision != "f32" && precision != "f64") {
    throw std::invalid_argument("config: precision must be f32 or f64");
  }
  if (mask_mode != "cascaded" && mask_mode != "full") {
    throw std::invalid_argument("config: mask_mode must be cascaded or full");
  }
  model.validate();
  denoise.validate();
  tracker.validate();
  if (tracker.n_det != model.num_det_queries) {
    throw std::invalid_argument("config: tracker.n_det must equal model.num_detection_queries");
  }
  if (model.category_range != denoise.category_range) {
    throw std::invalid_argument("config: model and denoise category ranges differ");
  }
  if (train.steps < 1 || train.num_train_scenarios < 1) {
    throw std::invalid_argument("config: train.steps and num_train_scenarios must be positive");
  }
  if (train.clip_length < 1 || train.clip_length >= sim.n_frames) {
    throw std::invalid_argument("config: train.clip_length must lie in [1, sim.n_frames)");
  }
  if (train.learning_rate <= 0.0) throw std::invalid_argument("config: learning_rate must be > 0");
  if (sim.n_agents < 1 || sim.n_frames < 2) {
    throw std::invalid_argument("config: sim needs n_agents >= 1 and n_frames >= 2");
  }
  if (sim.grid_height < 2 || sim.grid_width < 2 || sim.grid_channels < 1) {
    throw std::invalid_argument("config: sim grid too small");
  }
  if (model.grid_channels != sim.grid_channels) {
    throw std::invalid_argument("config: model.grid_channels must equal sim.grid_channels");
  }
  if (model.num_det_queries > sim.grid_height * sim.grid_width) {
    throw std::invalid_argument("config: more detection queries than grid cells");
  }
}

MaskMode RunConfig::mask() const {
  return mask_mode == "full" ? MaskMode::Full : MaskMode::Cascaded;
}

std::string RunConfig::to_json() const {
  Json j;
  j["seed"] = seed;
  j["precision"] = precision;
  j["mask_mode"] = mask_mode;
  j["denoise_enabled"] = denoise_enabled;
  j["model"] = {{"hidden_dim", model.hidden_dim},
                {"num_heads", model.num_heads},
                {"num_encoder_layers", model.num_encoder_layers},
                {"num_decoder_layers", model.num_decoder_layers},
                {"ffn_dim", model.ffn_dim},
                {"num_detection_queries", model.num_det_queries},
                {"category_noise_range", model.category_range},
                {"grid_channels", model.grid_channels},
                {"dropout_rate", model.dropout}};
  j["train"] = {{"learning_rate", train.learning_rate},
                {"lr_decay_step", train.lr_decay_step},
                {"lr_decay_rate", train.lr_decay_rate},
                {"steps", train.steps},
                {"clip_length", train.clip_length},
                {"weight_decay", train.weight_decay},
                {"track_drop_probability", train.track_drop_probability},
                {"track_source_min_iou", train.track_source_min_iou},
                {"rematch_aux_layers", train.rematch_aux_layers},
                {"num_train_scenarios", train.num_train_scenarios}};
  j["loss"] = {{"lambda_focal", loss.lambda_focal}, {"lambda_l1", loss.lambda_l1},
               {"lambda_iou", loss.lambda_iou},     {"lambda_track", loss.lambda_track},
               {"lambda_aux", loss.lambda_aux},     {"lambda_inter", loss.lambda_inter},
               {"focal_alpha", loss.focal_alpha},   {"focal_gamma", loss.focal_gamma}};
  j["denoise"] = {{"lambda_r", denoise.lambda_r},
                  {"lambda_n", denoise.lambda_n},
                  {"lambda_c", denoise.lambda_c},
                  {"tau_c", denoise.tau_c},
                  {"conditional_probability", denoise.p_cond},
                  {"category_noise_range", denoise.category_range},
                  {"max_denoise_queries", denoise.max_positive_total}};
  j["tracker"] = {{"lambda_d", tracker.lambda_d},
                  {"lambda_t", tracker.lambda_t},
                  {"patience", tracker.patience},
                  {"suppression_iou", tracker.suppression_iou}};
  j["sim"] = {{"grid_height", sim.grid_height},
              {"grid_width", sim.grid_width},
              {"grid_channels", sim.grid_channels},
              {"n_agents", sim.n_agents},
              {"n_frames", sim.n_frames},
              {"crossing", sim.crossing},
              {"occlusion_iou_threshold", sim.occlusion_iou_threshold},
              {"miss_probability", sim.miss_probability},
              {"jitter_sigma", sim.jitter_sigma},
              {"frame_width", sim.frame_width},
              {"frame_height", sim.frame_height}};
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  RunConfig c;
  check_keys(j, {"seed", "precision", "mask_mode", "denoise_enabled", "model", "train", "loss",
                 "denoise", "tracker", "sim"},
             "");
  maybe(j, "seed", c.seed);
  maybe(j, "precision", c.precision);
  maybe(j, "mask_mode", c.mask_mode);
  maybe(j, "denoise_enabled", c.denoise_enabled);
  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m,
               {"hidden_dim", "num_heads", "num_encoder_layers", "num_decoder_layers", "ffn_dim",
                "num_detection_queries", "category_noise_range", "grid_channels", "dropout_rate"},
               "model.");
    maybe(m, "hidden_dim", c.model.hidden_dim);
    maybe(m, "num_heads", c.model.num_heads);
    maybe(m, "num_encoder_layers", c.model.num_encoder_layers);
    maybe(m, "num_decoder_layers", c.model.num_decoder_layers);
    maybe(m, "ffn_dim", c.model.ffn_dim);
    maybe(m, "num_detection_queries", c.model.num_det_queries);
    maybe(m, "category_noise_range", c.model.category_range);
    maybe(m, "grid_channels", c.model.grid_channels);
    maybe(m, "dropout_rate", c.model.dropout);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t,
               {"learning_rate", "lr_decay_step", "lr_decay_rate", "steps", "clip_length",
                "weight_decay", "track_drop_probability", "track_source_min_iou",
                "rematch_aux_layers", "num_train_scenarios"},
               "train.");
    maybe(t, "learning_rate", c.train.learning_rate);
    maybe(t, "lr_decay_step", c.train.lr_decay_step);
    maybe(t, "lr_decay_rate", c.train.lr_decay_rate);
    maybe(t, "steps", c.train.steps);
    maybe(t, "clip_length", c.train.clip_length);
    maybe(t, "weight_decay", c.train.weight_decay);
    maybe(t, "track_drop_probability", c.train.track_drop_probability);
    maybe(t, "track_source_min_iou", c.train.track_source_min_iou);
    maybe(t, "rematch_aux_layers", c.train.rematch_aux_layers);
    maybe(t, "num_train_scenarios", c.train.num_train_scenarios);
  }
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    check_keys(l,
               {"lambda_focal", "lambda_l1", "lambda_iou", "lambda_track", "lambda_aux",
                "lambda_inter", "focal_alpha", "focal_gamma"},
               "loss.");
    maybe(l, "lambda_focal", c.loss.lambda_focal);
    maybe(l, "lambda_l1", c.loss.lambda_l1);
    maybe(l, "lambda_iou", c.loss.lambda_iou);
    maybe(l, "lambda_track", c.loss.lambda_track);
    maybe(l, "lambda_aux", c.loss.lambda_aux);
    maybe(l, "lambda_inter", c.loss.lambda_inter);
    maybe(l, "focal_alpha", c.loss.focal_alpha);
    maybe(l, "focal_gamma", c.loss.focal_gamma);
  }
  if (j.contains("denoise")) {
    const auto& d = j.at("denoise");
    check_keys(d,
               {"lambda_r", "lambda_n", "lambda_c", "tau_c", "conditional_probability",
                "category_noise_range", "max_denoise_queries"},
               "denoise.");
    maybe(d, "lambda_r", c.denoise.lambda_r);
    maybe(d, "lambda_n", c.denoise.lambda_n);
    maybe(d, "lambda_c", c.denoise.lambda_c);
    maybe(d, "tau_c", c.denoise.tau_c);
    maybe(d, "conditional_probability", c.denoise.p_cond);
    maybe(d, "category_noise_range", c.denoise.category_range);
    maybe(d, "max_denoise_queries", c.denoise.max_positive_total);
  }
  if (j.contains("tracker")) {
    const auto& t = j.at("tracker");
    check_keys(t, {"lambda_d", "lambda_t", "patience", "suppression_iou"}, "tracker.");
    maybe(t, "lambda_d", c.tracker.lambda_d);
    maybe(t, "lambda_t", c.tracker.lambda_t);
    maybe(t, "patience", c.tracker.patience);
    maybe(t, "suppression_iou", c.tracker.suppression_iou);
  }
  if (j.contains("sim")) {
    const auto& s = j.at("sim");
    check_keys(s,
               {"grid_height", "grid_width", "grid_channels", "n_agents", "n_frames", "crossing",
                "occlusion_iou_threshold", "miss_probability", "jitter_sigma", "frame_width",
                "frame_height"},
               "sim.");
    maybe(s, "grid_height", c.sim.grid_height);
    maybe(s, "grid_width", c.sim.grid_width);
    maybe(s, "grid_channels", c.sim.grid_channels);
    maybe(s, "n_agents", c.sim.n_agents);
    maybe(s, "n_frames", c.sim.n_frames);
    maybe(s, "crossing", c.sim.crossing);
    maybe(s, "occlusion_iou_threshold", c.sim.occlusion_iou_threshold);
    maybe(s, "miss_probability", c.sim.miss_probability);
    maybe(s, "jitter_sigma", c.sim.jitter_sigma);
    maybe(s, "frame_width", c.sim.frame_width);
    maybe(s, "frame_height", c.sim.frame_height);
  }
  c.tracker.n_det = c.model.num_det_queries;
  c.denoise.category_range = c.model.category_range;
  c.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return from_json(text);
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("config: cannot open " + path + " for writing");
  os << cfg.to_json();
}

}  // namespace qtrack
