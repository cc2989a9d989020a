#pragma once

#include <cstdint>
#include <string>

#include "qtrack/denoise.hpp"
#include "qtrack/net.hpp"
#include "qtrack/setpred.hpp"
#include "qtrack/simulator.hpp"
#include "qtrack/tracker.hpp"

namespace qtrack {

struct TrainSection {
  double learning_rate = 2e-4;
  int lr_decay_step = 400;
  double lr_decay_rate = 0.1;
  int steps = 800;            // optimizer updates (clip passes each count once)
  int clip_length = 3;        // supervised frames per sampled clip
  double weight_decay = 1e-4;
  double track_drop_probability = 0.1;
  double track_source_min_iou = 0.1;
  bool rematch_aux_layers = false;
  int num_train_scenarios = 200;
};

struct SimSection {
  int grid_height = 16;
  int grid_width = 16;
  int grid_channels = 4;
  int n_agents = 3;
  int n_frames = 24;
  bool crossing = true;
  double occlusion_iou_threshold = 0.4;
  double miss_probability = 1.0;
  double jitter_sigma = 0.01;
  double frame_width = 1000.0;
  double frame_height = 1000.0;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string precision = "f32";  // f32 for training, f64 for verification
  std::string mask_mode = "cascaded";
  bool denoise_enabled = true;
  ModelConfig model;
  TrainSection train;
  LossWeights loss;
  DenoiseParams denoise;
  TrackerConfig tracker;
  SimSection sim;

  void validate() const;
  MaskMode mask() const;
  std::string to_json() const;

  static RunConfig from_json(const std::string& text);
  static RunConfig from_file(const std::string& path);
};

void save_config(const RunConfig& cfg, const std::string& path);

}  // namespace qtrack
