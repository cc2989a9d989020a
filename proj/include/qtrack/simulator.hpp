#pragma once

#include <string>
#include <vector>

#include "qtrack/features.hpp"
#include "qtrack/geometry.hpp"
#include "qtrack/rng.hpp"

namespace qtrack {

// Scripted constant-velocity actor. Lower depth = nearer the camera.
struct Agent {
  int id = 0;
  double cx0 = 0.0, cy0 = 0.0;
  double vx = 0.0, vy = 0.0;  // per frame, normalized units
  double w = 0.1, h = 0.1;
  int depth = 0;
  std::uint64_t appearance_seed = 0;

  BBox box_at(int frame) const {
    return BBox{cx0 + vx * frame, cy0 + vy * frame, w, h};
  }
};

struct GridSpec {
  int height = 16;
  int width = 16;
  int channels = 4;
};

struct Scenario {
  std::uint64_t seed = 0;
  int n_frames = 1;
  GridSpec grid;
  double occlusion_iou_threshold = 0.4;
  double miss_probability = 1.0;  // oracle detector misses occluded agents at this rate
  double jitter_sigma = 0.0;
  std::vector<Agent> agents;
};

enum class Visibility { Visible, Occluded, Absent };

struct TruthEntry {
  int agent_id = 0;
  BBox box;
  Visibility visibility = Visibility::Visible;
  double visible_fraction = 1.0;
};

// Entries for agents present in the frame (center inside the frame);
// absent agents are excluded.
struct FrameTruth {
  int frame = 0;
  std::vector<TruthEntry> entries;
};

struct Detection {
  BBox box;
  double confidence = 1.0;
};

Scenario generate_scenario(std::uint64_t seed, int n_agents, int n_frames, bool crossing,
                           const GridSpec& grid = {});

std::vector<FrameTruth> ground_truth(const Scenario& scenario);

FeatureGrid render_features(const Scenario& scenario, int frame);

std::vector<Detection> oracle_detections(const Scenario& scenario, int frame, Rng& rng);

std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const std::string& text);
void save_scenario(const Scenario& scenario, const std::string& path);
Scenario load_scenario(const std::string& path);

}  // namespace qtrack
