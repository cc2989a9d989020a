#pragma once

#include <utility>
#include <vector>

#include "qtrack/geometry.hpp"
#include "qtrack/rng.hpp"

namespace qtrack {

struct DenoiseParams {
  double lambda_r = 0.2;       // positive noise range
  double lambda_n = 0.4;       // negative noise band upper edge
  double lambda_c = 0.4;       // conditional mixing weight
  double tau_c = 0.4;          // IoU trigger for conditional noise
  double p_cond = 0.6;         // probability of taking the conditional path
  int category_range = 20;     // labels drawn uniformly from [0, category_range]
  int max_positive_total = 200;

  void validate() const;
};

enum class NoisePolarity { Positive, Negative };
enum class NoiseKind { Random, Conditional };
enum class ContentSource { MappedLabelEmbedding, TrajectoryEmbedding };

struct DenoiseQuerySpec {
  BBox noised_box;
  int noised_label = 0;
  NoisePolarity polarity = NoisePolarity::Positive;
  NoiseKind kind = NoiseKind::Random;
  int gt_index = -1;      // ground-truth object this spec supervises against
  ContentSource content_source = ContentSource::MappedLabelEmbedding;
  int track_index = -1;   // valid when content_source == TrajectoryEmbedding
};

// One group holds one positive and one negative spec per ground-truth
// object, positives first.
struct DenoiseGroup {
  std::vector<DenoiseQuerySpec> specs;
};

struct DenoiseSet {
  std::vector<DenoiseGroup> groups;
  int group_count() const { return static_cast<int>(groups.size()); }
  int total_queries() const;
  std::vector<int> group_sizes() const;
};

// Existing trajectory that supervises ground-truth object gt_index.
struct TrackCorrespondence {
  int track_index = -1;
  int gt_index = -1;
};

// cap // num_gt, clamped below at 1; zero groups for empty ground truth.
int group_count(int num_gt, int max_positive_total = 200);

// Uniform label in [0, category_range].
int perturb_category(Rng& rng, int category_range);

std::pair<BBox, NoiseKind> make_positive(const BBox& b,
                                         const std::vector<std::pair<BBox, double>>& neighbors,
                                         const DenoiseParams& params, Rng& rng);

BBox make_negative(const BBox& b, const DenoiseParams& params, Rng& rng);

DenoiseSet generate_denoise_set(const std::vector<BBox>& gt_boxes,
                                const std::vector<TrackCorrespondence>& active_tracks,
                                const DenoiseParams& params, Rng& rng);

}  // namespace qtrack
