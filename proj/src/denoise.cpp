#include "qtrack/denoise.hpp"

#include <algorithm>
#include <stdexcept>

namespace qtrack {

void DenoiseParams::validate() const {
  if (!(lambda_r > 0.0 && lambda_r < lambda_n && lambda_n <= 1.0)) {
    throw std::domain_error("DenoiseParams: need 0 < lambda_r < lambda_n <= 1");
  }
  if (lambda_c < 0.0 || lambda_c > 1.0) throw std::domain_error("DenoiseParams: lambda_c outside [0,1]");
  if (p_cond < 0.0 || p_cond > 1.0) throw std::domain_error("DenoiseParams: p_cond outside [0,1]");
  if (!(tau_c > 0.0 && tau_c < 1.0)) throw std::domain_error("DenoiseParams: tau_c outside (0,1)");
  if (category_range < 0) throw std::domain_error("DenoiseParams: category_range < 0");
  if (max_positive_total < 1) throw std::domain_error("DenoiseParams: max_positive_total < 1");
}

int DenoiseSet::total_queries() const {
  int n = 0;
  for (const auto& g : groups) n += static_cast<int>(g.specs.size());
  return n;
}

std::vector<int> DenoiseSet::group_sizes() const {
  std::vector<int> sizes;
  sizes.reserve(groups.size());
  for (const auto& g : groups) sizes.push_back(static_cast<int>(g.specs.size()));
  return sizes;
}

int group_count(int num_gt, int max_positive_total) {
  if (num_gt < 0) throw std::domain_error("group_count: num_gt < 0");
  if (num_gt == 0) return 0;
  return std::max(1, max_positive_total / num_gt);
}

int perturb_category(Rng& rng, int category_range) {
  if (category_range < 0) throw std::domain_error("perturb_category: category_range < 0");
  return uniform_int(rng, 0, category_range);
}

std::pair<BBox, NoiseKind> make_positive(const BBox& b,
                                         const std::vector<std::pair<BBox, double>>& neighbors,
                                         const DenoiseParams& params, Rng& rng) {
  std::vector<int> qualifying;
  for (int i = 0; i < static_cast<int>(neighbors.size()); ++i) {
    if (neighbors[i].second > params.tau_c) qualifying.push_back(i);
  }
  if (!qualifying.empty() && uniform_real(rng, 0.0, 1.0) <= params.p_cond) {
    const int pick = qualifying[uniform_index(rng, qualifying.size())];
    const BBox mixed = apply_conditional_noise(b, neighbors[pick].first, params.lambda_c);
    return {clamp_to_frame(mixed), NoiseKind::Conditional};
  }
  NoiseVector n;
  n.nx = uniform_real(rng, -params.lambda_r, params.lambda_r);
  n.ny = uniform_real(rng, -params.lambda_r, params.lambda_r);
  n.nw = uniform_real(rng, -params.lambda_r, params.lambda_r);
  n.nh = uniform_real(rng, -params.lambda_r, params.lambda_r);
  return {clamp_to_frame(apply_random_noise(b, n)), NoiseKind::Random};
}

BBox make_negative(const BBox& b, const DenoiseParams& params, Rng& rng) {
  // Magnitude in (lambda_r, lambda_n], sign uniform, per component.
  auto draw = [&](Rng& r) {
    const double mag = params.lambda_n - uniform_real(r, 0.0, 1.0) * (params.lambda_n - params.lambda_r);
    return bernoulli(r, 0.5) ? mag : -mag;
  };
  NoiseVector n;
  n.nx = draw(rng);
  n.ny = draw(rng);
  n.nw = draw(rng);
  n.nh = draw(rng);
  return clamp_to_frame(apply_random_noise(b, n));
}

DenoiseSet generate_denoise_set(const std::vector<BBox>& gt_boxes,
                                const std::vector<TrackCorrespondence>& active_tracks,
                                const DenoiseParams& params, Rng& rng) {
  params.validate();
  const int num_gt = static_cast<int>(gt_boxes.size());

  std::vector<int> track_of_gt(num_gt, -1);
  for (const auto& tc : active_tracks) {
    if (tc.gt_index < 0 || tc.gt_index >= num_gt) {
      throw std::domain_error("generate_denoise_set: correspondence gt_index out of range");
    }
    if (track_of_gt[tc.gt_index] != -1) {
      throw std::domain_error("generate_denoise_set: duplicate gt_index in correspondence");
    }
    track_of_gt[tc.gt_index] = tc.track_index;
  }

  // Neighbor IoU table is noise-independent; compute it once.
  std::vector<std::vector<std::pair<BBox, double>>> neighbors(num_gt);
  for (int i = 0; i < num_gt; ++i) {
    for (int j = 0; j < num_gt; ++j) {
      if (j == i) continue;
      neighbors[i].emplace_back(gt_boxes[j], iou(gt_boxes[i], gt_boxes[j]));
    }
  }

  DenoiseSet set;
  const int n_groups = group_count(num_gt, params.max_positive_total);
  set.groups.reserve(n_groups);
  for (int g = 0; g < n_groups; ++g) {
    DenoiseGroup group;
    group.specs.reserve(2 * num_gt);
    std::vector<DenoiseQuerySpec> negatives;
    negatives.reserve(num_gt);
    for (int i = 0; i < num_gt; ++i) {
      DenoiseQuerySpec pos;
      pos.gt_index = i;
      pos.noised_label = perturb_category(rng, params.category_range);
      if (track_of_gt[i] != -1) {
        pos.content_source = ContentSource::TrajectoryEmbedding;
        pos.track_index = track_of_gt[i];
      }
      auto [box, kind] = make_positive(gt_boxes[i], neighbors[i], params, rng);
      pos.noised_box = box;
      pos.kind = kind;
      pos.polarity = NoisePolarity::Positive;

      DenoiseQuerySpec neg = pos;
      neg.polarity = NoisePolarity::Negative;
      neg.kind = NoiseKind::Random;
      neg.noised_box = make_negative(gt_boxes[i], params, rng);

      group.specs.push_back(pos);
      negatives.push_back(neg);
    }
    group.specs.insert(group.specs.end(), negatives.begin(), negatives.end());
    set.groups.push_back(std::move(group));
  }
  return set;
}

}  // namespace qtrack
