#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace qtrack {

// Ordered query inventory. The canonical ordering everywhere in the
// library is: all denoising groups (in order), then track queries, then
// detection queries.
struct QueryLayout {
  std::vector<int> dn_group_sizes;
  int num_track = 0;
  int num_det = 0;

  int num_dn() const {
    int n = 0;
    for (int s : dn_group_sizes) n += s;
    return n;
  }
  int total() const { return num_dn() + num_track + num_det; }
  int track_begin() const { return num_dn(); }
  int det_begin() const { return num_dn() + num_track; }
};

using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// visible(i, j) == true means query j is visible to query i.
struct AttentionMask {
  MaskMatrix visible;
};

// Mask variants used by the ablation runner. Cascaded is the shipping
// mode: track rows lose sight of everything but themselves once
// layer_index >= switch_layer. Full isolates track rows at every layer.
enum class MaskMode { Cascaded, Full };

// Layer at which track queries switch from free interaction to
// self-only visibility.
inline int mask_switch_layer(int total_layers) { return total_layers / 2; }

AttentionMask build_mask(const QueryLayout& layout, int layer_index, int total_layers,
                         MaskMode mode = MaskMode::Cascaded);

// Independent rule enumeration over every (row, col) pair; returns one
// human-readable string per violated rule. Empty result means the mask
// matches the cascaded contract exactly.
std::vector<std::string> validate_mask(const AttentionMask& mask, const QueryLayout& layout,
                                       int layer_index, int total_layers);

}  // namespace qtrack
