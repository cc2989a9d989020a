#include "qtrack/mask.hpp"

#include <stdexcept>

namespace qtrack {

namespace {

enum class QueryKind { Denoise, Track, Det };

struct QueryClass {
  QueryKind kind;
  int group = -1;  // denoising group id, -1 otherwise
};

std::vector<QueryClass> classify(const QueryLayout& layout) {
  std::vector<QueryClass> cls;
  cls.reserve(layout.total());
  for (int g = 0; g < static_cast<int>(layout.dn_group_sizes.size()); ++g) {
    for (int k = 0; k < layout.dn_group_sizes[g]; ++k) cls.push_back({QueryKind::Denoise, g});
  }
  for (int i = 0; i < layout.num_track; ++i) cls.push_back({QueryKind::Track, -1});
  for (int i = 0; i < layout.num_det; ++i) cls.push_back({QueryKind::Det, -1});
  return cls;
}

}  // namespace

AttentionMask build_mask(const QueryLayout& layout, int layer_index, int total_layers,
                         MaskMode mode) {
  if (layer_index < 0 || layer_index >= total_layers) {
    throw std::domain_error("build_mask: layer_index out of range");
  }
  const int n = layout.total();
  const bool track_isolated =
      mode == MaskMode::Full || layer_index >= mask_switch_layer(total_layers);

  AttentionMask mask;
  mask.visible = MaskMatrix::Constant(n, n, false);
  const auto cls = classify(layout);

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      bool v = false;
      switch (cls[i].kind) {
        case QueryKind::Denoise:
          v = cls[j].kind == QueryKind::Denoise && cls[j].group == cls[i].group;
          break;
        case QueryKind::Track:
          if (track_isolated) {
            v = i == j;
          } else {
            v = cls[j].kind == QueryKind::Track || cls[j].kind == QueryKind::Det;
          }
          break;
        case QueryKind::Det:
          v = cls[j].kind == QueryKind::Track || cls[j].kind == QueryKind::Det;
          break;
      }
      mask.visible(i, j) = v;
    }
  }
  return mask;
}

std::vector<std::string> validate_mask(const AttentionMask& mask, const QueryLayout& layout,
                                       int layer_index, int total_layers) {
  const int n = layout.total();
  if (mask.visible.rows() != n || mask.visible.cols() != n) {
    throw std::domain_error("validate_mask: mask dimensions do not match layout");
  }
  if (layer_index < 0 || layer_index >= total_layers) {
    throw std::domain_error("validate_mask: layer_index out of range");
  }

  const auto cls = classify(layout);
  const bool late = layer_index >= mask_switch_layer(total_layers);
  std::vector<std::string> violations;
  auto entry = [](int i, int j) {
    return "entry (" + std::to_string(i) + "," + std::to_string(j) + ")";
  };

  for (int i = 0; i < n; ++i) {
    if (!mask.visible(i, i)) {
      violations.push_back("row " + std::to_string(i) + ": query cannot see itself");
    }
    for (int j = 0; j < n; ++j) {
      const bool v = mask.visible(i, j);
      const bool row_dn = cls[i].kind == QueryKind::Denoise;
      const bool col_dn = cls[j].kind == QueryKind::Denoise;

      // No visibility may cross the denoising boundary in either direction.
      if (v && row_dn != col_dn) {
        violations.push_back(entry(i, j) + ": crosses the denoising boundary");
        continue;
      }
      if (row_dn && col_dn) {
        const bool same = cls[i].group == cls[j].group;
        if (v && !same) violations.push_back(entry(i, j) + ": denoising groups must be isolated");
        if (!v && same) violations.push_back(entry(i, j) + ": own denoising group must be visible");
        continue;
      }
      if (row_dn || col_dn) {
        continue;  // non-visible cross entries already allowed
      }

      // Remaining rows/cols are track or detection queries.
      bool expect;
      if (cls[i].kind == QueryKind::Track && late) {
        expect = i == j;
      } else {
        expect = true;  // early track rows and all det rows see every track/det column
      }
      if (v != expect) {
        violations.push_back(entry(i, j) + (expect ? ": must be visible" : ": must be invisible"));
      }
    }
  }
  return violations;
}

}  // namespace qtrack
