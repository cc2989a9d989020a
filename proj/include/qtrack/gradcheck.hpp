#pragma once

#include <string>
#include <vector>

#include "qtrack/net.hpp"

namespace qtrack {

struct GradCheckGroup {
  std::string name;
  int checked = 0;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double max_rel_err = 0.0;
  double threshold = 1e-4;
  bool passed() const { return max_rel_err < threshold; }
};

// Analytic gradients of the composite loss (focal + L1 + GIoU over all
// layers plus the query-selection loss) against central finite
// differences in 64-bit, on a random scene with denoising, track and
// detection queries. Assignments and token selection are frozen so the
// checked function is smooth.
GradCheckReport gradcheck(const ModelConfig& config, std::uint64_t seed,
                          int samples_per_group = 100, double step = 1e-5);

}  // namespace qtrack
