#pragma once

#include <Eigen/Core>
#include <vector>

namespace qtrack {

// Rendered scene features for one frame: one token per grid cell in
// row-major order, plus each token's normalized center coordinates for
// positional embedding. Channels play the role of appearance features.
struct FeatureGrid {
  int height = 0;
  int width = 0;
  int channels = 0;
  Eigen::MatrixXd data;  // (height*width) x channels

  int tokens() const { return height * width; }
  double cell_x(int cell) const { return (cell % width + 0.5) / width; }
  double cell_y(int cell) const { return (cell / width + 0.5) / height; }
};

}  // namespace qtrack
