#pragma once

#include <stdexcept>

namespace qtrack {

// Normalized center-format box. All internal geometry works in this
// format; pixel corner formats exist only at the MOT file boundary.
struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double left() const { return cx - 0.5 * w; }
  double right() const { return cx + 0.5 * w; }
  double top() const { return cy - 0.5 * h; }
  double bottom() const { return cy + 0.5 * h; }
  double area() const { return w * h; }
  bool valid() const { return w > 0.0 && h > 0.0; }
};

// Per-coordinate multiplicative jitter factors.
struct NoiseVector {
  double nx = 0.0;
  double ny = 0.0;
  double nw = 0.0;
  double nh = 0.0;
};

// Corner-format box in pixel units (MOT file convention).
struct PixelBox {
  double left = 0.0;
  double top = 0.0;
  double width = 0.0;
  double height = 0.0;
};

constexpr double kMinBoxSize = 1e-4;

double iou(const BBox& a, const BBox& b);

// IoU minus the normalized empty area of the smallest enclosing box.
// Range (-1, 1]; equals iou exactly when the enclosing box is the union.
double giou(const BBox& a, const BBox& b);

// b_c <- b_c * (1 + n_c), per coordinate. No clamping here; callers clamp
// afterwards so the pure formula stays testable.
BBox apply_random_noise(const BBox& b, const NoiseVector& n);

// Element-wise mix lambda_c * b + (1 - lambda_c) * neighbor.
BBox apply_conditional_noise(const BBox& b, const BBox& neighbor, double lambda_c);

// Clamp the center into [0,1], clip the edges to the frame, re-center,
// and floor width/height at min_size.
BBox clamp_to_frame(const BBox& b, double min_size = kMinBoxSize);

BBox ltwh_to_center(double left, double top, double width, double height);
PixelBox center_to_pixel_ltwh(const BBox& b, double frame_w, double frame_h);
BBox pixel_ltwh_to_center(const PixelBox& p, double frame_w, double frame_h);

}  // namespace qtrack
