#include "qtrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qtrack {

namespace {

void require_valid(const BBox& b, const char* who) {
  if (!(b.w > 0.0) || !(b.h > 0.0)) {
    throw std::domain_error(std::string(who) + ": degenerate box (w or h <= 0)");
  }
}

double intersection_area(const BBox& a, const BBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

}  // namespace

double iou(const BBox& a, const BBox& b) {
  require_valid(a, "iou");
  require_valid(b, "iou");
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

double giou(const BBox& a, const BBox& b) {
  require_valid(a, "giou");
  require_valid(b, "giou");
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  const double ew = std::max(a.right(), b.right()) - std::min(a.left(), b.left());
  const double eh = std::max(a.bottom(), b.bottom()) - std::min(a.top(), b.top());
  const double enc = ew * eh;
  return inter / uni - (enc - uni) / enc;
}

BBox apply_random_noise(const BBox& b, const NoiseVector& n) {
  return BBox{b.cx * (1.0 + n.nx), b.cy * (1.0 + n.ny), b.w * (1.0 + n.nw), b.h * (1.0 + n.nh)};
}

BBox apply_conditional_noise(const BBox& b, const BBox& neighbor, double lambda_c) {
  if (lambda_c < 0.0 || lambda_c > 1.0) {
    throw std::domain_error("apply_conditional_noise: lambda_c outside [0,1]");
  }
  const double m = 1.0 - lambda_c;
  return BBox{lambda_c * b.cx + m * neighbor.cx, lambda_c * b.cy + m * neighbor.cy,
              lambda_c * b.w + m * neighbor.w, lambda_c * b.h + m * neighbor.h};
}

BBox clamp_to_frame(const BBox& b, double min_size) {
  // Exact no-op when the box already satisfies every constraint.
  if (b.left() >= 0.0 && b.right() <= 1.0 && b.top() >= 0.0 && b.bottom() <= 1.0 &&
      b.w >= min_size && b.h >= min_size) {
    return b;
  }
  const double cx = std::clamp(b.cx, 0.0, 1.0);
  const double cy = std::clamp(b.cy, 0.0, 1.0);
  double l = std::clamp(cx - 0.5 * b.w, 0.0, 1.0);
  double r = std::clamp(cx + 0.5 * b.w, 0.0, 1.0);
  double t = std::clamp(cy - 0.5 * b.h, 0.0, 1.0);
  double bo = std::clamp(cy + 0.5 * b.h, 0.0, 1.0);
  BBox out{0.5 * (l + r), 0.5 * (t + bo), r - l, bo - t};
  if (out.w < min_size) {
    out.w = min_size;
    out.cx = std::clamp(out.cx, 0.5 * min_size, 1.0 - 0.5 * min_size);
  }
  if (out.h < min_size) {
    out.h = min_size;
    out.cy = std::clamp(out.cy, 0.5 * min_size, 1.0 - 0.5 * min_size);
  }
  return out;
}

BBox ltwh_to_center(double left, double top, double width, double height) {
  return BBox{left + 0.5 * width, top + 0.5 * height, width, height};
}

PixelBox center_to_pixel_ltwh(const BBox& b, double frame_w, double frame_h) {
  if (frame_w <= 0.0 || frame_h <= 0.0) {
    throw std::domain_error("center_to_pixel_ltwh: non-positive frame dimensions");
  }
  return PixelBox{b.left() * frame_w, b.top() * frame_h, b.w * frame_w, b.h * frame_h};
}

BBox pixel_ltwh_to_center(const PixelBox& p, double frame_w, double frame_h) {
  if (frame_w <= 0.0 || frame_h <= 0.0) {
    throw std::domain_error("pixel_ltwh_to_center: non-positive frame dimensions");
  }
  return BBox{(p.left + 0.5 * p.width) / frame_w, (p.top + 0.5 * p.height) / frame_h,
              p.width / frame_w, p.height / frame_h};
}

}  // namespace qtrack
