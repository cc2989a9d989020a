#pragma once

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qtrack/metrics.hpp"
#include "qtrack/simulator.hpp"
#include "qtrack/tracker.hpp"

namespace qtrack {

// One 10-field MOTChallenge result line.
struct MotLine {
  int frame = 1;
  int id = 0;
  double left = 0, top = 0, width = 0, height = 0;
  double conf = 1.0;
  double x = -1, y = -1, z = -1;
};

// Strict 10-field parser; any other field count or a non-numeric field
// is an error naming the line.
std::vector<MotLine> parse_mot(std::istream& in, const std::string& source_name = "<stream>");
std::vector<MotLine> parse_mot_file(const std::string& path);

void write_mot(std::ostream& out, const std::vector<MotLine>& lines);
void write_mot_file(const std::string& path, const std::vector<MotLine>& lines);

// MOTChallenge ground-truth line: 6, 9 or 10 comma-separated fields
// (frame,id,left,top,w,h[,consider,class,visibility[,extra]]).
struct GtLine {
  int frame = 1;
  int id = 0;
  double left = 0, top = 0, width = 0, height = 0;
  double consider = 1.0;
  int cls = 1;
  double visibility = 1.0;
};

std::vector<GtLine> parse_mot_gt(std::istream& in, const std::string& source_name = "<stream>");
std::vector<GtLine> parse_mot_gt_file(const std::string& path);

struct GtFilter {
  bool require_consider = true;          // keep only consider != 0 entries
  std::set<int> classes;                 // empty = all classes
  double min_visibility = 0.0;           // keep entries with visibility >= this
};

// Dense frame sequence (1-based MOT frames map to slots 0..max_frame-1).
// Boxes stay in the file's pixel units; IoU is scale-free.
std::vector<EvalFrame> frames_from_gt(const std::vector<GtLine>& lines, const GtFilter& filter = {});
std::vector<EvalFrame> frames_from_mot(const std::vector<MotLine>& lines);

// Tracker output -> result lines, boxes converted to pixel ltwh.
std::vector<MotLine> results_to_mot(const std::vector<FrameResult>& results, double frame_w,
                                    double frame_h);

// Scenario ground truth -> MOT gt lines (consider=1, class=1,
// visibility = visible fraction).
std::vector<GtLine> truth_to_gt(const std::vector<FrameTruth>& truth, double frame_w,
                                double frame_h);
void write_gt_file(const std::string& path, const std::vector<GtLine>& lines);

}  // namespace qtrack
