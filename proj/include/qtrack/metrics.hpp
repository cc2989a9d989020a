#pragma once

#include <array>
#include <string>
#include <vector>

#include "qtrack/geometry.hpp"

namespace qtrack {

// One frame of identities for evaluation. Sequences are dense vectors of
// frames; empty frames still occupy a slot so per-frame averages divide
// by the true sequence length.
struct EvalFrame {
  std::vector<std::pair<int, BBox>> boxes;  // (id, box)
};

struct ClearMotCounts {
  int fp = 0;
  int fn = 0;
  int idsw = 0;
  long total_gt = 0;
  double mota() const {
    if (total_gt == 0) return fp == 0 ? 1.0 : -static_cast<double>(fp);
    return 1.0 - static_cast<double>(fp + fn + idsw) / static_cast<double>(total_gt);
  }
};

struct IdCounts {
  long idtp = 0;
  long idfp = 0;
  long idfn = 0;
  double idf1() const {
    const long denom = 2 * idtp + idfp + idfn;
    return denom == 0 ? 1.0 : 2.0 * static_cast<double>(idtp) / static_cast<double>(denom);
  }
};

struct SequenceEval {
  std::string name;
  ClearMotCounts clear;
  IdCounts id;
};

struct EvalReport {
  std::vector<SequenceEval> sequences;
  ClearMotCounts clear;  // aggregated
  IdCounts id;
  double mota() const { return clear.mota(); }
  double idf1() const { return id.idf1(); }
};

// Frame-by-frame CLEAR procedure: correspondences carry forward while
// still above the IoU threshold, the remainder is Hungarian-matched on
// (1 - IoU), and FP / FN / IDSW are counted per frame.
ClearMotCounts clear_mot(const std::vector<EvalFrame>& gt, const std::vector<EvalFrame>& pred,
                         double iou_match_threshold = 0.5);

// Global trajectory-level bipartite matching maximizing identity-matched
// frames (IDTP), with per-frame hits at the same IoU threshold.
IdCounts idf1_counts(const std::vector<EvalFrame>& gt, const std::vector<EvalFrame>& pred,
                     double iou_match_threshold = 0.5);

inline double idf1(const std::vector<EvalFrame>& gt, const std::vector<EvalFrame>& pred,
                   double iou_match_threshold = 0.5) {
  return idf1_counts(gt, pred, iou_match_threshold).idf1();
}

EvalReport evaluate_sequences(const std::vector<std::string>& names,
                              const std::vector<std::vector<EvalFrame>>& gt,
                              const std::vector<std::vector<EvalFrame>>& pred,
                              double iou_match_threshold = 0.5);

// ---- crowdedness ---------------------------------------------------------

// IoU bins (0.1,0.4], (0.4,0.5], ..., (0.8,0.9], (0.9,1]; pairs at or
// below 0.1 are not counted.
constexpr int kCrowdBins = 7;
extern const std::array<double, kCrowdBins> kCrowdBinLowerEdges;

struct CrowdCounts {
  std::array<long, kCrowdBins> bins{};
  long frames = 0;
  std::array<double, kCrowdBins> per_frame_average() const {
    std::array<double, kCrowdBins> avg{};
    for (int i = 0; i < kCrowdBins; ++i) {
      avg[i] = frames == 0 ? 0.0 : static_cast<double>(bins[i]) / static_cast<double>(frames);
    }
    return avg;
  }
};

struct CrowdSequence {
  std::string name;
  std::vector<EvalFrame> frames;
};

struct CrowdHistogram {
  std::vector<std::pair<std::string, CrowdCounts>> per_sequence;
  CrowdCounts overall;
};

CrowdHistogram crowdedness(const std::vector<CrowdSequence>& sequences);

}  // namespace qtrack
