#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>

#include "qtrack/metrics.hpp"
#include "qtrack/rng.hpp"

using namespace qtrack;

namespace {

BBox at(double cx, double cy, double s = 0.1) { return BBox{cx, cy, s, s}; }

// Straight-line two-track fixture over n frames.
std::vector<EvalFrame> two_tracks(int n, int id_a, int id_b) {
  std::vector<EvalFrame> frames(n);
  for (int f = 0; f < n; ++f) {
    frames[f].boxes.emplace_back(id_a, at(0.2 + 0.01 * f, 0.3));
    frames[f].boxes.emplace_back(id_b, at(0.7 - 0.01 * f, 0.6));
  }
  return frames;
}

}  // namespace

TEST_CASE("perfect tracking scores MOTA 1 and IDF1 1") {
  auto gt = two_tracks(10, 1, 2);
  auto counts = clear_mot(gt, gt);
  CHECK(counts.mota() == doctest::Approx(1.0));
  CHECK(counts.fp == 0);
  CHECK(counts.fn == 0);
  CHECK(counts.idsw == 0);
  CHECK(idf1(gt, gt) == doctest::Approx(1.0));
}

TEST_CASE("MOTA identity from hand-built errors") {
  // 10 gt objects total: 5 frames x 2 tracks
  auto gt = two_tracks(5, 1, 2);
  auto pred = gt;
  // one FP in frame 0
  pred[0].boxes.emplace_back(99, at(0.9, 0.9));
  // two FN: drop both entries of frame 1... that's 2 FN
  pred[1].boxes.clear();
  // one IDSW: from frame 3 on, track 1 is reported under a new id
  for (int f = 3; f < 5; ++f) pred[f].boxes[0].first = 5;
  auto counts = clear_mot(gt, pred);
  CHECK(counts.total_gt == 10);
  CHECK(counts.fp == 1);
  CHECK(counts.fn == 2);
  CHECK(counts.idsw == 1);
  CHECK(counts.mota() == doctest::Approx(0.6));
}

TEST_CASE("a mid-sequence identity change counts exactly one switch") {
  auto gt = two_tracks(8, 1, 2);
  auto pred = gt;
  for (int f = 4; f < 8; ++f) pred[f].boxes[0].first = 7;  // A then B
  auto counts = clear_mot(gt, pred);
  CHECK(counts.idsw == 1);
  CHECK(counts.fp == 0);
  CHECK(counts.fn == 0);
}

TEST_CASE("clear_mot is invariant to bijective id renaming") {
  Rng rng = substream(81, 0);
  auto gt = two_tracks(12, 1, 2);
  std::vector<EvalFrame> pred = gt;
  // perturb one frame to create churn
  pred[5].boxes[0].second.cx += 0.2;
  auto base = clear_mot(gt, pred);
  // rename prediction ids with a bijection
  std::map<int, int> rename{{1, 31}, {2, 17}};
  auto renamed = pred;
  for (auto& frame : renamed) {
    for (auto& [id, box] : frame.boxes) id = rename.at(id);
  }
  auto after = clear_mot(gt, renamed);
  CHECK(after.fp == base.fp);
  CHECK(after.fn == base.fn);
  CHECK(after.idsw == base.idsw);
}

TEST_CASE("duplicate ids within a frame are rejected") {
  std::vector<EvalFrame> bad(1);
  bad[0].boxes.emplace_back(1, at(0.2, 0.2));
  bad[0].boxes.emplace_back(1, at(0.8, 0.8));
  CHECK_THROWS_AS(clear_mot(bad, bad), std::invalid_argument);
}

TEST_CASE("idf1 on small instances equals the exhaustive pairing oracle") {
  Rng rng = substream(82, 0);
  for (int trial = 0; trial < 60; ++trial) {
    // up to 3 gt tracks and 3 pred tracks over 6 frames with random boxes
    const int n_frames = 6;
    const int n_gt = 1 + static_cast<int>(uniform_index(rng, 3));
    const int n_pred = 1 + static_cast<int>(uniform_index(rng, 3));
    std::vector<EvalFrame> gt(n_frames), pred(n_frames);
    for (int f = 0; f < n_frames; ++f) {
      for (int i = 0; i < n_gt; ++i) {
        if (bernoulli(rng, 0.8)) {
          gt[f].boxes.emplace_back(i + 1, at(0.1 + 0.25 * i + 0.01 * f, 0.4));
        }
      }
      for (int j = 0; j < n_pred; ++j) {
        if (bernoulli(rng, 0.8)) {
          pred[f].boxes.emplace_back(j + 1, at(0.1 + 0.25 * j + 0.01 * f + uniform_real(rng, -0.02, 0.02),
                                               0.4));
        }
      }
    }

    // brute force over all injective pairings of gt tracks to pred tracks
    auto overlap = [&](int gid, int pid) {
      int m = 0;
      for (int f = 0; f < n_frames; ++f) {
        const BBox* gb = nullptr;
        const BBox* pb = nullptr;
        for (const auto& [id, box] : gt[f].boxes) {
          if (id == gid) gb = &box;
        }
        for (const auto& [id, box] : pred[f].boxes) {
          if (id == pid) pb = &box;
        }
        if (gb != nullptr && pb != nullptr && iou(*gb, *pb) >= 0.5) ++m;
      }
      return m;
    };
    long best_idtp = 0;
    std::vector<int> perm(n_pred);
    for (int j = 0; j < n_pred; ++j) perm[j] = j;
    std::function<void(int, std::vector<char>&, long)> rec = [&](int g, std::vector<char>& used,
                                                                 long acc) {
      best_idtp = std::max(best_idtp, acc);
      if (g == n_gt) return;
      rec(g + 1, used, acc);  // leave this gt unmatched
      for (int j = 0; j < n_pred; ++j) {
        if (used[j]) continue;
        used[j] = 1;
        rec(g + 1, used, acc + overlap(g + 1, j + 1));
        used[j] = 0;
      }
    };
    std::vector<char> used(n_pred, 0);
    rec(0, used, 0);

    long total_gt = 0, total_pred = 0;
    for (int f = 0; f < n_frames; ++f) {
      total_gt += static_cast<long>(gt[f].boxes.size());
      total_pred += static_cast<long>(pred[f].boxes.size());
    }
    const double expect =
        (2 * best_idtp + (total_gt - best_idtp) + (total_pred - best_idtp)) == 0
            ? 1.0
            : 2.0 * best_idtp / static_cast<double>(total_gt + total_pred);
    CHECK(idf1(gt, pred) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("idf1 edge cases") {
  auto gt = two_tracks(5, 1, 2);
  std::vector<EvalFrame> empty(5);
  CHECK(idf1(gt, empty) == doctest::Approx(0.0));
  CHECK(idf1(empty, empty) == doctest::Approx(1.0));
}

TEST_CASE("crowdedness binning") {
  SUBCASE("single agent sequence has empty bins") {
    CrowdSequence seq;
    seq.name = "solo";
    seq.frames.resize(10);
    for (auto& f : seq.frames) f.boxes.emplace_back(1, at(0.5, 0.5));
    auto hist = crowdedness({seq});
    for (long c : hist.overall.bins) CHECK(c == 0);
    CHECK(hist.overall.frames == 10);
  }
  SUBCASE("two identical static boxes land in the top bin every frame") {
    CrowdSequence seq;
    seq.name = "pair";
    seq.frames.resize(10);
    for (auto& f : seq.frames) {
      f.boxes.emplace_back(1, at(0.5, 0.5));
      f.boxes.emplace_back(2, at(0.5, 0.5));
    }
    auto hist = crowdedness({seq});
    CHECK(hist.overall.bins[kCrowdBins - 1] == 10);
    for (int b = 0; b + 1 < kCrowdBins; ++b) CHECK(hist.overall.bins[b] == 0);
    CHECK(hist.overall.per_frame_average()[kCrowdBins - 1] == doctest::Approx(1.0));
  }
  SUBCASE("pairs at or below IoU 0.1 are never counted") {
    CrowdSequence seq;
    seq.name = "sparse";
    seq.frames.resize(4);
    for (auto& f : seq.frames) {
      f.boxes.emplace_back(1, at(0.2, 0.2));
      f.boxes.emplace_back(2, at(0.8, 0.8));  // disjoint
    }
    auto hist = crowdedness({seq});
    long total = 0;
    for (long c : hist.overall.bins) total += c;
    CHECK(total == 0);
  }
  SUBCASE("bins partition (0.1, 1] without overlap") {
    // sweep pairs over a range of IoU values; each pair lands in exactly
    // one bin and the per-bin edges are half-open on the left
    Rng rng = substream(83, 0);
    CrowdSequence seq;
    seq.name = "sweep";
    seq.frames.resize(200);
    long expected_counted = 0;
    for (auto& f : seq.frames) {
      const double dx = uniform_real(rng, 0.0, 0.12);
      f.boxes.emplace_back(1, at(0.5, 0.5));
      f.boxes.emplace_back(2, at(0.5 + dx, 0.5));
      if (iou(f.boxes[0].second, f.boxes[1].second) > 0.1) ++expected_counted;
    }
    auto hist = crowdedness({seq});
    long total = 0;
    for (long c : hist.overall.bins) total += c;
    CHECK(total == expected_counted);
  }
}

TEST_CASE("aggregated report sums counts over sequences") {
  auto gt = two_tracks(5, 1, 2);
  auto pred = gt;
  pred[0].boxes.emplace_back(9, at(0.9, 0.9));  // one FP in sequence 2 only
  auto report = evaluate_sequences({"a", "b"}, {gt, gt}, {gt, pred});
  CHECK(report.clear.fp == 1);
  CHECK(report.clear.total_gt == 20);
  CHECK(report.sequences[0].clear.fp == 0);
  CHECK(report.sequences[1].clear.fp == 1);
  CHECK(report.mota() == doctest::Approx(1.0 - 1.0 / 20.0));
}
