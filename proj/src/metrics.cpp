#include "qtrack/metrics.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "qtrack/setpred.hpp"

namespace qtrack {

const std::array<double, kCrowdBins> kCrowdBinLowerEdges = {0.1, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

namespace {

void check_unique_ids(const EvalFrame& frame, const char* who) {
  std::set<int> seen;
  for (const auto& [id, box] : frame.boxes) {
    if (!seen.insert(id).second) {
      throw std::invalid_argument(std::string(who) + ": duplicate id " + std::to_string(id) +
                                  " within a frame");
    }
  }
}

constexpr double kForbidden = 1e9;

}  // namespace

ClearMotCounts clear_mot(const std::vector<EvalFrame>& gt, const std::vector<EvalFrame>& pred,
                         double iou_match_threshold) {
  if (gt.size() != pred.size()) {
    throw std::invalid_argument("clear_mot: gt and pred frame counts differ");
  }
  ClearMotCounts counts;
  std::map<int, int> last_pred_of_gt;  // persistent id correspondence

  for (std::size_t f = 0; f < gt.size(); ++f) {
    check_unique_ids(gt[f], "clear_mot gt");
    check_unique_ids(pred[f], "clear_mot pred");
    counts.total_gt += static_cast<long>(gt[f].boxes.size());

    const int ng = static_cast<int>(gt[f].boxes.size());
    const int np = static_cast<int>(pred[f].boxes.size());
    std::vector<int> gt_match(ng, -1);   // index into pred[f].boxes
    std::vector<char> pred_used(np, 0);

    // Carry forward correspondences that still hold.
    std::map<int, int> pred_index;
    for (int j = 0; j < np; ++j) pred_index[pred[f].boxes[j].first] = j;
    for (int i = 0; i < ng; ++i) {
      const auto it = last_pred_of_gt.find(gt[f].boxes[i].first);
      if (it == last_pred_of_gt.end()) continue;
      const auto pj = pred_index.find(it->second);
      if (pj == pred_index.end() || pred_used[pj->second]) continue;
      if (iou(gt[f].boxes[i].second, pred[f].boxes[pj->second].second) >= iou_match_threshold) {
        gt_match[i] = pj->second;
        pred_used[pj->second] = 1;
      }
    }

    // Hungarian over the remainder on 1 - IoU.
    std::vector<int> free_gt, free_pred;
    for (int i = 0; i < ng; ++i) {
      if (gt_match[i] < 0) free_gt.push_back(i);
    }
    for (int j = 0; j < np; ++j) {
      if (!pred_used[j]) free_pred.push_back(j);
    }
    if (!free_gt.empty() && !free_pred.empty()) {
      Eigen::MatrixXd cost(static_cast<int>(free_gt.size()), static_cast<int>(free_pred.size()));
      for (std::size_t a = 0; a < free_gt.size(); ++a) {
        for (std::size_t b = 0; b < free_pred.size(); ++b) {
          const double v = iou(gt[f].boxes[free_gt[a]].second, pred[f].boxes[free_pred[b]].second);
          cost(static_cast<int>(a), static_cast<int>(b)) =
              v >= iou_match_threshold ? 1.0 - v : kForbidden;
        }
      }
      for (auto [a, b] : hungarian(cost).pairs) {
        if (cost(a, b) >= kForbidden) continue;
        gt_match[free_gt[a]] = free_pred[b];
        pred_used[free_pred[b]] = 1;
      }
    }

    for (int i = 0; i < ng; ++i) {
      if (gt_match[i] < 0) {
        counts.fn += 1;
        continue;
      }
      const int gt_id = gt[f].boxes[i].first;
      const int pred_id = pred[f].boxes[gt_match[i]].first;
      const auto it = last_pred_of_gt.find(gt_id);
      if (it != last_pred_of_gt.end() && it->second != pred_id) counts.idsw += 1;
      last_pred_of_gt[gt_id] = pred_id;
    }
    for (int j = 0; j < np; ++j) {
      if (!pred_used[j]) counts.fp += 1;
    }
  }
  return counts;
}

IdCounts idf1_counts(const std::vector<EvalFrame>& gt, const std::vector<EvalFrame>& pred,
                     double iou_match_threshold) {
  if (gt.size() != pred.size()) {
    throw std::invalid_argument("idf1: gt and pred frame counts differ");
  }
  // Trajectory views keyed by id.
  std::map<int, std::map<int, BBox>> gt_traj, pred_traj;
  long total_gt = 0, total_pred = 0;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    check_unique_ids(gt[f], "idf1 gt");
    check_unique_ids(pred[f], "idf1 pred");
    for (const auto& [id, box] : gt[f].boxes) {
      gt_traj[id][static_cast<int>(f)] = box;
      ++total_gt;
    }
    for (const auto& [id, box] : pred[f].boxes) {
      pred_traj[id][static_cast<int>(f)] = box;
      ++total_pred;
    }
  }

  std::vector<const std::map<int, BBox>*> gs, ps;
  for (const auto& [id, tr] : gt_traj) gs.push_back(&tr);
  for (const auto& [id, tr] : pred_traj) ps.push_back(&tr);

  long idtp = 0;
  if (!gs.empty() && !ps.empty()) {
    Eigen::MatrixXd neg_overlap(static_cast<int>(gs.size()), static_cast<int>(ps.size()));
    for (std::size_t i = 0; i < gs.size(); ++i) {
      for (std::size_t j = 0; j < ps.size(); ++j) {
        long m = 0;
        for (const auto& [frame, gbox] : *gs[i]) {
          const auto it = ps[j]->find(frame);
          if (it != ps[j]->end() && iou(gbox, it->second) >= iou_match_threshold) ++m;
        }
        neg_overlap(static_cast<int>(i), static_cast<int>(j)) = -static_cast<double>(m);
      }
    }
    for (auto [i, j] : hungarian(neg_overlap).pairs) {
      idtp += static_cast<long>(-neg_overlap(i, j));
    }
  }
  IdCounts out;
  out.idtp = idtp;
  out.idfn = total_gt - idtp;
  out.idfp = total_pred - idtp;
  return out;
}

EvalReport evaluate_sequences(const std::vector<std::string>& names,
                              const std::vector<std::vector<EvalFrame>>& gt,
                              const std::vector<std::vector<EvalFrame>>& pred,
                              double iou_match_threshold) {
  if (names.size() != gt.size() || gt.size() != pred.size()) {
    throw std::invalid_argument("evaluate_sequences: mismatched sequence lists");
  }
  EvalReport report;
  for (std::size_t s = 0; s < names.size(); ++s) {
    SequenceEval se;
    se.name = names[s];
    se.clear = clear_mot(gt[s], pred[s], iou_match_threshold);
    se.id = idf1_counts(gt[s], pred[s], iou_match_threshold);
    report.clear.fp += se.clear.fp;
    report.clear.fn += se.clear.fn;
    report.clear.idsw += se.clear.idsw;
    report.clear.total_gt += se.clear.total_gt;
    report.id.idtp += se.id.idtp;
    report.id.idfp += se.id.idfp;
    report.id.idfn += se.id.idfn;
    report.sequences.push_back(std::move(se));
  }
  return report;
}

CrowdHistogram crowdedness(const std::vector<CrowdSequence>& sequences) {
  CrowdHistogram hist;
  for (const auto& seq : sequences) {
    CrowdCounts counts;
    counts.frames = static_cast<long>(seq.frames.size());
    for (const auto& frame : seq.frames) {
      const int n = static_cast<int>(frame.boxes.size());
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          const double v = iou(frame.boxes[i].second, frame.boxes[j].second);
          if (v <= kCrowdBinLowerEdges[0]) continue;
          int bin = 0;
          while (bin + 1 < kCrowdBins && v > kCrowdBinLowerEdges[bin + 1]) ++bin;
          counts.bins[bin] += 1;
        }
      }
    }
    hist.overall.frames += counts.frames;
    for (int b = 0; b < kCrowdBins; ++b) hist.overall.bins[b] += counts.bins[b];
    hist.per_sequence.emplace_back(seq.name, counts);
  }
  return hist;
}

}  // namespace qtrack
