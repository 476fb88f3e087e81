#pragma once

// The six evaluation metrics (UA, RA, TA, MIA, AG, RTE) and the
// single-threshold confidence attacker.
//
// UA is forget-set error: 100 - accuracy on D_f. RA and TA are plain
// accuracies on the retain and test splits. MIA is the fraction of
// forget samples a calibrated confidence attacker classifies as training
// members; calibration sees only retain (member) and test (non-member)
// scores, never D_f. AG is the mean absolute difference of the four
// metrics against the retrain gold standard.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mulab/dataset.hpp"
#include "mulab/errors.hpp"
#include "mulab/model.hpp"
#include "mulab/ops.hpp"
#include "mulab/train.hpp"

namespace mulab {

struct MetricsReport {
  std::string method;
  std::string dataset;
  double rate = 0.0;
  std::uint64_t seed = 0;
  double ua = 0.0;
  double ra = 0.0;
  double ta = 0.0;
  double mia = 0.0;
  double ag = 0.0;
  double rte_seconds = 0.0;
  double forget_accuracy = 0.0;  // raw accuracy on D_f (UA = 100 - this)
  bool mia_degenerate = false;
};

inline double ua(Model<float>& model, const Dataset& forget) {
  if (forget.n() == 0) throw ContractError("ua: empty forget set");
  return 100.0 - evaluate(model, forget);
}

inline double ra(Model<float>& model, const Dataset& retain) {
  if (retain.n() == 0) throw ContractError("ra: empty retain set");
  return evaluate(model, retain);
}

inline double ta(Model<float>& model, const Dataset& test) {
  if (test.n() == 0) throw ContractError("ta: empty test set");
  return evaluate(model, test);
}

// ---------------------------------------------------------------------------
// MIA attacker.

// Per-sample confidence score: probability assigned to the true label.
inline std::vector<double> confidence_scores(Model<float>& model, const Dataset& data,
                                             int batch_size = 256) {
  const int C = data.channels(), H = data.height(), W = data.width();
  const std::int64_t sz = static_cast<std::int64_t>(C) * H * W;
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(data.n()));
  for (int start = 0; start < data.n(); start += batch_size) {
    const int count = std::min(batch_size, data.n() - start);
    Tensorf batch({count, C, H, W});
    std::copy(data.images.data() + static_cast<std::int64_t>(start) * sz,
              data.images.data() + static_cast<std::int64_t>(start + count) * sz,
              batch.data());
    Tensorf logits = model.forward(nullptr, batch, /*training=*/false);
    std::vector<double> probs = softmax_rows(logits);
    const int nc = logits.dim(1);
    for (int i = 0; i < count; ++i)
      scores.push_back(
          probs[static_cast<std::size_t>(i) * nc +
                data.labels[static_cast<std::size_t>(start + i)]]);
  }
  return scores;
}

struct MiaCalibration {
  double threshold = 0.0;
  bool degenerate = false;
};

// Threshold maximizing balanced accuracy on (member, nonmember) scores;
// a sample is classified member when score >= threshold. Ties resolve to
// the smallest threshold. The calibration interface accepts only
// retain/test score populations; forget scores never enter.
inline MiaCalibration calibrate_mia(const std::vector<double>& member,
                                    const std::vector<double>& nonmember) {
  if (member.empty() || nonmember.empty())
    throw ContractError("calibrate_mia: empty calibration population");
  std::vector<double> all(member);
  all.insert(all.end(), nonmember.begin(), nonmember.end());
  std::sort(all.begin(), all.end());
  MiaCalibration cal;
  if (all.front() == all.back()) {
    // All scores identical: MIA is flagged undefined and computed at the
    // midpoint threshold.
    cal.degenerate = true;
    cal.threshold = all.front();
    return cal;
  }
  std::vector<double> candidates(all);
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  candidates.push_back(all.back() + 1.0);  // classify-nobody-member extreme
  double best_t = candidates.front(), best_bacc = -1.0;
  for (double t : candidates) {
    std::size_t tp = 0, tn = 0;
    for (double s : member)
      if (s >= t) ++tp;
    for (double s : nonmember)
      if (s < t) ++tn;
    double bacc = 0.5 * (static_cast<double>(tp) / member.size() +
                         static_cast<double>(tn) / nonmember.size());
    if (bacc > best_bacc) {
      best_bacc = bacc;
      best_t = t;
    }
  }
  cal.threshold = best_t;
  return cal;
}

// Percent of scores at or above the threshold. Monotone: lowering the
// threshold never decreases the result.
inline double mia_rate(const std::vector<double>& scores, double threshold) {
  if (scores.empty()) throw ContractError("mia_rate: empty score set");
  std::size_t members = 0;
  for (double s : scores)
    if (s >= threshold) ++members;
  return 100.0 * static_cast<double>(members) / static_cast<double>(scores.size());
}

struct MiaResult {
  double score = 0.0;
  double threshold = 0.0;
  bool degenerate = false;
};

inline MiaResult mia_from_scores(const std::vector<double>& forget_scores,
                                 const std::vector<double>& member_scores,
                                 const std::vector<double>& nonmember_scores) {
  MiaCalibration cal = calibrate_mia(member_scores, nonmember_scores);
  return {mia_rate(forget_scores, cal.threshold), cal.threshold, cal.degenerate};
}

inline MiaResult mia_score(Model<float>& model, const Dataset& forget,
                           const Dataset& retain, const Dataset& test) {
  if (forget.n() == 0 || retain.n() == 0 || test.n() == 0)
    throw ContractError("mia_score: all three splits must be nonempty");
  return mia_from_scores(confidence_scores(model, forget),
                         confidence_scores(model, retain),
                         confidence_scores(model, test));
}

// ---------------------------------------------------------------------------
// AG: mean of absolute per-metric differences against retrain.

inline double avg_gap_from_diffs(double dua, double dra, double dta, double dmia) {
  return (std::abs(dua) + std::abs(dra) + std::abs(dta) + std::abs(dmia)) / 4.0;
}

inline double avg_gap(const MetricsReport& report, const MetricsReport& retrain_report) {
  if (report.dataset != retrain_report.dataset || report.rate != retrain_report.rate)
    throw ContractError("avg_gap: mismatched cells (" + report.dataset + " @ " +
                        std::to_string(report.rate) + " vs " + retrain_report.dataset +
                        " @ " + std::to_string(retrain_report.rate) + ")");
  return avg_gap_from_diffs(report.ua - retrain_report.ua, report.ra - retrain_report.ra,
                            report.ta - retrain_report.ta,
                            report.mia - retrain_report.mia);
}

}  // namespace mulab
