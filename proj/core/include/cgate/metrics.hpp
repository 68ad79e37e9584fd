#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cgate/cascade.hpp"

namespace cgate {

// Higher means "more in-distribution" on both sides.
struct ScoreSet {
  std::vector<double> id;
  std::vector<double> ood;
};

// P(id > ood) + P(id = ood)/2 via midranks. O((n+m) log(n+m)).
double auroc(const ScoreSet& s);

// Threshold t = largest value with at least ceil(tpr * n_id) ID scores >= t;
// returns the fraction of OOD scores >= t. tpr = 0 keeps nothing (rate 0).
double fpr_at_tpr(const ScoreSet& s, double tpr = 0.95);

// Orientation for ROC: interval gates map to -distance to [lo, hi]; the
// final scorers use -energy and msp as is.
double interval_roc_score(double score, const GateConfig& g);
double oriented_final_score(double score, ScoreKind kind);

struct ExitBin {
  std::size_t count = 0;
  double fraction = 0.0;
};

// One bin per early gate (rejections there), then final-accepted and
// final-rejected.
struct ExitHistogram {
  std::vector<std::size_t> stages;  // stage of each early gate
  std::vector<ExitBin> early;
  ExitBin final_accepted;
  ExitBin final_rejected;
  std::size_t total = 0;
  // Samples that passed gate g (for g < early.size()).
  std::vector<std::size_t> passed;
};

ExitHistogram exit_histogram(std::span<const CascadeOutcome> outcomes,
                             const std::vector<GateConfig>& gates);

struct FlopsSummary {
  double avg_flops = 0.0;
  double full_flops = 0.0;  // the ungated network
  double savings = 0.0;  // 1 - avg/full; negative when gates only add cost
};

FlopsSummary expected_flops(std::span<const CascadeOutcome> outcomes, const CostModel& cost);

}  // namespace cgate
