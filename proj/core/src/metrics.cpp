#include "cgate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "cgate/errors.hpp"

namespace cgate {

namespace {

void check(const ScoreSet& s) {
  if (s.id.empty() || s.ood.empty()) throw DomainError("score set needs ID and OOD scores");
  for (double v : s.id)
    if (std::isnan(v)) throw DomainError("NaN in ID scores");
  for (double v : s.ood)
    if (std::isnan(v)) throw DomainError("NaN in OOD scores");
}

}  // namespace

double auroc(const ScoreSet& s) {
  check(s);
  const std::size_t n = s.id.size(), m = s.ood.size();
  struct Item {
    double v;
    bool id;
  };
  std::vector<Item> all;
  all.reserve(n + m);
  for (double v : s.id) all.push_back({v, true});
  for (double v : s.ood) all.push_back({v, false});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.v < b.v; });

  // Sum of ID ranks with midranks for ties; ranks doubled to stay integral.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t ids = 0;
    while (j < all.size() && all[j].v == all[i].v) ids += all[j++].id;
    // ranks i+1 .. j, midrank (i+1+j)/2
    twice_rank_sum += static_cast<std::uint64_t>(ids) * (i + 1 + j);
    i = j;
  }
  // 2U = 2R - n(n+1)
  const std::uint64_t twice_u = twice_rank_sum - static_cast<std::uint64_t>(n) * (n + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n) * static_cast<double>(m));
}

double fpr_at_tpr(const ScoreSet& s, double tpr) {
  check(s);
  if (!(tpr >= 0.0 && tpr <= 1.0)) throw DomainError("tpr must lie in [0, 1]");
  const std::size_t n = s.id.size();
  const auto need = static_cast<std::size_t>(std::ceil(tpr * static_cast<double>(n) - 1e-9));
  if (need == 0) return 0.0;
  std::vector<double> id = s.id;
  // need-th largest ID score
  std::nth_element(id.begin(), id.begin() + static_cast<long>(need - 1), id.end(),
                   std::greater<double>());
  const double t = id[need - 1];
  std::size_t hits = 0;
  for (double v : s.ood) hits += v >= t;
  return static_cast<double>(hits) / static_cast<double>(s.ood.size());
}

double interval_roc_score(double score, const GateConfig& g) {
  if (std::isnan(score)) return std::numeric_limits<double>::lowest();
  const double d = std::max({g.lo - score, score - g.hi, 0.0});
  return -d;
}

double oriented_final_score(double score, ScoreKind kind) {
  if (std::isnan(score)) return std::numeric_limits<double>::lowest();
  return kind == ScoreKind::final_energy ? -score : score;
}

ExitHistogram exit_histogram(std::span<const CascadeOutcome> outcomes,
                             const std::vector<GateConfig>& gates) {
  if (outcomes.empty()) throw DomainError("exit_histogram of no outcomes");
  ExitHistogram h;
  const std::size_t early = gates.empty() ? 0 : gates.size() - 1;
  for (std::size_t g = 0; g < early; ++g) h.stages.push_back(gates[g].stage);
  h.early.resize(early);
  h.passed.assign(early, 0);
  for (const auto& o : outcomes) {
    if (o.exit_stage != kFinalExit) {
      if (o.exit_gate >= early) throw DomainError("outcome exits at an unknown gate");
      ++h.early[o.exit_gate].count;
    } else if (o.verdict == Verdict::accepted) {
      ++h.final_accepted.count;
    } else {
      ++h.final_rejected.count;
    }
    const std::size_t passed = o.exit_stage == kFinalExit ? early : o.exit_gate;
    for (std::size_t g = 0; g < passed; ++g) ++h.passed[g];
  }
  h.total = outcomes.size();
  const double n = static_cast<double>(h.total);
  for (auto& b : h.early) b.fraction = static_cast<double>(b.count) / n;
  h.final_accepted.fraction = static_cast<double>(h.final_accepted.count) / n;
  h.final_rejected.fraction = static_cast<double>(h.final_rejected.count) / n;
  return h;
}

FlopsSummary expected_flops(std::span<const CascadeOutcome> outcomes, const CostModel& cost) {
  if (outcomes.empty()) throw DomainError("expected_flops of no outcomes");
  // integer sum first: exact and independent of outcome order
  std::uint64_t total = 0;
  for (const auto& o : outcomes) total += o.flops;
  FlopsSummary f;
  f.avg_flops = static_cast<double>(total) / static_cast<double>(outcomes.size());
  f.full_flops = static_cast<double>(cost.backbone());
  f.savings = 1.0 - f.avg_flops / f.full_flops;
  return f;
}

}  // namespace cgate
