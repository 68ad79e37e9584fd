// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Thresholds are fixed here and nowhere else.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "cgate/backbone.hpp"
#include "cgate/cascade.hpp"
#include "cgate/config.hpp"
#include "cgate/corruptions.hpp"
#include "cgate/datagen.hpp"
#include "cgate/metrics.hpp"
#include "cgate/pipeline.hpp"
#include "cgate/rng.hpp"
#include "cgate/ses.hpp"
#include "cgate/she.hpp"
#include "reference.hpp"

using namespace cgate;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

int failures = 0;

void run(const char* name, const std::function<Verdict()>& fn) {
  const auto t0 = Clock::now();
  Verdict v{false, ""};
  try {
    v = fn();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  std::printf("%s %-28s %s [%.2fs]\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str(), secs);
  std::fflush(stdout);
  failures += !v.pass;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Tensor random_channel(Rng& rng, std::size_t h, std::size_t w) {
  Tensor t({h, w});
  for (float& v : t.values()) v = static_cast<float>(rng.normal());
  return t;
}

// Shared desk-scale setup: default config, calibrated on a 2,000-sample ID
// corpus, evaluated on a fresh 2,000-sample ID corpus and 1,000 per OOD kind.
struct Desk {
  RunConfig cfg;
  Backbone backbone = make_backbone(RunConfig{});
  Artifacts art;
  CorpusResult id;
  std::vector<CorpusResult> ood;
  double seconds = 0;
};

const Desk& desk() {
  static Desk d = [] {
    const auto t0 = Clock::now();
    Desk d;
    d.backbone = make_backbone(d.cfg);
    const Extents ex = d.cfg.backbone.extents;
    const std::size_t C = d.cfg.backbone.classes;
    ImageSet cal(generate_corpus({CorpusKind::id_natural, C, 2000, ex, 101}), "cal");
    d.art = calibrate(d.cfg, d.backbone, cal, 1);
    ImageSet test(generate_corpus({CorpusKind::id_natural, C, 2000, ex, 202}), "id");
    d.id = run_corpus(d.art, d.backbone, test, "id_natural", 1);
    for (auto k : {CorpusKind::ood_white_noise, CorpusKind::ood_flat, CorpusKind::ood_semantic_shift}) {
      ImageSet s(generate_corpus({k, C, 1000, ex, 303}), to_string(k));
      d.ood.push_back(run_corpus(d.art, d.backbone, s, to_string(k), 1));
    }
    d.seconds = seconds_since(t0);
    return d;
  }();
  return d;
}

double cascade_auroc(const Desk& d, const CorpusResult& o) {
  const auto none = static_cast<std::size_t>(-1);
  return auroc({oriented_scores(d.art, d.id, none), oriented_scores(d.art, o, none)});
}

Verdict spectral_identity() {
  const auto t0 = Clock::now();
  Rng rng(11);
  double lo = INFINITY, hi = -INFINITY;
  for (int i = 0; i < 50; ++i) {
    const double r = frequency_weighting_ratio(random_channel(rng, 16, 16), Padding::periodic);
    lo = std::min(lo, r), hi = std::max(hi, r);
  }
  const double secs = seconds_since(t0);
  return {lo >= 0.999 && hi <= 1.001 && secs < 5.0,
          fmt("ratio range [%.6f, %.6f] need [0.999, 1.001]; %.2fs need < 5s", lo, hi, secs)};
}

Verdict she_scale_invariance() {
  Rng rng(12);
  const std::size_t C = 10, d = 64;
  PrototypeBank bank;
  bank.dim = d;
  for (std::size_t k = 0; k < C; ++k) {
    FeatureVec mu(d);
    double n = 0;
    for (auto& v : mu) v = static_cast<float>(rng.normal()), n += v * v;
    for (auto& v : mu) v = static_cast<float>(v / std::sqrt(n));
    bank.prototypes.push_back(mu);
    bank.kappas.push_back(std::exp(rng.uniform(std::log(kKappaMin), std::log(kKappaMax))));
  }
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    FeatureVec z(d);
    for (auto& v : z) v = static_cast<float>(rng.normal());
    const double alpha = std::exp(rng.uniform(std::log(1e-3), std::log(1e3)));
    FeatureVec za(d);
    for (std::size_t j = 0; j < d; ++j) za[j] = static_cast<float>(alpha * z[j]);
    worst = std::max(worst, std::fabs(she_energy(za, bank) - she_energy(z, bank)));
  }
  return {worst <= 1e-5, fmt("max |dE| = %.3g need <= 1e-5", worst)};
}

Verdict magnitude_paradox() {
  Rng rng(13);
  const std::size_t C = 10, d = 64;
  std::vector<FeatureVec> feats;
  ClassFeatures per(C);
  std::vector<FeatureVec> centers;
  for (std::size_t k = 0; k < C; ++k) {
    FeatureVec c(d);
    for (auto& v : c) v = static_cast<float>(rng.normal());
    centers.push_back(c);
    for (int n = 0; n < 50; ++n) {
      FeatureVec z(d);
      for (std::size_t j = 0; j < d; ++j) z[j] = static_cast<float>(c[j] + 0.3 * rng.normal());
      per[k].push_back(z);
    }
  }
  const PrototypeBank bank = fit_bank(per, Weighting::uniform, KappaMode::vmf);
  int flipped = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t k = rng.below(C);
    FeatureVec aligned(d), noise(d);
    for (std::size_t j = 0; j < d; ++j) {
      aligned[j] = static_cast<float>(0.5 * bank.prototypes[k][j] + 0.01 * rng.normal());
      noise[j] = static_cast<float>(20.0 * rng.normal());
    }
    const bool mag = magnitude_energy(noise, 1.0, C) < magnitude_energy(aligned, 1.0, C);
    const bool she = she_energy(noise, bank) > she_energy(aligned, bank);
    flipped += mag && she;
  }
  return {flipped >= 95, fmt("%g of 100 pairs flip order, need >= 95", flipped)};
}

Verdict calibration_soundness() {
  RunConfig cfg;
  const Backbone b = make_backbone(cfg);
  const Extents ex = cfg.backbone.extents;
  // 10% of 10,000 validates: the two-sided early gates keep order statistics
  // whose expected coverage is (b - a)/(n + 1), so small sets under-cover.
  ImageSet cal(generate_corpus({CorpusKind::id_natural, 4, 10000, ex, 404}), "cal");
  const Artifacts a = calibrate(cfg, b, cal, 1);
  ImageSet fresh(generate_corpus({CorpusKind::id_natural, 4, 10000, ex, 505}), "fresh");
  const CorpusResult r = run_corpus(a, b, fresh, "fresh", 1);
  std::size_t acc = 0;
  for (const auto& o : r.outcomes) acc += o.verdict == cgate::Verdict::accepted;
  const double rate = static_cast<double>(acc) / static_cast<double>(r.outcomes.size());
  return {rate >= 0.93 && rate <= 0.97,
          fmt("ID acceptance %.4f on 10000 fresh samples (calibrated on %g), need [0.93, 0.97]",
              rate, static_cast<double>(a.gates.front().calibration.validation_size))};
}

Verdict desk_detection() {
  const Desk& d = desk();
  const double white = cascade_auroc(d, d.ood[0]);
  const double flat = cascade_auroc(d, d.ood[1]);
  const double shift = cascade_auroc(d, d.ood[2]);
  const auto h = exit_histogram(d.ood[0].outcomes, d.art.gates);
  const double exit1 = h.early[0].fraction;
  const bool ok = white >= 0.95 && flat >= 0.95 && shift >= 0.70 && exit1 >= 0.60 && d.seconds < 120;
  std::string msg = fmt("auroc white %.4f flat %.4f (need >= 0.95), semantic %.4f (need >= 0.70); ",
                        white, flat, shift);
  msg += fmt("white stage-1 exits %.3f (need >= 0.60); %.1fs (need < 120s)", exit1, d.seconds);
  return {ok, msg};
}

Verdict flops_accounting() {
  const Desk& d = desk();
  const CorpusResult& white = d.ood[0];
  std::vector<CascadeOutcome> stream = d.id.outcomes;
  stream.insert(stream.end(), white.outcomes.begin(), white.outcomes.end());
  const auto f = expected_flops(stream, d.art.cost);
  std::uint64_t sum = 0;
  for (const auto& o : stream) sum += o.flops;
  const double manual = static_cast<double>(sum) / static_cast<double>(stream.size());
  const bool exact = manual == f.avg_flops;
  const double exit1 = exit_histogram(white.outcomes, d.art.gates).early[0].fraction;
  const double pct = 100.0 * f.savings;
  return {exact && exit1 >= 0.60 && pct >= 15.0 && pct <= 35.0,
          fmt("avg %.1f vs per-sample sum %.1f; OOD stage-1 exits %.3f; savings %.2f%% need [15, 35]",
              f.avg_flops, manual, exit1, pct)};
}

Verdict metrics_oracle() {
  Rng rng(14);
  int mismatches = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(200), m = 1 + rng.below(200);
    const int levels = 1 + static_cast<int>(rng.below(50));  // plenty of ties
    std::vector<double> id(n), ood(m);
    for (auto& v : id) v = static_cast<double>(rng.below(levels)) + 0.5;
    for (auto& v : ood) v = static_cast<double>(rng.below(levels));
    mismatches += auroc({id, ood}) != ref::auroc_pairs(id, ood);
  }
  std::vector<double> s(1000);
  for (auto& v : s) v = rng.normal();
  const double fpr = fpr_at_tpr({s, s}, 0.95);
  return {mismatches == 0 && std::fabs(fpr - 0.95) <= 0.01,
          fmt("%g/200 AUROC mismatches vs pairwise oracle; self fpr95 %.4f need 0.95 +- 0.01",
              mismatches, fpr)};
}

Verdict corruption_ordering() {
  RunConfig cfg;
  const Backbone b = make_backbone(cfg);
  const auto imgs = generate_corpus({CorpusKind::id_natural, 4, 200, cfg.backbone.extents, 606});
  SesConfig ses;
  std::string detail;
  bool ok = true;
  for (auto fam : {CorruptionFamily::dead_pixels, CorruptionFamily::striping}) {
    std::vector<double> means;
    for (int sev = 1; sev <= 5; ++sev) {
      double s = 0;
      for (std::size_t i = 0; i < imgs.size(); ++i) {
        const Tensor x = apply_corruption(imgs[i].image, {fam, sev, derive_seed(77, i)});
        s += ses_score(b.forward_stage(0, x), ses);
      }
      means.push_back(s / static_cast<double>(imgs.size()));
    }
    for (int k = 1; k < 5; ++k) ok &= means[k] > means[k - 1];
    detail += std::string(to_string(fam)) + " " +
              fmt("%.3f %.3f %.3f %.3f ", means[0], means[1], means[2], means[3]) +
              fmt("%.3f; ", means[4]);
  }
  return {ok, detail + "need strictly increasing"};
}

Verdict chain_vs_monolith() {
  const Desk& d = desk();
  const CascadeModel m = d.art.model();
  std::vector<Tensor> xs;
  const Extents ex = d.cfg.backbone.extents;
  for (auto k : {CorpusKind::id_natural, CorpusKind::ood_white_noise, CorpusKind::ood_flat,
                 CorpusKind::ood_semantic_shift})
    for (auto& s : generate_corpus({k, 4, 125, ex, 707})) xs.push_back(std::move(s.image));

  int mismatch = 0;
  for (const auto& x : xs) {
    const CascadeOutcome o = run_cascade(x, d.backbone, m);
    // post-hoc gating on a complete forward pass
    const auto f = ref::monolithic(d.backbone, x);
    cgate::Verdict v = cgate::Verdict::accepted;
    std::size_t exit = kFinalExit;
    for (std::size_t g = 0; g < m.gates.size(); ++g) {
      const GateConfig& gate = m.gates[g];
      double s;
      switch (gate.kind) {
        case ScoreKind::ses: s = ses_score(f.stages[gate.stage], m.ses); break;
        case ScoreKind::she: s = she_energy(global_average_pool(f.stages[gate.stage]), m.bank); break;
        case ScoreKind::final_energy: s = energy_score(f.logits); break;
        default: s = msp_score(f.logits); break;
      }
      if (gate_decision(s, gate) == GateVerdict::reject) {
        v = cgate::Verdict::rejected;
        exit = is_final(gate.kind) ? kFinalExit : gate.stage;
        break;
      }
    }
    mismatch += o.verdict != v || o.exit_stage != exit;
  }
  return {mismatch == 0, fmt("%g of %g samples disagree", mismatch, static_cast<double>(xs.size()))};
}

}  // namespace

int main() {
  run("spectral_identity", spectral_identity);
  run("she_scale_invariance", she_scale_invariance);
  run("magnitude_paradox", magnitude_paradox);
  run("calibration_soundness", calibration_soundness);
  run("desk_detection", desk_detection);
  run("flops_accounting", flops_accounting);
  run("metrics_oracle", metrics_oracle);
  run("corruption_ordering", corruption_ordering);
  run("chain_vs_monolith", chain_vs_monolith);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures ? 1 : 0;
}
