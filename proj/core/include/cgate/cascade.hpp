#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cgate/backbone.hpp"
#include "cgate/ses.hpp"
#include "cgate/she.hpp"
#include "cgate/tensor.hpp"

namespace cgate {

enum class ScoreKind { ses, she, final_energy, final_msp };

const char* to_string(ScoreKind k);
ScoreKind parse_score_kind(const std::string& s);
inline bool is_final(ScoreKind k) {
  return k == ScoreKind::final_energy || k == ScoreKind::final_msp;
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct GateCalibration {
  double retention = 1.0;    // fraction of calibration scores kept
  double lower_level = 0.0;  // quantile levels of lo / hi
  double upper_level = 1.0;
  std::size_t validation_size = 0;
  double center = 0.0;  // median of the calibration scores
};

// Acceptance region [lo, hi] over one stage's score. Early gates sit on a
// conv stage output; the final gate has stage == backbone stage count.
struct GateConfig {
  std::size_t stage = 0;
  ScoreKind kind = ScoreKind::ses;
  double lo = -kInf;
  double hi = kInf;
  GateCalibration calibration;
};

enum class GateVerdict { pass, reject };

// Closed interval; NaN never passes.
GateVerdict gate_decision(double score, const GateConfig& g);

struct CalibrationBudget {
  std::vector<double> early_retention{0.995, 0.995};
  double final_tpr = 0.95;

  double early_product() const;
  // final_tpr / prod(r_i)
  double residual() const;
  void validate() const;
};

inline constexpr std::size_t kMinCalibrationSamples = 50;

struct GatePlacement {
  std::size_t stage = 0;
  ScoreKind kind = ScoreKind::ses;
};

// scores[g][n] is gate g's score for calibration sample n; the placements
// list the early gates in stage order followed by the final scorer. Gates
// are fitted in order, each on the samples the previous gates kept, so the
// per-gate retention targets compose multiplicatively on this set.
std::vector<GateConfig> calibrate_gates(const std::vector<std::vector<double>>& scores,
                                        const std::vector<GatePlacement>& placements,
                                        const CalibrationBudget& budget);

// Early gates: trim floor(N(1 - r)) order statistics, split between the two
// tails (lower tail gets the smaller half). r = 1 gives (-inf, inf).
GateConfig calibrate_interval(std::span<const double> scores, double retention,
                              GateConfig base = {});
// Final gate: keep ceil(t N) samples on the ID side of the threshold.
GateConfig calibrate_threshold(std::span<const double> scores, double retention,
                               GateConfig base);

double energy_score(std::span<const float> logits);
double msp_score(std::span<const float> logits);

// Stage features for one sample, produced on demand and strictly in order.
class StageSource {
 public:
  virtual ~StageSource() = default;
  virtual std::size_t stage_count() const = 0;
  virtual const Tensor& stage(std::size_t i) = 0;
  virtual std::vector<float> logits() = 0;
  // How many stages have been materialized so far.
  virtual std::size_t computed_stages() const = 0;
};

// Runs a backbone lazily on an image.
class BackboneSource : public StageSource {
 public:
  BackboneSource(const Backbone& b, Tensor image);
  std::size_t stage_count() const override { return b_.stage_count(); }
  const Tensor& stage(std::size_t i) override;
  std::vector<float> logits() override;
  std::size_t computed_stages() const override { return cache_.size(); }

 private:
  const Backbone& b_;
  Tensor image_;
  std::vector<Tensor> cache_;
};

// Features already in memory, or loaded from TZR paths on first use.
class StoredSource : public StageSource {
 public:
  StoredSource(std::vector<Tensor> stages, std::optional<std::vector<float>> logits);
  StoredSource(std::vector<std::filesystem::path> stage_paths,
               std::optional<std::filesystem::path> logits_path);
  std::size_t stage_count() const override { return count_; }
  const Tensor& stage(std::size_t i) override;
  std::vector<float> logits() override;
  std::size_t computed_stages() const override { return touched_; }

 private:
  std::size_t count_ = 0;
  std::size_t touched_ = 0;
  std::vector<std::optional<Tensor>> stages_;
  std::vector<std::filesystem::path> paths_;
  std::optional<std::vector<float>> logits_;
  std::optional<std::filesystem::path> logits_path_;
};

// FLOPs per conv stage (head last) and per gate.
struct CostModel {
  std::vector<std::uint64_t> stages;
  std::vector<std::uint64_t> gates;

  // Every stage and every gate: what a sample that reaches the end pays.
  std::uint64_t full() const;
  // Stages only: the plain network with no gates attached.
  std::uint64_t backbone() const;
  // Cost of a sample that stops after gate g (all stages up to that gate's
  // stage plus the overhead of gates 0..g).
  std::uint64_t through_gate(const std::vector<GateConfig>& gs, std::size_t g) const;

  static CostModel from_backbone(const Backbone& b, const std::vector<GateConfig>& gates);
  // Closed-form 3x3-conv equivalent from the stage extents alone, for
  // features that come from elsewhere.
  static CostModel from_extents(const Extents& input, const std::vector<Extents>& stages,
                                std::size_t classes, const std::vector<GateConfig>& gates);
};

struct CascadeModel {
  std::vector<GateConfig> gates;
  SesConfig ses;
  PrototypeBank bank;
  bool l2_normalize = true;
  CostModel cost;

  // Throws ConfigError when the gate list is not early gates in increasing
  // stage order followed by exactly one final gate on `stage_count`.
  void validate(std::size_t stage_count) const;
};

// Score of gate g given the features it looks at.
double gate_score(const GateConfig& g, StageSource& src, const CascadeModel& m);

enum class Verdict { accepted, rejected };

inline constexpr std::size_t kFinalExit = std::numeric_limits<std::size_t>::max();

struct CascadeOutcome {
  std::string sample_id;
  Verdict verdict = Verdict::accepted;
  // Stage of the gate that rejected, or kFinalExit when the sample reached
  // the final scorer (whatever its verdict there).
  std::size_t exit_stage = kFinalExit;
  std::size_t exit_gate = 0;
  std::vector<double> scores;  // one per visited gate
  std::uint64_t flops = 0;
  std::optional<std::size_t> label_pred;
  bool anomaly = false;
  // -max over visited gates of the normalized excess; accepted iff >= -1.
  double composite = 0.0;
};

CascadeOutcome run_cascade(StageSource& src, const CascadeModel& m, std::string sample_id = {});
CascadeOutcome run_cascade(const Tensor& sample, const Backbone& b, const CascadeModel& m,
                           std::string sample_id = {});

// How far a score sits from the calibration center, in units of the
// distance from the center to the bound on that side. Inside iff <= 1.
double normalized_excess(double score, const GateConfig& g);

void save_gates(const std::vector<GateConfig>& gates, const std::filesystem::path& path,
                const std::string& extra_json = {});
std::vector<GateConfig> load_gates(const std::filesystem::path& path);
std::string gates_to_json(const std::vector<GateConfig>& gates);
std::vector<GateConfig> gates_from_json(const std::string& text);

}  // namespace cgate
