#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cgate/backbone.hpp"
#include "cgate/cascade.hpp"
#include "cgate/config.hpp"
#include "cgate/datagen.hpp"
#include "cgate/manifest.hpp"
#include "cgate/metrics.hpp"

namespace cgate {

// Something the cascade can be run over: in-memory images or a manifest.
class SampleSet {
 public:
  virtual ~SampleSet() = default;
  virtual std::size_t size() const = 0;
  virtual std::string id(std::size_t i) const = 0;
  virtual int label(std::size_t i) const = 0;
  virtual std::unique_ptr<StageSource> open(std::size_t i, const Backbone& b) const = 0;
  // Extents of every stage when the samples carry precomputed features.
  virtual std::optional<std::vector<Extents>> feature_extents() const { return std::nullopt; }
};

class ImageSet : public SampleSet {
 public:
  ImageSet(std::vector<Sample> samples, std::string prefix);
  std::size_t size() const override { return samples_.size(); }
  std::string id(std::size_t i) const override;
  int label(std::size_t i) const override { return samples_[i].label; }
  std::unique_ptr<StageSource> open(std::size_t i, const Backbone& b) const override;
  const std::vector<Sample>& samples() const { return samples_; }

 private:
  std::vector<Sample> samples_;
  std::string prefix_;
};

class ManifestSet : public SampleSet {
 public:
  explicit ManifestSet(Manifest m);
  std::size_t size() const override { return m_.entries.size(); }
  std::string id(std::size_t i) const override { return m_.entries[i].sample_id; }
  int label(std::size_t i) const override { return m_.entries[i].label; }
  std::unique_ptr<StageSource> open(std::size_t i, const Backbone& b) const override;
  std::optional<std::vector<Extents>> feature_extents() const override;
  const Manifest& manifest() const { return m_; }

 private:
  Manifest m_;
};

Backbone make_backbone(const RunConfig& c);
std::vector<GatePlacement> gate_placements(const RunConfig& c);

struct Split {
  std::vector<std::size_t> fit;
  std::vector<std::size_t> validation;
};
// Seeded shuffle; the first round(n * fraction) indices validate.
Split split_indices(std::size_t n, double validation_fraction, std::uint64_t seed);

struct Artifacts {
  RunConfig config;
  std::vector<GateConfig> gates;
  PrototypeBank bank;
  std::vector<std::size_t> global_omega;
  CostModel cost;

  SesConfig ses_config() const;
  CascadeModel model() const;
};

// Fit prototypes on the fit split of `id`, calibrate the gates on the rest.
Artifacts calibrate(const RunConfig& c, const Backbone& b, const SampleSet& id, std::size_t jobs = 1);

void save_artifacts(const Artifacts& a, const std::filesystem::path& dir);
Artifacts load_artifacts(const std::filesystem::path& dir);

struct CorpusResult {
  std::string name;
  std::vector<CascadeOutcome> outcomes;
  // scores[g][n]: every gate's score for every sample, for ROC metrics.
  std::vector<std::vector<double>> scores;
};

CorpusResult run_corpus(const Artifacts& a, const Backbone& b, const SampleSet& s,
                        const std::string& name, std::size_t jobs = 1);

struct ReportRow {
  std::string dataset;
  std::string score_kind;
  double auroc = 0.0;
  double fpr95 = 0.0;
  double avg_flops = 0.0;
  double savings_pct = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  double exit_ses = 0.0;
  double exit_she = 0.0;
  double exit_final_accepted = 0.0;
  double exit_final_rejected = 0.0;
};

const std::vector<std::string>& report_columns();

// ROC-oriented scores ("higher = more ID") of one gate, or the cascade
// composite when gate == npos.
std::vector<double> oriented_scores(const Artifacts& a, const CorpusResult& r, std::size_t gate);

// Per OOD corpus one row per score kind (each gate, then "cascade").
// FLOPs are over the mixed stream ID + that corpus; exit fractions over the
// OOD corpus alone.
std::vector<ReportRow> build_report(const Artifacts& a, const CorpusResult& id,
                                    const std::vector<CorpusResult>& ood);

std::string report_csv(const std::vector<ReportRow>& rows);
std::vector<ReportRow> parse_report_csv(const std::string& text);
// dataset, bin, count, fraction for ID and every OOD corpus.
std::string exits_csv(const Artifacts& a, const CorpusResult& id, const std::vector<CorpusResult>& ood);
// Fixed-bin histograms of every oriented score kind for plotting.
std::string score_histogram_csv(const Artifacts& a, const CorpusResult& id,
                                const std::vector<CorpusResult>& ood, std::size_t bins = 20);

std::string format_double(double v);

}  // namespace cgate
