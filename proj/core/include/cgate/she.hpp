#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cgate {

using FeatureVec = std::vector<float>;
// features[k] holds the feature vectors of class k.
using ClassFeatures = std::vector<std::vector<FeatureVec>>;

enum class Weighting { uniform, self_consistent };
enum class KappaMode { vmf, uniform };

const char* to_string(Weighting w);
const char* to_string(KappaMode m);

struct BankProvenance {
  std::vector<std::size_t> counts;  // samples per class
  Weighting weighting = Weighting::uniform;
  KappaMode kappa_mode = KappaMode::vmf;
  std::vector<std::string> warnings;
};

struct PrototypeBank {
  std::size_t dim = 0;
  std::vector<FeatureVec> prototypes;  // classes x dim, unit norm
  std::vector<double> kappas;          // classes, > 0
  BankProvenance provenance;

  std::size_t classes() const noexcept { return prototypes.size(); }
};

inline constexpr double kKappaMin = 1e-3;
inline constexpr double kKappaMax = 1e4;

// Normalized (weighted) class means. Kappas are left at 1; see estimate_kappa.
PrototypeBank fit_prototypes(const ClassFeatures& features,
                             Weighting weighting = Weighting::uniform);

// Unclamped vMF concentration approximation Rbar(d - Rbar^2) / (1 - Rbar^2)
// for a mean resultant length Rbar in dimension d.
double vmf_kappa(double rbar, std::size_t d);

// Per-class concentration from the mean resultant length of the class's
// unit-normalized features, clamped to [kKappaMin, kKappaMax]. Clamps at the
// top append a note to `warnings` when given.
std::vector<double> estimate_kappa(const ClassFeatures& features, const PrototypeBank& bank,
                                   std::vector<std::string>* warnings = nullptr);

// fit_prototypes + estimate_kappa (or kappa = 1 in uniform mode).
PrototypeBank fit_bank(const ClassFeatures& features, Weighting weighting, KappaMode mode);

// -log sum_j exp(kappa_j * z.mu_j / |z|). With l2_normalize off the raw
// z.mu_j is used instead of the cosine.
double she_energy(std::span<const float> z, const PrototypeBank& bank, bool l2_normalize = true);

// -alpha |z| - log C
double magnitude_energy(std::span<const float> z, double alpha, std::size_t classes);

// prototypes.tzr (C x d), kappas.tzr (C) and bank.json next to them.
void save_bank(const PrototypeBank& bank, const std::filesystem::path& dir);
PrototypeBank load_bank(const std::filesystem::path& dir);

}  // namespace cgate
