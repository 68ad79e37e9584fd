#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cgate/backbone.hpp"
#include "cgate/manifest.hpp"
#include "cgate/tensor.hpp"

namespace cgate {

enum class CorpusKind { id_natural, ood_white_noise, ood_flat, ood_semantic_shift };

const char* to_string(CorpusKind k);
CorpusKind parse_corpus_kind(const std::string& s);

struct CorpusSpec {
  CorpusKind kind = CorpusKind::id_natural;
  std::size_t classes = 4;
  std::size_t n = 1;
  Extents extents{3, 32, 32};
  std::uint64_t seed = 0;

  void validate() const;
};

struct FieldParams {
  // Isotropic floor under the orientation band, relative to the band peak.
  double floor = 0.1;
  // Band half-width as a fraction of the class spacing pi / classes.
  double width = 0.25;
};

struct Sample {
  Tensor image;
  int label = -1;
};

// Band orientation of sample `index` for the two oriented kinds:
// id_natural uses k pi / classes, the shifted kind (k + 1/2) pi / classes,
// with k = index mod classes.
double band_orientation(CorpusKind kind, std::size_t index, std::size_t classes);

Sample generate_sample(const CorpusSpec& spec, std::size_t index, const FieldParams& fp = {});
std::vector<Sample> generate_corpus(const CorpusSpec& spec, std::size_t jobs = 1,
                                    const FieldParams& fp = {});

// <out_dir>/<prefix>_<index>.tzr plus <out_dir>/manifest.json.
Manifest write_corpus(const CorpusSpec& spec, const std::vector<Sample>& samples,
                      const std::filesystem::path& out_dir);

// Least-squares slope of log radially averaged power vs log frequency over
// integer radii [f_lo, f_hi] (cycles per image).
double radial_spectrum_slope(const Tensor& channel, double f_lo = 1.0, double f_hi = 16.0);

}  // namespace cgate
