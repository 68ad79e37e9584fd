#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cgate/manifest.hpp"
#include "cgate/tensor.hpp"

namespace cgate {

enum class CorruptionFamily { dead_pixels, striping, fog_low_exposure, transmission };

const char* to_string(CorruptionFamily f);
CorruptionFamily parse_corruption_family(const std::string& s);
inline constexpr std::array<CorruptionFamily, 4> kAllFamilies{
    CorruptionFamily::dead_pixels, CorruptionFamily::striping,
    CorruptionFamily::fog_low_exposure, CorruptionFamily::transmission};

struct CorruptionSpec {
  CorruptionFamily family = CorruptionFamily::dead_pixels;
  int severity = 1;  // 1..5
  std::uint64_t seed = 0;
};

// Severity tables, index severity - 1.
struct CorruptionTables {
  static constexpr std::array<double, 5> dead_pixel_percent{1, 2, 4, 8, 16};
  static constexpr std::array<double, 5> stripe_amplitude{0.05, 0.1, 0.2, 0.3, 0.4};
  static constexpr std::array<double, 5> fog_weight{0.2, 0.3, 0.45, 0.6, 0.7};
  static constexpr std::array<double, 5> exposure_gamma{1.2, 1.5, 1.8, 2.2, 2.5};
  static constexpr double fog_gray = 0.5;
  // per-channel gain 1 + tint[c] * severity / 5 (R loses, B gains)
  static constexpr std::array<double, 3> tint{-0.1, 0.0, 0.1};
  static constexpr std::size_t block = 8;
  static constexpr std::array<int, 5> quant_levels{32, 16, 8, 6, 4};
  static constexpr std::array<int, 5> noise_patches{1, 1, 2, 3, 4};
};

// img: C x H x W in [0, 1]. Output in [0, 1], a pure function of (img, spec).
Tensor apply_corruption(const Tensor& img, const CorruptionSpec& spec);

struct CorpusImage {
  std::string source_id;
  Tensor image;
};

// One TZR per (image, spec) under out_dir plus out_dir/manifest.json.
// Rerunning with the same inputs rewrites identical bytes.
Manifest build_corrupted_corpus(const std::vector<CorpusImage>& images,
                                const std::vector<CorruptionSpec>& specs,
                                const std::filesystem::path& out_dir);

}  // namespace cgate
