#include "cgate/corruptions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cgate/errors.hpp"
#include "cgate/rng.hpp"
#include "cgate/tzr.hpp"

namespace cgate {

const char* to_string(CorruptionFamily f) {
  switch (f) {
    case CorruptionFamily::dead_pixels: return "dead_pixels";
    case CorruptionFamily::striping: return "striping";
    case CorruptionFamily::fog_low_exposure: return "fog_low_exposure";
    case CorruptionFamily::transmission: return "transmission";
  }
  return "?";
}

CorruptionFamily parse_corruption_family(const std::string& s) {
  for (auto f : kAllFamilies)
    if (s == to_string(f)) return f;
  throw ConfigError("unknown corruption family '" + s + "'", "family");
}

namespace {

using T = CorruptionTables;

void dead_pixels(Tensor& x, std::size_t idx, Rng& rng) {
  const std::size_t C = x.extent(0), H = x.extent(1), W = x.extent(2), HW = H * W;
  const auto count = static_cast<std::size_t>(
      std::floor(T::dead_pixel_percent[idx] * static_cast<double>(HW) / 100.0 + 1e-9));
  // partial Fisher-Yates over pixel sites
  std::vector<std::size_t> sites(HW);
  std::iota(sites.begin(), sites.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(sites[i], sites[i + rng.below(HW - i)]);
    const float v = rng.uniform() < 0.5 ? 0.0f : 1.0f;  // dead or stuck
    for (std::size_t c = 0; c < C; ++c) x.data()[c * HW + sites[i]] = v;
  }
}

void striping(Tensor& x, std::size_t idx, Rng& rng) {
  const std::size_t C = x.extent(0), H = x.extent(1), W = x.extent(2);
  const double a = T::stripe_amplitude[idx];
  for (std::size_t y = 0; y < H; ++y) {
    const double off = rng.uniform(-a, a);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t xx = 0; xx < W; ++xx) {
        float& v = x.at(c, y, xx);
        v = static_cast<float>(std::clamp(v + off, 0.0, 1.0));
      }
  }
}

void fog_low_exposure(Tensor& x, std::size_t idx, int severity) {
  const std::size_t C = x.extent(0), HW = x.extent(1) * x.extent(2);
  const double w = T::fog_weight[idx], g = T::exposure_gamma[idx];
  for (std::size_t c = 0; c < C; ++c) {
    const double gain = 1.0 + (C == 3 ? T::tint[c] : 0.0) * severity / 5.0;
    float* p = x.data() + c * HW;
    for (std::size_t i = 0; i < HW; ++i) {
      const double fogged = (1.0 - w) * p[i] + w * T::fog_gray;
      p[i] = static_cast<float>(std::clamp(std::pow(fogged, g) * gain, 0.0, 1.0));
    }
  }
}

void transmission(Tensor& x, std::size_t idx, Rng& rng) {
  const std::size_t C = x.extent(0), H = x.extent(1), W = x.extent(2);
  const double levels = T::quant_levels[idx] - 1;
  const std::size_t B = T::block;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t by = 0; by < H; by += B)
      for (std::size_t bx = 0; bx < W; bx += B) {
        const std::size_t ey = std::min(H, by + B), ex = std::min(W, bx + B);
        double s = 0.0;
        for (std::size_t y = by; y < ey; ++y)
          for (std::size_t xx = bx; xx < ex; ++xx) s += x.at(c, y, xx);
        const double mean = s / static_cast<double>((ey - by) * (ex - bx));
        const float q = static_cast<float>(std::round(mean * levels) / levels);
        for (std::size_t y = by; y < ey; ++y)
          for (std::size_t xx = bx; xx < ex; ++xx) x.at(c, y, xx) = q;
      }

  const std::size_t side = (H + 3) / 4;
  const std::size_t ph = std::min(side, H), pw = std::min(side, W);
  for (int p = 0; p < T::noise_patches[idx]; ++p) {
    const std::size_t y0 = rng.below(H - ph + 1), x0 = rng.below(W - pw + 1);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = y0; y < y0 + ph; ++y)
        for (std::size_t xx = x0; xx < x0 + pw; ++xx)
          x.at(c, y, xx) = static_cast<float>(rng.uniform());
  }
}

}  // namespace

Tensor apply_corruption(const Tensor& img, const CorruptionSpec& spec) {
  if (img.rank() != 3) throw SizeError("corruptions expect C x H x W images");
  if (spec.severity < 1 || spec.severity > 5)
    throw ConfigError("severity must be 1..5, got " + std::to_string(spec.severity), "severity");
  for (float v : img.values())
    if (!(v >= 0.0f && v <= 1.0f)) throw ValidationError("corruption input outside [0, 1]");

  Tensor out = img;
  const auto idx = static_cast<std::size_t>(spec.severity - 1);
  Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(spec.family) * 8 +
                                     static_cast<std::uint64_t>(spec.severity)));
  switch (spec.family) {
    case CorruptionFamily::dead_pixels: dead_pixels(out, idx, rng); break;
    case CorruptionFamily::striping: striping(out, idx, rng); break;
    case CorruptionFamily::fog_low_exposure: fog_low_exposure(out, idx, spec.severity); break;
    case CorruptionFamily::transmission: transmission(out, idx, rng); break;
  }
  return out;
}

Manifest build_corrupted_corpus(const std::vector<CorpusImage>& images,
                                const std::vector<CorruptionSpec>& specs,
                                const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  Manifest m;
  m.dir = out_dir;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    for (CorruptionSpec spec : specs) {
      // per-image stream; the recorded seed reproduces the file on its own
      spec.seed = derive_seed(spec.seed, i);
      ManifestEntry e;
      e.source_id = img.source_id;
      e.family = to_string(spec.family);
      e.severity = spec.severity;
      e.seed = spec.seed;
      e.sample_id = img.source_id + "__" + *e.family + "_s" + std::to_string(spec.severity);
      e.path = e.sample_id + ".tzr";
      write_tensor(apply_corruption(img.image, spec), out_dir / *e.path);
      m.entries.push_back(std::move(e));
    }
  }
  write_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace cgate
