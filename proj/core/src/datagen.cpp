#include "cgate/datagen.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>

#include "cgate/errors.hpp"
#include "cgate/parallel.hpp"
#include "cgate/rng.hpp"
#include "cgate/tzr.hpp"

namespace cgate {

const char* to_string(CorpusKind k) {
  switch (k) {
    case CorpusKind::id_natural: return "id_natural";
    case CorpusKind::ood_white_noise: return "ood_white_noise";
    case CorpusKind::ood_flat: return "ood_flat";
    case CorpusKind::ood_semantic_shift: return "ood_semantic_shift";
  }
  return "?";
}

CorpusKind parse_corpus_kind(const std::string& s) {
  for (auto k : {CorpusKind::id_natural, CorpusKind::ood_white_noise, CorpusKind::ood_flat,
                 CorpusKind::ood_semantic_shift})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown corpus kind '" + s + "'", "kind");
}

void CorpusSpec::validate() const {
  if (n < 1) throw ConfigError("corpus needs n >= 1", "n");
  if (extents.volume() == 0) throw ConfigError("corpus extents must be positive", "extents");
  if ((kind == CorpusKind::id_natural || kind == CorpusKind::ood_semantic_shift) && classes < 2)
    throw ConfigError("oriented corpora need classes >= 2", "classes");
}

double band_orientation(CorpusKind kind, std::size_t index, std::size_t classes) {
  const double k = static_cast<double>(index % classes);
  const double offset = kind == CorpusKind::ood_semantic_shift ? 0.5 : 0.0;
  return (k + offset) * std::numbers::pi / static_cast<double>(classes);
}

namespace {

using cd = std::complex<double>;

// Inverse 2-D DFT by rows then columns.
void inverse_dft2(std::vector<cd>& a, std::size_t H, std::size_t W) {
  Eigen::FFT<double> fft;
  std::vector<cd> in, out;
  in.resize(W);
  for (std::size_t y = 0; y < H; ++y) {
    std::copy(a.begin() + y * W, a.begin() + (y + 1) * W, in.begin());
    fft.inv(out, in);
    std::copy(out.begin(), out.end(), a.begin() + y * W);
  }
  in.resize(H);
  for (std::size_t x = 0; x < W; ++x) {
    for (std::size_t y = 0; y < H; ++y) in[y] = a[y * W + x];
    fft.inv(out, in);
    for (std::size_t y = 0; y < H; ++y) a[y * W + x] = out[y];
  }
}

inline double signed_freq(std::size_t k, std::size_t n) {
  return k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
}

// Gaussian field with power ~ (floor + band(theta)) / f^2.
void oriented_field(float* dst, std::size_t H, std::size_t W, double theta, double sigma,
                    double floor, Rng& rng) {
  std::vector<cd> spec(H * W);
  for (std::size_t u = 0; u < H; ++u)
    for (std::size_t v = 0; v < W; ++v) {
      const double fy = signed_freq(u, H), fx = signed_freq(v, W);
      const double f2 = fx * fx + fy * fy;
      const double re = rng.normal(), im = rng.normal();
      if (f2 == 0.0) continue;
      // angular distance to the band, modulo pi
      double d = std::atan2(fy, fx) - theta;
      d = std::remainder(d, std::numbers::pi);
      const double power = (floor + std::exp(-0.5 * d * d / (sigma * sigma))) / f2;
      spec[u * W + v] = std::sqrt(power) * cd(re, im);
    }
  inverse_dft2(spec, H, W);
  for (std::size_t i = 0; i < H * W; ++i) dst[i] = static_cast<float>(spec[i].real());
}

void minmax_normalize(Tensor& t) {
  const auto [lo, hi] = std::minmax_element(t.values().begin(), t.values().end());
  const double a = *lo, b = *hi;
  const double span = b - a;
  for (float& v : t.values())
    v = span > 0 ? static_cast<float>(std::clamp((v - a) / span, 0.0, 1.0)) : 0.5f;
}

std::uint64_t kind_tag(CorpusKind k) { return 0x5eed0000ULL + static_cast<std::uint64_t>(k); }

}  // namespace

Sample generate_sample(const CorpusSpec& spec, std::size_t index, const FieldParams& fp) {
  const std::size_t C = spec.extents.channels, H = spec.extents.height, W = spec.extents.width;
  Rng rng(derive_seed(spec.seed ^ mix64(kind_tag(spec.kind)), index));
  Sample s;
  s.image = Tensor(spec.extents.shape());
  switch (spec.kind) {
    case CorpusKind::id_natural:
    case CorpusKind::ood_semantic_shift: {
      const double theta = band_orientation(spec.kind, index, spec.classes);
      const double sigma = fp.width * std::numbers::pi / static_cast<double>(spec.classes);
      for (std::size_t c = 0; c < C; ++c)
        oriented_field(s.image.data() + c * H * W, H, W, theta, sigma, fp.floor, rng);
      minmax_normalize(s.image);
      s.label = spec.kind == CorpusKind::id_natural ? static_cast<int>(index % spec.classes) : -1;
      break;
    }
    case CorpusKind::ood_white_noise:
      for (float& v : s.image.values()) v = static_cast<float>(rng.uniform());
      break;
    case CorpusKind::ood_flat: {
      const double gx = rng.uniform(-0.02, 0.02), gy = rng.uniform(-0.02, 0.02);
      for (std::size_t c = 0; c < C; ++c) {
        const double base = rng.uniform(0.2, 0.8);
        for (std::size_t y = 0; y < H; ++y)
          for (std::size_t x = 0; x < W; ++x)
            s.image.at(c, y, x) = static_cast<float>(
                base + gx * (static_cast<double>(x) / static_cast<double>(W) - 0.5) +
                gy * (static_cast<double>(y) / static_cast<double>(H) - 0.5));
      }
      break;
    }
  }
  return s;
}

std::vector<Sample> generate_corpus(const CorpusSpec& spec, std::size_t jobs,
                                    const FieldParams& fp) {
  spec.validate();
  std::vector<Sample> out(spec.n);
  parallel_for(spec.n, jobs, [&](std::size_t i) { out[i] = generate_sample(spec, i, fp); });
  return out;
}

Manifest write_corpus(const CorpusSpec& spec, const std::vector<Sample>& samples,
                      const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  Manifest m;
  m.dir = out_dir;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%06zu", to_string(spec.kind), i);
    ManifestEntry e;
    e.sample_id = name;
    e.label = samples[i].label;
    e.kind = to_string(spec.kind);
    e.seed = spec.seed;
    e.path = std::string(name) + ".tzr";
    write_tensor(samples[i].image, out_dir / *e.path);
    m.entries.push_back(std::move(e));
  }
  write_manifest(m, out_dir / "manifest.json");
  return m;
}

double radial_spectrum_slope(const Tensor& channel, double f_lo, double f_hi) {
  const Tensor P = power_spectrum(channel);
  const std::size_t H = P.extent(0), W = P.extent(1);
  const auto r_lo = static_cast<std::size_t>(std::lround(f_lo));
  const auto r_hi = static_cast<std::size_t>(std::lround(f_hi));
  std::vector<double> sum(r_hi + 1, 0.0);
  std::vector<std::size_t> cnt(r_hi + 1, 0);
  for (std::size_t u = 0; u < H; ++u)
    for (std::size_t v = 0; v < W; ++v) {
      const auto r = static_cast<std::size_t>(
          std::lround(std::hypot(signed_freq(u, H), signed_freq(v, W))));
      if (r < r_lo || r > r_hi) continue;
      sum[r] += P.at(u, v);
      ++cnt[r];
    }
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (std::size_t r = r_lo; r <= r_hi; ++r) {
    if (!cnt[r] || sum[r] <= 0) continue;
    const double x = std::log(static_cast<double>(r));
    const double y = std::log(sum[r] / static_cast<double>(cnt[r]));
    sx += x, sy += y, sxx += x * x, sxy += x * y, n += 1;
  }
  if (n < 2) throw DomainError("not enough frequency bins for a slope");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace cgate
