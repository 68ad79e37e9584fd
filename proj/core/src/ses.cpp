#include "cgate/ses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "cgate/errors.hpp"

namespace cgate {

std::size_t SesConfig::default_top_k(std::size_t channels) {
  const auto k = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(channels) - 1e-9));
  return std::max<std::size_t>(1, k);
}

std::size_t SesConfig::effective_k(std::size_t channels) const {
  if (!global_omega.empty()) return global_omega.size();
  return top_k == 0 ? default_top_k(channels) : top_k;
}

void SesConfig::validate(std::size_t channels) const {
  if (!(epsilon > 0.0)) throw ConfigError("ses epsilon must be positive", "ses.epsilon");
  const std::size_t k = effective_k(channels);
  if (k < 1 || k > channels)
    throw ConfigError("ses top_k " + std::to_string(k) + " outside 1.." + std::to_string(channels),
                      "ses.top_k");
  for (auto c : global_omega)
    if (c >= channels) throw ConfigError("global omega channel out of range", "ses.global_omega");
}

Tensor laplacian_response(const Tensor& z1, Padding padding) {
  Tensor h = depthwise_conv2d(z1, Kernel2D::laplacian4(), padding);
  for (float& v : h.values()) v = std::fabs(v);
  return h;
}

std::vector<double> channel_energy(const Tensor& h, double epsilon) {
  std::size_t C, HW;
  if (h.rank() == 3) {
    C = h.extent(0), HW = h.extent(1) * h.extent(2);
  } else if (h.rank() == 2) {
    C = 1, HW = h.size();
  } else {
    throw SizeError("channel_energy expects C x H x W");
  }
  std::vector<double> e(C);
  for (std::size_t c = 0; c < C; ++c) {
    double s = 0.0;
    const float* p = h.data() + c * HW;
    for (std::size_t i = 0; i < HW; ++i) s += p[i];
    e[c] = std::log(s / static_cast<double>(HW) + epsilon);
  }
  return e;
}

std::vector<std::size_t> top_k_channels(std::span<const double> energies, std::size_t k) {
  if (k < 1 || k > energies.size())
    throw ConfigError("top_k " + std::to_string(k) + " outside 1.." +
                          std::to_string(energies.size()),
                      "ses.top_k");
  std::vector<std::size_t> idx(energies.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (energies[a] != energies[b]) return energies[a] > energies[b];
                      return a < b;
                    });
  idx.resize(k);
  return idx;
}

double ses_score_from_energies(std::span<const double> energies, std::size_t k) {
  double s = 0.0;
  for (auto c : top_k_channels(energies, k)) s += energies[c];
  return s / static_cast<double>(k);
}

double ses_score(const Tensor& z1, const SesConfig& cfg) {
  const std::size_t C = z1.rank() == 3 ? z1.extent(0) : 1;
  cfg.validate(C);
  const auto e = channel_energy(laplacian_response(z1, cfg.padding), cfg.epsilon);
  if (!cfg.global_omega.empty()) {
    double s = 0.0;
    for (auto c : cfg.global_omega) s += e[c];
    return s / static_cast<double>(cfg.global_omega.size());
  }
  return ses_score_from_energies(e, cfg.effective_k(C));
}

double spectral_contrast_gain(const Tensor& z1, const SesConfig& cfg) {
  const auto e = channel_energy(laplacian_response(z1, cfg.padding), cfg.epsilon);
  const double top = *std::max_element(e.begin(), e.end());
  // divide through by exp(top) so nothing overflows
  double mean = 0.0;
  for (double v : e) mean += std::exp(v - top);
  mean /= static_cast<double>(e.size());
  return 1.0 / mean;
}

double laplacian_symbol(std::size_t u, std::size_t v, std::size_t H, std::size_t W) {
  const double tu = 2.0 * std::numbers::pi * static_cast<double>(u) / static_cast<double>(H);
  const double tv = 2.0 * std::numbers::pi * static_cast<double>(v) / static_cast<double>(W);
  return (2.0 - 2.0 * std::cos(tu)) + (2.0 - 2.0 * std::cos(tv));
}

double symbol_weighted_energy(const Tensor& power, int power_of_symbol) {
  if (power.rank() != 2) throw SizeError("expected an H x W power spectrum");
  const std::size_t H = power.extent(0), W = power.extent(1);
  double s = 0.0;
  for (std::size_t u = 0; u < H; ++u)
    for (std::size_t v = 0; v < W; ++v)
      s += std::pow(laplacian_symbol(u, v, H, W), power_of_symbol) * power.at(u, v);
  const double n = static_cast<double>(H * W);
  return s / (n * n);
}

double frequency_weighting_ratio(const Tensor& channel, Padding padding) {
  if (channel.rank() != 2) throw SizeError("frequency_weighting_ratio expects an H x W channel");
  if (channel.extent(0) < 8 || channel.extent(1) < 8)
    throw SizeError("frequency_weighting_ratio needs H, W >= 8");

  const Tensor r = depthwise_conv2d(channel, Kernel2D::laplacian4(), padding);
  double num = 0.0;
  for (float v : r.values()) num += static_cast<double>(v) * v;
  num /= static_cast<double>(r.size());

  const Tensor P = power_spectrum(channel);
  const double den = symbol_weighted_energy(P, 2);

  // DC-only input: both sides vanish.
  double total = 0.0;
  for (float v : P.values()) total += v;
  const double floor = 1e-12 * std::max(total / static_cast<double>(P.size()), 1e-30);
  if (den <= floor && num <= floor) return 1.0;
  return num / den;
}

std::vector<std::size_t> fit_global_omega(const std::vector<std::vector<double>>& energies,
                                          std::size_t k) {
  if (energies.empty()) throw CalibrationError("global omega needs at least one sample");
  std::vector<double> mean(energies.front().size(), 0.0);
  for (const auto& e : energies) {
    if (e.size() != mean.size()) throw SizeError("inconsistent channel counts");
    for (std::size_t c = 0; c < e.size(); ++c) mean[c] += e[c];
  }
  auto omega = top_k_channels(mean, k);
  std::sort(omega.begin(), omega.end());
  return omega;
}

}  // namespace cgate
