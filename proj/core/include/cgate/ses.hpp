#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cgate/tensor.hpp"

namespace cgate {

struct SesConfig {
  std::size_t top_k = 0;  // 0: max(1, ceil(0.1 * C))
  double epsilon = 1e-6;
  Padding padding = Padding::replicate;
  // When non-empty, score over these channels instead of the per-sample top-K.
  std::vector<std::size_t> global_omega;

  static std::size_t default_top_k(std::size_t channels);
  std::size_t effective_k(std::size_t channels) const;
  // Throws ConfigError when K or Omega does not fit `channels`.
  void validate(std::size_t channels) const;
};

// |z * K_lap| per channel.
Tensor laplacian_response(const Tensor& z1, Padding padding = Padding::replicate);

// log(spatial mean + eps) per channel of a response map.
std::vector<double> channel_energy(const Tensor& h, double epsilon);

// Indices of the k largest energies, ties to the lower index, sorted by rank.
std::vector<std::size_t> top_k_channels(std::span<const double> energies, std::size_t k);

double ses_score_from_energies(std::span<const double> energies, std::size_t k);

double ses_score(const Tensor& z1, const SesConfig& cfg);

// exp(top-1 energy) / mean_c exp(e_c); always >= 1.
double spectral_contrast_gain(const Tensor& z1, const SesConfig& cfg);

// Discrete symbol of the 5-point Laplacian at (u, v):
// (2 - 2cos(2 pi u/H)) + (2 - 2cos(2 pi v/W)).
double laplacian_symbol(std::size_t u, std::size_t v, std::size_t H, std::size_t W);

// sum_k symbol(k)^power * P(k) / (HW)^2 over a power spectrum P.
double symbol_weighted_energy(const Tensor& power, int power_of_symbol);

// Mean squared Laplacian response of an H x W channel divided by the
// spectrum weighted with the squared symbol. Under periodic padding this is
// 1 up to rounding; a DC-only channel returns 1.
double frequency_weighting_ratio(const Tensor& channel, Padding padding = Padding::periodic);

// Global Omega: the k channels with the largest mean energy over a set of
// per-sample energy vectors.
std::vector<std::size_t> fit_global_omega(const std::vector<std::vector<double>>& energies,
                                          std::size_t k);

}  // namespace cgate
