#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cgate/backbone.hpp"
#include "cgate/cascade.hpp"
#include "cgate/she.hpp"

namespace cgate {

struct RunConfig {
  struct {
    std::uint64_t seed = 7;
    std::size_t classes = 4;
    Extents extents{3, 32, 32};
    std::vector<std::size_t> widths{16, 32, 64};
  } backbone;

  struct {
    std::size_t stage = 0;
    std::size_t top_k = 0;  // 0: max(1, ceil(0.1 C))
    double epsilon = 1e-6;
    bool global_omega = false;
  } ses;

  struct {
    std::size_t stage = 1;
    Weighting weighting = Weighting::uniform;
    KappaMode kappa_mode = KappaMode::vmf;
    bool l2_normalize = true;
  } she;

  CalibrationBudget budget;
  ScoreKind final_scorer = ScoreKind::final_energy;

  struct {
    std::uint64_t seed = 1234;
    double validation_fraction = 0.1;
  } split;

  // Throws ConfigError naming the first bad field.
  void validate() const;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::string& path);

  // Fields that change the model (everything except the split). Two configs
  // with equal model_json build identical cascades.
  std::string model_json() const;
};

}  // namespace cgate
