#include "cgate/she.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cgate/errors.hpp"
#include "cgate/tzr.hpp"
#include "json.hpp"

namespace cgate {

const char* to_string(Weighting w) {
  return w == Weighting::uniform ? "uniform" : "self_consistent";
}
const char* to_string(KappaMode m) { return m == KappaMode::vmf ? "vmf" : "uniform"; }

namespace {

double norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

std::size_t check_features(const ClassFeatures& features) {
  if (features.empty()) throw FitError("no classes to fit");
  std::size_t d = 0;
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (features[k].empty()) throw FitError("class " + std::to_string(k) + " has no samples");
    for (const auto& z : features[k]) {
      if (d == 0) d = z.size();
      if (z.size() != d || d == 0)
        throw FitError("class " + std::to_string(k) + " has a feature of dimension " +
                       std::to_string(z.size()) + ", expected " + std::to_string(d));
    }
  }
  return d;
}

FeatureVec normalized(const std::vector<double>& acc, std::size_t k) {
  double n = 0.0;
  for (double v : acc) n += v * v;
  n = std::sqrt(n);
  if (!(n > 0.0) || !std::isfinite(n))
    throw FitError("class " + std::to_string(k) + " has a zero resultant; prototype undefined");
  FeatureVec out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / n);
  return out;
}

}  // namespace

PrototypeBank fit_prototypes(const ClassFeatures& features, Weighting weighting) {
  const std::size_t d = check_features(features);
  PrototypeBank bank;
  bank.dim = d;
  bank.provenance.weighting = weighting;
  for (std::size_t k = 0; k < features.size(); ++k) {
    const auto& cls = features[k];
    std::vector<double> acc(d, 0.0);
    for (const auto& z : cls)
      for (std::size_t i = 0; i < d; ++i) acc[i] += z[i];
    FeatureVec mu = normalized(acc, k);

    if (weighting == Weighting::self_consistent) {
      // one refinement pass, weights = clipped cosine to the uniform prototype
      std::fill(acc.begin(), acc.end(), 0.0);
      for (const auto& z : cls) {
        const double n = norm(z);
        if (n == 0.0) continue;
        const double w = std::max(0.0, dot(z, mu) / n);
        for (std::size_t i = 0; i < d; ++i) acc[i] += w * z[i];
      }
      mu = normalized(acc, k);
    }
    bank.prototypes.push_back(std::move(mu));
    bank.kappas.push_back(1.0);
    bank.provenance.counts.push_back(cls.size());
  }
  bank.provenance.kappa_mode = KappaMode::uniform;
  return bank;
}

double vmf_kappa(double rbar, std::size_t d) {
  const double r2 = rbar * rbar;
  if (r2 >= 1.0) return kKappaMax * 10.0;
  return rbar * (static_cast<double>(d) - r2) / (1.0 - r2);
}

std::vector<double> estimate_kappa(const ClassFeatures& features, const PrototypeBank& bank,
                                   std::vector<std::string>* warnings) {
  const std::size_t d = check_features(features);
  if (d != bank.dim || features.size() != bank.classes())
    throw FitError("features do not match the prototype bank");
  std::vector<double> kappas;
  for (std::size_t k = 0; k < features.size(); ++k) {
    std::vector<double> acc(d, 0.0);
    std::size_t n = 0;
    for (const auto& z : features[k]) {
      const double zn = norm(z);
      if (zn == 0.0) continue;
      for (std::size_t i = 0; i < d; ++i) acc[i] += z[i] / zn;
      ++n;
    }
    double rbar = 0.0;
    if (n > 0) {
      for (double v : acc) rbar += v * v;
      rbar = std::sqrt(rbar) / static_cast<double>(n);
    }
    const double raw = vmf_kappa(rbar, d);
    const double kappa = std::clamp(raw, kKappaMin, kKappaMax);
    if (warnings && raw >= kKappaMax) {
      warnings->push_back("class " + std::to_string(k) + ": kappa clamped at " +
                          std::to_string(kKappaMax) + " (" + std::to_string(n) +
                          " usable samples)");
    }
    kappas.push_back(static_cast<float>(kappa));  // stored as f32 on disk
  }
  return kappas;
}

PrototypeBank fit_bank(const ClassFeatures& features, Weighting weighting, KappaMode mode) {
  PrototypeBank bank = fit_prototypes(features, weighting);
  bank.provenance.kappa_mode = mode;
  if (mode == KappaMode::vmf) bank.kappas = estimate_kappa(features, bank, &bank.provenance.warnings);
  return bank;
}

double she_energy(std::span<const float> z, const PrototypeBank& bank, bool l2_normalize) {
  if (z.size() != bank.dim)
    throw SizeError("feature dimension " + std::to_string(z.size()) + " != bank dimension " +
                    std::to_string(bank.dim));
  const double n = norm(z);
  if (!(n > 0.0)) throw DomainError("she_energy of a zero vector is undefined");
  const double scale = l2_normalize ? 1.0 / n : 1.0;

  std::vector<double> t(bank.classes());
  double m = -INFINITY;
  for (std::size_t j = 0; j < t.size(); ++j) {
    t[j] = bank.kappas[j] * dot(z, bank.prototypes[j]) * scale;
    m = std::max(m, t[j]);
  }
  double s = 0.0;
  for (double v : t) s += std::exp(v - m);
  return -(m + std::log(s));
}

double magnitude_energy(std::span<const float> z, double alpha, std::size_t classes) {
  if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
  if (classes == 0) throw DomainError("classes must be positive");
  return -alpha * norm(z) - std::log(static_cast<double>(classes));
}

void save_bank(const PrototypeBank& bank, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t C = bank.classes();
  std::vector<float> protos;
  protos.reserve(C * bank.dim);
  for (const auto& p : bank.prototypes) protos.insert(protos.end(), p.begin(), p.end());
  std::vector<float> kap(bank.kappas.begin(), bank.kappas.end());
  write_tensor(Tensor({C, bank.dim}, std::move(protos)), dir / "prototypes.tzr");
  write_tensor(Tensor({C}, std::move(kap)), dir / "kappas.tzr");

  nlohmann::ordered_json j;
  j["classes"] = C;
  j["dim"] = bank.dim;
  j["weighting"] = to_string(bank.provenance.weighting);
  j["kappa_mode"] = to_string(bank.provenance.kappa_mode);
  j["counts"] = bank.provenance.counts;
  j["warnings"] = bank.provenance.warnings;
  std::ofstream f(dir / "bank.json");
  if (!f) throw IoError("cannot write " + (dir / "bank.json").string());
  f << j.dump(2) << "\n";
}

PrototypeBank load_bank(const std::filesystem::path& dir) {
  const Tensor protos = read_tensor(dir / "prototypes.tzr");
  const Tensor kap = read_tensor(dir / "kappas.tzr");
  if (protos.rank() != 2 || kap.rank() != 1 || kap.extent(0) != protos.extent(0))
    throw DataError("prototype bank tensors in " + dir.string() + " have inconsistent shapes");

  PrototypeBank bank;
  bank.dim = protos.extent(1);
  for (std::size_t k = 0; k < protos.extent(0); ++k) {
    const float* p = protos.data() + k * bank.dim;
    bank.prototypes.emplace_back(p, p + bank.dim);
    if (!(kap[k] > 0.0f)) throw DataError("non-positive kappa in " + dir.string());
    bank.kappas.push_back(kap[k]);
  }

  std::ifstream f(dir / "bank.json");
  if (f) {
    try {
      const auto j = nlohmann::json::parse(f);
      bank.provenance.counts = j.value("counts", std::vector<std::size_t>{});
      bank.provenance.weighting = j.value("weighting", std::string("uniform")) == "uniform"
                                      ? Weighting::uniform
                                      : Weighting::self_consistent;
      bank.provenance.kappa_mode =
          j.value("kappa_mode", std::string("vmf")) == "vmf" ? KappaMode::vmf : KappaMode::uniform;
      bank.provenance.warnings = j.value("warnings", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
      throw DataError("bad bank.json in " + dir.string() + ": " + e.what());
    }
  }
  return bank;
}

}  // namespace cgate
