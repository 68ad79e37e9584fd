#include "cgate/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cgate/errors.hpp"
#include "cgate/tzr.hpp"
#include "json.hpp"

namespace cgate {

const char* to_string(ScoreKind k) {
  switch (k) {
    case ScoreKind::ses: return "ses";
    case ScoreKind::she: return "she";
    case ScoreKind::final_energy: return "final-energy";
    case ScoreKind::final_msp: return "final-msp";
  }
  return "?";
}

ScoreKind parse_score_kind(const std::string& s) {
  if (s == "ses") return ScoreKind::ses;
  if (s == "she") return ScoreKind::she;
  if (s == "final-energy" || s == "energy") return ScoreKind::final_energy;
  if (s == "final-msp" || s == "msp") return ScoreKind::final_msp;
  throw ConfigError("unknown score kind '" + s + "'", "score_kind");
}

GateVerdict gate_decision(double score, const GateConfig& g) {
  if (std::isnan(score)) return GateVerdict::reject;
  return (g.lo <= score && score <= g.hi) ? GateVerdict::pass : GateVerdict::reject;
}

double CalibrationBudget::early_product() const {
  double p = 1.0;
  for (double r : early_retention) p *= r;
  return p;
}

double CalibrationBudget::residual() const { return final_tpr / early_product(); }

void CalibrationBudget::validate() const {
  for (double r : early_retention)
    if (!(r > 0.0 && r <= 1.0))
      throw ConfigError("early retention targets must lie in (0, 1]", "budget.early_retention");
  if (!(final_tpr > 0.0 && final_tpr <= 1.0))
    throw ConfigError("final TPR must lie in (0, 1]", "budget.final_tpr");
  // a hair of slack so r = tpr^(1/n) style budgets are not rejected by rounding
  if (early_product() < final_tpr * (1.0 - 1e-12))
    throw ConfigError("infeasible budget: product of early retentions is below the final TPR",
                      "budget");
}

namespace {

std::vector<double> sorted_copy(std::span<const double> s) {
  std::vector<double> v(s.begin(), s.end());
  for (double x : v)
    if (!std::isfinite(x)) throw CalibrationError("non-finite calibration score");
  std::sort(v.begin(), v.end());
  return v;
}

double median_of_sorted(const std::vector<double>& v) {
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// floor/ceil that do not trip over 0.98 * 100 = 98.00000000000001
std::size_t safe_floor(double x) { return static_cast<std::size_t>(std::floor(x + 1e-9)); }
std::size_t safe_ceil(double x) { return static_cast<std::size_t>(std::ceil(x - 1e-9)); }

}  // namespace

GateConfig calibrate_interval(std::span<const double> scores, double retention, GateConfig base) {
  if (scores.size() < kMinCalibrationSamples)
    throw CalibrationError("gate on stage " + std::to_string(base.stage) + " has " +
                           std::to_string(scores.size()) + " calibration samples, need " +
                           std::to_string(kMinCalibrationSamples));
  if (!(retention > 0.0 && retention <= 1.0))
    throw ConfigError("retention must lie in (0, 1]", "budget.early_retention");
  const auto v = sorted_copy(scores);
  const std::size_t n = v.size();
  GateConfig g = base;
  g.calibration.validation_size = n;
  g.calibration.retention = retention;
  g.calibration.center = median_of_sorted(v);
  if (retention >= 1.0) {
    g.lo = -kInf, g.hi = kInf;
    g.calibration.lower_level = 0.0, g.calibration.upper_level = 1.0;
    return g;
  }
  const std::size_t trim = std::min(safe_floor(static_cast<double>(n) * (1.0 - retention)), n - 1);
  const std::size_t k_lo = trim / 2;
  const std::size_t k_hi = trim - k_lo;
  g.lo = v[k_lo];
  g.hi = v[n - 1 - k_hi];
  g.calibration.lower_level = static_cast<double>(k_lo) / static_cast<double>(n);
  g.calibration.upper_level = static_cast<double>(n - k_hi) / static_cast<double>(n);
  return g;
}

GateConfig calibrate_threshold(std::span<const double> scores, double retention, GateConfig base) {
  if (scores.size() < kMinCalibrationSamples)
    throw CalibrationError("final gate has " + std::to_string(scores.size()) +
                           " calibration samples, need " +
                           std::to_string(kMinCalibrationSamples));
  if (!(retention > 0.0 && retention <= 1.0))
    throw ConfigError("final retention must lie in (0, 1]", "budget.final_tpr");
  const auto v = sorted_copy(scores);
  const std::size_t n = v.size();
  const std::size_t keep = std::clamp<std::size_t>(safe_ceil(retention * static_cast<double>(n)), 1, n);
  GateConfig g = base;
  g.calibration.validation_size = n;
  g.calibration.retention = retention;
  g.calibration.center = median_of_sorted(v);
  if (base.kind == ScoreKind::final_energy) {
    // low energy is ID
    g.lo = -kInf;
    g.hi = v[keep - 1];
    g.calibration.lower_level = 0.0;
    g.calibration.upper_level = static_cast<double>(keep) / static_cast<double>(n);
  } else {
    g.lo = v[n - keep];
    g.hi = kInf;
    g.calibration.lower_level = static_cast<double>(n - keep) / static_cast<double>(n);
    g.calibration.upper_level = 1.0;
  }
  return g;
}

std::vector<GateConfig> calibrate_gates(const std::vector<std::vector<double>>& scores,
                                        const std::vector<GatePlacement>& placements,
                                        const CalibrationBudget& budget) {
  budget.validate();
  if (placements.empty() || !is_final(placements.back().kind))
    throw ConfigError("the last gate must be a final scorer", "gates");
  if (placements.size() != budget.early_retention.size() + 1)
    throw ConfigError("budget lists " + std::to_string(budget.early_retention.size()) +
                          " early retentions for " + std::to_string(placements.size() - 1) +
                          " early gates",
                      "budget.early_retention");
  if (scores.size() != placements.size())
    throw CalibrationError("score lists do not match the gate placements");
  const std::size_t n = scores.front().size();
  for (const auto& s : scores)
    if (s.size() != n) throw CalibrationError("per-gate score lists differ in length");

  std::vector<std::size_t> alive(n);
  for (std::size_t i = 0; i < n; ++i) alive[i] = i;

  std::vector<GateConfig> gates;
  for (std::size_t g = 0; g < placements.size(); ++g) {
    std::vector<double> s;
    s.reserve(alive.size());
    for (auto i : alive) s.push_back(scores[g][i]);
    GateConfig base;
    base.stage = placements[g].stage;
    base.kind = placements[g].kind;
    const bool last = g + 1 == placements.size();
    GateConfig cfg = last ? calibrate_threshold(s, budget.residual() > 1.0 ? 1.0 : budget.residual(), base)
                          : calibrate_interval(s, budget.early_retention[g], base);
    std::vector<std::size_t> next;
    for (auto i : alive)
      if (gate_decision(scores[g][i], cfg) == GateVerdict::pass) next.push_back(i);
    alive.swap(next);
    gates.push_back(cfg);
  }
  return gates;
}

double energy_score(std::span<const float> logits) {
  if (logits.size() < 2) throw DomainError("energy_score needs at least 2 logits");
  double m = -kInf;
  for (float v : logits) m = std::max(m, static_cast<double>(v));
  double s = 0.0;
  for (float v : logits) s += std::exp(static_cast<double>(v) - m);
  return -(m + std::log(s));
}

double msp_score(std::span<const float> logits) {
  if (logits.size() < 2) throw DomainError("msp_score needs at least 2 logits");
  double m = -kInf;
  for (float v : logits) m = std::max(m, static_cast<double>(v));
  double s = 0.0;
  for (float v : logits) s += std::exp(static_cast<double>(v) - m);
  return 1.0 / s;
}

BackboneSource::BackboneSource(const Backbone& b, Tensor image) : b_(b), image_(std::move(image)) {}

const Tensor& BackboneSource::stage(std::size_t i) {
  if (i >= b_.stage_count()) throw SizeError("stage index out of range");
  while (cache_.size() <= i) {
    const Tensor& prev = cache_.empty() ? image_ : cache_.back();
    cache_.push_back(b_.forward_stage(cache_.size(), prev));
  }
  return cache_[i];
}

std::vector<float> BackboneSource::logits() { return b_.logits(stage(b_.stage_count() - 1)); }

StoredSource::StoredSource(std::vector<Tensor> stages, std::optional<std::vector<float>> logits)
    : count_(stages.size()), logits_(std::move(logits)) {
  for (auto& t : stages) stages_.emplace_back(std::move(t));
}

StoredSource::StoredSource(std::vector<std::filesystem::path> stage_paths,
                           std::optional<std::filesystem::path> logits_path)
    : count_(stage_paths.size()),
      stages_(stage_paths.size()),
      paths_(std::move(stage_paths)),
      logits_path_(std::move(logits_path)) {}

const Tensor& StoredSource::stage(std::size_t i) {
  if (i >= count_) throw SizeError("stage index out of range");
  for (std::size_t j = touched_; j <= i; ++j)
    if (!stages_[j]) stages_[j] = read_tensor(paths_[j]);
  touched_ = std::max(touched_, i + 1);
  return *stages_[i];
}

std::vector<float> StoredSource::logits() {
  if (count_) stage(count_ - 1);
  if (!logits_ && logits_path_) {
    const Tensor t = read_tensor(*logits_path_);
    if (t.rank() != 1) throw DataError("logits tensor must be rank 1: " + logits_path_->string());
    logits_ = std::vector<float>(t.values().begin(), t.values().end());
  }
  if (!logits_) throw DataError("sample has no logits for the final scorer");
  return *logits_;
}

std::uint64_t CostModel::full() const {
  std::uint64_t s = 0;
  for (auto v : stages) s += v;
  for (auto v : gates) s += v;
  return s;
}

std::uint64_t CostModel::backbone() const {
  std::uint64_t s = 0;
  for (auto v : stages) s += v;
  return s;
}

std::uint64_t CostModel::through_gate(const std::vector<GateConfig>& gs, std::size_t g) const {
  std::uint64_t s = 0;
  const std::size_t last_stage = is_final(gs[g].kind) ? stages.size() - 1 : gs[g].stage;
  for (std::size_t i = 0; i <= last_stage && i < stages.size(); ++i) s += stages[i];
  for (std::size_t j = 0; j <= g && j < gates.size(); ++j) s += gates[j];
  return s;
}

namespace {

std::uint64_t gate_overhead(const GateConfig& g, const Extents& z, std::size_t classes) {
  switch (g.kind) {
    case ScoreKind::ses: return ses_gate_flops(z);
    case ScoreKind::she: return she_gate_flops(z, classes);
    default: return 0;  // final scorers read logits the head already produced
  }
}

}  // namespace

CostModel CostModel::from_backbone(const Backbone& b, const std::vector<GateConfig>& gates) {
  CostModel m;
  m.stages = b.flops_ledger();
  for (const auto& g : gates)
    m.gates.push_back(is_final(g.kind) ? 0 : gate_overhead(g, b.stage_output(g.stage), b.classes()));
  return m;
}

CostModel CostModel::from_extents(const Extents& input, const std::vector<Extents>& stages,
                                  std::size_t classes, const std::vector<GateConfig>& gates) {
  CostModel m;
  std::size_t in_ch = input.channels;
  for (const auto& e : stages) {
    m.stages.push_back(conv_flops({in_ch, e.channels, 3, 1}, e));
    in_ch = e.channels;
  }
  m.stages.push_back(head_flops(in_ch, classes));
  for (const auto& g : gates)
    m.gates.push_back(is_final(g.kind) || g.stage >= stages.size()
                          ? 0
                          : gate_overhead(g, stages[g.stage], classes));
  return m;
}

void CascadeModel::validate(std::size_t stage_count) const {
  if (gates.empty() || !is_final(gates.back().kind))
    throw ConfigError("gate list must end with a final scorer", "gates");
  for (std::size_t g = 0; g + 1 < gates.size(); ++g) {
    if (is_final(gates[g].kind)) throw ConfigError("final scorer before the last gate", "gates");
    if (gates[g].stage >= stage_count)
      throw ConfigError("early gate on stage " + std::to_string(gates[g].stage) + " but only " +
                            std::to_string(stage_count) + " stages",
                        "gates");
    if (g > 0 && gates[g].stage <= gates[g - 1].stage)
      throw ConfigError("early gates must be in increasing stage order", "gates");
  }
  for (const auto& g : gates)
    if (!(g.lo <= g.hi)) throw ConfigError("gate with lo > hi", "gates");
  if (gates.back().stage != stage_count)
    throw ConfigError("final gate must sit on stage " + std::to_string(stage_count), "gates");
  if (cost.gates.size() != gates.size() || cost.stages.size() != stage_count + 1)
    throw ConfigError("cost model does not match the gate list", "gates");
}

double gate_score(const GateConfig& g, StageSource& src, const CascadeModel& m) {
  switch (g.kind) {
    case ScoreKind::ses: return ses_score(src.stage(g.stage), m.ses);
    case ScoreKind::she: {
      const auto pooled = global_average_pool(src.stage(g.stage));
      double n = 0.0;
      for (float v : pooled) n += static_cast<double>(v) * v;
      // dead feature vector: no direction, flagged via NaN
      if (n == 0.0) return std::nan("");
      return she_energy(pooled, m.bank, m.l2_normalize);
    }
    case ScoreKind::final_energy: return energy_score(src.logits());
    case ScoreKind::final_msp: return msp_score(src.logits());
  }
  return std::nan("");
}

double normalized_excess(double s, const GateConfig& g) {
  if (std::isnan(s)) return kInf;
  const double c = g.calibration.center;
  constexpr double tiny = 1e-12;
  if (s >= c) {
    if (std::isinf(g.hi)) return is_final(g.kind) ? -(s - c) / std::max(c - g.lo, tiny) : 0.0;
    return (s - c) / std::max(g.hi - c, tiny);
  }
  if (std::isinf(g.lo)) return is_final(g.kind) ? -(c - s) / std::max(g.hi - c, tiny) : 0.0;
  return (c - s) / std::max(c - g.lo, tiny);
}

CascadeOutcome run_cascade(StageSource& src, const CascadeModel& m, std::string sample_id) {
  m.validate(src.stage_count());
  CascadeOutcome out;
  out.sample_id = std::move(sample_id);
  double worst = -kInf;
  for (std::size_t g = 0; g < m.gates.size(); ++g) {
    const GateConfig& gate = m.gates[g];
    const double s = gate_score(gate, src, m);
    out.scores.push_back(s);
    worst = std::max(worst, normalized_excess(s, gate));
    const bool final = g + 1 == m.gates.size();
    if (gate_decision(s, gate) == GateVerdict::reject) {
      out.verdict = Verdict::rejected;
      out.anomaly = std::isnan(s);
      out.exit_stage = final ? kFinalExit : gate.stage;
      out.exit_gate = g;
      out.flops = m.cost.through_gate(m.gates, g);
      break;
    }
    if (final) {
      out.exit_stage = kFinalExit;
      out.exit_gate = g;
      out.flops = m.cost.through_gate(m.gates, g);
      const auto lg = src.logits();
      out.label_pred = static_cast<std::size_t>(std::max_element(lg.begin(), lg.end()) - lg.begin());
    }
  }
  out.composite = std::isinf(worst) ? std::numeric_limits<double>::lowest() : -worst;
  return out;
}

CascadeOutcome run_cascade(const Tensor& sample, const Backbone& b, const CascadeModel& m,
                           std::string sample_id) {
  BackboneSource src(b, sample);
  return run_cascade(src, m, std::move(sample_id));
}

namespace {

std::string bound_string(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_bound(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf" || s == "+inf") return kInf;
  if (s == "-inf") return -kInf;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw DataError("bad gate bound '" + s + "'");
  return v;
}

nlohmann::ordered_json gates_json(const std::vector<GateConfig>& gates) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& g : gates) {
    nlohmann::ordered_json j;
    j["stage"] = g.stage;
    j["score_kind"] = to_string(g.kind);
    j["lo"] = bound_string(g.lo);
    j["hi"] = bound_string(g.hi);
    j["calibration"] = {{"retention", bound_string(g.calibration.retention)},
                        {"lower_level", bound_string(g.calibration.lower_level)},
                        {"upper_level", bound_string(g.calibration.upper_level)},
                        {"validation_size", g.calibration.validation_size},
                        {"center", bound_string(g.calibration.center)}};
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<GateConfig> parse_gates(const nlohmann::json& arr) {
  std::vector<GateConfig> out;
  for (const auto& j : arr) {
    GateConfig g;
    g.stage = j.at("stage").get<std::size_t>();
    g.kind = parse_score_kind(j.at("score_kind").get<std::string>());
    g.lo = parse_bound(j.at("lo"));
    g.hi = parse_bound(j.at("hi"));
    if (j.contains("calibration")) {
      const auto& c = j["calibration"];
      g.calibration.retention = parse_bound(c.at("retention"));
      g.calibration.lower_level = parse_bound(c.at("lower_level"));
      g.calibration.upper_level = parse_bound(c.at("upper_level"));
      g.calibration.validation_size = c.at("validation_size").get<std::size_t>();
      g.calibration.center = parse_bound(c.at("center"));
    }
    if (!(g.lo <= g.hi)) throw DataError("gate with lo > hi");
    out.push_back(g);
  }
  return out;
}

}  // namespace

std::string gates_to_json(const std::vector<GateConfig>& gates) { return gates_json(gates).dump(2); }

std::vector<GateConfig> gates_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    return parse_gates(j.is_array() ? j : j.at("gates"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad gates JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("bad gates JSON: ") + e.what());
  }
}

void save_gates(const std::vector<GateConfig>& gates, const std::filesystem::path& path,
                const std::string& extra_json) {
  nlohmann::ordered_json doc;
  doc["gates"] = gates_json(gates);
  if (!extra_json.empty()) {
    const auto extra = nlohmann::ordered_json::parse(extra_json);
    for (auto it = extra.begin(); it != extra.end(); ++it) doc[it.key()] = it.value();
  }
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << doc.dump(2) << "\n";
}

std::vector<GateConfig> load_gates(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return gates_from_json(ss.str());
}

}  // namespace cgate
