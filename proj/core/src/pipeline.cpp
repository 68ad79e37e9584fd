#include "cgate/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cgate/errors.hpp"
#include "cgate/parallel.hpp"
#include "cgate/rng.hpp"
#include "cgate/tzr.hpp"
#include "json.hpp"

namespace cgate {

ImageSet::ImageSet(std::vector<Sample> samples, std::string prefix)
    : samples_(std::move(samples)), prefix_(std::move(prefix)) {}

std::string ImageSet::id(std::size_t i) const { return prefix_ + "_" + std::to_string(i); }

std::unique_ptr<StageSource> ImageSet::open(std::size_t i, const Backbone& b) const {
  return std::make_unique<BackboneSource>(b, samples_[i].image);
}

ManifestSet::ManifestSet(Manifest m) : m_(std::move(m)) { m_.validate(false); }

std::unique_ptr<StageSource> ManifestSet::open(std::size_t i, const Backbone& b) const {
  const auto& e = m_.entries[i];
  if (!e.stage_paths.empty()) {
    std::vector<std::filesystem::path> paths;
    for (const auto& p : e.stage_paths) paths.push_back(m_.resolve(p));
    std::optional<std::filesystem::path> lp;
    if (e.logits_path) lp = m_.resolve(*e.logits_path);
    return std::make_unique<StoredSource>(std::move(paths), std::move(lp));
  }
  Tensor img = read_tensor(m_.resolve(*e.path));
  if (img.rank() != 3 || Extents::of(img) != b.input())
    throw DataError("image " + e.sample_id + " has shape " + shape_string(img.shape()) +
                    ", backbone expects " + extents_string(b.input()));
  return std::make_unique<BackboneSource>(b, std::move(img));
}

std::optional<std::vector<Extents>> ManifestSet::feature_extents() const {
  if (!m_.is_feature_manifest()) return std::nullopt;
  std::vector<Extents> out;
  for (const auto& p : m_.entries.front().stage_paths) {
    const Tensor t = read_tensor(m_.resolve(p));
    if (t.rank() != 3) throw DataError("stage tensor " + p + " is not C x H x W");
    out.push_back(Extents::of(t));
  }
  return out;
}

Backbone make_backbone(const RunConfig& c) {
  BackboneOptions o;
  o.widths = c.backbone.widths;
  return Backbone(c.backbone.seed, c.backbone.classes, c.backbone.extents, o);
}

std::vector<GatePlacement> gate_placements(const RunConfig& c) {
  return {{c.ses.stage, ScoreKind::ses},
          {c.she.stage, ScoreKind::she},
          {c.backbone.widths.size(), c.final_scorer}};
}

Split split_indices(std::size_t n, double validation_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  const auto nv = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  Split s;
  s.validation.assign(idx.begin(), idx.begin() + static_cast<long>(nv));
  s.fit.assign(idx.begin() + static_cast<long>(nv), idx.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.fit.begin(), s.fit.end());
  return s;
}

SesConfig Artifacts::ses_config() const {
  SesConfig s;
  s.top_k = config.ses.top_k;
  s.epsilon = config.ses.epsilon;
  s.global_omega = global_omega;
  return s;
}

CascadeModel Artifacts::model() const {
  CascadeModel m;
  m.gates = gates;
  m.ses = ses_config();
  m.bank = bank;
  m.l2_normalize = config.she.l2_normalize;
  m.cost = cost;
  return m;
}

namespace {

CostModel cost_for(const RunConfig& c, const Backbone& b, const SampleSet& s,
                   const std::vector<GateConfig>& gates) {
  if (auto ext = s.feature_extents())
    return CostModel::from_extents(c.backbone.extents, *ext, c.backbone.classes, gates);
  return CostModel::from_backbone(b, gates);
}

void check_stage_count(const RunConfig& c, const SampleSet& s) {
  if (auto ext = s.feature_extents()) {
    if (ext->size() != c.backbone.widths.size())
      throw DataError("feature manifest has " + std::to_string(ext->size()) +
                      " stages, configuration expects " +
                      std::to_string(c.backbone.widths.size()));
  }
}

}  // namespace

Artifacts calibrate(const RunConfig& c, const Backbone& b, const SampleSet& id, std::size_t jobs) {
  c.validate();
  check_stage_count(c, id);
  const std::size_t classes = c.backbone.classes;
  const Split split = split_indices(id.size(), c.split.validation_fraction, c.split.seed);

  // fit split: pooled SHE features (and SES energies for a global Omega)
  std::vector<FeatureVec> feats(split.fit.size());
  std::vector<std::vector<double>> energies(c.ses.global_omega ? split.fit.size() : 0);
  parallel_for(split.fit.size(), jobs, [&](std::size_t k) {
    const std::size_t i = split.fit[k];
    const int label = id.label(i);
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      throw DataError("ID sample " + id.id(i) + " has label " + std::to_string(label) +
                      " outside 0.." + std::to_string(classes - 1));
    auto src = id.open(i, b);
    if (c.ses.global_omega)
      energies[k] = channel_energy(laplacian_response(src->stage(c.ses.stage)), c.ses.epsilon);
    feats[k] = global_average_pool(src->stage(c.she.stage));
  });

  ClassFeatures per_class(classes);
  for (std::size_t k = 0; k < split.fit.size(); ++k) {
    double n = 0;
    for (float v : feats[k]) n += std::fabs(v);
    if (n == 0) continue;  // no direction to learn from
    per_class[static_cast<std::size_t>(id.label(split.fit[k]))].push_back(std::move(feats[k]));
  }
  for (std::size_t k = 0; k < classes; ++k)
    if (per_class[k].empty())
      throw DataError("class " + std::to_string(k) + " is absent from the fit split");

  Artifacts a;
  a.config = c;
  a.bank = fit_bank(per_class, c.she.weighting, c.she.kappa_mode);
  if (c.ses.global_omega) {
    const std::size_t C = energies.front().size();
    const std::size_t k = c.ses.top_k ? c.ses.top_k : SesConfig::default_top_k(C);
    a.global_omega = fit_global_omega(energies, k);
  }

  const auto placements = gate_placements(c);
  CascadeModel probe;
  probe.ses = a.ses_config();
  probe.bank = a.bank;
  probe.l2_normalize = c.she.l2_normalize;

  std::vector<std::vector<double>> scores(placements.size(),
                                          std::vector<double>(split.validation.size()));
  parallel_for(split.validation.size(), jobs, [&](std::size_t k) {
    auto src = id.open(split.validation[k], b);
    for (std::size_t g = 0; g < placements.size(); ++g) {
      GateConfig gc;
      gc.stage = placements[g].stage;
      gc.kind = placements[g].kind;
      scores[g][k] = gate_score(gc, *src, probe);
    }
  });
  a.gates = calibrate_gates(scores, placements, c.budget);
  a.cost = cost_for(c, b, id, a.gates);
  return a;
}

void save_artifacts(const Artifacts& a, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_bank(a.bank, dir / "bank");
  nlohmann::ordered_json extra;
  extra["ses_global_omega"] = a.global_omega;
  extra["cost"] = {{"stages", a.cost.stages}, {"gates", a.cost.gates}};
  extra["run_config"] = nlohmann::ordered_json::parse(a.config.to_json());
  save_gates(a.gates, dir / "gates.json", extra.dump());
}

Artifacts load_artifacts(const std::filesystem::path& dir) {
  std::ifstream f(dir / "gates.json");
  if (!f) throw DataError("no gates.json in " + dir.string());
  std::stringstream ss;
  ss << f.rdbuf();
  Artifacts a;
  try {
    const auto j = nlohmann::json::parse(ss.str());
    a.gates = gates_from_json(ss.str());
    a.config = RunConfig::from_json(j.at("run_config").dump());
    a.global_omega = j.value("ses_global_omega", std::vector<std::size_t>{});
    a.cost.stages = j.at("cost").at("stages").get<std::vector<std::uint64_t>>();
    a.cost.gates = j.at("cost").at("gates").get<std::vector<std::uint64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad gates.json in " + dir.string() + ": " + e.what());
  }
  a.bank = load_bank(dir / "bank");
  a.model().validate(a.config.backbone.widths.size());
  return a;
}

CorpusResult run_corpus(const Artifacts& a, const Backbone& b, const SampleSet& s,
                        const std::string& name, std::size_t jobs) {
  check_stage_count(a.config, s);
  const CascadeModel m = a.model();
  m.validate(a.config.backbone.widths.size());
  CorpusResult r;
  r.name = name;
  r.outcomes.resize(s.size());
  r.scores.assign(m.gates.size(), std::vector<double>(s.size()));
  parallel_for(s.size(), jobs, [&](std::size_t i) {
    auto src = s.open(i, b);
    r.outcomes[i] = run_cascade(*src, m, s.id(i));
    // the cascade stopped early; finish the remaining scores for ROC only
    for (std::size_t g = 0; g < m.gates.size(); ++g)
      r.scores[g][i] = g < r.outcomes[i].scores.size() ? r.outcomes[i].scores[g]
                                                        : gate_score(m.gates[g], *src, m);
  });
  return r;
}

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols{
      "dataset",  "score_kind", "auroc",    "fpr95",           "avg_flops",
      "savings_pct", "n_id",    "n_ood",    "exit_ses",        "exit_she",
      "exit_final_accepted",    "exit_final_rejected"};
  return cols;
}

std::vector<double> oriented_scores(const Artifacts& a, const CorpusResult& r, std::size_t gate) {
  std::vector<double> out;
  if (gate == static_cast<std::size_t>(-1)) {
    for (const auto& o : r.outcomes) out.push_back(o.composite);
    return out;
  }
  const GateConfig& g = a.gates.at(gate);
  for (double s : r.scores.at(gate))
    out.push_back(is_final(g.kind) ? oriented_final_score(s, g.kind) : interval_roc_score(s, g));
  return out;
}

namespace {

double early_fraction(const ExitHistogram& h, const std::vector<GateConfig>& gates, ScoreKind k) {
  double f = 0.0;
  for (std::size_t g = 0; g < h.early.size(); ++g)
    if (gates[g].kind == k) f += h.early[g].fraction;
  return f;
}

}  // namespace

std::vector<ReportRow> build_report(const Artifacts& a, const CorpusResult& id,
                                    const std::vector<CorpusResult>& ood) {
  std::vector<ReportRow> rows;
  const std::size_t G = a.gates.size();
  for (const auto& o : ood) {
    std::vector<CascadeOutcome> mixed = id.outcomes;
    mixed.insert(mixed.end(), o.outcomes.begin(), o.outcomes.end());
    const auto flops = expected_flops(mixed, a.cost);
    const auto hist = exit_histogram(o.outcomes, a.gates);
    for (std::size_t g = 0; g <= G; ++g) {
      const std::size_t which = g == G ? static_cast<std::size_t>(-1) : g;
      ScoreSet s{oriented_scores(a, id, which), oriented_scores(a, o, which)};
      ReportRow row;
      row.dataset = o.name;
      row.score_kind = g == G ? "cascade" : to_string(a.gates[g].kind);
      row.auroc = auroc(s);
      row.fpr95 = fpr_at_tpr(s, 0.95);
      row.avg_flops = flops.avg_flops;
      row.savings_pct = 100.0 * flops.savings;
      row.n_id = s.id.size();
      row.n_ood = s.ood.size();
      row.exit_ses = early_fraction(hist, a.gates, ScoreKind::ses);
      row.exit_she = early_fraction(hist, a.gates, ScoreKind::she);
      row.exit_final_accepted = hist.final_accepted.fraction;
      row.exit_final_rejected = hist.final_rejected.fraction;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out;
  const auto& cols = report_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  for (const auto& r : rows) {
    out += r.dataset + "," + r.score_kind + "," + format_double(r.auroc) + "," +
           format_double(r.fpr95) + "," + format_double(r.avg_flops) + "," +
           format_double(r.savings_pct) + "," + std::to_string(r.n_id) + "," +
           std::to_string(r.n_ood) + "," + format_double(r.exit_ses) + "," +
           format_double(r.exit_she) + "," + format_double(r.exit_final_accepted) + "," +
           format_double(r.exit_final_rejected) + "\n";
  }
  return out;
}

std::vector<ReportRow> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty report");
  std::vector<std::string> head;
  {
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) head.push_back(cell);
  }
  if (head != report_columns()) throw DataError("report header does not match the schema");
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> c;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) c.push_back(cell);
    if (c.size() != head.size()) throw DataError("report row with " + std::to_string(c.size()) + " cells");
    try {
      ReportRow r;
      r.dataset = c[0];
      r.score_kind = c[1];
      r.auroc = std::stod(c[2]);
      r.fpr95 = std::stod(c[3]);
      r.avg_flops = std::stod(c[4]);
      r.savings_pct = std::stod(c[5]);
      r.n_id = std::stoul(c[6]);
      r.n_ood = std::stoul(c[7]);
      r.exit_ses = std::stod(c[8]);
      r.exit_she = std::stod(c[9]);
      r.exit_final_accepted = std::stod(c[10]);
      r.exit_final_rejected = std::stod(c[11]);
      rows.push_back(r);
    } catch (const std::exception&) {
      throw DataError("unparsable report row: " + line);
    }
  }
  return rows;
}

std::string exits_csv(const Artifacts& a, const CorpusResult& id, const std::vector<CorpusResult>& ood) {
  std::string out = "dataset,bin,count,fraction\n";
  auto emit = [&](const CorpusResult& r) {
    const auto h = exit_histogram(r.outcomes, a.gates);
    for (std::size_t g = 0; g < h.early.size(); ++g)
      out += r.name + ",reject_" + to_string(a.gates[g].kind) + "_stage" +
             std::to_string(h.stages[g]) + "," + std::to_string(h.early[g].count) + "," +
             format_double(h.early[g].fraction) + "\n";
    out += r.name + ",final_accepted," + std::to_string(h.final_accepted.count) + "," +
           format_double(h.final_accepted.fraction) + "\n";
    out += r.name + ",final_rejected," + std::to_string(h.final_rejected.count) + "," +
           format_double(h.final_rejected.fraction) + "\n";
  };
  emit(id);
  for (const auto& o : ood) emit(o);
  return out;
}

std::string score_histogram_csv(const Artifacts& a, const CorpusResult& id,
                                const std::vector<CorpusResult>& ood, std::size_t bins) {
  std::string out = "score_kind,dataset,bin_lo,bin_hi,count\n";
  const std::size_t G = a.gates.size();
  for (std::size_t g = 0; g <= G; ++g) {
    const std::size_t which = g == G ? static_cast<std::size_t>(-1) : g;
    const std::string kind = g == G ? "cascade" : to_string(a.gates[g].kind);
    // raw scores for the gates (the oriented interval score is mostly 0),
    // composite for the cascade
    auto values = [&](const CorpusResult& r) {
      std::vector<double> v = g == G ? oriented_scores(a, r, which) : r.scores[g];
      std::erase_if(v, [](double x) { return !std::isfinite(x) || x < -1e300; });
      return v;
    };
    std::vector<std::pair<std::string, std::vector<double>>> sets{{id.name, values(id)}};
    for (const auto& o : ood) sets.emplace_back(o.name, values(o));
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& [n, v] : sets)
      for (double x : v) lo = std::min(lo, x), hi = std::max(hi, x);
    if (!(lo < hi)) hi = lo + 1.0;
    const double w = (hi - lo) / static_cast<double>(bins);
    for (const auto& [n, v] : sets) {
      std::vector<std::size_t> cnt(bins, 0);
      for (double x : v)
        ++cnt[std::min(bins - 1, static_cast<std::size_t>((x - lo) / w))];
      for (std::size_t k = 0; k < bins; ++k)
        out += kind + "," + n + "," + format_double(lo + w * static_cast<double>(k)) + "," +
               format_double(lo + w * static_cast<double>(k + 1)) + "," + std::to_string(cnt[k]) + "\n";
    }
  }
  return out;
}

}  // namespace cgate
