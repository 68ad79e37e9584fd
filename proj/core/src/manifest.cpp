#include "cgate/manifest.hpp"

#include <fstream>
#include <set>

#include "cgate/errors.hpp"
#include "cgate/tzr.hpp"
#include "json.hpp"

namespace cgate {

bool Manifest::is_feature_manifest() const {
  return !entries.empty() && !entries.front().stage_paths.empty();
}

std::size_t Manifest::stage_count() const {
  return entries.empty() ? 0 : entries.front().stage_paths.size();
}

void Manifest::validate(bool check_files) const {
  if (entries.empty()) throw DataError("manifest " + dir.string() + " has no entries");
  const bool features = is_feature_manifest();
  const std::size_t stages = stage_count();
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (e.sample_id.empty()) throw DataError("manifest entry without sample_id");
    if (!ids.insert(e.sample_id).second) throw DataError("duplicate sample_id " + e.sample_id);
    if (features) {
      if (e.stage_paths.size() != stages)
        throw DataError("entry " + e.sample_id + " has " + std::to_string(e.stage_paths.size()) +
                        " stages, expected " + std::to_string(stages));
    } else if (!e.path || !e.stage_paths.empty()) {
      throw DataError("entry " + e.sample_id + " mixes image and feature records");
    }
    if (!check_files) continue;
    auto probe = [&](const std::string& rel) { read_tensor(resolve(rel)); };
    if (e.path) probe(*e.path);
    for (const auto& p : e.stage_paths) probe(p);
    if (e.logits_path) probe(*e.logits_path);
  }
}

namespace {

ManifestEntry parse_entry(const nlohmann::json& j) {
  ManifestEntry e;
  if (j.contains("sample_id")) e.sample_id = j["sample_id"].get<std::string>();
  e.label = j.value("label", -1);
  if (j.contains("path")) e.path = j["path"].get<std::string>();
  if (j.contains("stage_paths")) e.stage_paths = j["stage_paths"].get<std::vector<std::string>>();
  if (j.contains("logits_path") && !j["logits_path"].is_null())
    e.logits_path = j["logits_path"].get<std::string>();
  if (j.contains("kind")) e.kind = j["kind"].get<std::string>();
  if (j.contains("source_id")) e.source_id = j["source_id"].get<std::string>();
  if (j.contains("family")) e.family = j["family"].get<std::string>();
  if (j.contains("severity")) e.severity = j["severity"].get<int>();
  if (j.contains("seed")) e.seed = j["seed"].get<std::uint64_t>();
  if (e.sample_id.empty() && e.source_id && e.family && e.severity)
    e.sample_id = *e.source_id + "__" + *e.family + "_s" + std::to_string(*e.severity);
  return e;
}

nlohmann::ordered_json entry_json(const ManifestEntry& e) {
  nlohmann::ordered_json j;
  j["sample_id"] = e.sample_id;
  j["label"] = e.label;
  if (e.source_id) j["source_id"] = *e.source_id;
  if (e.family) j["family"] = *e.family;
  if (e.severity) j["severity"] = *e.severity;
  if (e.kind) j["kind"] = *e.kind;
  if (e.seed) j["seed"] = *e.seed;
  if (e.path) j["path"] = *e.path;
  if (!e.stage_paths.empty()) j["stage_paths"] = e.stage_paths;
  if (e.logits_path) j["logits_path"] = *e.logits_path;
  return j;
}

}  // namespace

Manifest read_manifest(const std::filesystem::path& file) {
  std::ifstream f(file);
  if (!f) throw IoError("cannot open manifest " + file.string());
  Manifest m;
  m.dir = file.parent_path();
  try {
    const auto j = nlohmann::json::parse(f);
    if (!j.is_array()) throw DataError("manifest " + file.string() + " is not a JSON array");
    for (const auto& e : j) m.entries.push_back(parse_entry(e));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad manifest " + file.string() + ": " + e.what());
  }
  m.validate(false);
  return m;
}

std::string manifest_json(const Manifest& m) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : m.entries) arr.push_back(entry_json(e));
  return arr.dump(2);
}

void write_manifest(const Manifest& m, const std::filesystem::path& file) {
  std::ofstream f(file);
  if (!f) throw IoError("cannot write manifest " + file.string());
  f << manifest_json(m) << "\n";
}

}  // namespace cgate
