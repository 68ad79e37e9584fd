#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cgate {

// One record of a corpus or feature manifest. Image corpora set `path`;
// feature manifests set `stage_paths` (and usually `logits_path`). Paths are
// relative to the manifest's directory.
struct ManifestEntry {
  std::string sample_id;
  int label = -1;  // -1: unlabeled / OOD
  std::optional<std::string> path;
  std::vector<std::string> stage_paths;
  std::optional<std::string> logits_path;

  // corpus bookkeeping, written when known
  std::optional<std::string> kind;
  std::optional<std::string> source_id;
  std::optional<std::string> family;
  std::optional<int> severity;
  std::optional<std::uint64_t> seed;
};

struct Manifest {
  std::filesystem::path dir;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const std::string& rel) const { return dir / rel; }
  bool is_feature_manifest() const;
  std::size_t stage_count() const;
  // Entries are all of one kind, stage counts agree, ids are unique; with
  // check_files, every referenced file exists and decodes.
  void validate(bool check_files = false) const;
};

Manifest read_manifest(const std::filesystem::path& file);
void write_manifest(const Manifest& m, const std::filesystem::path& file);
std::string manifest_json(const Manifest& m);

}  // namespace cgate
