#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "conflens/types.hpp"

namespace conflens {

enum class Split { Estimation, Evaluation };

std::string to_string(Split split);
Split parse_split(const std::string& text);

struct ManifestRecord {
  std::string id;
  std::filesystem::path probs;  // relative to the manifest directory
  std::filesystem::path gt;
  Split split;
};

/// Dataset index: the label set plus one record per image. Confusions are
/// learned from the estimation split, metrics and per-image priors use the
/// evaluation split.
struct Manifest {
  LabelSet labels;
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;

  std::vector<const ManifestRecord*> split(Split which) const;

  std::filesystem::path resolve(const std::filesystem::path& rel) const {
    return rel.is_absolute() ? rel : base_dir / rel;
  }
};

Manifest load_manifest(const std::filesystem::path& path);
std::string manifest_to_json(const Manifest& manifest);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

struct ImageData {
  ProbabilityMap probs;
  LabelMap gt;
};

LabelMap load_ground_truth(const Manifest& manifest, const ManifestRecord& record);
/// Loads and cross-checks both tensors of a record (shape agreement,
/// channel count, label range, per-pixel sums within `tol`).
ImageData load_image(const Manifest& manifest, const ManifestRecord& record, double tol = 1e-4);

}  // namespace conflens
