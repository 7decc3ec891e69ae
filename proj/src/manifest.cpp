#include "conflens/manifest.hpp"

#include <set>

#include <json.hpp>

namespace conflens {

using nlohmann::json;

std::string to_string(Split split) {
  return split == Split::Estimation ? "estimation" : "evaluation";
}

Split parse_split(const std::string& text) {
  if (text == "estimation") return Split::Estimation;
  if (text == "evaluation") return Split::Evaluation;
  throw data_error("unknown split '" + text + "'");
}

std::vector<const ManifestRecord*> Manifest::split(Split which) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records) {
    if (r.split == which) out.push_back(&r);
  }
  return out;
}

Manifest load_manifest(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw data_error(path.string() + ": " + e.what());
  }
  try {
    const auto& lab = doc.at("labels");
    std::vector<std::string> names;
    if (lab.contains("names") && !lab["names"].is_null()) names = lab["names"].get<std::vector<std::string>>();
    std::optional<Label> void_id;
    if (lab.contains("void_id") && !lab["void_id"].is_null()) {
      const auto v = lab["void_id"].get<long long>();
      if (v < 0 || v > 0xFFFF) throw data_error("void_id must fit in u16");
      void_id = static_cast<Label>(v);
    }
    Manifest m{LabelSet(lab.at("size").get<std::size_t>(), std::move(names), void_id), {},
               path.parent_path()};

    std::set<std::string> seen;
    for (const auto& rec : doc.at("records")) {
      ManifestRecord r{rec.at("id").get<std::string>(), rec.at("probs").get<std::string>(),
                       rec.at("gt").get<std::string>(),
                       parse_split(rec.at("split").get<std::string>())};
      if (!seen.insert(r.id).second) throw data_error("duplicate image id '" + r.id + "'");
      m.records.push_back(std::move(r));
    }
    return m;
  } catch (const json::exception& e) {
    throw data_error(path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw;
    throw data_error(path.string() + ": " + e.what());
  }
}

std::string manifest_to_json(const Manifest& manifest) {
  json labels{{"size", manifest.labels.size()}, {"names", manifest.labels.names()},
              {"void_id", nullptr}};
  if (manifest.labels.void_id()) labels["void_id"] = *manifest.labels.void_id();
  json records = json::array();
  for (const auto& r : manifest.records) {
    records.push_back({{"id", r.id},
                       {"probs", r.probs.generic_string()},
                       {"gt", r.gt.generic_string()},
                       {"split", to_string(r.split)}});
  }
  return json{{"labels", labels}, {"records", records}}.dump(2) + "\n";
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  write_text_file(path, manifest_to_json(manifest));
}

LabelMap load_ground_truth(const Manifest& manifest, const ManifestRecord& record) {
  auto gt = LabelMap::from_tensor(load_tensor(manifest.resolve(record.gt)));
  gt.validate(manifest.labels);
  return gt;
}

ImageData load_image(const Manifest& manifest, const ManifestRecord& record, double tol) {
  auto probs = ProbabilityMap::from_tensor(load_tensor(manifest.resolve(record.probs)), tol);
  auto gt = load_ground_truth(manifest, record);
  if (probs.height() != gt.height() || probs.width() != gt.width()) {
    throw data_error("record '" + record.id + "': probability and ground-truth shapes differ");
  }
  if (probs.channels() != manifest.labels.size()) {
    throw data_error("record '" + record.id + "': probability map has " +
                     std::to_string(probs.channels()) + " channels, label set has " +
                     std::to_string(manifest.labels.size()));
  }
  return {std::move(probs), std::move(gt)};
}

}  // namespace conflens
