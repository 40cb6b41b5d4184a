#include "icupred/schema.hpp"

#include <nlohmann/json.hpp>

namespace icupred {

using nlohmann::json;

std::string_view kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kBinary:
      return "binary";
    case FeatureKind::kOrdinal:
      return "ordinal";
    case FeatureKind::kContinuous:
      return "continuous";
  }
  throw std::logic_error("unknown feature kind");
}

FeatureKind parse_kind(std::string_view name) {
  if (name == "binary") return FeatureKind::kBinary;
  if (name == "ordinal") return FeatureKind::kOrdinal;
  if (name == "continuous") return FeatureKind::kContinuous;
  throw DataError("unknown feature kind: '" + std::string(name) + "'");
}

FeatureSchema::FeatureSchema(int version, std::vector<Feature> features)
    : version_(version), features_(std::move(features)) {
  index_.reserve(features_.size());
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto [it, inserted] =
        index_.emplace(features_[i].name, static_cast<Index>(i));
    if (!inserted) {
      throw DataError("duplicate feature name: '" + features_[i].name + "'");
    }
    if (features_[i].kind == FeatureKind::kOrdinal &&
        features_[i].levels.empty()) {
      throw DataError("ordinal feature '" + features_[i].name +
                      "' declares no levels");
    }
  }
}

std::optional<Index> FeatureSchema::index_of(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

FeatureSchema FeatureSchema::subset(
    const std::vector<std::string>& kept_names) const {
  std::vector<bool> keep(features_.size(), false);
  for (const auto& name : kept_names) {
    const auto idx = index_of(name);
    if (!idx) {
      throw DataError("unknown feature in subset: '" + name + "'");
    }
    keep[static_cast<std::size_t>(*idx)] = true;
  }
  std::vector<Feature> kept;
  kept.reserve(kept_names.size());
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (keep[i]) kept.push_back(features_[i]);
  }
  return FeatureSchema(version_ + 1, std::move(kept));
}

namespace {
constexpr int kSchemaFormatVersion = 1;
}

std::string schema_to_json(const FeatureSchema& schema) {
  json doc;
  doc["format_version"] = kSchemaFormatVersion;
  doc["version"] = schema.version();
  json feats = json::array();
  for (const auto& f : schema.features()) {
    json jf;
    jf["name"] = f.name;
    jf["kind"] = std::string(kind_name(f.kind));
    if (f.kind == FeatureKind::kOrdinal) {
      jf["levels"] = f.levels;
    }
    feats.push_back(std::move(jf));
  }
  doc["features"] = std::move(feats);
  return doc.dump(2) + "\n";
}

FeatureSchema schema_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("schema file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version") ||
      doc["format_version"] != kSchemaFormatVersion) {
    throw DataError("unsupported schema file format");
  }
  if (!doc.contains("version") || !doc.contains("features")) {
    throw DataError("schema file missing 'version' or 'features'");
  }
  std::vector<Feature> features;
  for (const auto& jf : doc["features"]) {
    Feature f;
    f.name = jf.at("name").get<std::string>();
    f.kind = parse_kind(jf.at("kind").get<std::string>());
    if (jf.contains("levels")) {
      f.levels = jf["levels"].get<std::vector<std::string>>();
    }
    features.push_back(std::move(f));
  }
  return FeatureSchema(doc["version"].get<int>(), std::move(features));
}

FeatureSchema load_schema(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return schema_from_json(text);
}

void save_schema(const FeatureSchema& schema, std::ostream& out) {
  out << schema_to_json(schema);
}

}  // namespace icupred
