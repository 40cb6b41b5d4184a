#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "icupred/types.hpp"

namespace icupred {

enum class FeatureKind { kBinary, kOrdinal, kContinuous };

std::string_view kind_name(FeatureKind kind);
FeatureKind parse_kind(std::string_view name);

struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::kContinuous;
  std::vector<std::string> levels;  // ordinal features only, in order
};

/// Ordered, versioned feature list. Names are unique; lookups are O(1).
class FeatureSchema {
 public:
  FeatureSchema() = default;
  FeatureSchema(int version, std::vector<Feature> features);

  int version() const { return version_; }
  Index arity() const { return static_cast<Index>(features_.size()); }
  const std::vector<Feature>& features() const { return features_; }
  const Feature& feature(Index i) const {
    return features_[static_cast<std::size_t>(i)];
  }

  std::optional<Index> index_of(std::string_view name) const;

  /// Order-preserving subset with version bumped to version()+1.
  /// Throws DataError if a name is not in this schema.
  FeatureSchema subset(const std::vector<std::string>& kept_names) const;

 private:
  int version_ = 1;
  std::vector<Feature> features_;
  std::unordered_map<std::string, Index> index_;
};

FeatureSchema load_schema(std::istream& in);
void save_schema(const FeatureSchema& schema, std::ostream& out);
std::string schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const std::string& text);

}  // namespace icupred
