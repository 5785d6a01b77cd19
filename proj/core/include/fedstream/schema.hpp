#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fedstream/errors.hpp"

namespace fedstream {

enum class FeatureKind : uint8_t { numeric = 0, categorical = 1 };

// One feature definition. Numeric features bin into equal-width bins over
// [lo, hi]; categorical features encode as integer codes where code 0 is
// reserved for missing/unknown and named categories start at 1.
struct FeatureDef {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  std::string source_field;
  double lo = 0.0;
  double hi = 1.0;
  uint32_t bins = 32;
  std::vector<std::string> categories;

  uint32_t bin_count() const {
    return kind == FeatureKind::numeric ? bins
                                        : static_cast<uint32_t>(categories.size()) + 1;
  }
};

class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<FeatureDef> features);

  size_t dimension() const { return features_.size(); }
  const std::vector<FeatureDef>& features() const { return features_; }
  const FeatureDef& at(size_t i) const { return features_[i]; }

  uint64_t digest() const { return digest_; }

  // Deterministic text rendering the digest is computed over. Field order
  // and feature order are semantic.
  std::string canonical_text() const;

  // Feature indices fed by a given record field, empty if none.
  const std::vector<size_t>* features_for_source(const std::string& source) const;

 private:
  void validate() const;

  std::vector<FeatureDef> features_;
  std::unordered_map<std::string, std::vector<size_t>> by_source_;
  uint64_t digest_ = 0;
};

using SchemaPtr = std::shared_ptr<const FeatureSchema>;

// Fixed-dimension vector bound to a schema by digest.
struct FeatureVector {
  std::vector<double> values;
  uint64_t schema_hash = 0;

  size_t size() const { return values.size(); }
};

uint64_t schema_digest(const FeatureSchema& schema);

// The shipped 81-feature HTTP-log schema (78 numeric + 3 categorical).
SchemaPtr default_schema();

// JSON schema file I/O; grammar documented in the README.
FeatureSchema load_schema_json(const std::string& text);
FeatureSchema load_schema_file(const std::string& path);
std::string schema_to_json(const FeatureSchema& schema);

}  // namespace fedstream
