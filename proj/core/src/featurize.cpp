#include "fedstream/featurize.hpp"

#include <charconv>
#include <cmath>

namespace fedstream {

namespace {

bool parse_double(std::string_view s, double& out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

FeatureVector featurize(const LogRecord& record, const FeatureSchema& schema,
                        FeaturizeStats* stats) {
  FeatureVector x;
  x.schema_hash = schema.digest();
  x.values.assign(schema.dimension(), 0.0);

  std::vector<bool> filled(schema.dimension(), false);

  // One pass over the record's fields, routed through the schema's
  // source index; defaults fill the rest afterwards.
  for (const auto& [key, value] : record.fields) {
    const auto* idxs = schema.features_for_source(key);
    if (!idxs) continue;
    for (size_t i : *idxs) {
      const FeatureDef& f = schema.at(i);
      if (f.kind == FeatureKind::numeric) {
        double v;
        if (!parse_double(value, v)) {
          if (stats) ++stats->unparseable_values;
          continue;  // falls through to the midpoint default
        }
        if (v < f.lo) {
          v = f.lo;
          if (stats) ++stats->clamped_values;
        } else if (v > f.hi) {
          v = f.hi;
          if (stats) ++stats->clamped_values;
        }
        x.values[i] = v;
      } else {
        size_t code = 0;  // reserved: unknown category
        for (size_t c = 0; c < f.categories.size(); ++c) {
          if (f.categories[c] == value) {
            code = c + 1;
            break;
          }
        }
        x.values[i] = static_cast<double>(code);
      }
      filled[i] = true;
    }
  }

  for (size_t i = 0; i < schema.dimension(); ++i) {
    if (filled[i]) continue;
    const FeatureDef& f = schema.at(i);
    if (stats) ++stats->missing_fields;
    x.values[i] = f.kind == FeatureKind::numeric ? 0.5 * (f.lo + f.hi) : 0.0;
  }
  return x;
}

std::optional<std::pair<ClassLabel, double>> PatternLabelFeed::lookup(
    const LogRecord& record) const {
  const std::string* value = record.field(field_);
  if (!value) return std::nullopt;
  for (const auto& rule : rules_) {
    if (value->find(rule.pattern) != std::string::npos)
      return std::make_pair(rule.label, rule.confidence);
  }
  return std::nullopt;
}

LogRecord attach_label(LogRecord record,
                       const std::vector<std::shared_ptr<LabelFeed>>& feeds) {
  if (record.label) return record;
  for (const auto& feed : feeds) {
    if (auto hit = feed->lookup(record)) {
      record.label = hit->first;
      record.label_source = feed->name();
      return record;
    }
  }
  return record;
}

}  // namespace fedstream
