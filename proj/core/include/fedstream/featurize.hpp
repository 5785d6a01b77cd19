#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedstream/record.hpp"
#include "fedstream/schema.hpp"

namespace fedstream {

// Total by design: dirty values clamp, missing numeric sources take the
// range midpoint, missing/unknown categories take reserved code 0. The
// stream never halts on bad data; callers count dirt via FeaturizeStats.
struct FeaturizeStats {
  uint64_t missing_fields = 0;
  uint64_t unparseable_values = 0;
  uint64_t clamped_values = 0;
};

FeatureVector featurize(const LogRecord& record, const FeatureSchema& schema,
                        FeaturizeStats* stats = nullptr);

// Synchronous label source (reputation service, traffic-rank proxy, ...).
// Implementations must answer deterministically for a given record.
class LabelFeed {
 public:
  virtual ~LabelFeed() = default;
  virtual const std::string& name() const = 0;
  virtual std::optional<std::pair<ClassLabel, double>> lookup(const LogRecord& record) const = 0;
};

// Deterministic stand-in for a real feed client: labels on substring match
// of a configured record field (default "host"). A real HTTP client drops
// in behind the same interface.
class PatternLabelFeed : public LabelFeed {
 public:
  struct Rule {
    std::string pattern;
    ClassLabel label;
    double confidence = 1.0;
  };

  PatternLabelFeed(std::string name, std::string field, std::vector<Rule> rules)
      : name_(std::move(name)), field_(std::move(field)), rules_(std::move(rules)) {}

  const std::string& name() const override { return name_; }
  std::optional<std::pair<ClassLabel, double>> lookup(const LogRecord& record) const override;

 private:
  std::string name_;
  std::string field_;
  std::vector<Rule> rules_;
};

// First feed returning a label wins; an already-labeled record passes
// through unchanged.
LogRecord attach_label(LogRecord record,
                       const std::vector<std::shared_ptr<LabelFeed>>& feeds);

}  // namespace fedstream
