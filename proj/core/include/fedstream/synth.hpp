#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fedstream/rng.hpp"
#include "fedstream/schema.hpp"
#include "fedstream/source.hpp"

namespace fedstream {

// Gaussian cluster in feature space. mean/stddev are given per feature
// (length = schema dimension); entries at categorical positions are
// ignored and categories are sampled uniformly.
struct AttackPattern {
  std::string name;
  std::vector<double> mean;
  std::vector<double> stddev;
  ClassLabel label = ClassLabel::malicious;
  std::vector<size_t> orgs;  // empty = every org sees it
};

// Mid-stream mutation of a pattern's mean (models an evolving attack).
struct DriftEvent {
  uint64_t at_record = 0;  // per-org stream position
  size_t pattern_index = 0;
  std::vector<double> mean_shift;  // added to the pattern mean, per feature
};

struct SyntheticConfig {
  size_t n_orgs = 1;
  uint64_t records_per_org = 1000;
  SchemaPtr schema;
  std::vector<AttackPattern> patterns;
  std::vector<double> background_mean;
  std::vector<double> background_stddev;
  double attack_fraction = 0.5;
  double label_fraction = 0.3;
  std::vector<DriftEvent> drift_events;
  uint64_t seed = 0;

  void validate() const;
};

// Lazily generated per-org stream; deterministic under (config, org).
// Ground truth rides a side channel so the pipeline-facing next() can
// never leak evaluation labels into training.
class SyntheticSource final : public RecordSource {
 public:
  // org_index == n_orgs is the held-out generator: it sees every pattern.
  SyntheticSource(const SyntheticConfig& config, size_t org_index,
                  bool force_unlabeled = false);

  std::optional<LogRecord> next() override;
  std::optional<std::pair<LogRecord, ClassLabel>> next_with_truth();

  // FNV digest over the serialized records produced so far.
  uint64_t stream_digest() const { return digest_; }
  // Pattern index of the most recent record, -1 for background.
  int last_pattern() const { return last_pattern_; }

 private:
  SyntheticConfig config_;  // copy: the source outlives caller temporaries
  size_t org_index_;
  bool force_unlabeled_;
  Rng rng_;
  uint64_t produced_ = 0;
  std::vector<size_t> my_patterns_;
  std::vector<std::vector<double>> means_;  // mutable copies, drift applies here
  size_t next_drift_ = 0;
  uint64_t digest_ = 14695981039346656037ull;
  int last_pattern_ = -1;
};

// Deterministic JSONL rendering of a record (id, ts, fields in order,
// label last); also the gen-data file format.
std::string record_to_jsonl(const LogRecord& record);

// Materialized per-org streams (spec op; large runs should prefer the
// lazy source).
std::vector<std::vector<LogRecord>> gen_synthetic(const SyntheticConfig& config);

struct SynthRecord {
  LogRecord record;
  ClassLabel truth = ClassLabel::benign;
  int pattern_index = -1;  // -1 = background
};

// One pooled stream with provenance, for partition().
std::vector<SynthRecord> gen_synthetic_pooled(const SyntheticConfig& config,
                                              uint64_t total_records);

enum class PartitionStrategy { round_robin, by_pattern };

// Disjoint cover of the input. by_pattern routes each attack pattern to
// its mapped org (background records round-robin over all orgs).
std::vector<std::vector<SynthRecord>> partition(
    const std::vector<SynthRecord>& stream, size_t n_orgs, PartitionStrategy strategy,
    const std::unordered_map<int, size_t>* pattern_to_org = nullptr);

}  // namespace fedstream
