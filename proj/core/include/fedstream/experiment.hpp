#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedstream/pipeline.hpp"
#include "fedstream/synth.hpp"

namespace fedstream {

struct ExperimentConfig {
  SyntheticConfig synth;
  ModelConfig model;
  uint64_t share_every = 2000;
  size_t metrics_window = 1000;
  double alert_threshold = 0.5;
  uint64_t heldout_records = 4000;
  std::vector<double> trust_weights;  // empty = 1.0 per org
  bool include_self = true;
  bool sequential = false;
  uint64_t seed = 0;
  std::string out_dir;  // when set: message log + envelope drops land here

  void validate() const;
  std::string org_name(size_t i) const { return "org" + std::to_string(i); }
};

struct OrgArmResult {
  RunReport report;
  ModelEnvelope final_model;
  ConfusionCounts heldout;
  uint64_t stream_digest = 0;
};

struct ExperimentReport {
  std::vector<OrgArmResult> isolated;
  std::vector<OrgArmResult> federated;
  std::optional<ModelEnvelope> final_consensus;
  ConfusionCounts consensus_heldout;
  std::vector<MessageLogEntry> message_log;

  double mean_isolated_heldout_accuracy() const;
  double mean_federated_heldout_accuracy() const;

  std::string to_text() const;
  std::string metrics_jsonl() const;
};

// Both arms consume byte-identical per-org streams from identical model
// seeds: isolated = each org in a single-member community, federated = the
// full community. The final consensus and all per-org models are then
// scored on a common held-out stream with hidden truth.
ExperimentReport run_experiment(const ExperimentConfig& config);

// Score an envelope against a held-out stream (truth never enters the
// model; it only grades predictions).
ConfusionCounts evaluate_heldout(const ModelEnvelope& env, const ExperimentConfig& config);

}  // namespace fedstream
