#pragma once

#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fedstream/classifier.hpp"
#include "fedstream/featurize.hpp"
#include "fedstream/federation.hpp"
#include "fedstream/metrics.hpp"
#include "fedstream/source.hpp"

namespace fedstream {

struct PipelineConfig {
  std::string org_id = "org";
  SchemaPtr schema;
  ModelConfig model;
  std::optional<CommunityConfig> community;
  size_t metrics_window = 1000;
  double alert_threshold = 0.5;  // on malicious/(benign+malicious), strict >
  size_t retention_capacity = 100000;
  size_t feedback_queue_capacity = 1024;
  std::vector<std::shared_ptr<LabelFeed>> feeds;
  uint64_t seed = 0;

  void validate() const;
};

struct AlertEvent {
  std::string record_id;
  int64_t ts = 0;
  ClassScores scores;
  double threshold = 0.0;

  std::string to_json() const;
};

struct FeedbackEvent {
  std::string record_id;
  ClassLabel label = ClassLabel::benign;
  std::string operator_id;
  int64_t ts = 0;
};

// Operator feedback joins the stream through a ring of recent feature
// vectors keyed by record id — raw records are not retained. Submissions
// may come from other threads through a bounded queue (submit blocks when
// full); the pipeline drains at the top of each iteration.
class FeedbackStore {
 public:
  FeedbackStore(size_t retention_capacity, size_t queue_capacity);

  void remember(const std::string& record_id, const FeatureVector& x);
  bool remembered(const std::string& record_id) const;

  // Throws UnknownRecord / DuplicateFeedback; blocks while the queue is full.
  void submit(const FeedbackEvent& event);

  std::vector<std::pair<FeatureVector, ClassLabel>> drain();
  size_t pending() const;

 private:
  struct Slot {
    std::string record_id;
    FeatureVector x;
  };

  mutable std::mutex mu_;
  std::condition_variable queue_space_;
  size_t capacity_;
  size_t queue_capacity_;
  std::vector<Slot> ring_;
  size_t ring_next_ = 0;
  std::unordered_map<std::string, size_t> by_id_;
  std::unordered_map<std::string, std::vector<std::string>> operators_by_id_;
  std::deque<std::pair<FeatureVector, ClassLabel>> queue_;
};

struct RoundReport {
  uint64_t round = 0;
  uint64_t records_at = 0;
  ConfusionCounts window;
  ConfusionCounts cumulative;
  uint64_t alerts = 0;
};

struct RunReport {
  std::string org_id;
  uint64_t records_processed = 0;
  uint64_t labeled_records = 0;
  uint64_t unlabeled_records = 0;
  uint64_t train_events = 0;
  uint64_t predict_events = 0;
  uint64_t alerts_emitted = 0;
  uint64_t parse_errors = 0;
  uint64_t io_errors = 0;
  uint64_t feedback_trained = 0;
  uint64_t feedback_unknown = 0;
  uint64_t feedback_duplicate = 0;
  std::vector<RoundReport> rounds;
  ConfusionCounts final_window;
  ConfusionCounts final_cumulative;
  std::vector<AlertEvent> alerts;

  std::string to_text() const;
  std::string metrics_jsonl() const;
};

enum class StepStatus { ok, needs_exchange, done };

// One organization's compute DAG: ingest -> featurize -> label-attach ->
// (train | predict) -> scheduled share/merge, with the feedback store
// feeding corrections back into training. Driven one record per step() so
// the simulator can park pipelines at sharing barriers.
class StreamPipeline {
 public:
  StreamPipeline(PipelineConfig config, RecordSource& source,
                 std::unique_ptr<Classifier> model = nullptr);

  StepStatus step();

  // Valid right after step() returned needs_exchange.
  const ModelEnvelope& pending_envelope() const { return *pending_; }
  uint64_t pending_round() const { return round_; }
  void deliver_consensus(const ModelEnvelope& consensus);

  Classifier& model() { return *model_; }
  const Classifier& model() const { return *model_; }
  std::unique_ptr<Classifier> take_model() { return std::move(model_); }

  FeedbackStore& feedback() { return feedback_; }
  const PrequentialMetrics& metrics() const { return metrics_; }
  const RunReport& report() const { return report_; }

  // Feedback known ahead of the run (CLI file inbox): events are submitted
  // right after their record enters the retention ring.
  void preload_feedback(const std::vector<FeedbackEvent>& events);

 private:
  void finalize();

  PipelineConfig config_;
  RecordSource& source_;
  std::unique_ptr<Classifier> model_;
  FeedbackStore feedback_;
  PrequentialMetrics metrics_;
  RunReport report_;
  std::optional<ModelEnvelope> pending_;
  uint64_t round_ = 0;
  bool finished_ = false;
  std::multimap<std::string, FeedbackEvent> scripted_;
};

// Drives a pipeline to completion; the model argument is updated in place
// (consensus replaces it at each sharing boundary). client may be null
// when the config has no community.
RunReport run_stream(RecordSource& source, const PipelineConfig& config,
                     std::unique_ptr<Classifier>& model, ShareClient* client = nullptr);

}  // namespace fedstream
