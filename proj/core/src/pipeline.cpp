#include "fedstream/pipeline.hpp"

#include <algorithm>
#include <cstdio>

#include "fedstream/bytes.hpp"

namespace fedstream {

void PipelineConfig::validate() const {
  if (!schema) throw ConfigError("pipeline needs a schema");
  if (org_id.empty()) throw ConfigError("pipeline needs an org id");
  if (metrics_window < 1) throw ConfigError("metrics window must be >= 1");
  if (!(alert_threshold > 0.0 && alert_threshold < 1.0))
    throw ConfigError("alert threshold must be in (0, 1)");
  if (retention_capacity < 1) throw ConfigError("retention capacity must be >= 1");
  if (community) {
    community->validate();
    if (community->model_kind != model.kind)
      throw ConfigError("community model kind does not match pipeline model kind");
    if (!community->find(org_id))
      throw ConfigError("org '" + org_id + "' is not a member of community '" +
                        community->community_id + "'");
  }
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, static_cast<size_t>(n));
}

std::string fmt_rate(double v) {
  char buf[32];
  int n = std::snprintf(buf, sizeof(buf), "%.4f", v);
  return std::string(buf, static_cast<size_t>(n));
}

}  // namespace

std::string AlertEvent::to_json() const {
  std::string out = "{\"record_id\":\"";
  out += record_id;
  out += "\",\"ts\":";
  out += std::to_string(ts);
  out += ",\"scores\":{\"benign\":";
  out += fmt_double(scores.benign);
  out += ",\"malicious\":";
  out += fmt_double(scores.malicious);
  out += "},\"threshold\":";
  out += fmt_double(threshold);
  out += "}";
  return out;
}

FeedbackStore::FeedbackStore(size_t retention_capacity, size_t queue_capacity)
    : capacity_(retention_capacity), queue_capacity_(queue_capacity) {
  if (capacity_ < 1) throw ConfigError("retention capacity must be >= 1");
  if (queue_capacity_ < 1) throw ConfigError("feedback queue capacity must be >= 1");
}

void FeedbackStore::remember(const std::string& record_id, const FeatureVector& x) {
  std::unique_lock lock(mu_);
  auto it = by_id_.find(record_id);
  if (it != by_id_.end()) {
    ring_[it->second].x = x;  // duplicate id: freshest vector wins
    return;
  }
  if (ring_.size() < capacity_) {
    ring_.push_back({record_id, x});
    by_id_[record_id] = ring_.size() - 1;
    return;
  }
  // evict FIFO
  Slot& slot = ring_[ring_next_];
  by_id_.erase(slot.record_id);
  operators_by_id_.erase(slot.record_id);
  slot.record_id = record_id;
  slot.x = x;
  by_id_[record_id] = ring_next_;
  ring_next_ = (ring_next_ + 1) % capacity_;
}

bool FeedbackStore::remembered(const std::string& record_id) const {
  std::unique_lock lock(mu_);
  return by_id_.count(record_id) > 0;
}

void FeedbackStore::submit(const FeedbackEvent& event) {
  std::unique_lock lock(mu_);
  auto it = by_id_.find(event.record_id);
  if (it == by_id_.end()) throw UnknownRecord(event.record_id);
  auto& ops = operators_by_id_[event.record_id];
  if (std::find(ops.begin(), ops.end(), event.operator_id) != ops.end())
    throw DuplicateFeedback(event.record_id, event.operator_id);
  queue_space_.wait(lock, [&] { return queue_.size() < queue_capacity_; });
  ops.push_back(event.operator_id);
  queue_.emplace_back(ring_[it->second].x, event.label);
}

std::vector<std::pair<FeatureVector, ClassLabel>> FeedbackStore::drain() {
  std::unique_lock lock(mu_);
  std::vector<std::pair<FeatureVector, ClassLabel>> out(queue_.begin(), queue_.end());
  queue_.clear();
  queue_space_.notify_all();
  return out;
}

size_t FeedbackStore::pending() const {
  std::unique_lock lock(mu_);
  return queue_.size();
}

StreamPipeline::StreamPipeline(PipelineConfig config, RecordSource& source,
                               std::unique_ptr<Classifier> model)
    : config_(std::move(config)),
      source_(source),
      model_(std::move(model)),
      feedback_(config_.retention_capacity, config_.feedback_queue_capacity),
      metrics_(config_.metrics_window) {
  config_.validate();
  if (!model_) model_ = make_model(config_.model, config_.schema);
  if (model_->schema_hash() != config_.schema->digest())
    throw SchemaMismatch("model schema does not match pipeline schema");
  if (config_.community && model_->kind() != config_.community->model_kind)
    throw KindMismatch("model kind does not match community");
  report_.org_id = config_.org_id;
}

void StreamPipeline::preload_feedback(const std::vector<FeedbackEvent>& events) {
  for (const auto& e : events) scripted_.emplace(e.record_id, e);
}

StepStatus StreamPipeline::step() {
  if (pending_) throw Error("pending exchange: deliver_consensus first");
  if (finished_) return StepStatus::done;

  // Drained feedback trains before new records; each pair exactly once.
  for (auto& [x, y] : feedback_.drain()) {
    model_->train_one(x, y);
    ++report_.train_events;
    ++report_.feedback_trained;
  }

  auto rec = source_.next();
  if (!rec) {
    finalize();
    return StepStatus::done;
  }

  FeatureVector x = featurize(*rec, *config_.schema);
  feedback_.remember(rec->record_id, x);

  const LogRecord labeled = attach_label(std::move(*rec), config_.feeds);

  const ClassScores scores = model_->predict(x);
  ++report_.predict_events;

  if (labeled.label) {
    // test-then-train: the prediction above used the pre-training state
    metrics_.update(scores.predicted(), *labeled.label);
    model_->train_one(x, *labeled.label);
    ++report_.train_events;
    ++report_.labeled_records;
  } else {
    ++report_.unlabeled_records;
    if (scores.malicious_ratio() > config_.alert_threshold) {
      report_.alerts.push_back(
          {labeled.record_id, labeled.timestamp_ms, scores, config_.alert_threshold});
      ++report_.alerts_emitted;
    }
  }

  ++report_.records_processed;

  // scripted feedback fires once its record is in the retention ring
  auto [lo, hi] = scripted_.equal_range(labeled.record_id);
  for (auto it = lo; it != hi; ++it) {
    try {
      feedback_.submit(it->second);
    } catch (const UnknownRecord&) {
      ++report_.feedback_unknown;
    } catch (const DuplicateFeedback&) {
      ++report_.feedback_duplicate;
    }
  }
  scripted_.erase(lo, hi);

  if (config_.community &&
      report_.records_processed % config_.community->schedule.every_n_records == 0) {
    round_ = report_.records_processed / config_.community->schedule.every_n_records;
    pending_ = export_model(*model_, config_.org_id, round_);
    return StepStatus::needs_exchange;
  }
  return StepStatus::ok;
}

void StreamPipeline::deliver_consensus(const ModelEnvelope& consensus) {
  if (!pending_) throw Error("no exchange pending");
  model_ = apply_consensus(*model_, consensus, config_.schema,
                           derive_seed(config_.seed, "apply", round_));
  if (model_->kind() == ModelKind::mlp) {
    MlpHyper hyper = config_.model.mlp;
    if (hyper.init_seed == 0) hyper.init_seed = config_.model.seed;
    static_cast<MlpClassifier&>(*model_).set_hyper(hyper);
  }
  RoundReport rr;
  rr.round = round_;
  rr.records_at = report_.records_processed;
  rr.window = metrics_.window();
  rr.cumulative = metrics_.cumulative();
  rr.alerts = report_.alerts_emitted;
  report_.rounds.push_back(rr);
  pending_.reset();
}

void StreamPipeline::finalize() {
  finished_ = true;
  report_.parse_errors = source_.parse_errors();
  report_.io_errors = source_.io_errors();
  report_.feedback_unknown += scripted_.size();  // records never seen
  scripted_.clear();
  report_.final_window = metrics_.window();
  report_.final_cumulative = metrics_.cumulative();
}

RunReport run_stream(RecordSource& source, const PipelineConfig& config,
                     std::unique_ptr<Classifier>& model, ShareClient* client) {
  if (config.community && !client)
    throw ConfigError("community configured but no share client provided");
  StreamPipeline pipeline(config, source, std::move(model));
  while (true) {
    const StepStatus status = pipeline.step();
    if (status == StepStatus::ok) continue;
    if (status == StepStatus::needs_exchange) {
      const ModelEnvelope consensus =
          client->exchange(pipeline.pending_round(), pipeline.pending_envelope());
      pipeline.deliver_consensus(consensus);
      continue;
    }
    break;
  }
  if (client) client->done();
  model = pipeline.take_model();
  return pipeline.report();
}

namespace {

void counts_row(std::string& out, const char* label, const ConfusionCounts& c) {
  out += label;
  out += " tp=" + std::to_string(c.tp) + " fp=" + std::to_string(c.fp) +
         " tn=" + std::to_string(c.tn) + " fn=" + std::to_string(c.fn) +
         " acc=" + fmt_rate(c.accuracy()) + " tpr=" + fmt_rate(c.tpr()) +
         " fpr=" + fmt_rate(c.fpr());
  out += '\n';
}

}  // namespace

std::string RunReport::to_text() const {
  std::string out;
  out += "fedstream run report\n";
  out += "org: " + org_id + "\n";
  out += "records_processed: " + std::to_string(records_processed) + "\n";
  out += "labeled: " + std::to_string(labeled_records) +
         "  unlabeled: " + std::to_string(unlabeled_records) + "\n";
  out += "train_events: " + std::to_string(train_events) +
         "  predict_events: " + std::to_string(predict_events) + "\n";
  out += "alerts: " + std::to_string(alerts_emitted) + "\n";
  out += "parse_errors: " + std::to_string(parse_errors) +
         "  io_errors: " + std::to_string(io_errors) + "\n";
  out += "feedback: trained=" + std::to_string(feedback_trained) +
         " unknown=" + std::to_string(feedback_unknown) +
         " duplicate=" + std::to_string(feedback_duplicate) + "\n";
  out += "rounds: " + std::to_string(rounds.size()) + "\n";
  for (const auto& r : rounds) {
    out += "  round " + std::to_string(r.round) + " @" + std::to_string(r.records_at) +
           " alerts=" + std::to_string(r.alerts) + "\n";
    counts_row(out, "    window    ", r.window);
    counts_row(out, "    cumulative", r.cumulative);
  }
  counts_row(out, "final window    ", final_window);
  counts_row(out, "final cumulative", final_cumulative);
  return out;
}

std::string RunReport::metrics_jsonl() const {
  std::string out;
  for (const auto& r : rounds) {
    out += "{\"org\":\"" + org_id + "\",\"round\":" + std::to_string(r.round) +
           ",\"records\":" + std::to_string(r.records_at) +
           ",\"window_acc\":" + fmt_rate(r.window.accuracy()) +
           ",\"window_tpr\":" + fmt_rate(r.window.tpr()) +
           ",\"window_fpr\":" + fmt_rate(r.window.fpr()) +
           ",\"cum_acc\":" + fmt_rate(r.cumulative.accuracy()) + "}\n";
  }
  out += "{\"org\":\"" + org_id + "\",\"round\":\"final\",\"records\":" +
         std::to_string(records_processed) +
         ",\"window_acc\":" + fmt_rate(final_window.accuracy()) +
         ",\"window_tpr\":" + fmt_rate(final_window.tpr()) +
         ",\"window_fpr\":" + fmt_rate(final_window.fpr()) +
         ",\"cum_acc\":" + fmt_rate(final_cumulative.accuracy()) + "}\n";
  return out;
}

}  // namespace fedstream
