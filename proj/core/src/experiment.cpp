#include "fedstream/experiment.hpp"

#include <cstdio>
#include <exception>
#include <filesystem>
#include <thread>

#include "fedstream/bytes.hpp"

namespace fedstream {

void ExperimentConfig::validate() const {
  synth.validate();
  if (share_every < 1) throw ConfigError("share_every must be >= 1");
  if (!trust_weights.empty() && trust_weights.size() != synth.n_orgs)
    throw ConfigError("trust_weights must have one entry per org");
  if (model.kind == ModelKind::nb && synth.schema == nullptr)
    throw ConfigError("experiment needs a schema");
}

namespace {

CommunityConfig make_community(const ExperimentConfig& config,
                               const std::vector<size_t>& org_indices,
                               const std::string& community_id) {
  CommunityConfig c;
  c.community_id = community_id;
  for (size_t i : org_indices) {
    const double trust =
        config.trust_weights.empty() ? 1.0 : config.trust_weights[i];
    c.members.push_back({config.org_name(i), trust});
  }
  c.schedule.every_n_records = config.share_every;
  c.model_kind = config.model.kind;
  c.include_self = config.include_self;
  c.seed = derive_seed(config.seed, community_id);
  return c;
}

PipelineConfig make_pipeline_config(const ExperimentConfig& config, size_t org,
                                    const CommunityConfig& community) {
  PipelineConfig p;
  p.org_id = config.org_name(org);
  p.schema = config.synth.schema;
  p.model = config.model;
  p.model.seed = derive_seed(config.seed, "model", org);
  p.community = community;
  p.metrics_window = config.metrics_window;
  p.alert_threshold = config.alert_threshold;
  p.seed = derive_seed(config.seed, "pipeline", org);
  return p;
}

struct ArmOutput {
  std::vector<OrgArmResult> orgs;
  std::vector<MessageLogEntry> log;
  std::optional<ModelEnvelope> last_consensus;
};

// Runs every org of one arm against a shared store. Sequential mode steps
// pipelines in org order and releases them round by round; concurrent mode
// gives each org a thread and lets the store's barrier do the work. Both
// orderings feed the store identical envelope sets per round, so reports
// and logs are bitwise identical.
ArmOutput run_arm(const ExperimentConfig& config, const CommunityConfig& community,
                  const std::vector<size_t>& org_indices, bool sequential,
                  const std::string& drop_dir, const std::string& log_path) {
  ShareStore store(community, config.synth.schema->digest(), drop_dir, log_path);

  const size_t n = org_indices.size();
  std::vector<std::unique_ptr<SyntheticSource>> sources;
  std::vector<std::unique_ptr<StreamPipeline>> pipelines;
  for (size_t i = 0; i < n; ++i) {
    sources.push_back(std::make_unique<SyntheticSource>(config.synth, org_indices[i]));
    pipelines.push_back(std::make_unique<StreamPipeline>(
        make_pipeline_config(config, org_indices[i], community), *sources[i]));
  }

  if (sequential) {
    std::vector<bool> done(n, false), parked(n, false);
    size_t remaining = n;
    while (remaining > 0) {
      for (size_t i = 0; i < n; ++i) {
        if (done[i] || parked[i]) continue;
        while (true) {
          const StepStatus s = pipelines[i]->step();
          if (s == StepStatus::ok) continue;
          if (s == StepStatus::needs_exchange) {
            store.post_envelope(pipelines[i]->pending_round(),
                                pipelines[i]->pending_envelope());
            parked[i] = true;
          } else {
            store.mark_done(community.members[i].org_id);
            done[i] = true;
            --remaining;
          }
          break;
        }
      }
      for (size_t i = 0; i < n; ++i) {
        if (!parked[i]) continue;
        pipelines[i]->deliver_consensus(store.consensus_for(
            community.members[i].org_id, pipelines[i]->pending_round()));
        parked[i] = false;
      }
    }
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(n);
    for (size_t i = 0; i < n; ++i) {
      threads.emplace_back([&, i] {
        try {
          InProcessShareClient client(store, community.members[i].org_id);
          while (true) {
            const StepStatus s = pipelines[i]->step();
            if (s == StepStatus::ok) continue;
            if (s == StepStatus::needs_exchange) {
              pipelines[i]->deliver_consensus(client.exchange(
                  pipelines[i]->pending_round(), pipelines[i]->pending_envelope()));
              continue;
            }
            client.done();
            break;
          }
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  ArmOutput out;
  for (size_t i = 0; i < n; ++i) {
    OrgArmResult r;
    r.report = pipelines[i]->report();
    r.final_model = export_model(pipelines[i]->model(), community.members[i].org_id,
                                 pipelines[i]->report().rounds.empty()
                                     ? 0
                                     : pipelines[i]->report().rounds.back().round);
    r.stream_digest = sources[i]->stream_digest();
    out.orgs.push_back(std::move(r));
  }
  out.log = store.message_log();
  if (!out.log.empty()) {
    uint64_t last_round = 0;
    for (const auto& e : out.log) last_round = std::max(last_round, e.round);
    out.last_consensus = store.consensus(last_round);
  }
  return out;
}

}  // namespace

ConfusionCounts evaluate_heldout(const ModelEnvelope& env, const ExperimentConfig& config) {
  auto model = import_model(env, config.synth.schema);
  SyntheticConfig heldout_cfg = config.synth;
  heldout_cfg.records_per_org = config.heldout_records;
  heldout_cfg.drift_events.clear();
  SyntheticSource source(heldout_cfg, heldout_cfg.n_orgs, /*force_unlabeled=*/true);
  ConfusionCounts counts;
  while (auto pair = source.next_with_truth()) {
    const FeatureVector x = featurize(pair->first, *config.synth.schema);
    const ClassLabel predicted = model->predict(x).predicted();
    const ClassLabel truth = pair->second;
    if (truth == ClassLabel::malicious) {
      if (predicted == ClassLabel::malicious) ++counts.tp;
      else ++counts.fn;
    } else {
      if (predicted == ClassLabel::malicious) ++counts.fp;
      else ++counts.tn;
    }
  }
  return counts;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  namespace fs = std::filesystem;

  ExperimentReport report;
  const size_t n = config.synth.n_orgs;

  // isolated arm: one single-member community per org
  for (size_t i = 0; i < n; ++i) {
    auto community = make_community(config, {i}, "isolated-" + config.org_name(i));
    auto out = run_arm(config, community, {i}, /*sequential=*/true, "", "");
    report.isolated.push_back(std::move(out.orgs[0]));
  }

  // federated arm: the full community over identical streams
  std::vector<size_t> all(n);
  for (size_t i = 0; i < n; ++i) all[i] = i;
  auto community = make_community(config, all, "community");
  std::string drop_dir, log_path;
  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    drop_dir = config.out_dir;
    log_path = (fs::path(config.out_dir) / "message_log.jsonl").string();
  }
  auto fed = run_arm(config, community, all, config.sequential, drop_dir, log_path);
  report.federated = std::move(fed.orgs);
  report.message_log = std::move(fed.log);
  report.final_consensus = std::move(fed.last_consensus);

  for (size_t i = 0; i < n; ++i) {
    if (report.isolated[i].stream_digest != report.federated[i].stream_digest)
      throw Error("arm fairness violated: per-org streams differ between arms");
    report.isolated[i].heldout = evaluate_heldout(report.isolated[i].final_model, config);
    report.federated[i].heldout = evaluate_heldout(report.federated[i].final_model, config);
  }
  if (report.final_consensus)
    report.consensus_heldout = evaluate_heldout(*report.final_consensus, config);
  return report;
}

double ExperimentReport::mean_isolated_heldout_accuracy() const {
  if (isolated.empty()) return 0.0;
  double s = 0.0;
  for (const auto& o : isolated) s += o.heldout.accuracy();
  return s / static_cast<double>(isolated.size());
}

double ExperimentReport::mean_federated_heldout_accuracy() const {
  if (federated.empty()) return 0.0;
  double s = 0.0;
  for (const auto& o : federated) s += o.heldout.accuracy();
  return s / static_cast<double>(federated.size());
}

namespace {

std::string rate(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

void heldout_row(std::string& out, const std::string& name, const ConfusionCounts& c) {
  out += "  " + name + ": acc=" + rate(c.accuracy()) + " tpr=" + rate(c.tpr()) +
         " fpr=" + rate(c.fpr()) + " (tp=" + std::to_string(c.tp) +
         " fp=" + std::to_string(c.fp) + " tn=" + std::to_string(c.tn) +
         " fn=" + std::to_string(c.fn) + ")\n";
}

}  // namespace

std::string ExperimentReport::to_text() const {
  std::string out = "fedstream experiment report\n";
  out += "== per-org runs ==\n";
  for (size_t i = 0; i < isolated.size(); ++i) {
    out += "-- " + isolated[i].report.org_id + " isolated --\n";
    out += isolated[i].report.to_text();
    out += "-- " + federated[i].report.org_id + " federated --\n";
    out += federated[i].report.to_text();
  }
  out += "== held-out evaluation ==\n";
  for (const auto& o : isolated) heldout_row(out, o.report.org_id + " isolated ", o.heldout);
  for (const auto& o : federated) heldout_row(out, o.report.org_id + " federated", o.heldout);
  if (final_consensus) heldout_row(out, "consensus", consensus_heldout);
  out += "mean isolated heldout acc: " + rate(mean_isolated_heldout_accuracy()) + "\n";
  out += "mean federated heldout acc: " + rate(mean_federated_heldout_accuracy()) + "\n";
  if (final_consensus)
    out += "consensus heldout acc: " + rate(consensus_heldout.accuracy()) + "\n";
  return out;
}

std::string ExperimentReport::metrics_jsonl() const {
  std::string out;
  for (const auto& o : isolated) {
    out += "{\"arm\":\"isolated\",\"org\":\"" + o.report.org_id +
           "\",\"heldout_acc\":" + rate(o.heldout.accuracy()) + "}\n";
  }
  for (const auto& o : federated) {
    out += "{\"arm\":\"federated\",\"org\":\"" + o.report.org_id +
           "\",\"heldout_acc\":" + rate(o.heldout.accuracy()) + "}\n";
    out += o.report.metrics_jsonl();
  }
  if (final_consensus)
    out += "{\"arm\":\"consensus\",\"heldout_acc\":" + rate(consensus_heldout.accuracy()) +
           "}\n";
  return out;
}

}  // namespace fedstream
