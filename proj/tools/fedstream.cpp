// fedstream: streaming federated threat-detection CLI.
//
// Exit codes: 0 success, 2 configuration error, 3 I/O error,
// 4 model kind/schema mismatch.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedstream/bytes.hpp"
#include "fedstream/classifier.hpp"
#include "fedstream/config.hpp"
#include "fedstream/experiment.hpp"
#include "fedstream/log.hpp"
#include "fedstream/pipeline.hpp"
#include "fedstream/synth.hpp"

namespace fs = std::filesystem;
using namespace fedstream;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kIoError = 3;
constexpr int kModelMismatch = 4;

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

struct RunArgs {
  std::string config_path;
  std::string input_path;
  std::string out_dir = ".";
  uint64_t seed = 0;
  bool seed_set = false;
};

int cmd_run(const RunArgs& args) {
  RunSpec spec = load_run_spec(args.config_path);
  if (!args.input_path.empty()) {
    spec.input_path = args.input_path;
    if (!spec.input_format_forced) spec.input_format = guess_format(spec.input_path);
  }
  if (spec.input_path.empty()) throw ConfigError("no input: pass --input or set it in the config");
  if (args.seed_set) {
    spec.pipeline.seed = args.seed;
    spec.pipeline.model.seed = args.seed;
  }

  fs::create_directories(args.out_dir);
  FileSource source(spec.input_path, spec.input_format);

  std::unique_ptr<ShareStore> store;
  std::unique_ptr<ShareClient> client;
  if (spec.pipeline.community) {
    if (!spec.file_drop_dir.empty()) {
      client = std::make_unique<FileDropShareClient>(
          *spec.pipeline.community, spec.file_drop_dir, spec.pipeline.org_id,
          spec.pipeline.schema->digest(), 50, spec.drop_timeout_ms);
    } else {
      store = std::make_unique<ShareStore>(*spec.pipeline.community,
                                           spec.pipeline.schema->digest());
      client = std::make_unique<InProcessShareClient>(*store, spec.pipeline.org_id);
    }
  }

  StreamPipeline pipeline(spec.pipeline, source);
  if (!spec.feedback_file.empty())
    pipeline.preload_feedback(load_feedback_file(spec.feedback_file, spec.pipeline.org_id));

  while (true) {
    const StepStatus s = pipeline.step();
    if (s == StepStatus::ok) continue;
    if (s == StepStatus::needs_exchange) {
      pipeline.deliver_consensus(
          client->exchange(pipeline.pending_round(), pipeline.pending_envelope()));
      continue;
    }
    break;
  }
  if (client) client->done();

  const RunReport& report = pipeline.report();
  write_text_file((fs::path(args.out_dir) / "run_report.txt").string(), report.to_text());
  write_text_file((fs::path(args.out_dir) / "metrics.jsonl").string(), report.metrics_jsonl());
  std::string alerts;
  for (const auto& a : report.alerts) alerts += a.to_json() + "\n";
  write_text_file((fs::path(args.out_dir) / "alerts.jsonl").string(), alerts);
  write_envelope_file(export_model(pipeline.model(), spec.pipeline.org_id,
                                   report.rounds.empty() ? 0 : report.rounds.back().round),
                      (fs::path(args.out_dir) / "model.env").string());

  if (report.parse_errors > 0)
    log_warn(std::to_string(report.parse_errors) + " malformed input line(s) skipped");
  std::cout << report.to_text();
  return kOk;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir, uint64_t seed,
                 bool seed_set) {
  SyntheticConfig config = load_synth_config(config_path);
  if (seed_set) config.seed = seed;
  fs::create_directories(out_dir);
  for (size_t org = 0; org < config.n_orgs; ++org) {
    SyntheticSource source(config, org);
    std::ofstream stream((fs::path(out_dir) / ("org_" + std::to_string(org) + ".jsonl")).string(),
                         std::ios::binary | std::ios::trunc);
    std::ofstream truth(
        (fs::path(out_dir) / ("org_" + std::to_string(org) + ".truth.jsonl")).string(),
        std::ios::binary | std::ios::trunc);
    if (!stream || !truth) throw IoError("cannot write stream files under " + out_dir);
    while (auto pair = source.next_with_truth()) {
      stream << record_to_jsonl(pair->first) << '\n';
      truth << "{\"id\":\"" << pair->first.record_id << "\",\"truth\":\""
            << to_string(pair->second) << "\"}\n";
    }
  }
  std::cout << "wrote " << config.n_orgs << " stream file(s) to " << out_dir << "\n";
  return kOk;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir, uint64_t seed,
                 bool seed_set, bool sequential) {
  ExperimentConfig config = load_experiment_config(config_path);
  if (seed_set) {
    config.seed = seed;
    config.synth.seed = derive_seed(seed, "synth");
  }
  if (sequential) config.sequential = true;
  config.out_dir = out_dir;
  fs::create_directories(out_dir);

  const ExperimentReport report = run_experiment(config);
  write_text_file((fs::path(out_dir) / "experiment_report.txt").string(), report.to_text());
  write_text_file((fs::path(out_dir) / "metrics.jsonl").string(), report.metrics_jsonl());
  if (report.final_consensus)
    write_envelope_file(*report.final_consensus,
                        (fs::path(out_dir) / "consensus.env").string());
  std::cout << report.to_text();
  return kOk;
}

int cmd_merge(const std::vector<std::string>& env_paths, const std::string& weights_csv,
              uint64_t seed, const std::string& out_path) {
  std::vector<ModelEnvelope> envelopes;
  for (const auto& p : env_paths) envelopes.push_back(read_envelope_file(p));

  std::vector<double> raw;
  if (weights_csv.empty()) {
    raw.assign(envelopes.size(), 1.0);
  } else {
    std::string cur;
    for (char c : weights_csv + ",") {
      if (c == ',') {
        if (!cur.empty()) raw.push_back(std::stod(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    double sum = 0.0;
    for (double v : raw) sum += v;
    if (std::abs(sum - 1.0) > 1e-9)
      log_warn("weights sum to " + std::to_string(sum) + "; normalizing to 1");
  }
  const ModelEnvelope merged = merge_envelopes(envelopes, MergeWeights::normalized(raw), seed);
  write_envelope_file(merged, out_path);
  std::cout << "merged " << envelopes.size() << " envelope(s) -> " << out_path << "\n";
  return kOk;
}

int cmd_inspect(const std::string& path) {
  const ModelEnvelope env = read_envelope_file(path);
  std::cout << "envelope: " << path << "\n";
  std::cout << "  org: " << env.org_id << "\n";
  std::cout << "  kind: " << to_string(env.model_kind) << "\n";
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(env.schema_hash));
  std::cout << "  schema_hash: " << hex << "\n";
  std::cout << "  round: " << env.round << "\n";
  std::cout << "  records_seen: " << env.records_seen << "\n";
  std::cout << "  payload_bytes: " << env.payload.size() << "\n";

  std::string reason;
  if (!validate_envelope(env, &reason)) {
    std::cout << "  payload: INVALID (" << reason << ")\n";
    return kModelMismatch;
  }
  std::cout << "  payload: valid parameter grammar\n";
  switch (env.model_kind) {
    case ModelKind::nb: {
      const HistogramSet h = HistogramSet::deserialize(env.payload);
      std::cout << "  features: " << h.dimension() << "\n";
      std::cout << "  N_benign: " << h.class_total(ClassLabel::benign)
                << "  N_malicious: " << h.class_total(ClassLabel::malicious) << "\n";
      break;
    }
    case ModelKind::mlp: {
      const MlpParams p = MlpParams::deserialize(env.payload);
      std::cout << "  layers:";
      for (const auto& l : p.layers) std::cout << " (" << l.out << "x" << l.in << ")";
      std::cout << "\n  parameters: " << p.parameter_count() << "\n";
      break;
    }
    case ModelKind::forest: {
      const Ensemble e = Ensemble::deserialize(env.payload, 0);
      std::cout << "  trees: " << e.size() << "\n";
      std::cout << "  nodes:";
      for (size_t i = 0; i < e.size(); ++i) std::cout << " " << e.tree(i).node_count();
      std::cout << "\n  origins:";
      for (size_t i = 0; i < e.size(); ++i)
        std::cout << " " << e.origin(i).org_id << "@" << e.origin(i).round;
      std::cout << "\n";
      break;
    }
  }
  return kOk;
}

int cmd_feedback(const std::string& org, const std::string& record_id, const std::string& label,
                 const std::string& operator_id, int64_t ts, const std::string& queue_path) {
  ClassLabel y;
  if (!class_label_from_string(label, y))
    throw ConfigError("label must be benign or malicious, got '" + label + "'");
  FeedbackEvent e;
  e.record_id = record_id;
  e.label = y;
  e.operator_id = operator_id;
  e.ts = ts;
  append_feedback_file(queue_path, org, e);
  std::cout << "queued feedback for record " << record_id << " in " << queue_path << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedstream: streaming federated threat detection"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run one organization's pipeline over a log stream");
  run->add_option("--config", run_args.config_path, "Pipeline config (JSON)")->required();
  run->add_option("--input", run_args.input_path, "Input records (JSONL or CSV)");
  run->add_option("--out", run_args.out_dir, "Output directory");
  run->add_option("--seed", run_args.seed, "Override the pipeline seed")
      ->each([&](const std::string&) { run_args.seed_set = true; });

  std::string sim_config, sim_out = "report";
  uint64_t sim_seed = 0;
  bool sim_seed_set = false, sim_sequential = false;
  auto* simulate = app.add_subcommand("simulate", "Deterministic multi-organization experiment");
  simulate->add_option("--config", sim_config, "Experiment config (JSON)")->required();
  simulate->add_option("--out", sim_out, "Output directory");
  simulate->add_option("--seed", sim_seed, "Override the experiment seed")
      ->each([&](const std::string&) { sim_seed_set = true; });
  simulate->add_flag("--sequential", sim_sequential, "Run org pipelines sequentially");

  std::vector<std::string> merge_paths;
  std::string merge_weights, merge_out;
  uint64_t merge_seed = 0;
  auto* merge = app.add_subcommand("merge", "Merge model envelopes offline");
  merge->add_option("envelopes", merge_paths, "Envelope files")->required()->expected(-1);
  merge->add_option("--weights", merge_weights, "Comma-separated weights (normalized)");
  merge->add_option("--seed", merge_seed, "Sampling seed for forest merges");
  merge->add_option("--out", merge_out, "Output envelope path")->required();

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "Render an envelope's headers and shapes");
  inspect->add_option("envelope", inspect_path, "Envelope file")->required();

  std::string fb_org, fb_record, fb_label, fb_operator = "operator",
                                           fb_queue = "feedback.jsonl";
  int64_t fb_ts = 0;
  auto* feedback = app.add_subcommand("feedback", "Queue operator label feedback");
  feedback->add_option("--org", fb_org, "Organization id")->required();
  feedback->add_option("--record", fb_record, "Record id")->required();
  feedback->add_option("--label", fb_label, "benign or malicious")->required();
  feedback->add_option("--operator", fb_operator, "Operator id");
  feedback->add_option("--ts", fb_ts, "Event timestamp (ms)");
  feedback->add_option("--queue", fb_queue, "Feedback inbox file");

  std::string gen_config, gen_out = "data";
  uint64_t gen_seed = 0;
  bool gen_seed_set = false;
  auto* gen = app.add_subcommand("gen-data", "Generate synthetic per-org log streams");
  gen->add_option("--config", gen_config, "Synthetic config (JSON)")->required();
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--seed", gen_seed, "Override the generator seed")
      ->each([&](const std::string&) { gen_seed_set = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // exits 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (run->parsed()) return cmd_run(run_args);
    if (simulate->parsed())
      return cmd_simulate(sim_config, sim_out, sim_seed, sim_seed_set, sim_sequential);
    if (merge->parsed()) return cmd_merge(merge_paths, merge_weights, merge_seed, merge_out);
    if (inspect->parsed()) return cmd_inspect(inspect_path);
    if (feedback->parsed())
      return cmd_feedback(fb_org, fb_record, fb_label, fb_operator, fb_ts, fb_queue);
    if (gen->parsed()) return cmd_gen_data(gen_config, gen_out, gen_seed, gen_seed_set);
  } catch (const MixedKinds& e) {
    log_error(e.what());
    return kModelMismatch;
  } catch (const KindMismatch& e) {
    log_error(e.what());
    return kModelMismatch;
  } catch (const SchemaMismatch& e) {
    log_error(e.what());
    return kModelMismatch;
  } catch (const ArchMismatch& e) {
    log_error(e.what());
    return kModelMismatch;
  } catch (const WeightArityMismatch& e) {
    log_error(e.what());
    return kConfigError;
  } catch (const ConfigError& e) {
    log_error(e.what());
    return kConfigError;
  } catch (const IoError& e) {
    log_error(e.what());
    return kIoError;
  } catch (const PayloadError& e) {
    log_error(e.what());
    return kModelMismatch;
  } catch (const Error& e) {
    log_error(e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    log_error(e.what());
    return 1;
  }
  return kOk;
}
