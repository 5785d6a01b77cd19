#include "fedstream/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedstream/bytes.hpp"

namespace fedstream {

namespace {

using nlohmann::json;

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
}

SchemaPtr schema_from_spec(const json& j) {
  if (!j.contains("schema") || j["schema"].get<std::string>() == "default")
    return default_schema();
  return std::make_shared<const FeatureSchema>(load_schema_file(j["schema"].get<std::string>()));
}

ModelKind parse_kind(const json& j) {
  ModelKind kind;
  const std::string s = j.get<std::string>();
  if (!model_kind_from_string(s, kind)) throw ConfigError("unknown model kind '" + s + "'");
  return kind;
}

ClassLabel parse_label(const json& j) {
  ClassLabel y;
  const std::string s = j.get<std::string>();
  if (!class_label_from_string(s, y)) throw ConfigError("unknown label '" + s + "'");
  return y;
}

ModelConfig parse_model(const json& j) {
  ModelConfig m;
  m.kind = parse_kind(j.at("kind"));
  m.nb_alpha = j.value("alpha", kNbDefaultAlpha);
  m.mlp.learning_rate = j.value("learning_rate", 0.01);
  if (m.mlp.learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
  if (j.contains("hidden")) {
    m.mlp_hidden.clear();
    for (const auto& h : j["hidden"]) m.mlp_hidden.push_back(h.get<size_t>());
  }
  m.forest.ensemble_size = j.value("ensemble_size", 20u);
  m.forest.grace_period = j.value("grace_period", 50u);
  m.forest.split_confidence = j.value("split_confidence", 1e-6);
  m.forest.tie_threshold = j.value("tie_threshold", 0.05);
  m.seed = j.value("seed", 0ull);
  return m;
}

std::vector<std::shared_ptr<LabelFeed>> parse_feeds(const json& j) {
  std::vector<std::shared_ptr<LabelFeed>> feeds;
  for (const auto& jf : j) {
    std::vector<PatternLabelFeed::Rule> rules;
    for (const auto& jr : jf.at("rules")) {
      PatternLabelFeed::Rule r;
      r.pattern = jr.at("pattern").get<std::string>();
      r.label = parse_label(jr.at("label"));
      r.confidence = jr.value("confidence", 1.0);
      rules.push_back(std::move(r));
    }
    feeds.push_back(std::make_shared<PatternLabelFeed>(
        jf.at("name").get<std::string>(), jf.value("field", "host"), std::move(rules)));
  }
  return feeds;
}

CommunityConfig parse_community(const json& j) {
  CommunityConfig c;
  c.community_id = j.at("id").get<std::string>();
  for (const auto& jm : j.at("members")) {
    c.members.push_back({jm.at("org").get<std::string>(), jm.value("trust", 1.0)});
  }
  c.schedule.every_n_records = j.value("every_n_records", 10000ull);
  c.model_kind = ModelKind::nb;  // overwritten by the pipeline's model kind
  c.include_self = j.value("include_self", true);
  c.seed = j.value("seed", 0ull);
  return c;
}

// Pattern vectors may be spelled as a scalar (position within each numeric
// feature's range, stddev as a fraction of the range) or as a full raw
// array, one entry per feature.
std::vector<double> expand_position(const json& j, const FeatureSchema& schema) {
  std::vector<double> out(schema.dimension(), 0.0);
  if (j.is_array()) {
    if (j.size() != schema.dimension())
      throw ConfigError("pattern vector length must equal the schema dimension");
    for (size_t i = 0; i < out.size(); ++i) out[i] = j[i].get<double>();
    return out;
  }
  const double v = j.get<double>();
  for (size_t i = 0; i < out.size(); ++i) {
    const FeatureDef& f = schema.at(i);
    out[i] = f.kind == FeatureKind::numeric ? f.lo + v * (f.hi - f.lo) : 0.0;
  }
  return out;
}

std::vector<double> expand_spread(const json& j, const FeatureSchema& schema) {
  std::vector<double> out(schema.dimension(), 1.0);
  if (j.is_array()) {
    if (j.size() != schema.dimension())
      throw ConfigError("pattern vector length must equal the schema dimension");
    for (size_t i = 0; i < out.size(); ++i) out[i] = j[i].get<double>();
    return out;
  }
  const double v = j.get<double>();
  for (size_t i = 0; i < out.size(); ++i) {
    const FeatureDef& f = schema.at(i);
    out[i] = f.kind == FeatureKind::numeric ? v * (f.hi - f.lo) : 1.0;
  }
  return out;
}

std::vector<double> expand_shift(const json& j, const FeatureSchema& schema) {
  std::vector<double> out(schema.dimension(), 0.0);
  if (j.is_array()) {
    if (j.size() != schema.dimension())
      throw ConfigError("pattern vector length must equal the schema dimension");
    for (size_t i = 0; i < out.size(); ++i) out[i] = j[i].get<double>();
    return out;
  }
  const double v = j.get<double>();
  for (size_t i = 0; i < out.size(); ++i) {
    const FeatureDef& f = schema.at(i);
    out[i] = f.kind == FeatureKind::numeric ? v * (f.hi - f.lo) : 0.0;
  }
  return out;
}

SyntheticConfig parse_synth(const json& j) {
  SyntheticConfig c;
  c.schema = schema_from_spec(j);
  c.n_orgs = j.value("n_orgs", 1u);
  c.records_per_org = j.value("records_per_org", 1000ull);
  c.attack_fraction = j.value("attack_fraction", 0.5);
  c.label_fraction = j.value("label_fraction", 0.3);
  c.seed = j.value("seed", 0ull);

  const auto& bg = j.at("background");
  c.background_mean = expand_position(bg.at("mean"), *c.schema);
  c.background_stddev = expand_spread(bg.at("stddev"), *c.schema);

  for (const auto& jp : j.at("patterns")) {
    AttackPattern p;
    p.name = jp.value("name", "pattern" + std::to_string(c.patterns.size()));
    p.mean = expand_position(jp.at("mean"), *c.schema);
    p.stddev = expand_spread(jp.at("stddev"), *c.schema);
    p.label = jp.contains("label") ? parse_label(jp["label"]) : ClassLabel::malicious;
    if (jp.contains("orgs"))
      for (const auto& o : jp["orgs"]) p.orgs.push_back(o.get<size_t>());
    c.patterns.push_back(std::move(p));
  }
  if (j.contains("drift")) {
    for (const auto& jd : j["drift"]) {
      DriftEvent d;
      d.at_record = jd.at("at_record").get<uint64_t>();
      d.pattern_index = jd.at("pattern").get<size_t>();
      d.mean_shift = expand_shift(jd.at("mean_shift"), *c.schema);
      c.drift_events.push_back(std::move(d));
    }
  }
  c.validate();
  return c;
}

}  // namespace

RunSpec load_run_spec(const std::string& path) {
  const json j = load_json_file(path);
  RunSpec spec;
  spec.pipeline.org_id = j.value("org", "org");
  spec.pipeline.schema = schema_from_spec(j);
  spec.pipeline.model = parse_model(j.at("model"));
  spec.pipeline.metrics_window = j.value("metrics_window", 1000u);
  spec.pipeline.alert_threshold = j.value("alert_threshold", 0.5);
  spec.pipeline.retention_capacity = j.value("retention", 100000u);
  spec.pipeline.seed = j.value("seed", 0ull);
  if (spec.pipeline.model.seed == 0) spec.pipeline.model.seed = spec.pipeline.seed;
  if (j.contains("feeds")) spec.pipeline.feeds = parse_feeds(j["feeds"]);
  if (j.contains("community")) {
    CommunityConfig c = parse_community(j["community"]);
    c.model_kind = spec.pipeline.model.kind;
    const auto& jc = j["community"];
    if (jc.contains("transport")) {
      const auto& jt = jc["transport"];
      const std::string kind = jt.value("kind", "file_drop");
      if (kind != "file_drop")
        throw ConfigError("run transport must be file_drop (got '" + kind + "')");
      spec.file_drop_dir = jt.at("dir").get<std::string>();
      spec.drop_timeout_ms = jt.value("timeout_ms", 30000ull);
    } else if (c.members.size() > 1) {
      throw ConfigError("multi-member community in `run` needs a file_drop transport");
    }
    spec.pipeline.community = std::move(c);
  }
  if (j.contains("input")) spec.input_path = j["input"].get<std::string>();
  if (j.contains("input_format")) {
    const std::string f = j["input_format"].get<std::string>();
    if (f == "jsonl") spec.input_format = RecordFormat::jsonl;
    else if (f == "csv") spec.input_format = RecordFormat::csv;
    else throw ConfigError("input_format must be jsonl or csv");
    spec.input_format_forced = true;
  }
  if (j.contains("feedback_file")) spec.feedback_file = j["feedback_file"].get<std::string>();
  spec.pipeline.validate();
  return spec;
}

SyntheticConfig load_synth_config(const std::string& path) {
  return parse_synth(load_json_file(path));
}

ExperimentConfig load_experiment_config(const std::string& path) {
  const json j = load_json_file(path);
  ExperimentConfig c;
  c.synth = parse_synth(j.at("synth"));
  c.model = parse_model(j.at("model"));
  c.share_every = j.value("share_every", 2000ull);
  c.metrics_window = j.value("metrics_window", 1000u);
  c.alert_threshold = j.value("alert_threshold", 0.5);
  c.heldout_records = j.value("heldout_records", 4000ull);
  if (j.contains("trust"))
    for (const auto& t : j["trust"]) c.trust_weights.push_back(t.get<double>());
  c.include_self = j.value("include_self", true);
  c.sequential = j.value("sequential", false);
  c.seed = j.value("seed", 0ull);
  c.validate();
  return c;
}

std::vector<FeedbackEvent> load_feedback_file(const std::string& path,
                                              const std::string& org_filter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feedback file: " + path);
  std::vector<FeedbackEvent> events;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(lineno, std::string("feedback line is not valid JSON: ") + e.what());
    }
    if (!org_filter.empty() && j.value("org", "") != org_filter) continue;
    FeedbackEvent e;
    e.record_id = j.at("record").get<std::string>();
    e.label = parse_label(j.at("label"));
    e.operator_id = j.value("operator", "operator");
    e.ts = j.value("ts", 0ll);
    events.push_back(std::move(e));
  }
  return events;
}

void append_feedback_file(const std::string& path, const std::string& org,
                          const FeedbackEvent& event) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to feedback file: " + path);
  json j;
  j["org"] = org;
  j["record"] = event.record_id;
  j["label"] = to_string(event.label);
  j["operator"] = event.operator_id;
  j["ts"] = event.ts;
  out << j.dump() << '\n';
}

}  // namespace fedstream
