#include "fedstream/synth.hpp"

#include <algorithm>
#include <charconv>

#include "fedstream/bytes.hpp"
#include "fedstream/errors.hpp"

namespace fedstream {

void SyntheticConfig::validate() const {
  if (n_orgs < 1) throw ConfigError("synthetic config needs n_orgs >= 1");
  if (!schema) throw ConfigError("synthetic config needs a schema");
  if (patterns.empty()) throw ConfigError("synthetic config needs at least one pattern");
  if (!(label_fraction >= 0.0 && label_fraction <= 1.0))
    throw ConfigError("label_fraction must be in [0, 1]");
  if (!(attack_fraction >= 0.0 && attack_fraction < 1.0))
    throw ConfigError("attack_fraction must be in [0, 1)");
  const size_t dim = schema->dimension();
  auto check_vec = [&](const std::vector<double>& v, const char* what) {
    if (v.size() != dim)
      throw ConfigError(std::string(what) + " must have one entry per feature");
  };
  check_vec(background_mean, "background mean");
  check_vec(background_stddev, "background stddev");
  for (const auto& p : patterns) {
    check_vec(p.mean, "pattern mean");
    check_vec(p.stddev, "pattern stddev");
    for (size_t i = 0; i < dim; ++i) {
      if (schema->at(i).kind == FeatureKind::numeric && !(p.stddev[i] > 0.0))
        throw ConfigError("pattern stddev entries must be > 0");
    }
    for (size_t o : p.orgs)
      if (o >= n_orgs) throw ConfigError("pattern assigned to org index out of range");
  }
  for (const auto& d : drift_events) {
    if (d.pattern_index >= patterns.size())
      throw ConfigError("drift event references unknown pattern");
    check_vec(d.mean_shift, "drift mean shift");
  }
}

namespace {

std::string num_to_string(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

SyntheticSource::SyntheticSource(const SyntheticConfig& config, size_t org_index,
                                 bool force_unlabeled)
    : config_(config),
      org_index_(org_index),
      force_unlabeled_(force_unlabeled),
      rng_(derive_seed(config.seed, org_index == config.n_orgs ? "heldout" : "org-stream",
                       org_index)) {
  config_.validate();
  const bool heldout = org_index_ == config_.n_orgs;
  for (size_t p = 0; p < config_.patterns.size(); ++p) {
    const auto& pat = config_.patterns[p];
    const bool mine = heldout || pat.orgs.empty() ||
                      std::find(pat.orgs.begin(), pat.orgs.end(), org_index_) != pat.orgs.end();
    if (mine) my_patterns_.push_back(p);
    means_.push_back(pat.mean);
  }
  // sort drift events once; config order may be arbitrary
  // (applied when produced_ crosses at_record)
}

std::optional<std::pair<LogRecord, ClassLabel>> SyntheticSource::next_with_truth() {
  if (produced_ >= config_.records_per_org) return std::nullopt;

  for (const auto& d : config_.drift_events) {
    if (d.at_record == produced_) {
      auto& mean = means_[d.pattern_index];
      for (size_t i = 0; i < mean.size(); ++i) mean[i] += d.mean_shift[i];
    }
  }

  const bool attack = !my_patterns_.empty() && rng_.bernoulli(config_.attack_fraction);
  int pattern = -1;
  if (attack) pattern = static_cast<int>(my_patterns_[rng_.index(my_patterns_.size())]);
  last_pattern_ = pattern;

  const FeatureSchema& schema = *config_.schema;
  const std::vector<double>& mean =
      pattern >= 0 ? means_[static_cast<size_t>(pattern)] : config_.background_mean;
  const std::vector<double>& sd = pattern >= 0
                                      ? config_.patterns[static_cast<size_t>(pattern)].stddev
                                      : config_.background_stddev;
  const ClassLabel truth =
      pattern >= 0 ? config_.patterns[static_cast<size_t>(pattern)].label : ClassLabel::benign;

  LogRecord r;
  r.record_id = (org_index_ == config_.n_orgs ? "heldout-" : "org" + std::to_string(org_index_) + "-") +
                std::to_string(produced_);
  r.timestamp_ms = static_cast<int64_t>(1577836800000ull + produced_ * 1000ull);
  r.fields.reserve(schema.dimension());
  for (size_t i = 0; i < schema.dimension(); ++i) {
    const FeatureDef& f = schema.at(i);
    if (f.kind == FeatureKind::numeric) {
      double v = rng_.gaussian(mean[i], sd[i]);
      v = std::clamp(v, f.lo, f.hi);
      r.fields.emplace_back(f.source_field, num_to_string(v));
    } else {
      const size_t c = rng_.index(f.categories.size());
      r.fields.emplace_back(f.source_field, f.categories[c]);
    }
  }
  if (!force_unlabeled_ && rng_.bernoulli(config_.label_fraction)) {
    r.label = truth;
    r.label_source = "stream";
  }

  ++produced_;
  const std::string line = record_to_jsonl(r);
  digest_ = fnv1a64(line, digest_);
  return std::make_pair(std::move(r), truth);
}

std::optional<LogRecord> SyntheticSource::next() {
  auto pair = next_with_truth();
  if (!pair) return std::nullopt;
  return std::move(pair->first);
}

std::string record_to_jsonl(const LogRecord& record) {
  std::string out = "{\"id\":\"";
  out += record.record_id;
  out += "\",\"ts\":";
  out += std::to_string(record.timestamp_ms);
  for (const auto& [k, v] : record.fields) {
    out += ",\"";
    out += k;
    out += "\":\"";
    out += v;
    out += "\"";
  }
  if (record.label) {
    out += ",\"label\":\"";
    out += to_string(*record.label);
    out += "\"";
  }
  out += "}";
  return out;
}

std::vector<std::vector<LogRecord>> gen_synthetic(const SyntheticConfig& config) {
  config.validate();
  std::vector<std::vector<LogRecord>> out(config.n_orgs);
  for (size_t org = 0; org < config.n_orgs; ++org) {
    SyntheticSource src(config, org);
    out[org].reserve(config.records_per_org);
    while (auto r = src.next()) out[org].push_back(std::move(*r));
  }
  return out;
}

std::vector<SynthRecord> gen_synthetic_pooled(const SyntheticConfig& config,
                                              uint64_t total_records) {
  SyntheticConfig pooled = config;
  pooled.n_orgs = 1;
  pooled.records_per_org = total_records;
  for (auto& p : pooled.patterns) p.orgs.clear();
  pooled.validate();
  std::vector<SynthRecord> out;
  out.reserve(total_records);
  SyntheticSource src(pooled, 0);
  while (auto pair = src.next_with_truth()) {
    out.push_back({std::move(pair->first), pair->second, src.last_pattern()});
  }
  return out;
}

std::vector<std::vector<SynthRecord>> partition(
    const std::vector<SynthRecord>& stream, size_t n_orgs, PartitionStrategy strategy,
    const std::unordered_map<int, size_t>* pattern_to_org) {
  if (n_orgs < 1) throw ConfigError("partition needs n_orgs >= 1");
  if (strategy == PartitionStrategy::by_pattern && !pattern_to_org)
    throw ConfigError("by_pattern partition needs a pattern-to-org map");
  std::vector<std::vector<SynthRecord>> out(n_orgs);
  size_t rr = 0;
  for (const auto& rec : stream) {
    size_t target;
    if (strategy == PartitionStrategy::round_robin) {
      target = rr++ % n_orgs;
    } else {
      if (rec.pattern_index >= 0 && pattern_to_org) {
        auto it = pattern_to_org->find(rec.pattern_index);
        if (it == pattern_to_org->end())
          throw ConfigError("by_pattern partition missing mapping for pattern " +
                            std::to_string(rec.pattern_index));
        target = it->second % n_orgs;
      } else {
        target = rr++ % n_orgs;  // background spreads evenly
      }
    }
    out[target].push_back(rec);
  }
  return out;
}

}  // namespace fedstream
