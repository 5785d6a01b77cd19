#include "fedstream/federation.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include "fedstream/bytes.hpp"

namespace fedstream {

namespace fs = std::filesystem;

const CommunityMember* CommunityConfig::find(const std::string& org_id) const {
  for (const auto& m : members)
    if (m.org_id == org_id) return &m;
  return nullptr;
}

void CommunityConfig::validate() const {
  if (community_id.empty()) throw ConfigError("community needs an id");
  if (members.empty()) throw ConfigError("community needs at least one member");
  if (schedule.every_n_records < 1) throw ConfigError("sharing schedule must be >= 1 record");
  double sum = 0.0;
  std::set<std::string> seen;
  for (const auto& m : members) {
    if (m.org_id.empty()) throw ConfigError("member with empty org id");
    if (!seen.insert(m.org_id).second) throw ConfigError("duplicate member: " + m.org_id);
    if (!(m.trust_weight >= 0.0)) throw ConfigError("trust weight must be >= 0");
    sum += m.trust_weight;
  }
  if (sum <= 0.0) throw ConfigError("community trust weights sum to zero");
}

std::string MessageLogEntry::to_json() const {
  char digest_hex[17];
  std::snprintf(digest_hex, sizeof(digest_hex), "%016llx",
                static_cast<unsigned long long>(digest));
  std::string out = "{\"round\":";
  out += std::to_string(round);
  out += ",\"from\":\"";
  out += from;
  out += "\",\"kind\":\"";
  out += to_string(kind);
  out += "\",\"bytes\":";
  out += std::to_string(bytes);
  out += ",\"digest\":\"";
  out += digest_hex;
  out += "\"}";
  return out;
}

ShareStore::ShareStore(CommunityConfig config, uint64_t expected_schema_hash,
                       std::string file_drop_dir, std::string message_log_path)
    : config_(std::move(config)),
      expected_schema_hash_(expected_schema_hash),
      file_drop_dir_(std::move(file_drop_dir)),
      message_log_path_(std::move(message_log_path)) {
  config_.validate();
  if (!message_log_path_.empty()) {
    std::ofstream out(message_log_path_, std::ios::trunc);  // start fresh
    if (!out) throw IoError("cannot open message log: " + message_log_path_);
  }
}

void ShareStore::post_envelope(uint64_t round, const ModelEnvelope& env) {
  std::unique_lock lock(mu_);
  if (!config_.find(env.org_id)) throw UnknownMember(env.org_id);
  if (env.schema_hash != expected_schema_hash_)
    throw SchemaMismatch("envelope schema does not match community schema");
  if (env.model_kind != config_.model_kind)
    throw KindMismatch("envelope kind does not match community model kind");
  Round& r = rounds_[round];
  if (r.closed) throw Error("round " + std::to_string(round) + " already closed");
  if (r.posted.count(env.org_id)) throw DuplicatePost(round, env.org_id);
  r.posted.emplace(env.org_id, env);
  maybe_close_locked(round);
}

void ShareStore::mark_done(const std::string& org_id) {
  std::unique_lock lock(mu_);
  if (!config_.find(org_id)) throw UnknownMember(org_id);
  done_.insert(org_id);
  for (auto& [round, r] : rounds_) {
    if (!r.closed && !r.posted.empty()) maybe_close_locked(round);
  }
}

void ShareStore::maybe_close_locked(uint64_t round) {
  Round& r = rounds_[round];
  if (r.closed || r.posted.empty()) return;
  for (const auto& m : config_.members) {
    if (done_.count(m.org_id)) continue;
    if (!r.posted.count(m.org_id)) return;  // still waiting
  }
  close_locked(round, derive_seed(config_.seed, "round", round));
}

ModelEnvelope ShareStore::close_round(uint64_t round) {
  return close_round(round, derive_seed(config_.seed, "round", round));
}

ModelEnvelope ShareStore::close_round(uint64_t round, uint64_t seed) {
  std::unique_lock lock(mu_);
  auto it = rounds_.find(round);
  if (it != rounds_.end() && it->second.closed) return *it->second.consensus;
  return close_locked(round, seed);
}

ModelEnvelope ShareStore::merge_posted_locked(const Round& r, const std::string& exclude,
                                              uint64_t seed) const {
  std::vector<ModelEnvelope> envs;
  std::vector<double> weights;
  // member order, not arrival order, so the merge is timing-independent
  for (const auto& m : config_.members) {
    if (m.org_id == exclude) continue;
    auto it = r.posted.find(m.org_id);
    if (it == r.posted.end()) continue;
    envs.push_back(it->second);
    weights.push_back(m.trust_weight);
  }
  if (envs.empty()) {
    // exclude-self with no peers: the member gets its own envelope back
    auto it = r.posted.find(exclude);
    if (it == r.posted.end()) throw EmptyRound(0);
    return it->second;
  }
  return merge_envelopes(envs, MergeWeights::normalized(std::move(weights)), seed);
}

ModelEnvelope ShareStore::close_locked(uint64_t round, uint64_t seed) {
  Round& r = rounds_[round];
  if (r.posted.empty()) throw EmptyRound(round);
  ModelEnvelope consensus = merge_posted_locked(r, "", seed);
  consensus.round = round;
  r.consensus = consensus;
  if (!config_.include_self) {
    for (const auto& [org, env] : r.posted) {
      (void)env;
      ModelEnvelope excl =
          merge_posted_locked(r, org, derive_seed(seed, "excl", fnv1a64(org)));
      excl.round = round;
      r.per_org.emplace(org, std::move(excl));
    }
  }
  r.closed = true;
  append_log_locked(round, r);
  cv_.notify_all();
  return *r.consensus;
}

void ShareStore::append_log_locked(uint64_t round, const Round& r) {
  std::vector<MessageLogEntry> entries;
  for (const auto& m : config_.members) {
    auto it = r.posted.find(m.org_id);
    if (it == r.posted.end()) continue;
    const ModelEnvelope& env = it->second;
    entries.push_back({round, env.org_id, env.model_kind,
                       static_cast<uint64_t>(env.payload.size()), env.payload_digest()});
  }
  const ModelEnvelope& c = *r.consensus;
  entries.push_back({round, "consensus", c.model_kind,
                     static_cast<uint64_t>(c.payload.size()), c.payload_digest()});

  log_.insert(log_.end(), entries.begin(), entries.end());

  if (!message_log_path_.empty()) {
    std::ofstream out(message_log_path_, std::ios::app);
    for (const auto& e : entries) out << e.to_json() << '\n';
  }
  if (!file_drop_dir_.empty()) {
    const fs::path dir =
        fs::path(file_drop_dir_) / config_.community_id / std::to_string(round);
    fs::create_directories(dir);
    for (const auto& m : config_.members) {
      auto it = r.posted.find(m.org_id);
      if (it == r.posted.end()) continue;
      write_envelope_file(it->second, (dir / (m.org_id + ".env")).string());
    }
    write_envelope_file(c, (dir / "consensus.env").string());
  }
}

ModelEnvelope ShareStore::consensus_for(const std::string& org_id, uint64_t round) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] {
    auto it = rounds_.find(round);
    return it != rounds_.end() && it->second.closed;
  });
  const Round& r = rounds_[round];
  if (!config_.include_self) {
    auto it = r.per_org.find(org_id);
    if (it != r.per_org.end()) return it->second;
  }
  return *r.consensus;
}

bool ShareStore::round_closed(uint64_t round) const {
  std::unique_lock lock(mu_);
  auto it = rounds_.find(round);
  return it != rounds_.end() && it->second.closed;
}

std::optional<ModelEnvelope> ShareStore::consensus(uint64_t round) const {
  std::unique_lock lock(mu_);
  auto it = rounds_.find(round);
  if (it == rounds_.end() || !it->second.closed) return std::nullopt;
  return it->second.consensus;
}

size_t ShareStore::posted_count(uint64_t round) const {
  std::unique_lock lock(mu_);
  auto it = rounds_.find(round);
  return it == rounds_.end() ? 0 : it->second.posted.size();
}

std::vector<MessageLogEntry> ShareStore::message_log() const {
  std::unique_lock lock(mu_);
  return log_;
}

std::unique_ptr<Classifier> apply_consensus(const Classifier& local,
                                            const ModelEnvelope& consensus, SchemaPtr schema,
                                            uint64_t rng_seed) {
  if (consensus.model_kind != local.kind()) throw KindMismatch();
  if (consensus.schema_hash != local.schema_hash()) throw SchemaMismatch();
  return import_model(consensus, std::move(schema), rng_seed);
}

FileDropShareClient::FileDropShareClient(CommunityConfig config, std::string root_dir,
                                         std::string org_id, uint64_t expected_schema_hash,
                                         uint64_t poll_ms, uint64_t timeout_ms)
    : config_(std::move(config)),
      root_(std::move(root_dir)),
      org_id_(std::move(org_id)),
      expected_schema_hash_(expected_schema_hash),
      poll_ms_(poll_ms),
      timeout_ms_(timeout_ms) {
  config_.validate();
  if (!config_.find(org_id_)) throw UnknownMember(org_id_);
}

ModelEnvelope FileDropShareClient::exchange(uint64_t round, const ModelEnvelope& env) {
  const fs::path dir = fs::path(root_) / config_.community_id / std::to_string(round);
  fs::create_directories(dir);
  write_envelope_file(env, (dir / (org_id_ + ".env")).string());

  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
  while (true) {
    bool all = true;
    for (const auto& m : config_.members) {
      if (!fs::exists(dir / (m.org_id + ".env"))) {
        all = false;
        break;
      }
    }
    if (all || std::chrono::steady_clock::now() >= deadline) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(poll_ms_));
  }

  std::vector<ModelEnvelope> envs;
  std::vector<double> weights;
  for (const auto& m : config_.members) {
    const fs::path p = dir / (m.org_id + ".env");
    if (!fs::exists(p)) continue;
    ModelEnvelope e = read_envelope_file(p.string());
    if (e.schema_hash != expected_schema_hash_)
      throw SchemaMismatch("peer envelope schema does not match community schema");
    envs.push_back(std::move(e));
    weights.push_back(m.trust_weight);
  }
  ModelEnvelope consensus = merge_envelopes(envs, MergeWeights::normalized(std::move(weights)),
                                            derive_seed(config_.seed, "round", round));
  consensus.round = round;
  return consensus;
}

}  // namespace fedstream
