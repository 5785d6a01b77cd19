#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedstream/classifier.hpp"
#include "fedstream/envelope.hpp"

namespace fedstream {

struct SharingSchedule {
  uint64_t every_n_records = 10000;
};

struct CommunityMember {
  std::string org_id;
  double trust_weight = 1.0;
};

struct CommunityConfig {
  std::string community_id;
  std::vector<CommunityMember> members;
  SharingSchedule schedule;
  ModelKind model_kind = ModelKind::nb;
  bool include_self = true;
  uint64_t seed = 0;  // base for per-round merge seeds

  const CommunityMember* find(const std::string& org_id) const;
  void validate() const;
};

struct MessageLogEntry {
  uint64_t round = 0;
  std::string from;
  ModelKind kind = ModelKind::nb;
  uint64_t bytes = 0;
  uint64_t digest = 0;

  std::string to_json() const;
};

// Collects member envelopes per round and produces the community
// consensus. A round closes once every not-yet-done member has posted it
// (logical record-count clock; a member declares done when its stream is
// exhausted). Posts are validated against the community's expected schema
// hash and model kind. Thread-safe; consensus_for blocks until the round
// closes.
class ShareStore {
 public:
  ShareStore(CommunityConfig config, uint64_t expected_schema_hash,
             std::string file_drop_dir = "", std::string message_log_path = "");

  const CommunityConfig& config() const { return config_; }

  void post_envelope(uint64_t round, const ModelEnvelope& env);
  void mark_done(const std::string& org_id);

  // Community consensus, or the exclude-self variant when the community
  // runs with include_self = false. Blocks until the round closes.
  ModelEnvelope consensus_for(const std::string& org_id, uint64_t round);

  bool round_closed(uint64_t round) const;
  std::optional<ModelEnvelope> consensus(uint64_t round) const;
  size_t posted_count(uint64_t round) const;

  // Force-close with whatever has been posted (the record-count timeout
  // path). Weights are the posting members' trust weights, renormalized.
  ModelEnvelope close_round(uint64_t round);
  ModelEnvelope close_round(uint64_t round, uint64_t seed);

  std::vector<MessageLogEntry> message_log() const;

 private:
  struct Round {
    std::map<std::string, ModelEnvelope> posted;  // org -> envelope
    bool closed = false;
    std::optional<ModelEnvelope> consensus;
    std::map<std::string, ModelEnvelope> per_org;  // exclude-self variants
  };

  void maybe_close_locked(uint64_t round);
  ModelEnvelope close_locked(uint64_t round, uint64_t seed);
  ModelEnvelope merge_posted_locked(const Round& r, const std::string& exclude,
                                    uint64_t seed) const;
  void append_log_locked(uint64_t round, const Round& r);

  CommunityConfig config_;
  uint64_t expected_schema_hash_;
  std::string file_drop_dir_;
  std::string message_log_path_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<uint64_t, Round> rounds_;
  std::set<std::string> done_;
  std::vector<MessageLogEntry> log_;
};

// Replace the local model with the community consensus; kind and schema
// must match the local model.
std::unique_ptr<Classifier> apply_consensus(const Classifier& local,
                                            const ModelEnvelope& consensus, SchemaPtr schema,
                                            uint64_t rng_seed = 0);

// Transport seen by one organization's pipeline: post this round's
// envelope, block until the community consensus comes back.
class ShareClient {
 public:
  virtual ~ShareClient() = default;
  virtual ModelEnvelope exchange(uint64_t round, const ModelEnvelope& env) = 0;
  virtual void done() {}
};

class InProcessShareClient final : public ShareClient {
 public:
  InProcessShareClient(ShareStore& store, std::string org_id)
      : store_(store), org_id_(std::move(org_id)) {}

  ModelEnvelope exchange(uint64_t round, const ModelEnvelope& env) override {
    store_.post_envelope(round, env);
    return store_.consensus_for(org_id_, round);
  }
  void done() override { store_.mark_done(org_id_); }

 private:
  ShareStore& store_;
  std::string org_id_;
};

// Cross-process transport: one envelope file per (round, org) under
// <dir>/<community>/<round>/<org>.env. Each member polls for its peers and
// merges locally; the deterministic merge makes every member compute the
// same consensus. Peers absent after the timeout contribute nothing.
class FileDropShareClient final : public ShareClient {
 public:
  FileDropShareClient(CommunityConfig config, std::string root_dir, std::string org_id,
                      uint64_t expected_schema_hash, uint64_t poll_ms = 50,
                      uint64_t timeout_ms = 30000);

  ModelEnvelope exchange(uint64_t round, const ModelEnvelope& env) override;

 private:
  CommunityConfig config_;
  std::string root_;
  std::string org_id_;
  uint64_t expected_schema_hash_;
  uint64_t poll_ms_;
  uint64_t timeout_ms_;
};

}  // namespace fedstream
