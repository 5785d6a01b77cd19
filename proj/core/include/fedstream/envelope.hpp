#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedstream/errors.hpp"
#include "fedstream/types.hpp"

namespace fedstream {

// The only artifact that crosses organization boundaries: serialized
// model parameters plus provenance, never log data. Payload grammar is
// length-prefixed little-endian sections behind a 4-byte kind tag and a
// format version byte; see the README for the full layout.
struct ModelEnvelope {
  std::string org_id;
  ModelKind model_kind = ModelKind::nb;
  uint64_t schema_hash = 0;
  uint64_t round = 0;
  uint64_t records_seen = 0;
  std::vector<uint8_t> payload;

  uint64_t payload_digest() const;
};

// Envelope file format (magic "FENV", version 1).
std::vector<uint8_t> envelope_to_bytes(const ModelEnvelope& env);
ModelEnvelope envelope_from_bytes(std::span<const uint8_t> bytes);
void write_envelope_file(const ModelEnvelope& env, const std::string& path);
ModelEnvelope read_envelope_file(const std::string& path);

// Averaging weights: nonnegative, normalized to sum 1 at construction.
class MergeWeights {
 public:
  static MergeWeights normalized(std::vector<double> raw);
  static MergeWeights uniform(size_t n);

  size_t size() const { return w_.size(); }
  double at(size_t i) const { return w_[i]; }
  const std::vector<double>& values() const { return w_; }

 private:
  explicit MergeWeights(std::vector<double> w) : w_(std::move(w)) {}
  std::vector<double> w_;
};

}  // namespace fedstream
