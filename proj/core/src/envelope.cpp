#include "fedstream/envelope.hpp"

#include <cmath>
#include <fstream>

#include "fedstream/bytes.hpp"

namespace fedstream {

namespace {
constexpr char kMagic[5] = "FENV";
constexpr uint8_t kEnvelopeVersion = 1;
}  // namespace

uint64_t ModelEnvelope::payload_digest() const {
  return fnv1a64(payload.data(), payload.size());
}

std::vector<uint8_t> envelope_to_bytes(const ModelEnvelope& env) {
  ByteWriter w;
  w.tag(kMagic);
  w.u8(kEnvelopeVersion);
  w.u8(static_cast<uint8_t>(env.model_kind));
  w.u64(env.schema_hash);
  w.u64(env.round);
  w.u64(env.records_seen);
  w.str(env.org_id);
  w.u64(env.payload.size());
  w.raw(env.payload.data(), env.payload.size());
  return w.take();
}

ModelEnvelope envelope_from_bytes(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.tag4() != kMagic) throw PayloadError("not an envelope: bad magic");
  if (r.u8() != kEnvelopeVersion) throw PayloadError("unsupported envelope version");
  ModelEnvelope env;
  const uint8_t kind = r.u8();
  if (kind > 2) throw PayloadError("unknown model kind byte");
  env.model_kind = static_cast<ModelKind>(kind);
  env.schema_hash = r.u64();
  env.round = r.u64();
  env.records_seen = r.u64();
  env.org_id = r.str();
  const uint64_t n = r.u64();
  auto payload = r.raw(n);
  env.payload.assign(payload.begin(), payload.end());
  r.expect_done();
  return env;
}

void write_envelope_file(const ModelEnvelope& env, const std::string& path) {
  auto bytes = envelope_to_bytes(env);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write envelope file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write on envelope file: " + path);
}

ModelEnvelope read_envelope_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open envelope file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return envelope_from_bytes(bytes);
}

MergeWeights MergeWeights::normalized(std::vector<double> raw) {
  if (raw.empty()) throw ConfigError("merge weights are empty");
  double sum = 0.0;
  for (double v : raw) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("merge weights must be finite and >= 0");
    sum += v;
  }
  if (sum <= 0.0) throw ConfigError("merge weights sum to zero");
  for (double& v : raw) v /= sum;
  return MergeWeights(std::move(raw));
}

MergeWeights MergeWeights::uniform(size_t n) {
  if (n == 0) throw ConfigError("merge weights are empty");
  return MergeWeights(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

}  // namespace fedstream
