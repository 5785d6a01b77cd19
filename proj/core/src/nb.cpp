#include "fedstream/nb.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "fedstream/bytes.hpp"
#include "fedstream/errors.hpp"

namespace fedstream {

uint32_t nb_bin(const FeatureDef& def, double x) {
  const uint32_t bins = def.bin_count();
  if (def.kind == FeatureKind::categorical) {
    if (!(x >= 0.0)) return 0;
    uint32_t code = static_cast<uint32_t>(x);
    return code < bins ? code : bins - 1;
  }
  if (x <= def.lo) return 0;
  if (x >= def.hi) return bins - 1;
  const double width = (def.hi - def.lo) / static_cast<double>(bins);
  uint32_t b = static_cast<uint32_t>((x - def.lo) / width);
  return b < bins ? b : bins - 1;
}

HistogramSet::HistogramSet(std::vector<uint32_t> bins_per_feature)
    : bins_(std::move(bins_per_feature)) {
  size_t total = 0;
  offset_.reserve(bins_.size());
  for (uint32_t b : bins_) {
    if (b == 0) throw ConfigError("histogram feature with zero bins");
    offset_.push_back(total);
    total += b;
  }
  counts_[0].assign(total, 0);
  counts_[1].assign(total, 0);
}

HistogramSet HistogramSet::for_schema(const FeatureSchema& schema) {
  std::vector<uint32_t> bins;
  bins.reserve(schema.dimension());
  for (const auto& f : schema.features()) bins.push_back(f.bin_count());
  return HistogramSet(std::move(bins));
}

void HistogramSet::observe(std::span<const uint32_t> bin_indices, ClassLabel y, uint64_t weight) {
  if (bin_indices.size() != bins_.size())
    throw DimensionMismatch(bin_indices.size(), bins_.size());
  auto& counts = counts_[static_cast<size_t>(y)];
  for (size_t i = 0; i < bins_.size(); ++i) counts[offset_[i] + bin_indices[i]] += weight;
  n_[static_cast<size_t>(y)] += weight;
}

LikelihoodEvidence HistogramSet::likelihood_evidence(size_t feature, uint32_t bin,
                                                     double alpha) const {
  const double bins = static_cast<double>(bins_[feature]);
  const double hb = static_cast<double>(count(ClassLabel::benign, feature, bin)) + alpha;
  const double hm = static_cast<double>(count(ClassLabel::malicious, feature, bin)) + alpha;
  const double nb = static_cast<double>(n_[0]) + alpha * bins;
  const double nm = static_cast<double>(n_[1]) + alpha * bins;
  LikelihoodEvidence out;
  out.l_benign = nb > 0.0 ? hb / nb : 0.0;
  out.l_malicious = nm > 0.0 ? hm / nm : 0.0;
  out.evidence = (nb + nm) > 0.0 ? (hb + hm) / (nb + nm) : 0.0;
  return out;
}

ClassScores HistogramSet::posterior(std::span<const uint32_t> bin_indices, double alpha) const {
  if (bin_indices.size() != bins_.size())
    throw DimensionMismatch(bin_indices.size(), bins_.size());
  if (n_[0] == 0 && n_[1] == 0) return {0.5, 0.5};

  // Prior N_k / sum N_k, Laplace-smoothed by alpha pseudo-records per class
  // (bin-count independent, so it stays well defined when features have
  // different bin counts). Reduces to the raw ratio at alpha = 0.
  double log_score[2];
  const double prior_b = static_cast<double>(n_[0]) + alpha;
  const double prior_m = static_cast<double>(n_[1]) + alpha;
  const double prior_sum = prior_b + prior_m;
  log_score[0] = prior_b > 0.0 ? std::log(prior_b / prior_sum)
                               : -std::numeric_limits<double>::infinity();
  log_score[1] = prior_m > 0.0 ? std::log(prior_m / prior_sum)
                               : -std::numeric_limits<double>::infinity();

  for (size_t i = 0; i < bins_.size(); ++i) {
    const auto le = likelihood_evidence(i, bin_indices[i], alpha);
    if (le.evidence <= 0.0) continue;  // only possible at alpha == 0 with an empty bin pair
    const double log_e = std::log(le.evidence);
    log_score[0] += (le.l_benign > 0.0 ? std::log(le.l_benign)
                                       : -std::numeric_limits<double>::infinity()) -
                    log_e;
    log_score[1] += (le.l_malicious > 0.0 ? std::log(le.l_malicious)
                                          : -std::numeric_limits<double>::infinity()) -
                    log_e;
  }

  auto clamp_exp = [](double ls) {
    if (ls == -std::numeric_limits<double>::infinity()) return 0.0;
    return std::exp(std::min(ls, 709.0));
  };
  return {clamp_exp(log_score[0]), clamp_exp(log_score[1])};
}

void HistogramSet::merge_from(const HistogramSet& other) {
  if (!same_shape(other)) throw SchemaMismatch("histogram shapes differ");
  for (int k = 0; k < 2; ++k) {
    for (size_t i = 0; i < counts_[k].size(); ++i) counts_[k][i] += other.counts_[k][i];
    n_[k] += other.n_[k];
  }
}

HistogramSet nb_merge(const std::vector<const HistogramSet*>& sets) {
  if (sets.empty()) throw ConfigError("nb_merge needs at least one histogram set");
  HistogramSet out = *sets[0];
  for (size_t i = 1; i < sets.size(); ++i) out.merge_from(*sets[i]);
  return out;
}

// Payload sections: "BINS" (per-feature bin counts), then "CLS0"/"CLS1"
// (class total + flat counts). Version byte 1 = 32-bit counts on the wire,
// 2 = 64-bit after overflow.
std::vector<uint8_t> HistogramSet::serialize() const {
  uint64_t max_count = 0;
  for (int k = 0; k < 2; ++k) {
    for (uint64_t c : counts_[k]) max_count = std::max(max_count, c);
    max_count = std::max(max_count, n_[k]);
  }
  const bool wide = max_count > std::numeric_limits<uint32_t>::max();

  ByteWriter w;
  w.tag("NBHG");
  w.u8(wide ? 2 : 1);

  ByteWriter bins;
  bins.u32(static_cast<uint32_t>(bins_.size()));
  for (uint32_t b : bins_) bins.u32(b);
  w.tag("BINS");
  w.u32(static_cast<uint32_t>(bins.size()));
  w.raw(bins.bytes().data(), bins.size());

  for (int k = 0; k < 2; ++k) {
    ByteWriter sec;
    sec.u64(n_[k]);
    for (uint64_t c : counts_[k]) {
      if (wide) sec.u64(c);
      else sec.u32(static_cast<uint32_t>(c));
    }
    if (k == 0) w.tag("CLS0");
    else w.tag("CLS1");
    w.u32(static_cast<uint32_t>(sec.size()));
    w.raw(sec.bytes().data(), sec.size());
  }
  return w.take();
}

HistogramSet HistogramSet::deserialize(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  if (r.tag4() != "NBHG") throw PayloadError("not an nb payload");
  const uint8_t version = r.u8();
  if (version != 1 && version != 2) throw PayloadError("unsupported nb payload version");
  const bool wide = version == 2;

  if (r.tag4() != "BINS") throw PayloadError("nb payload: expected BINS section");
  const uint32_t bins_len = r.u32();
  ByteReader bins_r(r.raw(bins_len));
  const uint32_t n_features = bins_r.u32();
  std::vector<uint32_t> bins;
  bins.reserve(n_features);
  for (uint32_t i = 0; i < n_features; ++i) bins.push_back(bins_r.u32());
  bins_r.expect_done();

  HistogramSet h(std::move(bins));
  const size_t flat = h.counts_[0].size();
  for (int k = 0; k < 2; ++k) {
    const std::string tag = r.tag4();
    if (tag != (k == 0 ? "CLS0" : "CLS1"))
      throw PayloadError("nb payload: expected class section, got '" + tag + "'");
    const uint32_t len = r.u32();
    ByteReader sec(r.raw(len));
    h.n_[k] = sec.u64();
    for (size_t i = 0; i < flat; ++i) h.counts_[k][i] = wide ? sec.u64() : sec.u32();
    sec.expect_done();
  }
  r.expect_done();

  // Consistency: every per-feature column must sum to N_k.
  for (int k = 0; k < 2; ++k) {
    for (size_t i = 0; i < h.bins_.size(); ++i) {
      uint64_t sum = 0;
      for (uint32_t b = 0; b < h.bins_[i]; ++b) sum += h.counts_[k][h.offset_[i] + b];
      if (sum != h.n_[k])
        throw PayloadError("nb payload: feature column sum disagrees with class total");
    }
  }
  return h;
}

}  // namespace fedstream
