#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedstream/schema.hpp"
#include "fedstream/types.hpp"

namespace fedstream {

// Bin index for a feature value: equal-width bins over [lo, hi] with
// clamping for numerics (the upper edge maps into the last bin), identity
// for categorical codes.
uint32_t nb_bin(const FeatureDef& def, double x);

struct LikelihoodEvidence {
  double l_benign = 0.0;
  double l_malicious = 0.0;
  double evidence = 0.0;
};

// Per-feature per-class count histograms. Raw integer counts; additive
// smoothing is applied at query time so merges stay exact integer sums.
// N_k is stored once per class — every training record touches exactly one
// bin of every feature, so all per-feature column sums equal N_k.
class HistogramSet {
 public:
  HistogramSet() = default;
  explicit HistogramSet(std::vector<uint32_t> bins_per_feature);
  static HistogramSet for_schema(const FeatureSchema& schema);

  size_t dimension() const { return bins_.size(); }
  uint32_t bin_count(size_t feature) const { return bins_[feature]; }
  const std::vector<uint32_t>& bins_per_feature() const { return bins_; }

  uint64_t class_total(ClassLabel k) const { return n_[static_cast<size_t>(k)]; }
  uint64_t count(ClassLabel k, size_t feature, uint32_t bin) const {
    return counts_[static_cast<size_t>(k)][offset_[feature] + bin];
  }

  // counts[y][i][bin_indices[i]] += 1 for every feature i; N_y += 1.
  void observe(std::span<const uint32_t> bin_indices, ClassLabel y, uint64_t weight = 1);

  LikelihoodEvidence likelihood_evidence(size_t feature, uint32_t bin, double alpha) const;

  // Posterior per the histogram formula: score_k = prior_k * prod_i L/E,
  // evaluated in log space. Both classes empty => (0.5, 0.5).
  ClassScores posterior(std::span<const uint32_t> bin_indices, double alpha) const;

  // Elementwise sum; shapes must agree.
  void merge_from(const HistogramSet& other);

  bool same_shape(const HistogramSet& other) const { return bins_ == other.bins_; }
  bool operator==(const HistogramSet& other) const = default;

  std::vector<uint8_t> serialize() const;
  static HistogramSet deserialize(std::span<const uint8_t> payload);

 private:
  std::vector<uint32_t> bins_;
  std::vector<size_t> offset_;          // feature -> start in the flat count array
  std::vector<uint64_t> counts_[2];     // flat [feature][bin], one per class
  uint64_t n_[2] = {0, 0};
};

HistogramSet nb_merge(const std::vector<const HistogramSet*>& sets);

constexpr double kNbDefaultAlpha = 1.0;

}  // namespace fedstream
