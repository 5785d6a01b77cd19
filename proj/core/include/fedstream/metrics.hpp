#pragma once

#include <cstdint>
#include <deque>

#include "fedstream/types.hpp"

namespace fedstream {

struct ConfusionCounts {
  uint64_t tp = 0;  // predicted malicious, truth malicious
  uint64_t fp = 0;
  uint64_t tn = 0;
  uint64_t fn = 0;

  uint64_t total() const { return tp + fp + tn + fn; }
  double accuracy() const {
    const uint64_t n = total();
    return n ? static_cast<double>(tp + tn) / static_cast<double>(n) : 0.0;
  }
  double tpr() const {
    const uint64_t p = tp + fn;
    return p ? static_cast<double>(tp) / static_cast<double>(p) : 0.0;
  }
  double fpr() const {
    const uint64_t n = fp + tn;
    return n ? static_cast<double>(fp) / static_cast<double>(n) : 0.0;
  }
};

// Test-then-train bookkeeping: a sliding window over the most recent
// labeled predictions (FIFO eviction) plus cumulative counts.
class PrequentialMetrics {
 public:
  explicit PrequentialMetrics(size_t window_size = 1000);

  void update(ClassLabel predicted, ClassLabel truth);

  const ConfusionCounts& window() const { return window_counts_; }
  const ConfusionCounts& cumulative() const { return cumulative_; }
  size_t window_size() const { return window_size_; }
  size_t window_fill() const { return outcomes_.size(); }

 private:
  size_t window_size_;
  std::deque<uint8_t> outcomes_;
  ConfusionCounts window_counts_;
  ConfusionCounts cumulative_;
};

}  // namespace fedstream
