#include "fedstream/metrics.hpp"

#include "fedstream/errors.hpp"

namespace fedstream {

namespace {
enum Outcome : uint8_t { kTp = 0, kFp = 1, kTn = 2, kFn = 3 };

void bump(ConfusionCounts& c, uint8_t o, uint64_t d) {
  switch (o) {
    case kTp: c.tp += d; break;
    case kFp: c.fp += d; break;
    case kTn: c.tn += d; break;
    case kFn: c.fn += d; break;
  }
}
}  // namespace

PrequentialMetrics::PrequentialMetrics(size_t window_size) : window_size_(window_size) {
  if (window_size_ < 1) throw ConfigError("metrics window must be >= 1");
}

void PrequentialMetrics::update(ClassLabel predicted, ClassLabel truth) {
  uint8_t o;
  if (truth == ClassLabel::malicious)
    o = predicted == ClassLabel::malicious ? kTp : kFn;
  else
    o = predicted == ClassLabel::malicious ? kFp : kTn;

  outcomes_.push_back(o);
  bump(window_counts_, o, 1);
  bump(cumulative_, o, 1);
  if (outcomes_.size() > window_size_) {
    bump(window_counts_, outcomes_.front(), static_cast<uint64_t>(-1));
    outcomes_.pop_front();
  }
}

}  // namespace fedstream
