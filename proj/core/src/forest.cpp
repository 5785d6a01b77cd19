#include "fedstream/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedstream/bytes.hpp"
#include "fedstream/errors.hpp"
#include "fedstream/nb.hpp"

namespace fedstream {

double hoeffding_bound(double delta, uint64_t n) {
  const double range = std::log(2.0);
  return std::sqrt(range * range * std::log(1.0 / delta) / (2.0 * static_cast<double>(n)));
}

namespace {

// Two-class entropy in nats.
double entropy2(double a, double b) {
  const double n = a + b;
  if (n <= 0.0) return 0.0;
  double h = 0.0;
  if (a > 0.0) h -= (a / n) * std::log(a / n);
  if (b > 0.0) h -= (b / n) * std::log(b / n);
  return h;
}

double split_gain(double parent_h, double lb, double lm, double rb, double rm) {
  const double n = lb + lm + rb + rm;
  if (n <= 0.0) return 0.0;
  const double nl = lb + lm;
  const double nr = rb + rm;
  return parent_h - (nl / n) * entropy2(lb, lm) - (nr / n) * entropy2(rb, rm);
}

// Candidate threshold for cutting feature f between bins b-1 and b.
// Routing is x < t -> left, so bin b itself lands on the right side,
// matching the prefix-sum gain computation.
double cut_threshold(const FeatureDef& def, uint32_t b) {
  if (def.kind == FeatureKind::numeric) {
    const double width = (def.hi - def.lo) / static_cast<double>(def.bin_count());
    return def.lo + width * static_cast<double>(b);
  }
  return static_cast<double>(b) - 0.5;
}

}  // namespace

HoeffdingTree::HoeffdingTree() { nodes_.emplace_back(); }

HoeffdingTree& HoeffdingTree::operator=(const HoeffdingTree& other) {
  if (this == &other) return *this;
  nodes_.clear();
  nodes_.reserve(other.nodes_.size());
  for (const Node& n : other.nodes_) {
    Node copy;
    copy.feature = n.feature;
    copy.threshold = n.threshold;
    copy.left = n.left;
    copy.right = n.right;
    copy.class_counts[0] = n.class_counts[0];
    copy.class_counts[1] = n.class_counts[1];
    if (n.stats) copy.stats = std::make_unique<LeafStats>(*n.stats);
    nodes_.push_back(std::move(copy));
  }
  return *this;
}

size_t HoeffdingTree::leaf_count() const {
  size_t n = 0;
  for (const auto& node : nodes_)
    if (node.feature < 0) ++n;
  return n;
}

int32_t HoeffdingTree::max_feature() const {
  int32_t m = -1;
  for (const auto& node : nodes_) m = std::max(m, node.feature);
  return m;
}

size_t HoeffdingTree::route(std::span<const double> x) const {
  size_t i = 0;
  while (nodes_[i].feature >= 0) {
    const Node& n = nodes_[i];
    i = x[static_cast<size_t>(n.feature)] < n.threshold ? static_cast<size_t>(n.left)
                                                        : static_cast<size_t>(n.right);
  }
  return i;
}

ClassScores HoeffdingTree::predict(std::span<const double> x) const {
  const Node& leaf = nodes_[route(x)];
  const double nb = static_cast<double>(leaf.class_counts[0]);
  const double nm = static_cast<double>(leaf.class_counts[1]);
  // Laplace estimate; a fresh leaf answers (0.5, 0.5).
  return {(nb + 1.0) / (nb + nm + 2.0), (nm + 1.0) / (nb + nm + 2.0)};
}

void HoeffdingTree::train(std::span<const double> x, ClassLabel y, uint64_t weight,
                          const FeatureSchema& schema, const ForestHyper& hyper) {
  if (weight == 0) return;
  const size_t li = route(x);
  Node& leaf = nodes_[li];
  leaf.class_counts[static_cast<size_t>(y)] += weight;

  if (!leaf.stats) {
    auto stats = std::make_unique<LeafStats>();
    stats->bins_per_feature.reserve(schema.dimension());
    size_t total = 0;
    for (const auto& f : schema.features()) {
      stats->offsets.push_back(total);
      stats->bins_per_feature.push_back(f.bin_count());
      total += f.bin_count();
    }
    stats->counts[0].assign(total, 0);
    stats->counts[1].assign(total, 0);
    // imported leaves restart their split clock from the imported counts
    stats->weight_at_last_attempt = leaf.class_counts[0] + leaf.class_counts[1] - weight;
    leaf.stats = std::move(stats);
  }

  LeafStats& st = *leaf.stats;
  auto& cls = st.counts[static_cast<size_t>(y)];
  for (size_t i = 0; i < schema.dimension(); ++i) {
    const uint32_t b = nb_bin(schema.at(i), x[i]);
    cls[st.offsets[i] + b] += weight;
  }
  st.totals[static_cast<size_t>(y)] += weight;

  const uint64_t seen = leaf.class_counts[0] + leaf.class_counts[1];
  if (seen - st.weight_at_last_attempt >= hyper.grace_period) {
    st.weight_at_last_attempt = seen;
    try_split(li, schema, hyper);
  }
}

void HoeffdingTree::try_split(size_t li, const FeatureSchema& schema, const ForestHyper& hyper) {
  Node& leaf = nodes_[li];
  const LeafStats& st = *leaf.stats;
  // decide from the bin statistics only: imported class counts carry no
  // bin attribution and must not skew the candidate gains
  const uint64_t nb_total = st.totals[0];
  const uint64_t nm_total = st.totals[1];
  const uint64_t n = nb_total + nm_total;
  if (nb_total == 0 || nm_total == 0) return;  // pure leaf: zero gain everywhere

  const double parent_h =
      entropy2(static_cast<double>(nb_total), static_cast<double>(nm_total));

  double best_gain = 0.0, second_gain = 0.0;
  int32_t best_feature = -1;
  uint32_t best_cut = 0;

  for (size_t i = 0; i < st.bins_per_feature.size(); ++i) {
    const uint32_t bins = st.bins_per_feature[i];
    if (bins < 2) continue;
    const size_t off = st.offsets[i];
    double feature_best = 0.0;
    uint32_t feature_cut = 0;
    double lb = 0.0, lm = 0.0;
    const double tb = static_cast<double>(nb_total);
    const double tm = static_cast<double>(nm_total);
    for (uint32_t b = 1; b < bins; ++b) {
      lb += static_cast<double>(st.counts[0][off + b - 1]);
      lm += static_cast<double>(st.counts[1][off + b - 1]);
      const double g = split_gain(parent_h, lb, lm, tb - lb, tm - lm);
      if (g > feature_best) {
        feature_best = g;
        feature_cut = b;
      }
    }
    if (feature_best > best_gain) {
      second_gain = best_gain;
      best_gain = feature_best;
      best_feature = static_cast<int32_t>(i);
      best_cut = feature_cut;
    } else if (feature_best > second_gain) {
      second_gain = feature_best;
    }
  }

  if (best_feature < 0 || best_gain <= 0.0) return;
  const double eps = hoeffding_bound(hyper.split_confidence, n);
  if (best_gain - second_gain <= eps && eps >= hyper.tie_threshold) return;

  const double threshold = cut_threshold(schema.at(static_cast<size_t>(best_feature)), best_cut);
  const int32_t left = static_cast<int32_t>(nodes_.size());
  nodes_.emplace_back();
  const int32_t right = static_cast<int32_t>(nodes_.size());
  nodes_.emplace_back();
  // nodes_ may have reallocated; re-reference the leaf
  Node& parent = nodes_[li];
  parent.feature = best_feature;
  parent.threshold = threshold;
  parent.left = left;
  parent.right = right;
  parent.stats.reset();
  parent.class_counts[0] = 0;
  parent.class_counts[1] = 0;
}

void HoeffdingTree::write_preorder(size_t ni, ByteWriter& w) const {
  const Node& n = nodes_[ni];
  if (n.feature >= 0) {
    w.u8(1);
    w.u32(static_cast<uint32_t>(n.feature));
    w.f64(n.threshold);
    write_preorder(static_cast<size_t>(n.left), w);
    write_preorder(static_cast<size_t>(n.right), w);
  } else {
    w.u8(0);
    w.u64(n.class_counts[0]);
    w.u64(n.class_counts[1]);
  }
}

std::vector<uint8_t> HoeffdingTree::serialize() const {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(nodes_.size()));
  write_preorder(0, w);
  return w.take();
}

size_t HoeffdingTree::read_preorder(ByteReader& r) {
  const uint8_t kind = r.u8();
  const size_t idx = nodes_.size();
  nodes_.emplace_back();
  if (kind == 1) {
    nodes_[idx].feature = static_cast<int32_t>(r.u32());
    nodes_[idx].threshold = r.f64();
    const size_t left = read_preorder(r);
    const size_t right = read_preorder(r);
    nodes_[idx].left = static_cast<int32_t>(left);
    nodes_[idx].right = static_cast<int32_t>(right);
  } else if (kind == 0) {
    nodes_[idx].class_counts[0] = r.u64();
    nodes_[idx].class_counts[1] = r.u64();
  } else {
    throw PayloadError("tree node kind byte must be 0 or 1");
  }
  return idx;
}

HoeffdingTree HoeffdingTree::deserialize(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  const uint32_t count = r.u32();
  HoeffdingTree t;
  t.nodes_.clear();
  t.read_preorder(r);
  r.expect_done();
  if (t.nodes_.size() != count) throw PayloadError("tree node count disagrees with preorder list");
  return t;
}

bool HoeffdingTree::operator==(const HoeffdingTree& other) const {
  return serialize() == other.serialize();
}

Ensemble::Ensemble(uint32_t m, const ForestHyper& hyper, uint64_t seed)
    : hyper_(hyper), rng_(seed) {
  if (m < 1) throw ConfigError("ensemble needs at least one tree");
  hyper_.ensemble_size = m;
  trees_.resize(m);
  origins_.resize(m);
}

void Ensemble::train_one(std::span<const double> x, ClassLabel y, const FeatureSchema& schema) {
  for (auto& tree : trees_) {
    const uint32_t w = rng_.poisson(1.0);
    if (w > 0) tree.train(x, y, w, schema, hyper_);
  }
}

ClassScores Ensemble::predict(std::span<const double> x) const {
  double b = 0.0, m = 0.0;
  for (const auto& tree : trees_) {
    const ClassScores s = tree.predict(x);
    b += s.benign;
    m += s.malicious;
  }
  const double inv = 1.0 / static_cast<double>(trees_.size());
  return {b * inv, m * inv};
}

// Payload: "FPRM" (m + hyper), then one "TREE" section per tree carrying
// its origin tag and preorder node list.
std::vector<uint8_t> Ensemble::serialize(const std::string& org_id, uint64_t round) const {
  ByteWriter w;
  w.tag("FRST");
  w.u8(1);

  ByteWriter prm;
  prm.u32(static_cast<uint32_t>(trees_.size()));
  prm.u32(hyper_.grace_period);
  prm.f64(hyper_.split_confidence);
  prm.f64(hyper_.tie_threshold);
  w.tag("FPRM");
  w.u32(static_cast<uint32_t>(prm.size()));
  w.raw(prm.bytes().data(), prm.size());

  for (size_t i = 0; i < trees_.size(); ++i) {
    ByteWriter sec;
    const TreeOrigin& o = origins_[i];
    sec.str(o.org_id.empty() ? org_id : o.org_id);
    sec.u64(o.org_id.empty() ? round : o.round);
    auto tree = trees_[i].serialize();
    sec.raw(tree.data(), tree.size());
    w.tag("TREE");
    w.u32(static_cast<uint32_t>(sec.size()));
    w.raw(sec.bytes().data(), sec.size());
  }
  return w.take();
}

Ensemble Ensemble::deserialize(std::span<const uint8_t> payload, uint64_t seed) {
  ByteReader r(payload);
  if (r.tag4() != "FRST") throw PayloadError("not a forest payload");
  if (r.u8() != 1) throw PayloadError("unsupported forest payload version");

  if (r.tag4() != "FPRM") throw PayloadError("forest payload: expected FPRM section");
  ByteReader prm(r.raw(r.u32()));
  Ensemble e;
  const uint32_t m = prm.u32();
  if (m < 1) throw PayloadError("forest payload: zero ensemble size");
  e.hyper_.ensemble_size = m;
  e.hyper_.grace_period = prm.u32();
  e.hyper_.split_confidence = prm.f64();
  e.hyper_.tie_threshold = prm.f64();
  prm.expect_done();

  e.trees_.reserve(m);
  e.origins_.reserve(m);
  for (uint32_t i = 0; i < m; ++i) {
    if (r.tag4() != "TREE") throw PayloadError("forest payload: expected TREE section");
    ByteReader sec(r.raw(r.u32()));
    TreeOrigin o;
    o.org_id = sec.str();
    o.round = sec.u64();
    auto rest = sec.raw(sec.remaining());
    e.trees_.push_back(HoeffdingTree::deserialize(rest));
    e.origins_.push_back(std::move(o));
  }
  r.expect_done();
  e.rng_ = Rng(seed);
  return e;
}

std::vector<uint32_t> largest_remainder_apportionment(const MergeWeights& a, uint32_t m) {
  const size_t k = a.size();
  std::vector<uint32_t> alloc(k, 0);
  std::vector<double> frac(k, 0.0);
  uint32_t assigned = 0;
  for (size_t i = 0; i < k; ++i) {
    const double q = a.at(i) * static_cast<double>(m);
    alloc[i] = static_cast<uint32_t>(q);
    frac[i] = q - static_cast<double>(alloc[i]);
    assigned += alloc[i];
  }
  std::vector<size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t x, size_t y) { return frac[x] > frac[y]; });
  for (uint32_t r = assigned; r < m; ++r) alloc[order[r - assigned]] += 1;
  return alloc;
}

Ensemble forest_merge(const std::vector<const Ensemble*>& ensembles, const MergeWeights& a,
                      uint64_t seed) {
  if (ensembles.empty()) throw ConfigError("forest_merge needs at least one ensemble");
  if (a.size() != ensembles.size()) throw WeightArityMismatch(a.size(), ensembles.size());
  const uint32_t m = ensembles[0]->size();
  for (const auto* e : ensembles)
    if (e->size() != m) throw SchemaMismatch("ensemble sizes differ");

  const auto alloc = largest_remainder_apportionment(a, m);
  Rng rng(seed);

  Ensemble out(m, ensembles[0]->hyper(), seed);
  size_t next = 0;
  for (size_t i = 0; i < ensembles.size(); ++i) {
    const Ensemble& src = *ensembles[i];
    std::vector<size_t> idx(src.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (uint32_t j = 0; j < alloc[i]; ++j) {
      const size_t pick = j + rng.index(idx.size() - j);
      std::swap(idx[j], idx[pick]);
      out.trees_[next] = src.tree(idx[j]);
      out.origins_[next] = src.origin(idx[j]);
      ++next;
    }
  }
  return out;
}

}  // namespace fedstream
