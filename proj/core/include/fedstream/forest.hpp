#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fedstream/envelope.hpp"
#include "fedstream/rng.hpp"
#include "fedstream/schema.hpp"
#include "fedstream/types.hpp"

namespace fedstream {

struct ForestHyper {
  uint32_t ensemble_size = 20;     // m
  uint32_t grace_period = 50;
  double split_confidence = 1e-6;  // delta
  double tie_threshold = 0.05;     // tau
};

// Where a tree came from; merged ensembles keep the tags so operators can
// audit which members populated them.
struct TreeOrigin {
  std::string org_id;
  uint64_t round = 0;
};

// Hoeffding bound eps = sqrt(R^2 ln(1/delta) / 2n) with R = ln 2 for two
// classes; strictly decreasing in n.
double hoeffding_bound(double delta, uint64_t n);

// Single-pass decision tree. Leaves accumulate per-class per-feature bin
// counts (schema bin geometry) as split candidates; a leaf attempts a
// split every grace_period weighted examples and splits when the best
// feature's info-gain lead over the runner-up clears the Hoeffding bound,
// or on a tie when the bound itself has shrunk below tau.
class HoeffdingTree {
 public:
  HoeffdingTree();
  HoeffdingTree(const HoeffdingTree& other) { *this = other; }
  HoeffdingTree& operator=(const HoeffdingTree& other);
  HoeffdingTree(HoeffdingTree&&) noexcept = default;
  HoeffdingTree& operator=(HoeffdingTree&&) noexcept = default;

  void train(std::span<const double> x, ClassLabel y, uint64_t weight,
             const FeatureSchema& schema, const ForestHyper& hyper);
  ClassScores predict(std::span<const double> x) const;

  size_t node_count() const { return nodes_.size(); }
  size_t leaf_count() const;
  // Split feature at the root, or -1 while the root is still a leaf.
  int32_t root_split_feature() const { return nodes_[0].feature; }
  // Largest feature index referenced by any split; -1 for a stump.
  int32_t max_feature() const;

  std::vector<uint8_t> serialize() const;  // preorder node list
  static HoeffdingTree deserialize(std::span<const uint8_t> bytes);

  bool operator==(const HoeffdingTree& other) const;

 private:
  struct LeafStats {
    std::vector<uint32_t> bins_per_feature;
    std::vector<size_t> offsets;
    std::vector<uint64_t> counts[2];  // flat [feature][bin]
    // class totals of the observations in counts; can lag class_counts on
    // imported leaves, whose wire counts carry no bin attribution
    uint64_t totals[2] = {0, 0};
    uint64_t weight_at_last_attempt = 0;
  };

  struct Node {
    int32_t feature = -1;  // -1 => leaf
    double threshold = 0.0;
    int32_t left = -1;
    int32_t right = -1;
    uint64_t class_counts[2] = {0, 0};
    std::unique_ptr<LeafStats> stats;
  };

  size_t route(std::span<const double> x) const;
  void try_split(size_t leaf, const FeatureSchema& schema, const ForestHyper& hyper);
  void write_preorder(size_t node, class ByteWriter& w) const;
  size_t read_preorder(class ByteReader& r);

  std::vector<Node> nodes_;
};

// m online trees with Poisson(1) example weighting (online bagging). The
// ensemble generator owns the Poisson stream: one draw per (record, tree),
// in tree order.
class Ensemble {
 public:
  Ensemble(uint32_t m, const ForestHyper& hyper, uint64_t seed);

  uint32_t size() const { return static_cast<uint32_t>(trees_.size()); }
  const ForestHyper& hyper() const { return hyper_; }
  const HoeffdingTree& tree(size_t i) const { return trees_[i]; }
  const TreeOrigin& origin(size_t i) const { return origins_[i]; }

  void train_one(std::span<const double> x, ClassLabel y, const FeatureSchema& schema);
  ClassScores predict(std::span<const double> x) const;

  void reseed(uint64_t seed) { rng_ = Rng(seed); }

  // Untagged trees get stamped (org_id, round) in the serialized payload;
  // the in-memory ensemble is not modified by export.
  std::vector<uint8_t> serialize(const std::string& org_id, uint64_t round) const;
  static Ensemble deserialize(std::span<const uint8_t> payload, uint64_t seed);

 private:
  Ensemble() : rng_(0) {}

  friend Ensemble forest_merge(const std::vector<const Ensemble*>&, const MergeWeights&,
                               uint64_t);

  std::vector<HoeffdingTree> trees_;
  std::vector<TreeOrigin> origins_;
  ForestHyper hyper_;
  Rng rng_;
};

// Largest-remainder apportionment of a*m; sums to m, each entry within 1
// of a_i*m, remainder ties broken toward lower index.
std::vector<uint32_t> largest_remainder_apportionment(const MergeWeights& a, uint32_t m);

// Draw n_i trees uniformly without replacement from ensemble i so the
// merged ensemble keeps exactly m members; origin tags ride along.
Ensemble forest_merge(const std::vector<const Ensemble*>& ensembles, const MergeWeights& a,
                      uint64_t seed);

}  // namespace fedstream
