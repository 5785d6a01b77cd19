#include <doctest.h>

#include <set>

#include "fedstream/bytes.hpp"
#include "fedstream/classifier.hpp"
#include "fedstream/forest.hpp"
#include "test_util.hpp"

using namespace fedstream;
using fedstream::test::small_schema;

namespace {

uint64_t tree_hash(const HoeffdingTree& t) {
  auto bytes = t.serialize();
  return fnv1a64(bytes.data(), bytes.size());
}

// Perfectly separable single-feature concept: class is determined by
// feature `split_feature` alone, other features are uniform noise.
void feed_separable(Ensemble& e, const FeatureSchema& schema, size_t split_feature, size_t n,
                    Rng& rng) {
  std::vector<double> x(schema.dimension());
  for (size_t r = 0; r < n; ++r) {
    const bool mal = rng.bernoulli(0.5);
    for (size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(0.0, 1.0);
    x[split_feature] = mal ? rng.uniform(0.7, 1.0) : rng.uniform(0.0, 0.3);
    e.train_one(x, mal ? ClassLabel::malicious : ClassLabel::benign, schema);
  }
}

Ensemble trained_ensemble(uint32_t m, const FeatureSchema& schema, uint64_t seed, size_t n) {
  ForestHyper hyper;
  hyper.ensemble_size = m;
  Ensemble e(m, hyper, seed);
  Rng rng(derive_seed(seed, "data"));
  feed_separable(e, schema, rng.index(schema.dimension()), n, rng);
  return e;
}

}  // namespace

TEST_SUITE("forest") {

TEST_CASE("hoeffding bound: formula value and strict monotonicity") {
  // eps = sqrt(ln(2)^2 * ln(1/delta) / (2n))
  const double eps50 = hoeffding_bound(1e-6, 50);
  CHECK(eps50 == doctest::Approx(std::sqrt(std::log(2.0) * std::log(2.0) *
                                           std::log(1e6) / 100.0))
                     .epsilon(1e-12));
  double prev = hoeffding_bound(1e-6, 1);
  for (uint64_t n = 2; n < 2000; n += 17) {
    const double cur = hoeffding_bound(1e-6, n);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("init: m trees, deterministic, m = 0 rejected") {
  ForestHyper hyper;
  Ensemble e(20, hyper, 7);
  CHECK(e.size() == 20);
  for (size_t i = 0; i < e.size(); ++i) CHECK(e.tree(i).node_count() == 1);

  Ensemble a(5, hyper, 9), b(5, hyper, 9);
  auto schema = small_schema(4);
  Rng ra(1), rb(1);
  feed_separable(a, *schema, 2, 300, ra);
  feed_separable(b, *schema, 2, 300, rb);
  CHECK(a.serialize("x", 0) == b.serialize("x", 0));

  CHECK_THROWS_AS(Ensemble(0, hyper, 1), ConfigError);
}

TEST_CASE("a zero Poisson draw leaves the tree unchanged") {
  auto schema = small_schema(3);
  ForestHyper hyper;
  hyper.ensemble_size = 2;

  // find a seed whose first two Poisson(1) draws are both zero, by
  // simulating the ensemble's draw stream
  uint64_t seed = 0;
  for (uint64_t s = 0; s < 10000; ++s) {
    Rng probe(s);
    if (probe.poisson(1.0) == 0 && probe.poisson(1.0) == 0) {
      seed = s;
      break;
    }
  }
  Rng probe(seed);
  REQUIRE(probe.poisson(1.0) == 0);
  REQUIRE(probe.poisson(1.0) == 0);

  Ensemble e(2, hyper, seed);
  const auto before = e.serialize("o", 0);
  e.train_one(std::vector<double>{0.5, 0.5, 0.5}, ClassLabel::malicious, *schema);
  CHECK(e.serialize("o", 0) == before);
}

TEST_CASE("a pure leaf never splits") {
  auto schema = small_schema(4);
  ForestHyper hyper;
  HoeffdingTree t;
  Rng rng(3);
  std::vector<double> x(4);
  for (int r = 0; r < 2000; ++r) {
    for (auto& v : x) v = rng.uniform(0.0, 1.0);
    t.train(x, ClassLabel::benign, 1, *schema, hyper);
  }
  CHECK(t.node_count() == 1);
  CHECK(t.root_split_feature() == -1);
}

TEST_CASE("separable concept forces a root split on that feature in every tree") {
  auto schema = small_schema(6, 8);
  ForestHyper hyper;
  Ensemble e(5, hyper, 31);
  Rng rng(13);
  const size_t target = 3;
  feed_separable(e, *schema, target, 2000, rng);
  for (size_t i = 0; i < e.size(); ++i) {
    CAPTURE(i);
    CHECK(e.tree(i).root_split_feature() == static_cast<int32_t>(target));
    CHECK(e.tree(i).node_count() >= 3);
  }
  // and the learned ensemble actually separates the classes
  std::vector<double> hi(6, 0.5), lo(6, 0.5);
  hi[target] = 0.9;
  lo[target] = 0.1;
  CHECK(e.predict(hi).predicted() == ClassLabel::malicious);
  CHECK(e.predict(lo).predicted() == ClassLabel::benign);
}

TEST_CASE("predict: fresh ensemble answers (0.5, 0.5); mean of leaf estimates") {
  ForestHyper hyper;
  Ensemble fresh(4, hyper, 1);
  const ClassScores s = fresh.predict(std::vector<double>{0.1, 0.2});
  CHECK(s.benign == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.malicious == doctest::Approx(0.5).epsilon(1e-15));

  // two stump trees with Laplace estimates (0.8, 0.2) and (0.6, 0.4):
  // counts (3b, 0m) -> (4/5, 1/5) and (2b, 1m) -> (3/5, 2/5); mean (0.7, 0.3)
  auto schema = small_schema(2);
  Ensemble pair(2, hyper, 2);
  {
    // drive the per-tree weights through training with a crafted stream is
    // brittle; build the leaves directly through serialization instead
    ByteWriter w;
    w.tag("FRST");
    w.u8(1);
    ByteWriter prm;
    prm.u32(2);
    prm.u32(hyper.grace_period);
    prm.f64(hyper.split_confidence);
    prm.f64(hyper.tie_threshold);
    w.tag("FPRM");
    w.u32(static_cast<uint32_t>(prm.size()));
    w.raw(prm.bytes().data(), prm.size());
    const uint64_t counts[2][2] = {{3, 0}, {2, 1}};
    for (int t = 0; t < 2; ++t) {
      ByteWriter sec;
      sec.str("o");
      sec.u64(0);
      sec.u32(1);  // node count
      sec.u8(0);   // leaf
      sec.u64(counts[t][0]);
      sec.u64(counts[t][1]);
      w.tag("TREE");
      w.u32(static_cast<uint32_t>(sec.size()));
      w.raw(sec.bytes().data(), sec.size());
    }
    pair = Ensemble::deserialize(w.bytes(), 0);
  }
  const ClassScores mean = pair.predict(std::vector<double>{0.5, 0.5});
  CHECK(mean.benign == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(mean.malicious == doctest::Approx(0.3).epsilon(1e-12));

  // m = 1: ensemble equals the single tree
  Ensemble one(1, hyper, 3);
  auto schema4 = small_schema(4);
  Rng rng(4);
  feed_separable(one, *schema4, 1, 500, rng);
  std::vector<double> x = {0.5, 0.9, 0.5, 0.5};
  const ClassScores tree = one.tree(0).predict(x);
  const ClassScores ens = one.predict(x);
  CHECK(ens.benign == tree.benign);
  CHECK(ens.malicious == tree.malicious);
}

TEST_CASE("largest-remainder apportionment") {
  CHECK(largest_remainder_apportionment(MergeWeights::normalized({1.0, 0.0}), 10) ==
        std::vector<uint32_t>{10, 0});
  CHECK(largest_remainder_apportionment(MergeWeights::normalized({0.5, 0.5}), 10) ==
        std::vector<uint32_t>{5, 5});
  // hand computation: quotas (8, 7, 5), all integral
  CHECK(largest_remainder_apportionment(MergeWeights::normalized({0.4, 0.35, 0.25}), 20) ==
        std::vector<uint32_t>{8, 7, 5});
  // quotas (2.5, 2.5): floor (2,2), one remainder seat, tie -> lower index
  CHECK(largest_remainder_apportionment(MergeWeights::normalized({0.5, 0.5}), 5) ==
        std::vector<uint32_t>{3, 2});

  Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    const size_t k = 1 + rng.index(6);
    std::vector<double> w(k);
    for (auto& v : w) v = rng.uniform(0.01, 1.0);
    const auto a = MergeWeights::normalized(w);
    const uint32_t m = 1 + static_cast<uint32_t>(rng.index(40));
    const auto alloc = largest_remainder_apportionment(a, m);
    uint32_t sum = 0;
    for (size_t i = 0; i < k; ++i) {
      sum += alloc[i];
      CHECK(std::abs(static_cast<double>(alloc[i]) - a.at(i) * m) < 1.0);
    }
    CHECK(sum == m);
  }
}

TEST_CASE("merge: member trees verbatim, counts, determinism") {
  auto schema = small_schema(5, 8);
  const Ensemble e0 = trained_ensemble(6, *schema, 100, 400);
  const Ensemble e1 = trained_ensemble(6, *schema, 200, 400);
  const Ensemble e2 = trained_ensemble(6, *schema, 300, 400);

  std::set<uint64_t> input_hashes;
  for (const auto* e : {&e0, &e1, &e2})
    for (size_t i = 0; i < e->size(); ++i) input_hashes.insert(tree_hash(e->tree(i)));

  const auto weights = MergeWeights::normalized({0.4, 0.35, 0.25});
  const Ensemble merged = forest_merge({&e0, &e1, &e2}, weights, 777);
  CHECK(merged.size() == 6);
  for (size_t i = 0; i < merged.size(); ++i)
    CHECK(input_hashes.count(tree_hash(merged.tree(i))) == 1);

  // same seed, same selection, bitwise
  const Ensemble again = forest_merge({&e0, &e1, &e2}, weights, 777);
  CHECK(merged.serialize("c", 1) == again.serialize("c", 1));

  // one-hot: exactly ensemble 0's trees, as a multiset (sampling without
  // replacement of all m from one source is a permutation)
  const Ensemble all0 = forest_merge({&e0, &e1}, MergeWeights::normalized({1.0, 0.0}), 5);
  std::multiset<uint64_t> e0_hashes, all0_hashes;
  for (size_t i = 0; i < e0.size(); ++i) e0_hashes.insert(tree_hash(e0.tree(i)));
  for (size_t i = 0; i < all0.size(); ++i) all0_hashes.insert(tree_hash(all0.tree(i)));
  CHECK(e0_hashes == all0_hashes);

  Ensemble small(3, e0.hyper(), 1);
  CHECK_THROWS_AS(forest_merge({&e0, &small}, MergeWeights::normalized({0.5, 0.5}), 1),
                  SchemaMismatch);
  CHECK_THROWS_AS(forest_merge({&e0, &e1}, MergeWeights::normalized({1.0}), 1),
                  WeightArityMismatch);
}

TEST_CASE("merged ensembles keep origin tags") {
  auto schema = small_schema(4, 8);
  Ensemble e0 = trained_ensemble(4, *schema, 1, 200);
  Ensemble e1 = trained_ensemble(4, *schema, 2, 200);
  // stamp through export-style serialization, then reload
  const Ensemble a = Ensemble::deserialize(e0.serialize("orgA", 3), 0);
  const Ensemble b = Ensemble::deserialize(e1.serialize("orgB", 3), 0);
  const Ensemble merged = forest_merge({&a, &b}, MergeWeights::normalized({0.5, 0.5}), 4);
  size_t from_a = 0, from_b = 0;
  for (size_t i = 0; i < merged.size(); ++i) {
    CHECK(merged.origin(i).round == 3);
    if (merged.origin(i).org_id == "orgA") ++from_a;
    if (merged.origin(i).org_id == "orgB") ++from_b;
  }
  CHECK(from_a == 2);
  CHECK(from_b == 2);
}

TEST_CASE("payload round-trip preserves predictions bit-exactly") {
  auto schema = small_schema(5, 8);
  const Ensemble e = trained_ensemble(8, *schema, 55, 600);
  const Ensemble back = Ensemble::deserialize(e.serialize("org", 2), 99);
  Rng rng(66);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(5);
    for (auto& v : x) v = rng.uniform(0.0, 1.0);
    const ClassScores s0 = e.predict(x);
    const ClassScores s1 = back.predict(x);
    CHECK(s0.benign == s1.benign);
    CHECK(s0.malicious == s1.malicious);
  }
}

}  // TEST_SUITE
