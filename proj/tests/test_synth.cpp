#include <doctest.h>

#include <set>
#include <unordered_map>

#include "fedstream/bytes.hpp"
#include "fedstream/classifier.hpp"
#include "fedstream/featurize.hpp"
#include "fedstream/synth.hpp"
#include "test_util.hpp"

using namespace fedstream;
using fedstream::test::small_schema;

namespace {

SyntheticConfig synth_config(SchemaPtr schema, size_t n_orgs, uint64_t records,
                             size_t n_patterns, double separation = 0.5) {
  SyntheticConfig c;
  c.schema = std::move(schema);
  c.n_orgs = n_orgs;
  c.records_per_org = records;
  c.seed = 4242;
  c.label_fraction = 0.5;
  c.attack_fraction = 0.5;
  const size_t dim = c.schema->dimension();
  c.background_mean.assign(dim, 0.25);
  c.background_stddev.assign(dim, 0.02);
  for (size_t p = 0; p < n_patterns; ++p) {
    AttackPattern pat;
    pat.name = "p" + std::to_string(p);
    // distinct directions per pattern, all far from the background
    pat.mean.assign(dim, 0.25);
    for (size_t i = p % dim; i < dim; i += n_patterns)
      pat.mean[i] = 0.25 + separation;
    pat.stddev.assign(dim, 0.02);
    c.patterns.push_back(std::move(pat));
  }
  return c;
}

std::string stream_bytes(const SyntheticConfig& c, size_t org) {
  SyntheticSource src(c, org);
  std::string all;
  while (auto r = src.next()) {
    all += record_to_jsonl(*r);
    all += '\n';
  }
  return all;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("same config and seed give byte-identical streams") {
  auto c = synth_config(small_schema(6, 8), 2, 200, 2);
  CHECK(stream_bytes(c, 0) == stream_bytes(c, 0));
  CHECK(stream_bytes(c, 1) == stream_bytes(c, 1));
  CHECK(stream_bytes(c, 0) != stream_bytes(c, 1));

  auto c2 = c;
  c2.seed = 4243;
  CHECK(stream_bytes(c2, 0) != stream_bytes(c, 0));

  // the running digest matches a digest of the serialized records
  SyntheticSource a(c, 0), b(c, 0);
  uint64_t manual = 14695981039346656037ull;
  while (auto r = a.next()) manual = fnv1a64(record_to_jsonl(*r), manual);
  while (b.next()) {
  }
  CHECK(b.stream_digest() == manual);
}

TEST_CASE("label_fraction = 1 labels every record; 0 labels none") {
  auto c = synth_config(small_schema(4, 8), 1, 150, 1);
  c.label_fraction = 1.0;
  SyntheticSource all(c, 0);
  size_t labeled = 0, total = 0;
  while (auto r = all.next()) {
    ++total;
    if (r->label) ++labeled;
  }
  CHECK(total == 150);
  CHECK(labeled == 150);

  c.label_fraction = 0.0;
  SyntheticSource none(c, 0);
  while (auto pair = none.next_with_truth()) {
    CHECK_FALSE(pair->first.label.has_value());  // truth stays on the side channel
  }
}

TEST_CASE("well-separated patterns are learnable to >99% by offline NB") {
  auto schema = small_schema(8, 16);
  auto c = synth_config(schema, 1, 3000, 1, 0.5);  // 0.5 separation vs 0.02 sd: 25 sigma
  c.label_fraction = 0.0;

  NbClassifier model(schema);
  SyntheticSource train(c, 0);
  while (auto pair = train.next_with_truth())
    model.train_one(featurize(pair->first, *schema), pair->second);

  SyntheticConfig eval_cfg = c;
  eval_cfg.seed = 999;
  SyntheticSource eval(eval_cfg, 0);
  size_t correct = 0, total = 0;
  while (auto pair = eval.next_with_truth()) {
    ++total;
    if (model.predict(featurize(pair->first, *schema)).predicted() == pair->second) ++correct;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(total) > 0.99);
}

TEST_CASE("gen_synthetic materializes one stream per org with the right counts") {
  auto c = synth_config(small_schema(4, 8), 3, 120, 2);
  const auto streams = gen_synthetic(c);
  REQUIRE(streams.size() == 3);
  for (const auto& s : streams) CHECK(s.size() == 120);
  // ids are unique across the whole corpus
  std::set<std::string> ids;
  for (const auto& s : streams)
    for (const auto& r : s) CHECK(ids.insert(r.record_id).second);
}

TEST_CASE("org pattern assignment: an org only emits its own patterns") {
  auto c = synth_config(small_schema(4, 8), 2, 400, 2);
  c.patterns[0].orgs = {0};
  c.patterns[1].orgs = {1};
  SyntheticSource src0(c, 0);
  while (auto pair = src0.next_with_truth()) {
    CHECK(src0.last_pattern() != 1);  // background (-1) or pattern 0 only
  }
  // the held-out generator sees every pattern
  SyntheticConfig h = c;
  h.records_per_org = 2000;
  SyntheticSource heldout(h, h.n_orgs);
  bool saw0 = false, saw1 = false;
  while (auto pair = heldout.next_with_truth()) {
    if (heldout.last_pattern() == 0) saw0 = true;
    if (heldout.last_pattern() == 1) saw1 = true;
  }
  CHECK(saw0);
  CHECK(saw1);
}

TEST_CASE("drift shifts the generated feature means at the configured record") {
  auto schema = small_schema(2, 8);
  auto c = synth_config(schema, 1, 2000, 1);
  c.attack_fraction = 0.9999;  // essentially always the pattern
  c.label_fraction = 0.0;
  DriftEvent d;
  d.at_record = 1000;
  d.pattern_index = 0;
  d.mean_shift = {-0.4, -0.4};
  c.drift_events = {d};

  SyntheticSource src(c, 0);
  double pre = 0.0, post = 0.0;
  size_t i = 0;
  while (auto pair = src.next_with_truth()) {
    const FeatureVector x = featurize(pair->first, *schema);
    if (i < 1000) pre += x.values[0];
    else post += x.values[0];
    ++i;
  }
  pre /= 1000.0;
  post /= 1000.0;
  CHECK(pre == doctest::Approx(0.75).epsilon(0.05));
  CHECK(post == doctest::Approx(0.35).epsilon(0.1));
}

TEST_CASE("partition: round robin and by-pattern routing") {
  auto c = synth_config(small_schema(3, 8), 1, 10, 2);
  const auto pooled = gen_synthetic_pooled(c, 10);
  REQUIRE(pooled.size() == 10);

  const auto rr = partition(pooled, 2, PartitionStrategy::round_robin);
  REQUIRE(rr.size() == 2);
  CHECK(rr[0].size() == 5);
  CHECK(rr[1].size() == 5);

  // union of the parts is the input multiset
  std::multiset<std::string> in_ids, out_ids;
  for (const auto& r : pooled) in_ids.insert(r.record.record_id);
  for (const auto& part : rr)
    for (const auto& r : part) out_ids.insert(r.record.record_id);
  CHECK(in_ids == out_ids);

  const auto big = gen_synthetic_pooled(c, 500);
  std::unordered_map<int, size_t> route = {{0, 0}, {1, 1}};
  const auto by_pat = partition(big, 2, PartitionStrategy::by_pattern, &route);
  size_t checked_attacks = 0;
  for (size_t org = 0; org < 2; ++org) {
    for (const auto& r : by_pat[org]) {
      if (r.pattern_index < 0) continue;  // background spreads round-robin
      CHECK(route.at(r.pattern_index) == org);
      ++checked_attacks;
    }
  }
  CHECK(checked_attacks > 100);

  CHECK_THROWS_AS(partition(big, 2, PartitionStrategy::by_pattern, nullptr), ConfigError);
}

}  // TEST_SUITE
