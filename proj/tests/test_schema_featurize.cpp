#include <doctest.h>

#include <cmath>

#include "fedstream/featurize.hpp"
#include "fedstream/schema.hpp"
#include "test_util.hpp"

using namespace fedstream;
using fedstream::test::small_schema;

namespace {

LogRecord rec(std::vector<std::pair<std::string, std::string>> fields) {
  LogRecord r;
  r.record_id = "r1";
  r.timestamp_ms = 1000;
  r.fields = std::move(fields);
  return r;
}

FeatureSchema two_feature_schema() {
  FeatureDef num;
  num.name = "n";
  num.source_field = "nval";
  num.lo = 0;
  num.hi = 100;
  num.bins = 10;
  FeatureDef cat;
  cat.name = "c";
  cat.kind = FeatureKind::categorical;
  cat.source_field = "cval";
  cat.categories = {"red", "green", "blue"};
  return FeatureSchema({num, cat});
}

}  // namespace

TEST_SUITE("schema") {

TEST_CASE("default schema ships exactly 81 features") {
  auto s = default_schema();
  CHECK(s->dimension() == 81);
  size_t categorical = 0;
  for (const auto& f : s->features())
    if (f.kind == FeatureKind::categorical) ++categorical;
  CHECK(categorical == 3);
}

TEST_CASE("digest: equal schemas agree, any field change disagrees") {
  auto a = small_schema(5);
  auto b = small_schema(5);
  CHECK(a->digest() == b->digest());
  CHECK(schema_digest(*a) == a->digest());

  // rename one feature
  auto defs = a->features();
  defs[2].name = "renamed";
  FeatureSchema renamed(defs);
  CHECK(renamed.digest() != a->digest());

  // reorder two features: order is semantic
  defs = a->features();
  std::swap(defs[0], defs[1]);
  FeatureSchema reordered(defs);
  CHECK(reordered.digest() != a->digest());

  // change a range bound
  defs = a->features();
  defs[0].hi = 2.0;
  FeatureSchema rescaled(defs);
  CHECK(rescaled.digest() != a->digest());
}

TEST_CASE("schema json round-trip preserves the digest") {
  auto s = default_schema();
  FeatureSchema reloaded = load_schema_json(schema_to_json(*s));
  CHECK(reloaded.digest() == s->digest());
  CHECK(reloaded.dimension() == s->dimension());
}

TEST_CASE("schema validation rejects bad definitions") {
  FeatureDef d;
  d.name = "x";
  d.source_field = "x";
  d.lo = 1.0;
  d.hi = 1.0;  // lo must be < hi
  CHECK_THROWS_AS(FeatureSchema({d}), ConfigError);
  d.hi = 2.0;
  d.bins = 1;  // bins must be >= 2
  CHECK_THROWS_AS(FeatureSchema({d}), ConfigError);
  FeatureDef dup = d;
  dup.bins = 4;
  CHECK_THROWS_AS(FeatureSchema({dup, dup}), ConfigError);
}

TEST_CASE("featurize: in-range, clamped, missing") {
  const FeatureSchema s = two_feature_schema();

  auto x = featurize(rec({{"nval", "77"}, {"cval", "green"}}), s);
  CHECK(x.values[0] == 77.0);
  CHECK(x.values[1] == 2.0);  // green = code 2 (0 reserved)
  CHECK(x.schema_hash == s.digest());

  x = featurize(rec({{"nval", "250"}, {"cval", "blue"}}), s);
  CHECK(x.values[0] == 100.0);  // clamped into [0, 100]

  x = featurize(rec({{"nval", "-3"}}), s);
  CHECK(x.values[0] == 0.0);  // clamped at lo
  CHECK(x.values[1] == 0.0);  // missing categorical: reserved code 0

  FeaturizeStats stats;
  x = featurize(rec({}), s, &stats);
  CHECK(x.values[0] == 50.0);  // numeric midpoint
  CHECK(x.values[1] == 0.0);
  CHECK(stats.missing_fields == 2);

  // unknown category maps to the reserved code
  x = featurize(rec({{"cval", "magenta"}}), s);
  CHECK(x.values[1] == 0.0);
}

TEST_CASE("featurize totality and determinism on fuzzed records") {
  auto s = default_schema();
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    LogRecord r;
    r.record_id = "fz" + std::to_string(trial);
    r.timestamp_ms = 1;
    const size_t nf = rng.index(120);
    for (size_t i = 0; i < nf; ++i) {
      const auto& def = s->at(rng.index(s->dimension()));
      std::string val;
      switch (rng.index(6)) {
        case 0: val = "not-a-number"; break;
        case 1: val = ""; break;
        case 2: val = std::to_string(rng.uniform(-1e9, 1e9)); break;
        case 3: val = "nan"; break;
        case 4: val = "1e999"; break;
        default: val = std::to_string(rng.uniform(0.0, 10.0)); break;
      }
      r.fields.emplace_back(def.source_field, val);
    }
    const FeatureVector a = featurize(r, *s);
    const FeatureVector b = featurize(r, *s);
    REQUIRE(a.values.size() == s->dimension());
    for (size_t i = 0; i < a.values.size(); ++i) {
      REQUIRE(std::isfinite(a.values[i]));
      REQUIRE(a.values[i] == b.values[i]);  // pure function
    }
  }
}

TEST_CASE("attach_label: first feed wins, no feed leaves label absent") {
  auto vt = std::make_shared<PatternLabelFeed>(
      "stub-vt", "host",
      std::vector<PatternLabelFeed::Rule>{{"evil.test", ClassLabel::malicious, 0.9}});
  auto rank = std::make_shared<PatternLabelFeed>(
      "stub-rank", "host",
      std::vector<PatternLabelFeed::Rule>{{".test", ClassLabel::benign, 0.5}});
  std::vector<std::shared_ptr<LabelFeed>> feeds = {vt, rank};

  auto labeled = attach_label(rec({{"host", "www.evil.test"}}), feeds);
  REQUIRE(labeled.label.has_value());
  CHECK(*labeled.label == ClassLabel::malicious);
  CHECK(*labeled.label_source == "stub-vt");

  auto benign = attach_label(rec({{"host", "www.good.test"}}), feeds);
  REQUIRE(benign.label.has_value());
  CHECK(*benign.label == ClassLabel::benign);
  CHECK(*benign.label_source == "stub-rank");

  auto none = attach_label(rec({{"host", "example.org"}}), feeds);
  CHECK_FALSE(none.label.has_value());
  CHECK_FALSE(none.label_source.has_value());

  // an inline label is not overwritten
  auto pre = rec({{"host", "www.evil.test"}});
  pre.label = ClassLabel::benign;
  pre.label_source = "stream";
  auto kept = attach_label(pre, feeds);
  CHECK(*kept.label == ClassLabel::benign);
  CHECK(*kept.label_source == "stream");
}

}  // TEST_SUITE
