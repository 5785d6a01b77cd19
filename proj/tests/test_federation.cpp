#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "fedstream/bytes.hpp"
#include "fedstream/federation.hpp"
#include "test_util.hpp"

using namespace fedstream;
using fedstream::test::random_vector;
using fedstream::test::small_schema;

namespace {

CommunityConfig community3(ModelKind kind) {
  CommunityConfig c;
  c.community_id = "c3";
  c.members = {{"a", 1.0}, {"b", 1.0}, {"c", 2.0}};
  c.schedule.every_n_records = 100;
  c.model_kind = kind;
  c.seed = 99;
  return c;
}

std::unique_ptr<Classifier> nb_trained(SchemaPtr schema, uint64_t seed, size_t n) {
  auto model = std::make_unique<NbClassifier>(schema);
  Rng rng(seed);
  for (size_t i = 0; i < n; ++i) {
    FeatureVector x = random_vector(*schema, rng);
    model->train_one(x, rng.bernoulli(0.5) ? ClassLabel::malicious : ClassLabel::benign);
  }
  return model;
}

}  // namespace

TEST_SUITE("federation") {

TEST_CASE("post validation: membership, duplicates, schema, kind") {
  auto schema = small_schema(4, 6);
  ShareStore store(community3(ModelKind::nb), schema->digest());

  auto model = nb_trained(schema, 1, 20);
  const ModelEnvelope env = export_model(*model, "a", 1);
  store.post_envelope(1, env);
  CHECK(store.posted_count(1) == 1);

  CHECK_THROWS_AS(store.post_envelope(1, env), DuplicatePost);

  ModelEnvelope outsider = env;
  outsider.org_id = "mallory";
  CHECK_THROWS_AS(store.post_envelope(1, outsider), UnknownMember);

  ModelEnvelope wrong_schema = env;
  wrong_schema.org_id = "b";
  wrong_schema.schema_hash ^= 1;
  CHECK_THROWS_AS(store.post_envelope(1, wrong_schema), SchemaMismatch);

  auto other = small_schema(4, 6);
  MlpClassifier mlp(other, {0.01, 3});
  ModelEnvelope wrong_kind = export_model(mlp, "b", 1);
  CHECK_THROWS_AS(store.post_envelope(1, wrong_kind), KindMismatch);

  CHECK_THROWS_AS(store.close_round(7), EmptyRound);
}

TEST_CASE("trust weights restrict to posting members and normalize") {
  auto schema = small_schema(5, 6);
  // MLP makes the weighted average observable
  CommunityConfig cfg = community3(ModelKind::mlp);
  ShareStore store(cfg, schema->digest());

  MlpClassifier ma(schema, {0.01, 11});
  MlpClassifier mb(schema, {0.01, 22});
  MlpClassifier mc(schema, {0.01, 33});
  store.post_envelope(1, export_model(ma, "a", 1));
  store.post_envelope(1, export_model(mb, "b", 1));
  store.post_envelope(1, export_model(mc, "c", 1));
  CHECK(store.round_closed(1));  // everyone posted: auto-closed

  const ModelEnvelope consensus = *store.consensus(1);
  // trust (1, 1, 2) -> a = (0.25, 0.25, 0.5)
  const MlpParams &pa = ma.params(), &pb = mb.params(), &pc = mc.params();
  const MlpParams want =
      mlp_merge({&pa, &pb, &pc}, MergeWeights::normalized({0.25, 0.25, 0.5}));
  CHECK(consensus.payload == want.serialize());

  // when only b posts (a and c report done), consensus == b's envelope
  ShareStore store2(cfg, schema->digest());
  const ModelEnvelope eb = export_model(mb, "b", 1);
  store2.post_envelope(1, eb);
  CHECK_FALSE(store2.round_closed(1));
  store2.mark_done("a");
  CHECK_FALSE(store2.round_closed(1));
  store2.mark_done("c");
  CHECK(store2.round_closed(1));  // record-count timeout path
  CHECK(store2.consensus(1)->payload == eb.payload);
}

TEST_CASE("nb consensus on disjoint data is the histogram sum") {
  auto schema = small_schema(5, 6);
  CommunityConfig cfg;
  cfg.community_id = "dis";
  cfg.members = {{"a", 1.0}, {"b", 3.0}};  // weights must not scale NB counts
  cfg.model_kind = ModelKind::nb;
  ShareStore store(cfg, schema->digest());

  auto ma = nb_trained(schema, 7, 60);
  auto mb = nb_trained(schema, 8, 40);
  store.post_envelope(1, export_model(*ma, "a", 1));
  store.post_envelope(1, export_model(*mb, "b", 1));
  const ModelEnvelope consensus = *store.consensus(1);

  HistogramSet want = static_cast<NbClassifier&>(*ma).histograms();
  want.merge_from(static_cast<NbClassifier&>(*mb).histograms());
  CHECK(HistogramSet::deserialize(consensus.payload) == want);
  CHECK(consensus.records_seen == 100);
}

TEST_CASE("apply_consensus: replace semantics and mismatch errors") {
  auto schema = small_schema(5, 6);

  // single-member community is a fixed point
  CommunityConfig solo;
  solo.community_id = "solo";
  solo.members = {{"a", 1.0}};
  solo.model_kind = ModelKind::nb;
  ShareStore store(solo, schema->digest());
  auto model = nb_trained(schema, 3, 50);
  store.post_envelope(1, export_model(*model, "a", 1));
  auto applied = apply_consensus(*model, *store.consensus(1), schema);
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    FeatureVector x = random_vector(*schema, rng);
    CHECK(model->predict(x).benign == applied->predict(x).benign);
    CHECK(model->predict(x).malicious == applied->predict(x).malicious);
  }

  // NB two-member disjoint split: post-apply equals the full-data model
  auto part1 = nb_trained(schema, 10, 30);
  auto part2 = nb_trained(schema, 20, 45);
  CommunityConfig duo;
  duo.community_id = "duo";
  duo.members = {{"a", 1.0}, {"b", 1.0}};
  duo.model_kind = ModelKind::nb;
  ShareStore store2(duo, schema->digest());
  store2.post_envelope(1, export_model(*part1, "a", 1));
  store2.post_envelope(1, export_model(*part2, "b", 1));
  auto merged = apply_consensus(*part1, *store2.consensus(1), schema);

  NbClassifier full(schema);
  for (uint64_t seed : {10ull, 20ull}) {
    Rng data(seed);
    const size_t n = seed == 10 ? 30 : 45;
    for (size_t i = 0; i < n; ++i) {
      FeatureVector x = random_vector(*schema, data);
      full.train_one(x, data.bernoulli(0.5) ? ClassLabel::malicious : ClassLabel::benign);
    }
  }
  CHECK(static_cast<NbClassifier&>(*merged).histograms() == full.histograms());

  // MLP community with common init and zero training: consensus == init
  MlpClassifier common1(schema, {0.01, 777});
  MlpClassifier common2(schema, {0.01, 777});
  CommunityConfig mlp_duo = duo;
  mlp_duo.community_id = "mlpduo";
  mlp_duo.model_kind = ModelKind::mlp;
  ShareStore store3(mlp_duo, schema->digest());
  store3.post_envelope(1, export_model(common1, "a", 1));
  store3.post_envelope(1, export_model(common2, "b", 1));
  CHECK(store3.consensus(1)->payload == common1.params().serialize());

  // mismatches
  const ModelEnvelope nb_env = export_model(*model, "a", 2);
  CHECK_THROWS_AS(apply_consensus(common1, nb_env, schema), KindMismatch);
  auto other_schema = small_schema(6, 6);
  auto other_model = nb_trained(other_schema, 5, 10);
  const ModelEnvelope other_env = export_model(*other_model, "a", 2);
  CHECK_THROWS_AS(apply_consensus(*model, other_env, schema), SchemaMismatch);
}

TEST_CASE("absent members have exactly zero influence") {
  auto schema = small_schema(4, 6);
  CommunityConfig cfg = community3(ModelKind::nb);

  auto run_round = [&](uint64_t c_seed) {
    ShareStore store(cfg, schema->digest());
    auto ma = nb_trained(schema, 100, 40);
    auto mb = nb_trained(schema, 200, 40);
    auto mc = nb_trained(schema, c_seed, 40);  // member c never posts
    (void)mc;
    store.post_envelope(1, export_model(*ma, "a", 1));
    store.post_envelope(1, export_model(*mb, "b", 1));
    store.mark_done("c");
    return envelope_to_bytes(*store.consensus(1));
  };
  CHECK(run_round(1) == run_round(999));  // bitwise independent of c's state
}

TEST_CASE("consensus determinism: same envelopes, same seed, same bytes") {
  auto schema = small_schema(4, 6);
  ForestHyper hyper;
  hyper.ensemble_size = 6;
  CommunityConfig cfg = community3(ModelKind::forest);

  auto make_forest = [&](uint64_t seed) {
    ForestClassifier f(schema, hyper, seed);
    Rng rng(seed + 1);
    for (int i = 0; i < 200; ++i) {
      FeatureVector x = random_vector(*schema, rng);
      f.train_one(x, rng.bernoulli(0.5) ? ClassLabel::malicious : ClassLabel::benign);
    }
    return f;
  };
  const ForestClassifier fa = make_forest(1), fb = make_forest(2), fc = make_forest(3);
  const ModelEnvelope ea = export_model(fa, "a", 2);
  const ModelEnvelope eb = export_model(fb, "b", 2);
  const ModelEnvelope ec = export_model(fc, "c", 2);

  auto consensus_bytes = [&](std::vector<const ModelEnvelope*> order) {
    ShareStore store(cfg, schema->digest());
    for (const auto* e : order) store.post_envelope(2, *e);
    return envelope_to_bytes(*store.consensus(2));
  };
  CHECK(consensus_bytes({&ea, &eb, &ec}) == consensus_bytes({&ea, &eb, &ec}));
  // arrival order must not matter
  CHECK(consensus_bytes({&ec, &ea, &eb}) == consensus_bytes({&ea, &eb, &ec}));

  // force-closing a partial round with an explicit seed is deterministic too
  auto partial = [&](uint64_t seed) {
    ShareStore store(cfg, schema->digest());
    store.post_envelope(3, ea);
    store.post_envelope(3, eb);
    return envelope_to_bytes(store.close_round(3, seed));
  };
  CHECK(partial(42) == partial(42));
  CHECK(partial(42) != partial(43));  // forest sampling depends on the seed
}

TEST_CASE("include_self = false delivers a peers-only consensus") {
  auto schema = small_schema(4, 6);
  CommunityConfig cfg;
  cfg.community_id = "noself";
  cfg.members = {{"a", 1.0}, {"b", 1.0}};
  cfg.model_kind = ModelKind::nb;
  cfg.include_self = false;
  ShareStore store(cfg, schema->digest());

  auto ma = nb_trained(schema, 31, 25);
  auto mb = nb_trained(schema, 32, 35);
  const ModelEnvelope ea = export_model(*ma, "a", 1);
  const ModelEnvelope eb = export_model(*mb, "b", 1);
  store.post_envelope(1, ea);
  store.post_envelope(1, eb);

  CHECK(store.consensus_for("a", 1).payload == eb.payload);
  CHECK(store.consensus_for("b", 1).payload == ea.payload);
  // the community-wide consensus still exists (the sum)
  HistogramSet sum = static_cast<NbClassifier&>(*ma).histograms();
  sum.merge_from(static_cast<NbClassifier&>(*mb).histograms());
  CHECK(HistogramSet::deserialize(store.consensus(1)->payload) == sum);
}

TEST_CASE("message log: member order within rounds, consensus line, file drop") {
  namespace fs = std::filesystem;
  auto schema = small_schema(4, 6);
  const auto dir = fs::temp_directory_path() / "fedstream_fed_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string log_path = (dir / "message_log.jsonl").string();

  CommunityConfig cfg = community3(ModelKind::nb);
  ShareStore store(cfg, schema->digest(), dir.string(), log_path);
  auto ma = nb_trained(schema, 41, 20);
  auto mb = nb_trained(schema, 42, 20);
  auto mc = nb_trained(schema, 43, 20);
  // post out of member order on purpose
  store.post_envelope(1, export_model(*mc, "c", 1));
  store.post_envelope(1, export_model(*ma, "a", 1));
  store.post_envelope(1, export_model(*mb, "b", 1));

  const auto log = store.message_log();
  REQUIRE(log.size() == 4);
  CHECK(log[0].from == "a");
  CHECK(log[1].from == "b");
  CHECK(log[2].from == "c");
  CHECK(log[3].from == "consensus");
  for (const auto& e : log) {
    CHECK(e.round == 1);
    CHECK(e.bytes > 0);
  }

  CHECK(fs::exists(dir / "c3" / "1" / "a.env"));
  CHECK(fs::exists(dir / "c3" / "1" / "consensus.env"));
  const ModelEnvelope dropped = read_envelope_file((dir / "c3" / "1" / "a.env").string());
  CHECK(dropped.org_id == "a");
  std::ifstream log_in(log_path);
  std::string line;
  size_t lines = 0;
  while (std::getline(log_in, line)) {
    ++lines;
    CHECK(line.find("\"round\":1") != std::string::npos);
  }
  CHECK(lines == 4);
  fs::remove_all(dir);
}

TEST_CASE("blocking consensus_for wakes posters across threads") {
  auto schema = small_schema(4, 6);
  CommunityConfig cfg;
  cfg.community_id = "threads";
  cfg.members = {{"a", 1.0}, {"b", 1.0}};
  cfg.model_kind = ModelKind::nb;
  ShareStore store(cfg, schema->digest());

  auto ma = nb_trained(schema, 51, 30);
  auto mb = nb_trained(schema, 52, 30);
  ModelEnvelope got_a, got_b;
  std::thread ta([&] {
    InProcessShareClient client(store, "a");
    got_a = client.exchange(1, export_model(*ma, "a", 1));
  });
  std::thread tb([&] {
    InProcessShareClient client(store, "b");
    got_b = client.exchange(1, export_model(*mb, "b", 1));
  });
  ta.join();
  tb.join();
  CHECK(envelope_to_bytes(got_a) == envelope_to_bytes(got_b));
  HistogramSet sum = static_cast<NbClassifier&>(*ma).histograms();
  sum.merge_from(static_cast<NbClassifier&>(*mb).histograms());
  CHECK(HistogramSet::deserialize(got_a.payload) == sum);
}

TEST_CASE("file-drop transport: two members' exchanges agree") {
  namespace fs = std::filesystem;
  auto schema = small_schema(4, 6);
  const auto dir = fs::temp_directory_path() / "fedstream_drop_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  CommunityConfig cfg;
  cfg.community_id = "drop";
  cfg.members = {{"a", 1.0}, {"b", 1.0}};
  cfg.model_kind = ModelKind::nb;
  cfg.seed = 5;

  auto ma = nb_trained(schema, 61, 20);
  auto mb = nb_trained(schema, 62, 25);
  ModelEnvelope got_a, got_b;
  std::thread ta([&] {
    FileDropShareClient client(cfg, dir.string(), "a", schema->digest(), 5, 10000);
    got_a = client.exchange(1, export_model(*ma, "a", 1));
  });
  std::thread tb([&] {
    FileDropShareClient client(cfg, dir.string(), "b", schema->digest(), 5, 10000);
    got_b = client.exchange(1, export_model(*mb, "b", 1));
  });
  ta.join();
  tb.join();
  CHECK(envelope_to_bytes(got_a) == envelope_to_bytes(got_b));
  HistogramSet sum = static_cast<NbClassifier&>(*ma).histograms();
  sum.merge_from(static_cast<NbClassifier&>(*mb).histograms());
  CHECK(HistogramSet::deserialize(got_a.payload) == sum);
  fs::remove_all(dir);
}

}  // TEST_SUITE
