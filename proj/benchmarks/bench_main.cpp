#include <benchmark/benchmark.h>

#include "fedstream/classifier.hpp"
#include "fedstream/featurize.hpp"
#include "fedstream/pipeline.hpp"
#include "fedstream/synth.hpp"

using namespace fedstream;

namespace {

SyntheticConfig bench_synth(uint64_t records) {
  SyntheticConfig c;
  c.schema = default_schema();
  c.n_orgs = 1;
  c.records_per_org = records;
  c.label_fraction = 0.5;
  c.attack_fraction = 0.4;
  c.seed = 7;
  const size_t dim = c.schema->dimension();
  c.background_mean.assign(dim, 0.0);
  c.background_stddev.assign(dim, 1.0);
  AttackPattern p;
  p.name = "p0";
  p.mean.assign(dim, 0.0);
  p.stddev.assign(dim, 1.0);
  for (size_t i = 0; i < dim; ++i) {
    const FeatureDef& f = c.schema->at(i);
    if (f.kind != FeatureKind::numeric) continue;
    const double range = f.hi - f.lo;
    c.background_mean[i] = f.lo + 0.35 * range;
    c.background_stddev[i] = 0.05 * range;
    p.mean[i] = f.lo + 0.7 * range;
    p.stddev[i] = 0.05 * range;
  }
  c.patterns.push_back(std::move(p));
  return c;
}

std::vector<LogRecord> bench_records(uint64_t n) {
  SyntheticSource src(bench_synth(n), 0);
  std::vector<LogRecord> out;
  out.reserve(n);
  while (auto r = src.next()) out.push_back(std::move(*r));
  return out;
}

}  // namespace

static void BM_Featurize(benchmark::State& state) {
  auto schema = default_schema();
  auto records = bench_records(256);
  size_t i = 0;
  for (auto _ : state) {
    auto x = featurize(records[i++ % records.size()], *schema);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_Featurize);

static void BM_NbTrainPredict(benchmark::State& state) {
  auto schema = default_schema();
  auto records = bench_records(256);
  std::vector<FeatureVector> xs;
  for (const auto& r : records) xs.push_back(featurize(r, *schema));
  NbClassifier model(schema);
  size_t i = 0;
  for (auto _ : state) {
    const auto& x = xs[i++ % xs.size()];
    auto s = model.predict(x);
    benchmark::DoNotOptimize(s);
    model.train_one(x, i % 3 ? ClassLabel::benign : ClassLabel::malicious);
  }
}
BENCHMARK(BM_NbTrainPredict);

static void BM_MlpTrainPredict(benchmark::State& state) {
  auto schema = default_schema();
  auto records = bench_records(256);
  std::vector<FeatureVector> xs;
  for (const auto& r : records) xs.push_back(featurize(r, *schema));
  MlpClassifier model(schema, {0.01, 42});
  size_t i = 0;
  for (auto _ : state) {
    const auto& x = xs[i++ % xs.size()];
    auto s = model.predict(x);
    benchmark::DoNotOptimize(s);
    model.train_one(x, i % 3 ? ClassLabel::benign : ClassLabel::malicious);
  }
}
BENCHMARK(BM_MlpTrainPredict);

// Whole-pipeline records/s on an in-memory stream (the acceptance
// throughput bound drives the same path).
static void BM_NbPipeline(benchmark::State& state) {
  const uint64_t n = static_cast<uint64_t>(state.range(0));
  PipelineConfig config;
  config.schema = default_schema();
  config.model.kind = ModelKind::nb;
  config.org_id = "bench";
  auto records = bench_records(n);
  for (auto _ : state) {
    VectorSource source(records);
    std::unique_ptr<Classifier> model;
    auto report = run_stream(source, config, model);
    benchmark::DoNotOptimize(report);
  }
  state.SetItemsProcessed(static_cast<int64_t>(n) * state.iterations());
}
BENCHMARK(BM_NbPipeline)->Arg(2000)->Arg(10000);

static void BM_NbMergeDefaultSchema(benchmark::State& state) {
  auto schema = default_schema();
  auto records = bench_records(512);
  NbClassifier a(schema), b(schema);
  for (size_t i = 0; i < records.size(); ++i) {
    auto x = featurize(records[i], *schema);
    (i % 2 ? a : b).train_one(x, i % 3 ? ClassLabel::benign : ClassLabel::malicious);
  }
  const auto ea = export_model(a, "a", 1);
  const auto eb = export_model(b, "b", 1);
  const auto w = MergeWeights::uniform(2);
  for (auto _ : state) {
    auto merged = merge_envelopes({ea, eb}, w, 1);
    benchmark::DoNotOptimize(merged);
  }
}
BENCHMARK(BM_NbMergeDefaultSchema);

BENCHMARK_MAIN();
