#include "fedstream/classifier.hpp"

#include <algorithm>

namespace fedstream {

NbClassifier::NbClassifier(SchemaPtr schema, double alpha)
    : schema_(std::move(schema)), hist_(HistogramSet::for_schema(*schema_)), alpha_(alpha) {}

NbClassifier::NbClassifier(SchemaPtr schema, HistogramSet hist, double alpha)
    : schema_(std::move(schema)), hist_(std::move(hist)), alpha_(alpha) {
  if (hist_.dimension() != schema_->dimension())
    throw SchemaMismatch("histogram dimension disagrees with schema");
  for (size_t i = 0; i < schema_->dimension(); ++i)
    if (hist_.bin_count(i) != schema_->at(i).bin_count())
      throw SchemaMismatch("histogram bin counts disagree with schema");
}

void NbClassifier::bin_indices(const FeatureVector& x, std::vector<uint32_t>& out) const {
  out.resize(schema_->dimension());
  for (size_t i = 0; i < out.size(); ++i) out[i] = nb_bin(schema_->at(i), x.values[i]);
}

ClassScores NbClassifier::predict(const FeatureVector& x) const {
  check_dimension(x);
  std::vector<uint32_t> bins;
  bin_indices(x, bins);
  return hist_.posterior(bins, alpha_);
}

void NbClassifier::train_one(const FeatureVector& x, ClassLabel y) {
  check_dimension(x);
  std::vector<uint32_t> bins;
  bin_indices(x, bins);
  hist_.observe(bins, y);
}

MlpClassifier::MlpClassifier(SchemaPtr schema, const MlpHyper& hyper,
                             const std::vector<size_t>& hidden_sizes)
    : schema_(std::move(schema)),
      params_(mlp_init(schema_->dimension(), hidden_sizes, hyper.init_seed)),
      hyper_(hyper) {}

MlpClassifier::MlpClassifier(SchemaPtr schema, MlpParams params, const MlpHyper& hyper,
                             uint64_t records_seen)
    : schema_(std::move(schema)),
      params_(std::move(params)),
      hyper_(hyper),
      records_seen_(records_seen) {
  if (params_.input_dim() != schema_->dimension())
    throw SchemaMismatch("mlp input dimension disagrees with schema");
}

std::vector<double> MlpClassifier::normalize(const FeatureVector& x) const {
  std::vector<double> out(x.values.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const FeatureDef& f = schema_->at(i);
    if (f.kind == FeatureKind::numeric) {
      out[i] = (x.values[i] - f.lo) / (f.hi - f.lo);
    } else {
      const double denom = std::max<double>(1.0, static_cast<double>(f.bin_count() - 1));
      out[i] = x.values[i] / denom;
    }
  }
  return out;
}

ClassScores MlpClassifier::predict(const FeatureVector& x) const {
  check_dimension(x);
  return mlp_forward(params_, normalize(x));
}

void MlpClassifier::train_one(const FeatureVector& x, ClassLabel y) {
  check_dimension(x);
  mlp_step(params_, normalize(x), y, hyper_);
  ++records_seen_;
}

ForestClassifier::ForestClassifier(SchemaPtr schema, const ForestHyper& hyper, uint64_t seed)
    : schema_(std::move(schema)), ensemble_(hyper.ensemble_size, hyper, seed) {}

ForestClassifier::ForestClassifier(SchemaPtr schema, Ensemble ensemble, uint64_t records_seen)
    : schema_(std::move(schema)), ensemble_(std::move(ensemble)), records_seen_(records_seen) {
  for (size_t i = 0; i < ensemble_.size(); ++i)
    if (ensemble_.tree(i).max_feature() >= static_cast<int32_t>(schema_->dimension()))
      throw SchemaMismatch("tree references a feature outside the schema");
}

ClassScores ForestClassifier::predict(const FeatureVector& x) const {
  check_dimension(x);
  return ensemble_.predict(x.values);
}

void ForestClassifier::train_one(const FeatureVector& x, ClassLabel y) {
  check_dimension(x);
  ensemble_.train_one(x.values, y, *schema_);
  ++records_seen_;
}

std::unique_ptr<Classifier> make_model(const ModelConfig& config, SchemaPtr schema) {
  switch (config.kind) {
    case ModelKind::nb:
      return std::make_unique<NbClassifier>(std::move(schema), config.nb_alpha);
    case ModelKind::mlp: {
      MlpHyper hyper = config.mlp;
      if (hyper.init_seed == 0) hyper.init_seed = config.seed;
      return std::make_unique<MlpClassifier>(std::move(schema), hyper, config.mlp_hidden);
    }
    case ModelKind::forest:
      return std::make_unique<ForestClassifier>(std::move(schema), config.forest, config.seed);
  }
  throw ConfigError("unknown model kind");
}

ModelEnvelope export_model(const Classifier& model, const std::string& org_id, uint64_t round) {
  ModelEnvelope env;
  env.org_id = org_id;
  env.model_kind = model.kind();
  env.schema_hash = model.schema_hash();
  env.round = round;
  env.records_seen = model.records_seen();
  if (model.kind() == ModelKind::forest) {
    // stamp untagged trees with this export's provenance
    const auto& forest = static_cast<const ForestClassifier&>(model);
    env.payload = forest.ensemble().serialize(org_id, round);
  } else {
    env.payload = model.serialize_payload();
  }
  return env;
}

std::unique_ptr<Classifier> import_model(const ModelEnvelope& env, SchemaPtr schema,
                                         uint64_t rng_seed) {
  if (env.schema_hash != schema->digest()) throw SchemaMismatch();
  switch (env.model_kind) {
    case ModelKind::nb: {
      HistogramSet h = HistogramSet::deserialize(env.payload);
      return std::make_unique<NbClassifier>(std::move(schema), std::move(h));
    }
    case ModelKind::mlp: {
      MlpParams p = MlpParams::deserialize(env.payload);
      return std::make_unique<MlpClassifier>(std::move(schema), std::move(p), MlpHyper{},
                                             env.records_seen);
    }
    case ModelKind::forest: {
      Ensemble e = Ensemble::deserialize(env.payload, rng_seed);
      return std::make_unique<ForestClassifier>(std::move(schema), std::move(e),
                                                env.records_seen);
    }
  }
  throw PayloadError("unknown model kind");
}

ModelEnvelope merge_envelopes(const std::vector<ModelEnvelope>& envelopes,
                              const MergeWeights& a, uint64_t seed) {
  if (envelopes.empty()) throw ConfigError("merge needs at least one envelope");
  if (a.size() != envelopes.size()) throw WeightArityMismatch(a.size(), envelopes.size());
  const ModelKind kind = envelopes[0].model_kind;
  const uint64_t schema_hash = envelopes[0].schema_hash;
  for (const auto& e : envelopes) {
    if (e.model_kind != kind) throw MixedKinds();
    if (e.schema_hash != schema_hash) throw SchemaMismatch();
  }

  ModelEnvelope out;
  out.org_id = "consensus";
  out.model_kind = kind;
  out.schema_hash = schema_hash;
  out.round = 0;
  out.records_seen = 0;
  for (const auto& e : envelopes) {
    out.round = std::max(out.round, e.round);
    out.records_seen += e.records_seen;
  }

  switch (kind) {
    case ModelKind::nb: {
      // Histogram summation; the averaging weights are accepted for
      // interface uniformity but do not scale integer counts.
      std::vector<HistogramSet> sets;
      sets.reserve(envelopes.size());
      for (const auto& e : envelopes) sets.push_back(HistogramSet::deserialize(e.payload));
      std::vector<const HistogramSet*> ptrs;
      for (const auto& s : sets) ptrs.push_back(&s);
      out.payload = nb_merge(ptrs).serialize();
      break;
    }
    case ModelKind::mlp: {
      std::vector<MlpParams> models;
      models.reserve(envelopes.size());
      for (const auto& e : envelopes) models.push_back(MlpParams::deserialize(e.payload));
      std::vector<const MlpParams*> ptrs;
      for (const auto& p : models) ptrs.push_back(&p);
      out.payload = mlp_merge(ptrs, a).serialize();
      break;
    }
    case ModelKind::forest: {
      std::vector<Ensemble> ensembles;
      ensembles.reserve(envelopes.size());
      for (const auto& e : envelopes) ensembles.push_back(Ensemble::deserialize(e.payload, 0));
      std::vector<const Ensemble*> ptrs;
      for (const auto& e : ensembles) ptrs.push_back(&e);
      out.payload = forest_merge(ptrs, a, seed).serialize("consensus", out.round);
      break;
    }
  }
  return out;
}

bool validate_envelope(const ModelEnvelope& env, std::string* reason) {
  try {
    std::vector<uint8_t> canonical;
    switch (env.model_kind) {
      case ModelKind::nb:
        canonical = HistogramSet::deserialize(env.payload).serialize();
        break;
      case ModelKind::mlp:
        canonical = MlpParams::deserialize(env.payload).serialize();
        break;
      case ModelKind::forest:
        canonical = Ensemble::deserialize(env.payload, 0).serialize("", 0);
        break;
    }
    if (canonical != env.payload) {
      if (reason) *reason = "payload is not in canonical parameter form";
      return false;
    }
    return true;
  } catch (const std::exception& e) {
    if (reason) *reason = e.what();
    return false;
  }
}

}  // namespace fedstream
