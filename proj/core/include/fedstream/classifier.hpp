#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fedstream/envelope.hpp"
#include "fedstream/forest.hpp"
#include "fedstream/mlp.hpp"
#include "fedstream/nb.hpp"
#include "fedstream/schema.hpp"
#include "fedstream/types.hpp"

namespace fedstream {

// Pluggable streaming-classifier contract. Single writer for train_one;
// predict on a quiescent model is safe from many threads.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual ModelKind kind() const = 0;
  virtual uint64_t schema_hash() const = 0;
  virtual size_t dimension() const = 0;
  virtual uint64_t records_seen() const = 0;

  virtual ClassScores predict(const FeatureVector& x) const = 0;
  virtual void train_one(const FeatureVector& x, ClassLabel y) = 0;

  virtual std::vector<uint8_t> serialize_payload() const = 0;
  virtual std::unique_ptr<Classifier> clone() const = 0;

 protected:
  void check_dimension(const FeatureVector& x) const {
    if (x.size() != dimension()) throw DimensionMismatch(x.size(), dimension());
  }
};

class NbClassifier final : public Classifier {
 public:
  explicit NbClassifier(SchemaPtr schema, double alpha = kNbDefaultAlpha);
  NbClassifier(SchemaPtr schema, HistogramSet hist, double alpha = kNbDefaultAlpha);

  ModelKind kind() const override { return ModelKind::nb; }
  uint64_t schema_hash() const override { return schema_->digest(); }
  size_t dimension() const override { return schema_->dimension(); }
  uint64_t records_seen() const override {
    return hist_.class_total(ClassLabel::benign) + hist_.class_total(ClassLabel::malicious);
  }

  ClassScores predict(const FeatureVector& x) const override;
  void train_one(const FeatureVector& x, ClassLabel y) override;

  std::vector<uint8_t> serialize_payload() const override { return hist_.serialize(); }
  std::unique_ptr<Classifier> clone() const override {
    return std::make_unique<NbClassifier>(*this);
  }

  const HistogramSet& histograms() const { return hist_; }
  const FeatureSchema& schema() const { return *schema_; }

 private:
  void bin_indices(const FeatureVector& x, std::vector<uint32_t>& out) const;

  SchemaPtr schema_;
  HistogramSet hist_;
  double alpha_;
};

class MlpClassifier final : public Classifier {
 public:
  MlpClassifier(SchemaPtr schema, const MlpHyper& hyper,
                const std::vector<size_t>& hidden_sizes = default_hidden_sizes());
  MlpClassifier(SchemaPtr schema, MlpParams params, const MlpHyper& hyper,
                uint64_t records_seen);

  ModelKind kind() const override { return ModelKind::mlp; }
  uint64_t schema_hash() const override { return schema_->digest(); }
  size_t dimension() const override { return schema_->dimension(); }
  uint64_t records_seen() const override { return records_seen_; }

  ClassScores predict(const FeatureVector& x) const override;
  void train_one(const FeatureVector& x, ClassLabel y) override;

  std::vector<uint8_t> serialize_payload() const override { return params_.serialize(); }
  std::unique_ptr<Classifier> clone() const override {
    return std::make_unique<MlpClassifier>(*this);
  }

  const MlpParams& params() const { return params_; }
  void set_hyper(const MlpHyper& hyper) { hyper_ = hyper; }

 private:
  // Raw features span ranges like [0,2048] and [0,1]; the net consumes
  // per-feature [0,1]-normalized inputs.
  std::vector<double> normalize(const FeatureVector& x) const;

  SchemaPtr schema_;
  MlpParams params_;
  MlpHyper hyper_;
  uint64_t records_seen_ = 0;
};

class ForestClassifier final : public Classifier {
 public:
  ForestClassifier(SchemaPtr schema, const ForestHyper& hyper, uint64_t seed);
  ForestClassifier(SchemaPtr schema, Ensemble ensemble, uint64_t records_seen);

  ModelKind kind() const override { return ModelKind::forest; }
  uint64_t schema_hash() const override { return schema_->digest(); }
  size_t dimension() const override { return schema_->dimension(); }
  uint64_t records_seen() const override { return records_seen_; }

  ClassScores predict(const FeatureVector& x) const override;
  void train_one(const FeatureVector& x, ClassLabel y) override;

  std::vector<uint8_t> serialize_payload() const override {
    return ensemble_.serialize("", 0);
  }
  std::unique_ptr<Classifier> clone() const override {
    return std::make_unique<ForestClassifier>(*this);
  }

  const Ensemble& ensemble() const { return ensemble_; }
  void reseed(uint64_t seed) { ensemble_.reseed(seed); }

 private:
  SchemaPtr schema_;
  Ensemble ensemble_;
  uint64_t records_seen_ = 0;
};

// Factory for a fresh model of the given kind.
struct ModelConfig {
  ModelKind kind = ModelKind::nb;
  double nb_alpha = kNbDefaultAlpha;
  MlpHyper mlp;
  std::vector<size_t> mlp_hidden = default_hidden_sizes();
  ForestHyper forest;
  uint64_t seed = 0;
};

std::unique_ptr<Classifier> make_model(const ModelConfig& config, SchemaPtr schema);

ModelEnvelope export_model(const Classifier& model, const std::string& org_id, uint64_t round);

// Schema digest must match the envelope; forests get their generator
// reseeded with rng_seed.
std::unique_ptr<Classifier> import_model(const ModelEnvelope& env, SchemaPtr schema,
                                         uint64_t rng_seed = 0);

// Per-kind combiner dispatch. All envelopes must share kind and schema;
// |a| must equal the envelope count. Merged round = max input round,
// records_seen = sum.
ModelEnvelope merge_envelopes(const std::vector<ModelEnvelope>& envelopes,
                              const MergeWeights& a, uint64_t seed);

// Strict payload grammar check: the payload must parse as parameter
// sections of its kind and re-serialize to the identical bytes. Anything
// else (unknown sections, trailing bytes, smuggled records) fails.
bool validate_envelope(const ModelEnvelope& env, std::string* reason = nullptr);

}  // namespace fedstream
