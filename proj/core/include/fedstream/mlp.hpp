#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedstream/envelope.hpp"
#include "fedstream/types.hpp"

namespace fedstream {

// Dense layer, row-major weights (out x in).
struct MlpLayer {
  size_t in = 0;
  size_t out = 0;
  std::vector<double> weights;  // out*in
  std::vector<double> bias;     // out
};

// Small MLP; hidden activations ReLU, softmax output over two classes.
struct MlpParams {
  std::vector<MlpLayer> layers;

  size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  size_t parameter_count() const;
  bool same_arch(const MlpParams& other) const;

  std::vector<uint8_t> serialize() const;
  static MlpParams deserialize(std::span<const uint8_t> payload);
};

struct MlpHyper {
  double learning_rate = 0.01;
  uint64_t init_seed = 0;
};

inline const std::vector<size_t>& default_hidden_sizes() {
  static const std::vector<size_t> sizes = {64, 32, 16, 8, 4};
  return sizes;
}

// Glorot-uniform weights from a seeded generator, zero biases.
MlpParams mlp_init(size_t input_dim, const std::vector<size_t>& hidden_sizes, uint64_t seed);

// Softmax class probabilities; both in (0,1), summing to 1.
ClassScores mlp_forward(const MlpParams& p, std::span<const double> x);

// Cross-entropy of the softmax output against y.
double mlp_loss(const MlpParams& p, std::span<const double> x, ClassLabel y);

// Full backprop gradient, same shape as the parameters.
MlpParams mlp_gradient(const MlpParams& p, std::span<const double> x, ClassLabel y);

// One SGD step on (x, y).
void mlp_step(MlpParams& p, std::span<const double> x, ClassLabel y, const MlpHyper& hyper);

// Weighted average of all weights and biases; architectures must agree.
MlpParams mlp_merge(const std::vector<const MlpParams*>& models, const MergeWeights& a);

}  // namespace fedstream
