#include "fedstream/mlp.hpp"

#include <cmath>

#include "fedstream/bytes.hpp"
#include "fedstream/errors.hpp"
#include "fedstream/rng.hpp"

namespace fedstream {

size_t MlpParams::parameter_count() const {
  size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

bool MlpParams::same_arch(const MlpParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (size_t i = 0; i < layers.size(); ++i)
    if (layers[i].in != other.layers[i].in || layers[i].out != other.layers[i].out) return false;
  return true;
}

MlpParams mlp_init(size_t input_dim, const std::vector<size_t>& hidden_sizes, uint64_t seed) {
  if (hidden_sizes.empty()) throw ConfigError("mlp needs at least one hidden layer");
  if (input_dim == 0) throw ConfigError("mlp input dimension is zero");

  std::vector<size_t> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_sizes.begin(), hidden_sizes.end());
  dims.push_back(2);

  Rng rng(seed);
  MlpParams p;
  p.layers.resize(dims.size() - 1);
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    MlpLayer& layer = p.layers[l];
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.weights.resize(layer.out * layer.in);
    layer.bias.assign(layer.out, 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    for (double& w : layer.weights) w = rng.uniform(-limit, limit);
  }
  return p;
}

namespace {

struct ForwardTrace {
  // Post-activation per layer; [0] is the input itself.
  std::vector<std::vector<double>> activations;
  // Pre-activation per layer.
  std::vector<std::vector<double>> pre;
  double softmax[2] = {0.5, 0.5};
};

ForwardTrace forward_trace(const MlpParams& p, std::span<const double> x) {
  if (x.size() != p.input_dim()) throw DimensionMismatch(x.size(), p.input_dim());
  ForwardTrace t;
  t.activations.reserve(p.layers.size() + 1);
  t.pre.reserve(p.layers.size());
  t.activations.emplace_back(x.begin(), x.end());

  for (size_t l = 0; l < p.layers.size(); ++l) {
    const MlpLayer& layer = p.layers[l];
    const auto& a = t.activations.back();
    std::vector<double> z(layer.out);
    for (size_t o = 0; o < layer.out; ++o) {
      double s = layer.bias[o];
      const double* row = layer.weights.data() + o * layer.in;
      for (size_t i = 0; i < layer.in; ++i) s += row[i] * a[i];
      z[o] = s;
    }
    t.pre.push_back(z);
    const bool last = l + 1 == p.layers.size();
    if (!last) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
    t.activations.push_back(std::move(z));
  }

  const auto& logits = t.activations.back();
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m);
  const double e1 = std::exp(logits[1] - m);
  t.softmax[0] = e0 / (e0 + e1);
  t.softmax[1] = e1 / (e0 + e1);
  return t;
}

}  // namespace

ClassScores mlp_forward(const MlpParams& p, std::span<const double> x) {
  auto t = forward_trace(p, x);
  return {t.softmax[0], t.softmax[1]};
}

double mlp_loss(const MlpParams& p, std::span<const double> x, ClassLabel y) {
  auto t = forward_trace(p, x);
  // log-softmax for stability
  const auto& logits = t.activations.back();
  const double m = std::max(logits[0], logits[1]);
  const double lse = m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m));
  return lse - logits[static_cast<size_t>(y)];
}

MlpParams mlp_gradient(const MlpParams& p, std::span<const double> x, ClassLabel y) {
  auto t = forward_trace(p, x);

  MlpParams g;
  g.layers.resize(p.layers.size());
  for (size_t l = 0; l < p.layers.size(); ++l) {
    g.layers[l].in = p.layers[l].in;
    g.layers[l].out = p.layers[l].out;
    g.layers[l].weights.assign(p.layers[l].weights.size(), 0.0);
    g.layers[l].bias.assign(p.layers[l].bias.size(), 0.0);
  }

  // delta at the output: softmax - onehot(y)
  std::vector<double> delta = {t.softmax[0], t.softmax[1]};
  delta[static_cast<size_t>(y)] -= 1.0;

  for (size_t li = p.layers.size(); li-- > 0;) {
    const MlpLayer& layer = p.layers[li];
    const auto& a_in = t.activations[li];
    auto& gl = g.layers[li];
    for (size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      gl.bias[o] = d;
      double* grow = gl.weights.data() + o * layer.in;
      for (size_t i = 0; i < layer.in; ++i) grow[i] = d * a_in[i];
    }
    if (li == 0) break;
    std::vector<double> prev(layer.in, 0.0);
    for (size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      const double* row = layer.weights.data() + o * layer.in;
      for (size_t i = 0; i < layer.in; ++i) prev[i] += d * row[i];
    }
    // ReLU mask of the previous layer's pre-activation
    const auto& z_prev = t.pre[li - 1];
    for (size_t i = 0; i < prev.size(); ++i)
      if (z_prev[i] <= 0.0) prev[i] = 0.0;
    delta = std::move(prev);
  }
  return g;
}

void mlp_step(MlpParams& p, std::span<const double> x, ClassLabel y, const MlpHyper& hyper) {
  if (hyper.learning_rate == 0.0) {
    // still validates the input dimension
    (void)forward_trace(p, x);
    return;
  }
  MlpParams g = mlp_gradient(p, x, y);
  for (size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    const auto& gl = g.layers[l];
    for (size_t i = 0; i < layer.weights.size(); ++i)
      layer.weights[i] -= hyper.learning_rate * gl.weights[i];
    for (size_t i = 0; i < layer.bias.size(); ++i)
      layer.bias[i] -= hyper.learning_rate * gl.bias[i];
  }
}

MlpParams mlp_merge(const std::vector<const MlpParams*>& models, const MergeWeights& a) {
  if (models.empty()) throw ConfigError("mlp_merge needs at least one model");
  if (a.size() != models.size()) throw WeightArityMismatch(a.size(), models.size());
  for (size_t i = 1; i < models.size(); ++i)
    if (!models[0]->same_arch(*models[i])) throw ArchMismatch();

  MlpParams out;
  out.layers.resize(models[0]->layers.size());
  for (size_t l = 0; l < out.layers.size(); ++l) {
    const auto& ref = models[0]->layers[l];
    auto& layer = out.layers[l];
    layer.in = ref.in;
    layer.out = ref.out;
    layer.weights.assign(ref.weights.size(), 0.0);
    layer.bias.assign(ref.bias.size(), 0.0);
    for (size_t m = 0; m < models.size(); ++m) {
      const double w = a.at(m);
      const auto& src = models[m]->layers[l];
      for (size_t i = 0; i < layer.weights.size(); ++i) layer.weights[i] += w * src.weights[i];
      for (size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] += w * src.bias[i];
    }
  }
  return out;
}

// Payload: "ARCH" (layer count + per-layer dims), then one "LAYR" section
// per layer with row-major weights then biases, 64-bit floats.
std::vector<uint8_t> MlpParams::serialize() const {
  ByteWriter w;
  w.tag("MLPW");
  w.u8(1);

  ByteWriter arch;
  arch.u32(static_cast<uint32_t>(layers.size()));
  for (const auto& l : layers) {
    arch.u32(static_cast<uint32_t>(l.out));
    arch.u32(static_cast<uint32_t>(l.in));
  }
  w.tag("ARCH");
  w.u32(static_cast<uint32_t>(arch.size()));
  w.raw(arch.bytes().data(), arch.size());

  for (const auto& l : layers) {
    ByteWriter sec;
    for (double v : l.weights) sec.f64(v);
    for (double v : l.bias) sec.f64(v);
    w.tag("LAYR");
    w.u32(static_cast<uint32_t>(sec.size()));
    w.raw(sec.bytes().data(), sec.size());
  }
  return w.take();
}

MlpParams MlpParams::deserialize(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  if (r.tag4() != "MLPW") throw PayloadError("not an mlp payload");
  if (r.u8() != 1) throw PayloadError("unsupported mlp payload version");

  if (r.tag4() != "ARCH") throw PayloadError("mlp payload: expected ARCH section");
  ByteReader arch(r.raw(r.u32()));
  const uint32_t n_layers = arch.u32();
  MlpParams p;
  p.layers.resize(n_layers);
  for (auto& l : p.layers) {
    l.out = arch.u32();
    l.in = arch.u32();
    if (l.out == 0 || l.in == 0) throw PayloadError("mlp payload: zero layer dimension");
  }
  arch.expect_done();
  for (size_t i = 1; i < p.layers.size(); ++i)
    if (p.layers[i].in != p.layers[i - 1].out)
      throw PayloadError("mlp payload: layer dimensions do not chain");
  if (!p.layers.empty() && p.layers.back().out != 2)
    throw PayloadError("mlp payload: final layer must have 2 outputs");

  for (auto& l : p.layers) {
    if (r.tag4() != "LAYR") throw PayloadError("mlp payload: expected LAYR section");
    const uint32_t len = r.u32();
    if (len != (l.out * l.in + l.out) * 8)
      throw PayloadError("mlp payload: LAYR length disagrees with dims");
    ByteReader sec(r.raw(len));
    l.weights.resize(l.out * l.in);
    l.bias.resize(l.out);
    for (double& v : l.weights) v = sec.f64();
    for (double& v : l.bias) v = sec.f64();
    sec.expect_done();
  }
  r.expect_done();
  return p;
}

}  // namespace fedstream
