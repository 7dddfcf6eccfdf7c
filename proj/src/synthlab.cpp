#include "rasood/synthlab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rasood {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Xoshiro256::Xoshiro256(std::uint64_t seed) {
  for (auto& word : s_) word = splitmix64(seed);
}

std::uint64_t Xoshiro256::next() {
  auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Xoshiro256::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Xoshiro256::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Xoshiro256 stream_for(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t state = seed;
  const std::uint64_t base = splitmix64(state);
  std::uint64_t mixed = base ^ (index * 0xd1b54a32d192ed03ULL);
  return Xoshiro256(splitmix64(mixed));
}

ActivationSet sample_rect_gauss(const RectGaussSpec& spec) {
  if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma) || !std::isfinite(spec.mu)) {
    throw Error(ErrorCode::BadParameter, "rectified Gaussian needs finite mu and sigma > 0");
  }
  if (spec.dim == 0 || spec.n == 0) throw Error(ErrorCode::EmptyInput, "rectified Gaussian needs n, D >= 1");
  Matrix data(spec.n, spec.dim);
  for (std::size_t i = 0; i < spec.n; ++i) {
    Xoshiro256 rng = stream_for(spec.seed, i);
    for (double& v : data.row(i)) {
      v = spec.mu + spec.sigma * rng.normal();
      if (spec.rectified) v = std::max(v, 0.0);
    }
  }
  return ActivationSet(std::move(data), spec.tag);
}

namespace {

constexpr std::uint64_t kMeanStreamBase = 1ULL << 62;

}  // namespace

ActivationSet resample_class_clouds(const Matrix& means, std::size_t n_per_class, std::uint64_t seed, DistTag tag) {
  const std::size_t classes = means.rows();
  const std::size_t dim = means.cols();
  Matrix data(classes * n_per_class, dim);
  std::vector<std::uint32_t> labels(classes * n_per_class);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const std::size_t c = i / n_per_class;
    labels[i] = static_cast<std::uint32_t>(c);
    Xoshiro256 rng = stream_for(seed, i);
    auto row = data.row(i);
    for (std::size_t j = 0; j < dim; ++j) row[j] = means(c, j) + rng.normal();
  }
  return ActivationSet(std::move(data), tag, std::move(labels));
}

ClassClouds sample_class_clouds(std::size_t classes, std::size_t dim, std::size_t n_per_class, double mean_scale,
                                std::uint64_t seed, DistTag tag) {
  if (classes < 2 || dim == 0 || n_per_class == 0) {
    throw Error(ErrorCode::BadParameter, "class clouds need C >= 2, D >= 1, n >= 1");
  }
  if (!(mean_scale > 0.0)) throw Error(ErrorCode::BadParameter, "mean_scale must be positive");
  Matrix means(classes, dim);
  for (std::size_t c = 0; c < classes; ++c) {
    Xoshiro256 rng = stream_for(seed, kMeanStreamBase + c);
    auto row = means.row(c);
    double norm = 0.0;
    do {
      for (double& v : row) v = rng.normal();
      norm = l2_norm(row);
    } while (norm == 0.0);
    for (double& v : row) v *= mean_scale / norm;
  }
  Matrix weights(classes, dim);
  std::vector<double> bias(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t j = 0; j < dim; ++j) weights(c, j) = 2.0 * means(c, j);
    bias[c] = -dot(means.row(c), means.row(c));
  }
  return ClassClouds{resample_class_clouds(means, n_per_class, seed, tag),
                     LinearHead(std::move(weights), std::move(bias)), means};
}

const char* to_string(LayerActivation act) {
  switch (act) {
    case LayerActivation::Relu: return "relu";
    case LayerActivation::GeluApprox: return "gelu";
    case LayerActivation::None: return "none";
  }
  return "unknown";
}

LayerActivation parse_layer_activation(const std::string& name) {
  if (name == "relu") return LayerActivation::Relu;
  if (name == "gelu") return LayerActivation::GeluApprox;
  if (name == "none") return LayerActivation::None;
  throw Error(ErrorCode::ConfigError, "unknown layer activation '" + name + "'");
}

double gelu_approx(double x) {
  constexpr double kSqrt2OverPi = 0.7978845608;
  constexpr double kCubic = 0.044715;
  return 0.5 * x * (1.0 + std::tanh(kSqrt2OverPi * (x + kCubic * x * x * x)));
}

std::vector<double> DenseLayer::apply(std::span<const double> x) const {
  if (x.size() != in_dim()) throw Error(ErrorCode::DimensionMismatch, "layer input length");
  std::vector<double> out(out_dim());
  for (std::size_t r = 0; r < out.size(); ++r) {
    const double pre = dot(weights.row(r), x) + bias[r];
    switch (activation) {
      case LayerActivation::Relu: out[r] = std::max(pre, 0.0); break;
      case LayerActivation::GeluApprox: out[r] = gelu_approx(pre); break;
      case LayerActivation::None: out[r] = pre; break;
    }
  }
  return out;
}

ToyNetwork::ToyNetwork(std::vector<DenseLayer> layers, LinearHead head)
    : layers_(std::move(layers)), head_(std::move(head)) {
  if (layers_.empty()) throw Error(ErrorCode::InvalidArgument, "toy network needs at least one layer");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& layer = layers_[k];
    if (layer.bias.size() != layer.out_dim()) throw Error(ErrorCode::DimensionMismatch, "layer bias length");
    if (k > 0 && layer.in_dim() != layers_[k - 1].out_dim()) {
      throw Error(ErrorCode::DimensionMismatch, "layer " + std::to_string(k) + " does not chain");
    }
  }
  if (layers_.back().out_dim() != head_.dim()) throw Error(ErrorCode::DimensionMismatch, "head D differs from last layer");
}

std::size_t ToyNetwork::input_dim() const { return layers_.front().in_dim(); }

ToyNetwork ToyNetwork::random(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
                              const std::vector<LayerActivation>& activations, std::size_t classes,
                              std::uint64_t seed) {
  if (hidden_dims.size() != activations.size() || hidden_dims.empty()) {
    throw Error(ErrorCode::BadParameter, "one activation per hidden layer required");
  }
  std::vector<DenseLayer> layers;
  std::size_t in = input_dim;
  for (std::size_t k = 0; k < hidden_dims.size(); ++k) {
    Xoshiro256 rng = stream_for(seed, k);
    DenseLayer layer{Matrix(hidden_dims[k], in), std::vector<double>(hidden_dims[k], 0.0), activations[k]};
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    for (double& w : layer.weights.values()) w = scale * rng.normal();
    layers.push_back(std::move(layer));
    in = hidden_dims[k];
  }
  Xoshiro256 rng = stream_for(seed, hidden_dims.size());
  Matrix head_w(classes, in);
  const double scale = std::sqrt(1.0 / static_cast<double>(in));
  for (double& w : head_w.values()) w = scale * rng.normal();
  return ToyNetwork(std::move(layers), LinearHead(std::move(head_w), std::vector<double>(classes, 0.0)));
}

namespace {

void check_edits(const ToyNetwork& net, const LayerEdits& edits) {
  for (const auto& [index, spec] : edits) {
    if (index >= net.layers().size()) {
      throw Error(ErrorCode::BadLayerIndex, "edit targets layer " + std::to_string(index) + " of " +
                                                std::to_string(net.layers().size()));
    }
    if (spec.kind() == EnhancerKind::Dice) throw Error(ErrorCode::BadParameter, "DICE edits the head, not a layer");
    if (spec.is_ras_family() && spec.profile().dim() != net.layers()[index].out_dim()) {
      throw Error(ErrorCode::ProfileLayerMismatch, "profile D " + std::to_string(spec.profile().dim()) +
                                                       " but layer " + std::to_string(index) + " emits " +
                                                       std::to_string(net.layers()[index].out_dim()));
    }
  }
}

std::vector<double> run_layers(std::span<const double> x, const ToyNetwork& net, const LayerEdits& edits,
                               std::size_t last_layer) {
  std::vector<double> h(x.begin(), x.end());
  for (std::size_t k = 0; k <= last_layer; ++k) {
    h = net.layers()[k].apply(h);
    if (const auto it = edits.find(k); it != edits.end()) h = enhance(h, it->second);
  }
  return h;
}

}  // namespace

std::vector<double> forward_with_layer_edits(std::span<const double> x, const ToyNetwork& net, const LayerEdits& edits) {
  check_edits(net, edits);
  return net.head().logits(run_layers(x, net, edits, net.layers().size() - 1));
}

ActivationSet capture_layer(const ActivationSet& inputs, const ToyNetwork& net, std::size_t layer_index,
                            const LayerEdits& upstream_edits) {
  if (layer_index >= net.layers().size()) {
    throw Error(ErrorCode::BadLayerIndex, "layer " + std::to_string(layer_index) + " of " +
                                              std::to_string(net.layers().size()));
  }
  check_edits(net, upstream_edits);
  Matrix out(inputs.size(), net.layers()[layer_index].out_dim());
  LayerEdits before;
  for (const auto& [k, spec] : upstream_edits)
    if (k < layer_index) before.emplace(k, spec);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto h = run_layers(inputs.row(i), net, before, layer_index);
    std::copy(h.begin(), h.end(), out.row(i).begin());
  }
  return ActivationSet(std::move(out), inputs.tag(), inputs.maybe_labels());
}

}  // namespace rasood
