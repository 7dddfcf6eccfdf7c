#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rasood/core.hpp"
#include "rasood/enhancers.hpp"

namespace rasood {

/// splitmix64 step; also used to expand seeds.
std::uint64_t splitmix64(std::uint64_t& state);

/// xoshiro256** seeded from splitmix64. Streams are fully determined by the
/// seed, so every platform reproduces them bit for bit.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller; the second value of each pair is cached.
  double normal();

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Independent stream for one (seed, stream index) pair, e.g. one sample row.
Xoshiro256 stream_for(std::uint64_t seed, std::uint64_t index);

struct RectGaussSpec {
  double mu = 0.0;
  double sigma = 1.0;
  std::size_t dim = 1;
  std::size_t n = 1;
  bool rectified = true;
  std::uint64_t seed = 0;
  DistTag tag = DistTag::IdTrain;
};

ActivationSet sample_rect_gauss(const RectGaussSpec& spec);

struct ClassClouds {
  ActivationSet set;
  LinearHead head;
  Matrix means;
};

/// C Gaussian clouds (unit noise) around means on a sphere of radius
/// mean_scale, plus the nearest-mean linear head W = 2 m, b = -||m||^2.
ClassClouds sample_class_clouds(std::size_t classes, std::size_t dim, std::size_t n_per_class, double mean_scale,
                                std::uint64_t seed, DistTag tag = DistTag::IdTrain);

/// Same class means as a previous draw, fresh noise under another seed.
ActivationSet resample_class_clouds(const Matrix& means, std::size_t n_per_class, std::uint64_t seed, DistTag tag);

enum class LayerActivation { Relu, GeluApprox, None };

const char* to_string(LayerActivation act);
LayerActivation parse_layer_activation(const std::string& name);

/// 0.5 x (1 + tanh(0.7978845608 (x + 0.044715 x^3)))
double gelu_approx(double x);

struct DenseLayer {
  Matrix weights;  // out x in
  std::vector<double> bias;
  LayerActivation activation = LayerActivation::Relu;

  std::size_t in_dim() const noexcept { return weights.cols(); }
  std::size_t out_dim() const noexcept { return weights.rows(); }
  std::vector<double> apply(std::span<const double> x) const;
};

class ToyNetwork {
 public:
  ToyNetwork(std::vector<DenseLayer> layers, LinearHead head);

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  const LinearHead& head() const noexcept { return head_; }
  std::size_t input_dim() const;

  /// Random (untrained) network: He-style Gaussian weights, zero bias.
  static ToyNetwork random(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
                           const std::vector<LayerActivation>& activations, std::size_t classes, std::uint64_t seed);

 private:
  std::vector<DenseLayer> layers_;
  LinearHead head_;
};

using LayerEdits = std::map<std::size_t, EnhancerSpec>;

std::vector<double> forward_with_layer_edits(std::span<const double> x, const ToyNetwork& net, const LayerEdits& edits);

/// Post-activation outputs of layer `layer_index` for every input row.
ActivationSet capture_layer(const ActivationSet& inputs, const ToyNetwork& net, std::size_t layer_index,
                            const LayerEdits& upstream_edits = {});

}  // namespace rasood
