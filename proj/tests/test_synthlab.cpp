#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "rasood/metrics.hpp"
#include "rasood/synthlab.hpp"

using namespace rasood;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

}  // namespace

TEST_CASE("splitmix64 reference values") {
  // First outputs for seed 0 as published with the algorithm.
  std::uint64_t state = 0;
  CHECK(splitmix64(state) == 0xe220a8397b1dcdafULL);
  CHECK(splitmix64(state) == 0x6e789e6aa1b965f4ULL);
  CHECK(splitmix64(state) == 0x06c45d188009454fULL);
}

TEST_CASE("xoshiro streams are deterministic and uniform in range") {
  Xoshiro256 a(42);
  Xoshiro256 b(42);
  Xoshiro256 c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    differs = differs || x != c.next();
    const double u = a.uniform();
    b.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(differs);

  auto s1 = stream_for(7, 3);
  auto s2 = stream_for(7, 3);
  auto s3 = stream_for(7, 4);
  CHECK(s1.next() == s2.next());
  CHECK(s1.next() != s3.next());
}

TEST_CASE("normal draws match mean and spread") {
  Xoshiro256 rng(99);
  const int n = 1000000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
  // var of the sample variance for a normal is 2 / n
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("rectified Gaussian degenerate spreads") {
  RectGaussSpec spec;
  spec.mu = 3.0;
  spec.sigma = 1e-12;
  spec.dim = 5;
  spec.n = 10;
  const auto near_const = sample_rect_gauss(spec);
  for (double v : near_const.data().values()) CHECK(v == doctest::Approx(3.0).epsilon(1e-9));
  spec.mu = -5.0;
  const auto floored = sample_rect_gauss(spec);
  for (double v : floored.data().values()) CHECK(v == 0.0);
}

TEST_CASE("unrectified Gaussian moments") {
  RectGaussSpec spec;
  spec.mu = 0.7;
  spec.sigma = 2.0;
  spec.dim = 1000;
  spec.n = 1000;
  spec.rectified = false;
  spec.seed = 11;
  const auto set = sample_rect_gauss(spec);
  const auto v = set.data().values();
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  const double n = static_cast<double>(v.size());
  CHECK(std::abs(mean - 0.7) < 4.0 * 2.0 / std::sqrt(n));
  CHECK(std::abs(std::sqrt(var) - 2.0) < 4.0 * 2.0 / std::sqrt(2.0 * n));
  CHECK(std::any_of(v.begin(), v.end(), [](double x) { return x < 0.0; }));
}

TEST_CASE("rectified outputs are nonnegative and seeds reproduce") {
  RectGaussSpec spec;
  spec.mu = 0.2;
  spec.dim = 32;
  spec.n = 50;
  spec.seed = 5;
  spec.tag = DistTag::Ood;
  const auto a = sample_rect_gauss(spec);
  const auto b = sample_rect_gauss(spec);
  CHECK(a.data() == b.data());
  CHECK(a.tag() == DistTag::Ood);
  for (double v : a.data().values()) CHECK(v >= 0.0);

  // Row streams are indexed by row, so a larger n extends rather than reshuffles.
  RectGaussSpec more = spec;
  more.n = 60;
  const auto c = sample_rect_gauss(more);
  for (std::size_t i = 0; i < spec.n; ++i)
    for (std::size_t j = 0; j < spec.dim; ++j) CHECK(c.data()(i, j) == a.data()(i, j));

  spec.sigma = 0.0;
  CHECK(code_of([&] { sample_rect_gauss(spec); }) == ErrorCode::BadParameter);
}

TEST_CASE("class clouds") {
  const auto clouds = sample_class_clouds(10, 64, 50, 12.0, 2);
  CHECK(clouds.set.size() == 500);
  CHECK(clouds.set.dim() == 64);
  const auto acc = accuracy_delta(clouds.set, clouds.head, EnhancerSpec::identity());
  CHECK(acc.base > 0.99);
  for (std::size_t c = 0; c < 10; ++c) {
    double norm = 0.0;
    for (std::size_t j = 0; j < 64; ++j) norm += clouds.means(c, j) * clouds.means(c, j);
    CHECK(std::sqrt(norm) == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(clouds.head.bias()[c] == doctest::Approx(-norm).epsilon(1e-12));
    CHECK(clouds.head.weights()(c, 0) == 2.0 * clouds.means(c, 0));
  }
  const auto again = sample_class_clouds(10, 64, 50, 12.0, 2);
  CHECK(again.set.data() == clouds.set.data());
  CHECK(again.set.labels() == clouds.set.labels());

  const auto fresh = resample_class_clouds(clouds.means, 50, 3, DistTag::IdTest);
  CHECK(fresh.tag() == DistTag::IdTest);
  CHECK_FALSE(fresh.data() == clouds.set.data());

  CHECK(code_of([] { sample_class_clouds(1, 4, 2, 1.0, 0); }) == ErrorCode::BadParameter);
  CHECK(code_of([] { sample_class_clouds(2, 4, 2, 0.0, 0); }) == ErrorCode::BadParameter);
}

TEST_CASE("two classes in one dimension split at the midpoint") {
  const auto clouds = sample_class_clouds(2, 1, 5, 3.0, 17);
  const double m0 = clouds.means(0, 0);
  const double m1 = clouds.means(1, 0);
  CHECK(std::abs(m0) == doctest::Approx(3.0));
  const double mid = (m0 + m1) / 2.0;
  if (m0 != m1) {
    const auto left = clouds.head.logits(std::vector<double>{mid - 1e-6});
    const auto right = clouds.head.logits(std::vector<double>{mid + 1e-6});
    CHECK(argmax(left) != argmax(right));
    const auto at = clouds.head.logits(std::vector<double>{mid});
    CHECK(at[0] == doctest::Approx(at[1]));
  }
}

TEST_CASE("gelu approximation") {
  CHECK(gelu_approx(0.0) == 0.0);
  const double x = 1.3;
  CHECK(gelu_approx(x) == 0.5 * x * (1.0 + std::tanh(0.7978845608 * (x + 0.044715 * x * x * x))));
  CHECK(gelu_approx(-1.0) < 0.0);
  CHECK(gelu_approx(5.0) == doctest::Approx(5.0).epsilon(1e-5));
  CHECK(parse_layer_activation("gelu") == LayerActivation::GeluApprox);
  CHECK(std::string(to_string(LayerActivation::Relu)) == "relu");
  CHECK(code_of([] { parse_layer_activation("swish"); }) == ErrorCode::ConfigError);
}

TEST_CASE("toy network forward and capture") {
  const auto net = ToyNetwork::random(6, {8, 5}, {LayerActivation::Relu, LayerActivation::GeluApprox}, 3, 21);
  CHECK(net.input_dim() == 6);
  CHECK(net.layers()[1].out_dim() == 5);

  RectGaussSpec spec;
  spec.dim = 6;
  spec.n = 20;
  spec.rectified = false;
  spec.seed = 4;
  const auto inputs = sample_rect_gauss(spec);

  const auto hidden0 = capture_layer(inputs, net, 0);
  const auto hidden1 = capture_layer(inputs, net, 1);
  CHECK(hidden0.dim() == 8);
  CHECK(hidden1.dim() == 5);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto h0 = net.layers()[0].apply(inputs.row(i));
    const auto h1 = net.layers()[1].apply(h0);
    for (std::size_t j = 0; j < 8; ++j) CHECK(hidden0.data()(i, j) == h0[j]);
    for (std::size_t j = 0; j < 5; ++j) CHECK(hidden1.data()(i, j) == h1[j]);
    CHECK(forward_with_layer_edits(inputs.row(i), net, {}) == net.head().logits(h1));
  }

  const auto profile = build_profile(hidden1.with_tag(DistTag::IdTrain));
  const LayerEdits last{{1, EnhancerSpec::ras(profile)}};
  const LayerEdits ident{{0, EnhancerSpec::identity()}, {1, EnhancerSpec::identity()}};
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    CHECK(forward_with_layer_edits(inputs.row(i), net, last) ==
          forward(hidden1.row(i), net.head(), EnhancerSpec::ras(profile)));
    CHECK(forward_with_layer_edits(inputs.row(i), net, ident) == forward_with_layer_edits(inputs.row(i), net, {}));
  }

  // upstream edits change what a later layer sees
  const auto first_profile = build_profile(hidden0);
  const auto edited = capture_layer(inputs, net, 1, {{0, EnhancerSpec::ras(first_profile)}});
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto h0 = enhance(std::vector<double>(hidden0.row(i).begin(), hidden0.row(i).end()),
                            EnhancerSpec::ras(first_profile));
    const auto h1 = net.layers()[1].apply(h0);
    for (std::size_t j = 0; j < 5; ++j) CHECK(edited.data()(i, j) == h1[j]);
  }

  CHECK(code_of([&] { capture_layer(inputs, net, 2); }) == ErrorCode::BadLayerIndex);
  CHECK(code_of([&] { forward_with_layer_edits(inputs.row(0), net, {{0, EnhancerSpec::ras(profile)}}); }) ==
        ErrorCode::ProfileLayerMismatch);
  CHECK(code_of([&] { forward_with_layer_edits(inputs.row(0), net, {{5, EnhancerSpec::identity()}}); }) ==
        ErrorCode::BadLayerIndex);
}

TEST_CASE("identity layer without activation passes input through") {
  DenseLayer layer{identity(4), std::vector<double>(4, 0.0), LayerActivation::None};
  const ToyNetwork net({layer}, LinearHead(Matrix(2, 4), {0.0, 0.0}));
  const ActivationSet inputs(Matrix::from_rows({{1, -2, 3, -4}, {0.5, 0, 0, 9}}), DistTag::IdTest);
  const auto out = capture_layer(inputs, net, 0);
  CHECK(out.data() == inputs.data());

  DenseLayer bad{identity(3), std::vector<double>(3, 0.0), LayerActivation::Relu};
  CHECK(code_of([&] { ToyNetwork({layer, bad}, LinearHead(Matrix(2, 3), {0.0, 0.0})); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("random toy networks are seed deterministic") {
  const auto a = ToyNetwork::random(4, {6}, {LayerActivation::Relu}, 2, 8);
  const auto b = ToyNetwork::random(4, {6}, {LayerActivation::Relu}, 2, 8);
  CHECK(a.layers()[0].weights == b.layers()[0].weights);
  CHECK(a.head().weights() == b.head().weights());
  CHECK(code_of([] { ToyNetwork::random(4, {6, 3}, {LayerActivation::Relu}, 2, 8); }) == ErrorCode::BadParameter);
}
