#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rasood {

enum class ErrorCode {
  NonFiniteInput,
  EmptyInput,
  BadPercentile,
  NonPositiveTemperature,
  DimensionMismatch,
  DimensionOverflow,
  InvalidArgument,
  BadParameter,
  IoFailure,
  BadMagic,
  UnsupportedVersion,
  TruncatedPayload,
  NonFinitePayload,
  RaggedRows,
  NonNumericCell,
  ConfigError,
  DegenerateSplit,
  ZeroVector,
  SingularCovariance,
  MissingLabels,
  EigenFailure,
  BadSubspaceDim,
  DegenerateSet,
  ZeroMassSample,
  ZeroVariance,
  ProfileLayerMismatch,
  BadLayerIndex,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the toolkit carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

enum class DistTag : std::uint8_t { IdTrain = 0, IdTest = 1, Ood = 2 };

const char* to_string(DistTag tag);
DistTag parse_dist_tag(const std::string& text);

/// N x D activations with optional class labels and a provenance tag.
class ActivationSet {
 public:
  ActivationSet(Matrix data, DistTag tag, std::optional<std::vector<std::uint32_t>> labels = std::nullopt);

  std::size_t size() const noexcept { return data_.rows(); }
  std::size_t dim() const noexcept { return data_.cols(); }
  const Matrix& data() const noexcept { return data_; }
  std::span<const double> row(std::size_t i) const { return data_.row(i); }
  DistTag tag() const noexcept { return tag_; }
  bool has_labels() const noexcept { return labels_.has_value(); }
  const std::vector<std::uint32_t>& labels() const;
  const std::optional<std::vector<std::uint32_t>>& maybe_labels() const noexcept { return labels_; }

  ActivationSet with_tag(DistTag tag) const;

 private:
  Matrix data_;
  DistTag tag_;
  std::optional<std::vector<std::uint32_t>> labels_;
};

/// Mean of ascending-sorted activation vectors.
class ReferenceProfile {
 public:
  ReferenceProfile(std::vector<double> mu, std::uint64_t count, std::uint64_t source_checksum);

  const std::vector<double>& mu() const noexcept { return mu_; }
  std::size_t dim() const noexcept { return mu_.size(); }
  std::uint64_t count() const noexcept { return count_; }
  std::uint64_t source_checksum() const noexcept { return source_checksum_; }

 private:
  std::vector<double> mu_;
  std::uint64_t count_;
  std::uint64_t source_checksum_;
};

/// Affine classifier z = W a + b with C >= 2 classes.
class LinearHead {
 public:
  LinearHead(Matrix weights, std::vector<double> bias, std::vector<std::string> class_names = {});

  std::size_t num_classes() const noexcept { return weights_.rows(); }
  std::size_t dim() const noexcept { return weights_.cols(); }
  const Matrix& weights() const noexcept { return weights_; }
  const std::vector<double>& bias() const noexcept { return bias_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }

  std::vector<double> logits(std::span<const double> a) const;

 private:
  Matrix weights_;
  std::vector<double> bias_;
  std::vector<std::string> class_names_;
};

struct ScoreSet {
  std::vector<double> scores;
  std::vector<bool> is_id;

  std::size_t size() const noexcept { return scores.size(); }
  std::size_t num_id() const;
  std::size_t num_ood() const { return size() - num_id(); }
  void append(const ScoreSet& other);
};

/// A bijection on [0, D).
class Permutation {
 public:
  explicit Permutation(std::vector<std::size_t> indices);

  std::size_t size() const noexcept { return indices_.size(); }
  std::size_t operator[](std::size_t j) const { return indices_[j]; }
  const std::vector<std::size_t>& indices() const noexcept { return indices_; }

 private:
  std::vector<std::size_t> indices_;
};

void require_finite(std::span<const double> values, const char* what);

/// Stable ascending argsort: ties keep ascending original index.
Permutation ascending_sort_permutation(std::span<const double> a);

std::vector<double> sorted_copy(std::span<const double> a);

/// Linear-interpolation percentile, p in [0, 100].
double percentile(std::span<const double> a, double p);

/// Same as percentile() but on data already sorted ascending.
double percentile_sorted(std::span<const double> sorted, double p);

/// T * log(sum exp(z / T)), max-shifted.
double logsumexp(std::span<const double> z, double temperature = 1.0);

std::vector<double> softmax(std::span<const double> z, double temperature = 1.0);

/// Euclidean norm summed over ascending squares, so any permutation of the
/// input gives a bitwise-identical result.
double l2_norm(std::span<const double> a);

double dot(std::span<const double> x, std::span<const double> y);

/// Index of the largest entry, lowest index on ties.
std::size_t argmax(std::span<const double> z);

/// FNV-1a over the shape and the IEEE bytes of every entry.
std::uint64_t checksum(const Matrix& m);

}  // namespace rasood
