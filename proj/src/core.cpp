#include "rasood/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace rasood {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::BadPercentile: return "BadPercentile";
    case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DimensionOverflow: return "DimensionOverflow";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BadParameter: return "BadParameter";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::NonFinitePayload: return "NonFinitePayload";
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DegenerateSplit: return "DegenerateSplit";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::MissingLabels: return "MissingLabels";
    case ErrorCode::EigenFailure: return "EigenFailure";
    case ErrorCode::BadSubspaceDim: return "BadSubspaceDim";
    case ErrorCode::DegenerateSet: return "DegenerateSet";
    case ErrorCode::ZeroMassSample: return "ZeroMassSample";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::ProfileLayerMismatch: return "ProfileLayerMismatch";
    case ErrorCode::BadLayerIndex: return "BadLayerIndex";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw Error(ErrorCode::DimensionMismatch, "matrix buffer holds " + std::to_string(values_.size()) +
                                                  " values, expected " + std::to_string(rows * cols));
  }
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  std::vector<double> values;
  values.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw Error(ErrorCode::RaggedRows, "rows differ in length");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Matrix(rows.size(), cols, std::move(values));
}

const char* to_string(DistTag tag) {
  switch (tag) {
    case DistTag::IdTrain: return "id_train";
    case DistTag::IdTest: return "id_test";
    case DistTag::Ood: return "ood";
  }
  return "unknown";
}

DistTag parse_dist_tag(const std::string& text) {
  if (text == "id_train") return DistTag::IdTrain;
  if (text == "id_test") return DistTag::IdTest;
  if (text == "ood") return DistTag::Ood;
  throw Error(ErrorCode::InvalidArgument, "unknown distribution tag '" + text + "'");
}

ActivationSet::ActivationSet(Matrix data, DistTag tag, std::optional<std::vector<std::uint32_t>> labels)
    : data_(std::move(data)), tag_(tag), labels_(std::move(labels)) {
  if (data_.rows() == 0 || data_.cols() == 0) {
    throw Error(ErrorCode::EmptyInput, "activation set needs N >= 1 and D >= 1");
  }
  require_finite(data_.values(), "activation set");
  if (labels_ && labels_->size() != data_.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "label count differs from sample count");
  }
}

const std::vector<std::uint32_t>& ActivationSet::labels() const {
  if (!labels_) throw Error(ErrorCode::MissingLabels, "activation set carries no labels");
  return *labels_;
}

ActivationSet ActivationSet::with_tag(DistTag tag) const { return ActivationSet(data_, tag, labels_); }

ReferenceProfile::ReferenceProfile(std::vector<double> mu, std::uint64_t count, std::uint64_t source_checksum)
    : mu_(std::move(mu)), count_(count), source_checksum_(source_checksum) {
  if (mu_.empty()) throw Error(ErrorCode::EmptyInput, "reference profile is empty");
  if (count_ == 0) throw Error(ErrorCode::InvalidArgument, "reference profile count must be >= 1");
  require_finite(mu_, "reference profile");
  if (!std::is_sorted(mu_.begin(), mu_.end())) {
    throw Error(ErrorCode::InvalidArgument, "reference profile must be non-decreasing");
  }
}

LinearHead::LinearHead(Matrix weights, std::vector<double> bias, std::vector<std::string> class_names)
    : weights_(std::move(weights)), bias_(std::move(bias)), class_names_(std::move(class_names)) {
  if (weights_.rows() < 2) throw Error(ErrorCode::InvalidArgument, "linear head needs C >= 2 classes");
  if (weights_.cols() == 0) throw Error(ErrorCode::EmptyInput, "linear head has D = 0");
  if (bias_.size() != weights_.rows()) throw Error(ErrorCode::DimensionMismatch, "bias length differs from C");
  if (!class_names_.empty() && class_names_.size() != weights_.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "class name count differs from C");
  }
  require_finite(weights_.values(), "head weights");
  require_finite(bias_, "head bias");
}

std::vector<double> LinearHead::logits(std::span<const double> a) const {
  if (a.size() != dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "activation length " + std::to_string(a.size()) + " vs head D " + std::to_string(dim()));
  }
  std::vector<double> z(num_classes());
  for (std::size_t c = 0; c < z.size(); ++c) z[c] = dot(weights_.row(c), a) + bias_[c];
  return z;
}

std::size_t ScoreSet::num_id() const { return static_cast<std::size_t>(std::count(is_id.begin(), is_id.end(), true)); }

void ScoreSet::append(const ScoreSet& other) {
  scores.insert(scores.end(), other.scores.begin(), other.scores.end());
  is_id.insert(is_id.end(), other.is_id.begin(), other.is_id.end());
}

Permutation::Permutation(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
  std::vector<bool> seen(indices_.size(), false);
  for (std::size_t i : indices_) {
    if (i >= indices_.size() || seen[i]) throw Error(ErrorCode::InvalidArgument, "indices are not a bijection");
    seen[i] = true;
  }
}

void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::NonFiniteInput, std::string(what) + " has a non-finite entry at " + std::to_string(i));
    }
  }
}

Permutation ascending_sort_permutation(std::span<const double> a) {
  if (a.empty()) throw Error(ErrorCode::EmptyInput, "cannot rank an empty vector");
  require_finite(a, "ranked vector");
  std::vector<std::size_t> idx(a.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t l, std::size_t r) { return a[l] < a[r]; });
  return Permutation(std::move(idx));
}

std::vector<double> sorted_copy(std::span<const double> a) {
  std::vector<double> s(a.begin(), a.end());
  std::sort(s.begin(), s.end());
  return s;
}

double percentile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::EmptyInput, "percentile of an empty vector");
  if (!(p >= 0.0 && p <= 100.0)) throw Error(ErrorCode::BadPercentile, "p = " + std::to_string(p));
  const double h = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double percentile(std::span<const double> a, double p) {
  if (a.empty()) throw Error(ErrorCode::EmptyInput, "percentile of an empty vector");
  require_finite(a, "percentile input");
  const auto s = sorted_copy(a);
  return percentile_sorted(s, p);
}

double logsumexp(std::span<const double> z, double temperature) {
  if (z.empty()) throw Error(ErrorCode::EmptyInput, "logsumexp of an empty vector");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::NonPositiveTemperature, "T = " + std::to_string(temperature));
  }
  require_finite(z, "logits");
  const double peak = *std::max_element(z.begin(), z.end()) / temperature;
  double acc = 0.0;
  for (double v : z) acc += std::exp(v / temperature - peak);
  return temperature * (peak + std::log(acc));
}

std::vector<double> softmax(std::span<const double> z, double temperature) {
  const double lse = logsumexp(z, temperature) / temperature;
  std::vector<double> p(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::exp(z[i] / temperature - lse);
  return p;
}

double l2_norm(std::span<const double> a) {
  std::vector<double> sq(a.size());
  std::transform(a.begin(), a.end(), sq.begin(), [](double v) { return v * v; });
  std::sort(sq.begin(), sq.end());
  double acc = 0.0;
  for (double v : sq) acc += v;
  return std::sqrt(acc);
}

double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::DimensionMismatch, "dot product of unequal lengths");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

std::size_t argmax(std::span<const double> z) {
  if (z.empty()) throw Error(ErrorCode::EmptyInput, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < z.size(); ++i)
    if (z[i] > z[best]) best = i;
  return best;
}

std::uint64_t checksum(const Matrix& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::uint64_t shape[2] = {m.rows(), m.cols()};
  mix(shape, sizeof(shape));
  for (double v : m.values()) mix(&v, sizeof(v));
  return h;
}

}  // namespace rasood
