#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rasood/core.hpp"

namespace rasood {

enum class EnhancerKind { Ras, RasInhibit, RasExcite, React, AshP, AshB, AshS, Scale, Dice, L2Norm, Identity };

const char* to_string(EnhancerKind kind);
EnhancerKind parse_enhancer_kind(const std::string& name);

inline constexpr double kDefaultReactPercentile = 90.0;
inline constexpr double kDefaultAshPercentile = 90.0;
inline constexpr double kDefaultScalePercentile = 85.0;

/// Boolean C x D mask over head weights.
class WeightMask {
 public:
  WeightMask(std::size_t rows, std::size_t cols, bool fill = false) : rows_(rows), cols_(cols), keep_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool operator()(std::size_t r, std::size_t c) const { return keep_[r * cols_ + c]; }
  void set(std::size_t r, std::size_t c, bool keep) { keep_[r * cols_ + c] = keep; }
  std::size_t kept_in_row(std::size_t r) const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<bool> keep_;
};

/// A calibrated activation edit. Build through the named factories so the
/// per-kind parameter invariants hold.
class EnhancerSpec {
 public:
  static EnhancerSpec identity();
  static EnhancerSpec ras(ReferenceProfile profile);
  static EnhancerSpec ras_inhibit(ReferenceProfile profile);
  static EnhancerSpec ras_excite(ReferenceProfile profile);
  static EnhancerSpec react(double threshold_c, double percentile_p = kDefaultReactPercentile);
  static EnhancerSpec ash_p(double p = kDefaultAshPercentile);
  static EnhancerSpec ash_b(double p = kDefaultAshPercentile);
  static EnhancerSpec ash_s(double p = kDefaultAshPercentile);
  static EnhancerSpec scale(double p = kDefaultScalePercentile);
  static EnhancerSpec dice(WeightMask mask, double sparsity_p);
  static EnhancerSpec l2norm(double target_norm);

  EnhancerKind kind() const noexcept { return kind_; }
  double percentile_p() const noexcept { return percentile_p_; }
  const ReferenceProfile& profile() const;
  double react_threshold() const;
  const WeightMask& dice_mask() const;
  double l2_target() const;

  bool is_ras_family() const noexcept {
    return kind_ == EnhancerKind::Ras || kind_ == EnhancerKind::RasInhibit || kind_ == EnhancerKind::RasExcite;
  }

 private:
  explicit EnhancerSpec(EnhancerKind kind) : kind_(kind) {}

  EnhancerKind kind_;
  double percentile_p_ = 0.0;
  std::optional<ReferenceProfile> profile_;
  std::optional<double> react_threshold_;
  std::optional<WeightMask> dice_mask_;
  std::optional<double> l2_target_;
};

ReferenceProfile build_profile(const ActivationSet& id_train);

std::vector<double> apply_ras(std::span<const double> a, const ReferenceProfile& profile);
std::vector<double> apply_ras_inhibit(std::span<const double> a, const ReferenceProfile& profile);
std::vector<double> apply_ras_excite(std::span<const double> a, const ReferenceProfile& profile);

std::vector<double> apply_react(std::span<const double> a, double c);
double calibrate_react(const ActivationSet& id_train, double p);

struct AshSplit {
  double threshold = 0.0;
  std::vector<std::size_t> kept;
  std::vector<std::size_t> pruned;
  double q = 0.0;    // sum of all entries
  double q_p = 0.0;  // sum of entries strictly above the threshold
};

/// Splits a at its p-th percentile; kept entries are strictly above it.
AshSplit ash_split(std::span<const double> a, double p);

/// SCALE / ASH-S exponent Q / Q_p. Throws DegenerateSplit when Q_p = 0.
double scaling_factor(std::span<const double> a, double p);

std::vector<double> apply_ash_p(std::span<const double> a, double p);
std::vector<double> apply_ash_b(std::span<const double> a, double p);
std::vector<double> apply_ash_s(std::span<const double> a, double p);
std::vector<double> apply_scale(std::span<const double> a, double p);

WeightMask calibrate_dice(const ActivationSet& id_train, const LinearHead& head, double sparsity_p);
std::vector<double> apply_dice(std::span<const double> a, const LinearHead& head, const WeightMask& mask);

std::vector<double> apply_l2norm(std::span<const double> a, double target_norm);

/// Edited activations. DICE leaves activations alone (it edits the head).
std::vector<double> enhance(std::span<const double> a, const EnhancerSpec& spec);
Matrix enhance(const Matrix& rows, const EnhancerSpec& spec);

std::vector<double> forward(std::span<const double> a, const LinearHead& head, const EnhancerSpec& spec);
Matrix forward(const ActivationSet& set, const LinearHead& head, const EnhancerSpec& spec);

}  // namespace rasood
