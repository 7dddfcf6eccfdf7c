#include "rasood/enhancers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rasood {

const char* to_string(EnhancerKind kind) {
  switch (kind) {
    case EnhancerKind::Ras: return "ras";
    case EnhancerKind::RasInhibit: return "ras_inhibit";
    case EnhancerKind::RasExcite: return "ras_excite";
    case EnhancerKind::React: return "react";
    case EnhancerKind::AshP: return "ash_p";
    case EnhancerKind::AshB: return "ash_b";
    case EnhancerKind::AshS: return "ash_s";
    case EnhancerKind::Scale: return "scale";
    case EnhancerKind::Dice: return "dice";
    case EnhancerKind::L2Norm: return "l2norm";
    case EnhancerKind::Identity: return "identity";
  }
  return "unknown";
}

EnhancerKind parse_enhancer_kind(const std::string& name) {
  for (auto kind : {EnhancerKind::Ras, EnhancerKind::RasInhibit, EnhancerKind::RasExcite, EnhancerKind::React,
                    EnhancerKind::AshP, EnhancerKind::AshB, EnhancerKind::AshS, EnhancerKind::Scale,
                    EnhancerKind::Dice, EnhancerKind::L2Norm, EnhancerKind::Identity}) {
    if (name == to_string(kind)) return kind;
  }
  throw Error(ErrorCode::ConfigError, "unknown enhancer '" + name + "'");
}

std::size_t WeightMask::kept_in_row(std::size_t r) const {
  std::size_t n = 0;
  for (std::size_t c = 0; c < cols_; ++c) n += (*this)(r, c) ? 1 : 0;
  return n;
}

namespace {

void check_percentile(double p) {
  if (!(p >= 0.0 && p <= 100.0)) throw Error(ErrorCode::BadPercentile, "p = " + std::to_string(p));
}

void check_profile_dim(std::span<const double> a, const ReferenceProfile& profile) {
  if (a.size() != profile.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "activation length " + std::to_string(a.size()) + " vs profile D " + std::to_string(profile.dim()));
  }
}

template <typename Combine>
std::vector<double> shift_ranks(std::span<const double> a, const ReferenceProfile& profile, Combine combine) {
  check_profile_dim(a, profile);
  const Permutation pi = ascending_sort_permutation(a);
  const auto& mu = profile.mu();
  std::vector<double> out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[pi[j]] = combine(a[pi[j]], mu[j]);
  return out;
}

}  // namespace

EnhancerSpec EnhancerSpec::identity() { return EnhancerSpec(EnhancerKind::Identity); }

EnhancerSpec EnhancerSpec::ras(ReferenceProfile profile) {
  EnhancerSpec s(EnhancerKind::Ras);
  s.profile_ = std::move(profile);
  return s;
}

EnhancerSpec EnhancerSpec::ras_inhibit(ReferenceProfile profile) {
  EnhancerSpec s(EnhancerKind::RasInhibit);
  s.profile_ = std::move(profile);
  return s;
}

EnhancerSpec EnhancerSpec::ras_excite(ReferenceProfile profile) {
  EnhancerSpec s(EnhancerKind::RasExcite);
  s.profile_ = std::move(profile);
  return s;
}

EnhancerSpec EnhancerSpec::react(double threshold_c, double percentile_p) {
  if (!std::isfinite(threshold_c)) throw Error(ErrorCode::NonFiniteInput, "ReAct threshold must be finite");
  check_percentile(percentile_p);
  EnhancerSpec s(EnhancerKind::React);
  s.react_threshold_ = threshold_c;
  s.percentile_p_ = percentile_p;
  return s;
}

EnhancerSpec EnhancerSpec::ash_p(double p) {
  check_percentile(p);
  EnhancerSpec s(EnhancerKind::AshP);
  s.percentile_p_ = p;
  return s;
}

EnhancerSpec EnhancerSpec::ash_b(double p) {
  check_percentile(p);
  EnhancerSpec s(EnhancerKind::AshB);
  s.percentile_p_ = p;
  return s;
}

EnhancerSpec EnhancerSpec::ash_s(double p) {
  check_percentile(p);
  EnhancerSpec s(EnhancerKind::AshS);
  s.percentile_p_ = p;
  return s;
}

EnhancerSpec EnhancerSpec::scale(double p) {
  check_percentile(p);
  EnhancerSpec s(EnhancerKind::Scale);
  s.percentile_p_ = p;
  return s;
}

EnhancerSpec EnhancerSpec::dice(WeightMask mask, double sparsity_p) {
  check_percentile(sparsity_p);
  EnhancerSpec s(EnhancerKind::Dice);
  s.dice_mask_ = std::move(mask);
  s.percentile_p_ = sparsity_p;
  return s;
}

EnhancerSpec EnhancerSpec::l2norm(double target_norm) {
  if (!(target_norm > 0.0) || !std::isfinite(target_norm)) {
    throw Error(ErrorCode::BadParameter, "l2 target norm must be positive and finite");
  }
  EnhancerSpec s(EnhancerKind::L2Norm);
  s.l2_target_ = target_norm;
  return s;
}

const ReferenceProfile& EnhancerSpec::profile() const {
  if (!profile_) throw Error(ErrorCode::InvalidArgument, std::string(to_string(kind_)) + " carries no profile");
  return *profile_;
}

double EnhancerSpec::react_threshold() const {
  if (!react_threshold_) throw Error(ErrorCode::InvalidArgument, "enhancer carries no ReAct threshold");
  return *react_threshold_;
}

const WeightMask& EnhancerSpec::dice_mask() const {
  if (!dice_mask_) throw Error(ErrorCode::InvalidArgument, "enhancer carries no DICE mask");
  return *dice_mask_;
}

double EnhancerSpec::l2_target() const {
  if (!l2_target_) throw Error(ErrorCode::InvalidArgument, "enhancer carries no l2 target");
  return *l2_target_;
}

ReferenceProfile build_profile(const ActivationSet& id_train) {
  const std::size_t d = id_train.dim();
  std::vector<double> sum(d, 0.0);
  std::vector<double> ranked(d);
  for (std::size_t i = 0; i < id_train.size(); ++i) {
    const auto row = id_train.row(i);
    std::copy(row.begin(), row.end(), ranked.begin());
    std::sort(ranked.begin(), ranked.end());
    for (std::size_t j = 0; j < d; ++j) sum[j] += ranked[j];
  }
  const double n = static_cast<double>(id_train.size());
  for (double& v : sum) v /= n;
  return ReferenceProfile(std::move(sum), id_train.size(), checksum(id_train.data()));
}

std::vector<double> apply_ras(std::span<const double> a, const ReferenceProfile& profile) {
  return shift_ranks(a, profile, [](double, double m) { return m; });
}

std::vector<double> apply_ras_inhibit(std::span<const double> a, const ReferenceProfile& profile) {
  return shift_ranks(a, profile, [](double v, double m) { return std::min(v, m); });
}

std::vector<double> apply_ras_excite(std::span<const double> a, const ReferenceProfile& profile) {
  return shift_ranks(a, profile, [](double v, double m) { return std::max(v, m); });
}

std::vector<double> apply_react(std::span<const double> a, double c) {
  require_finite(a, "ReAct input");
  std::vector<double> out(a.size());
  std::transform(a.begin(), a.end(), out.begin(), [c](double v) { return std::min(v, c); });
  return out;
}

double calibrate_react(const ActivationSet& id_train, double p) {
  return percentile(id_train.data().values(), p);
}

AshSplit ash_split(std::span<const double> a, double p) {
  if (a.empty()) throw Error(ErrorCode::EmptyInput, "cannot split an empty vector");
  if (!(p >= 0.0 && p < 100.0)) throw Error(ErrorCode::BadPercentile, "split needs 0 <= p < 100, got " + std::to_string(p));
  AshSplit split;
  split.threshold = percentile(a, p);
  for (std::size_t j = 0; j < a.size(); ++j) {
    split.q += a[j];
    if (a[j] > split.threshold) {
      split.kept.push_back(j);
      split.q_p += a[j];
    } else {
      split.pruned.push_back(j);
    }
  }
  return split;
}

double scaling_factor(std::span<const double> a, double p) {
  const AshSplit split = ash_split(a, p);
  if (split.q_p == 0.0) throw Error(ErrorCode::DegenerateSplit, "Q_p = 0, scaling factor undefined");
  return split.q / split.q_p;
}

std::vector<double> apply_ash_p(std::span<const double> a, double p) {
  const AshSplit split = ash_split(a, p);
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t j : split.kept) out[j] = a[j];
  return out;
}

std::vector<double> apply_ash_b(std::span<const double> a, double p) {
  const AshSplit split = ash_split(a, p);
  if (split.kept.empty()) throw Error(ErrorCode::DegenerateSplit, "no activation survives the ASH-B threshold");
  const double level = split.q / static_cast<double>(split.kept.size());
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t j : split.kept) out[j] = level;
  return out;
}

std::vector<double> apply_ash_s(std::span<const double> a, double p) {
  const AshSplit split = ash_split(a, p);
  if (split.kept.empty() || split.q_p == 0.0) {
    throw Error(ErrorCode::DegenerateSplit, "no activation mass survives the ASH-S threshold");
  }
  const double factor = std::exp(split.q / split.q_p);
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t j : split.kept) out[j] = a[j] * factor;
  return out;
}

std::vector<double> apply_scale(std::span<const double> a, double p) {
  const double factor = std::exp(scaling_factor(a, p));
  std::vector<double> out(a.size());
  std::transform(a.begin(), a.end(), out.begin(), [factor](double v) { return v * factor; });
  return out;
}

WeightMask calibrate_dice(const ActivationSet& id_train, const LinearHead& head, double sparsity_p) {
  check_percentile(sparsity_p);
  const std::size_t d = head.dim();
  if (id_train.dim() != d) throw Error(ErrorCode::DimensionMismatch, "DICE calibration set and head differ in D");
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < id_train.size(); ++i) {
    const auto row = id_train.row(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  }
  for (double& v : mean) v /= static_cast<double>(id_train.size());

  const double exact_keep = (100.0 - sparsity_p) * static_cast<double>(d) / 100.0;
  const auto keep = std::min(d, static_cast<std::size_t>(std::ceil(exact_keep - 1e-9)));

  WeightMask mask(head.num_classes(), d);
  std::vector<std::size_t> order(d);
  std::vector<double> contribution(d);
  for (std::size_t c = 0; c < head.num_classes(); ++c) {
    const auto w = head.weights().row(c);
    for (std::size_t j = 0; j < d; ++j) contribution[j] = w[j] * mean[j];
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t l, std::size_t r) { return contribution[l] > contribution[r]; });
    for (std::size_t k = 0; k < keep; ++k) mask.set(c, order[k], true);
  }
  return mask;
}

std::vector<double> apply_dice(std::span<const double> a, const LinearHead& head, const WeightMask& mask) {
  if (a.size() != head.dim() || mask.rows() != head.num_classes() || mask.cols() != head.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "DICE activation, head and mask shapes disagree");
  }
  require_finite(a, "DICE input");
  std::vector<double> z(head.num_classes());
  for (std::size_t c = 0; c < z.size(); ++c) {
    const auto w = head.weights().row(c);
    double acc = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
      if (mask(c, j)) acc += w[j] * a[j];
    z[c] = acc + head.bias()[c];
  }
  return z;
}

std::vector<double> apply_l2norm(std::span<const double> a, double target_norm) {
  require_finite(a, "l2norm input");
  const double norm = l2_norm(a);
  if (norm == 0.0) throw Error(ErrorCode::ZeroVector, "cannot normalize the zero vector");
  std::vector<double> out(a.size());
  const double factor = target_norm / norm;
  std::transform(a.begin(), a.end(), out.begin(), [factor](double v) { return v * factor; });
  return out;
}

std::vector<double> enhance(std::span<const double> a, const EnhancerSpec& spec) {
  switch (spec.kind()) {
    case EnhancerKind::Ras: return apply_ras(a, spec.profile());
    case EnhancerKind::RasInhibit: return apply_ras_inhibit(a, spec.profile());
    case EnhancerKind::RasExcite: return apply_ras_excite(a, spec.profile());
    case EnhancerKind::React: return apply_react(a, spec.react_threshold());
    case EnhancerKind::AshP: return apply_ash_p(a, spec.percentile_p());
    case EnhancerKind::AshB: return apply_ash_b(a, spec.percentile_p());
    case EnhancerKind::AshS: return apply_ash_s(a, spec.percentile_p());
    case EnhancerKind::Scale: return apply_scale(a, spec.percentile_p());
    case EnhancerKind::L2Norm: return apply_l2norm(a, spec.l2_target());
    case EnhancerKind::Dice:
    case EnhancerKind::Identity:
      require_finite(a, "activation");
      return {a.begin(), a.end()};
  }
  throw Error(ErrorCode::InvalidArgument, "unhandled enhancer kind");
}

Matrix enhance(const Matrix& rows, const EnhancerSpec& spec) {
  Matrix out(rows.rows(), rows.cols());
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const auto edited = enhance(rows.row(i), spec);
    std::copy(edited.begin(), edited.end(), out.row(i).begin());
  }
  return out;
}

std::vector<double> forward(std::span<const double> a, const LinearHead& head, const EnhancerSpec& spec) {
  if (spec.kind() == EnhancerKind::Dice) return apply_dice(a, head, spec.dice_mask());
  return head.logits(enhance(a, spec));
}

Matrix forward(const ActivationSet& set, const LinearHead& head, const EnhancerSpec& spec) {
  Matrix out(set.size(), head.num_classes());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto z = forward(set.row(i), head, spec);
    std::copy(z.begin(), z.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace rasood
