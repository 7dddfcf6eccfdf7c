#include "rasood/scorers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "rasood/linalg.hpp"

namespace rasood {

const char* to_string(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::Ebo: return "ebo";
    case ScorerKind::Msp: return "msp";
    case ScorerKind::Mls: return "mls";
    case ScorerKind::TempScaleMsp: return "tempscale";
    case ScorerKind::Gen: return "gen";
    case ScorerKind::Mds: return "mds";
    case ScorerKind::Rmds: return "rmds";
    case ScorerKind::Vim: return "vim";
  }
  return "unknown";
}

ScorerKind parse_scorer_kind(const std::string& name) {
  for (auto kind : {ScorerKind::Ebo, ScorerKind::Msp, ScorerKind::Mls, ScorerKind::TempScaleMsp, ScorerKind::Gen,
                    ScorerKind::Mds, ScorerKind::Rmds, ScorerKind::Vim}) {
    if (name == to_string(kind)) return kind;
  }
  throw Error(ErrorCode::ConfigError, "unknown scorer '" + name + "'");
}

double score_ebo(std::span<const double> z, double temperature) { return logsumexp(z, temperature); }

double score_msp(std::span<const double> z) { return score_tempscale(z, 1.0); }

double score_mls(std::span<const double> z) {
  if (z.empty()) throw Error(ErrorCode::EmptyInput, "no logits");
  require_finite(z, "logits");
  return *std::max_element(z.begin(), z.end());
}

double score_tempscale(std::span<const double> z, double temperature) {
  // max softmax = exp(max/T - lse/T)
  const double lse = logsumexp(z, temperature);
  return std::exp((score_mls(z) - lse) / temperature);
}

double score_gen(std::span<const double> z, double gamma, std::size_t top_m) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorCode::BadParameter, "GEN gamma must lie in (0, 1]");
  if (top_m == 0) top_m = std::min<std::size_t>(100, z.size());
  if (top_m < 1 || top_m > z.size()) throw Error(ErrorCode::BadParameter, "GEN top_m must lie in [1, C]");
  auto probs = softmax(z);
  std::partial_sort(probs.begin(), probs.begin() + static_cast<std::ptrdiff_t>(top_m), probs.end(),
                    std::greater<>());
  double acc = 0.0;
  for (std::size_t k = 0; k < top_m; ++k) acc += std::pow(probs[k], gamma) * std::pow(1.0 - probs[k], gamma);
  return -acc;
}

namespace {

struct Moments {
  std::vector<double> mean;
  Matrix scatter;  // sum of outer products of centered rows
};

Matrix regularized_precision(Matrix cov, double ridge) {
  const std::size_t d = cov.rows();
  double trace = 0.0;
  for (std::size_t j = 0; j < d; ++j) trace += cov(j, j);
  const double shift = ridge * trace / static_cast<double>(d);
  for (std::size_t j = 0; j < d; ++j) cov(j, j) += shift;
  return linalg::spd_inverse(cov);
}

void add_outer(Matrix& acc, std::span<const double> diff) {
  const std::size_t d = diff.size();
  for (std::size_t r = 0; r < d; ++r) {
    auto row = acc.row(r);
    for (std::size_t c = 0; c < d; ++c) row[c] += diff[r] * diff[c];
  }
}

std::vector<double> column_mean(const ActivationSet& set) {
  std::vector<double> mean(set.dim(), 0.0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto row = set.row(i);
    for (std::size_t j = 0; j < set.dim(); ++j) mean[j] += row[j];
  }
  for (double& v : mean) v /= static_cast<double>(set.size());
  return mean;
}

Matrix covariance(const ActivationSet& set, std::span<const double> mean) {
  const std::size_t d = set.dim();
  Matrix cov(d, d);
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto row = set.row(i);
    for (std::size_t j = 0; j < d; ++j) diff[j] = row[j] - mean[j];
    add_outer(cov, diff);
  }
  for (double& v : cov.values()) v /= static_cast<double>(set.size());
  return cov;
}

std::vector<double> subtract(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "vector lengths differ");
  std::vector<double> out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] - b[j];
  return out;
}

}  // namespace

MdsModel fit_mds(const ActivationSet& id_train, double ridge) {
  if (!id_train.has_labels()) throw Error(ErrorCode::MissingLabels, "MDS needs class labels");
  if (!(ridge >= 0.0)) throw Error(ErrorCode::BadParameter, "ridge must be non-negative");
  const auto& labels = id_train.labels();
  const std::size_t d = id_train.dim();
  const std::size_t classes = *std::max_element(labels.begin(), labels.end()) + 1;

  Matrix means(classes, d);
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t i = 0; i < id_train.size(); ++i) {
    const auto row = id_train.row(i);
    auto m = means.row(labels[i]);
    for (std::size_t j = 0; j < d; ++j) m[j] += row[j];
    ++counts[labels[i]];
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] == 0) throw Error(ErrorCode::MissingLabels, "class " + std::to_string(c) + " has no samples");
    for (double& v : means.row(c)) v /= static_cast<double>(counts[c]);
  }

  Matrix within(d, d);
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < id_train.size(); ++i) {
    const auto row = id_train.row(i);
    const auto m = means.row(labels[i]);
    for (std::size_t j = 0; j < d; ++j) diff[j] = row[j] - m[j];
    add_outer(within, diff);
  }
  for (double& v : within.values()) v /= static_cast<double>(id_train.size());

  MdsModel model;
  model.class_means = std::move(means);
  model.shared_precision = regularized_precision(std::move(within), ridge);
  return model;
}

MdsModel fit_rmds(const ActivationSet& id_train, double ridge) {
  MdsModel model = fit_mds(id_train, ridge);
  model.background_mean = column_mean(id_train);
  model.background_precision = regularized_precision(covariance(id_train, model.background_mean), ridge);
  return model;
}

std::vector<double> class_distances(std::span<const double> a, const MdsModel& model) {
  if (a.size() != model.class_means.cols()) throw Error(ErrorCode::DimensionMismatch, "MDS feature length");
  require_finite(a, "MDS input");
  std::vector<double> out(model.class_means.rows());
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = linalg::quadratic_form(model.shared_precision, subtract(a, model.class_means.row(c)));
  }
  return out;
}

double score_mds(std::span<const double> a, const MdsModel& model) {
  const auto dist = class_distances(a, model);
  return -*std::min_element(dist.begin(), dist.end());
}

double score_rmds(std::span<const double> a, const MdsModel& model) {
  if (model.background_precision.empty()) throw Error(ErrorCode::InvalidArgument, "model has no background fit");
  const auto dist = class_distances(a, model);
  const double background =
      linalg::quadratic_form(model.background_precision, subtract(a, model.background_mean));
  return -(*std::min_element(dist.begin(), dist.end()) - background);
}

VimModel fit_vim(const ActivationSet& id_train, const LinearHead& head, std::size_t subspace_dim) {
  const std::size_t d = id_train.dim();
  if (subspace_dim < 1 || subspace_dim >= d) {
    throw Error(ErrorCode::BadSubspaceDim, "ViM needs 1 <= K < D, got K = " + std::to_string(subspace_dim));
  }
  if (head.dim() != d) throw Error(ErrorCode::DimensionMismatch, "ViM head and features differ in D");

  VimModel model;
  model.feature_mean = column_mean(id_train);
  const auto eig = linalg::jacobi_eigen(covariance(id_train, model.feature_mean));
  model.principal_basis = Matrix(d, subspace_dim);
  model.residual_basis = Matrix(d, d - subspace_dim);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < subspace_dim; ++k) model.principal_basis(i, k) = eig.vectors(i, k);
    for (std::size_t k = subspace_dim; k < d; ++k) model.residual_basis(i, k - subspace_dim) = eig.vectors(i, k);
  }

  double logit_sum = 0.0;
  double residual_sum = 0.0;
  for (std::size_t i = 0; i < id_train.size(); ++i) {
    logit_sum += score_mls(head.logits(id_train.row(i)));
    residual_sum += vim_residual_norm(id_train.row(i), model);
  }
  if (!(residual_sum > 0.0)) throw Error(ErrorCode::EigenFailure, "training features have no residual component");
  model.alpha = logit_sum / residual_sum;
  if (!(model.alpha > 0.0) || !std::isfinite(model.alpha)) {
    throw Error(ErrorCode::BadParameter, "ViM alpha must be positive; mean max logit is " +
                                             std::to_string(logit_sum / static_cast<double>(id_train.size())));
  }
  return model;
}

double vim_residual_norm(std::span<const double> a, const VimModel& model) {
  const auto centered = subtract(a, model.feature_mean);
  const Matrix& basis = model.residual_basis;
  double acc = 0.0;
  for (std::size_t k = 0; k < basis.cols(); ++k) {
    double coord = 0.0;
    for (std::size_t i = 0; i < basis.rows(); ++i) coord += basis(i, k) * centered[i];
    acc += coord * coord;
  }
  return std::sqrt(acc);
}

double score_vim_logits(std::span<const double> a, std::span<const double> z, const VimModel& model) {
  const double virtual_logit = model.alpha * vim_residual_norm(a, model);
  std::vector<double> extended(z.begin(), z.end());
  extended.push_back(virtual_logit);
  return logsumexp(z) - logsumexp(extended);
}

double score_vim(std::span<const double> a, const LinearHead& head, const VimModel& model) {
  return score_vim_logits(a, head.logits(a), model);
}

ScorerSpec calibrate_scorer(ScorerSpec spec, const ActivationSet& id_train, const LinearHead& head,
                            const EnhancerSpec& enhancer) {
  if (!spec.uses_features()) return spec;
  const ActivationSet edited(enhance(id_train.data(), enhancer), id_train.tag(), id_train.maybe_labels());
  switch (spec.kind) {
    case ScorerKind::Mds: spec.mds = fit_mds(edited, spec.mds_ridge); break;
    case ScorerKind::Rmds: spec.mds = fit_rmds(edited, spec.mds_ridge); break;
    case ScorerKind::Vim: spec.vim = fit_vim(edited, head, spec.vim_subspace_dim); break;
    default: break;
  }
  return spec;
}

double score_sample(std::span<const double> a, const LinearHead& head, const EnhancerSpec& enhancer,
                    const ScorerSpec& scorer) {
  auto need_mds = [&]() -> const MdsModel& {
    if (!scorer.mds) throw Error(ErrorCode::InvalidArgument, "scorer has not been fitted");
    return *scorer.mds;
  };
  switch (scorer.kind) {
    case ScorerKind::Mds: return score_mds(enhance(a, enhancer), need_mds());
    case ScorerKind::Rmds: return score_rmds(enhance(a, enhancer), need_mds());
    case ScorerKind::Vim: {
      if (!scorer.vim) throw Error(ErrorCode::InvalidArgument, "ViM scorer has not been fitted");
      return score_vim_logits(enhance(a, enhancer), forward(a, head, enhancer), *scorer.vim);
    }
    default: break;
  }
  const auto z = forward(a, head, enhancer);
  switch (scorer.kind) {
    case ScorerKind::Ebo: return score_ebo(z, scorer.temperature);
    case ScorerKind::Msp: return score_msp(z);
    case ScorerKind::Mls: return score_mls(z);
    case ScorerKind::TempScaleMsp: return score_tempscale(z, scorer.temperature);
    case ScorerKind::Gen:
      return score_gen(z, scorer.gen_gamma, scorer.gen_top_m.value_or(std::min<std::size_t>(100, z.size())));
    default: break;
  }
  throw Error(ErrorCode::InvalidArgument, "unhandled scorer kind");
}

ScoreSet score_set(const ActivationSet& set, const LinearHead& head, const EnhancerSpec& enhancer,
                   const ScorerSpec& scorer) {
  ScoreSet out;
  out.scores.reserve(set.size());
  const bool is_id = set.tag() != DistTag::Ood;
  for (std::size_t i = 0; i < set.size(); ++i) {
    out.scores.push_back(score_sample(set.row(i), head, enhancer, scorer));
    out.is_id.push_back(is_id);
  }
  return out;
}

}  // namespace rasood
