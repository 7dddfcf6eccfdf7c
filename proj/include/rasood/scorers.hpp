#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rasood/core.hpp"
#include "rasood/enhancers.hpp"

namespace rasood {

// All scores follow "higher = more in-distribution".

enum class ScorerKind { Ebo, Msp, Mls, TempScaleMsp, Gen, Mds, Rmds, Vim };

const char* to_string(ScorerKind kind);
ScorerKind parse_scorer_kind(const std::string& name);

double score_ebo(std::span<const double> z, double temperature = 1.0);
double score_msp(std::span<const double> z);
double score_mls(std::span<const double> z);
double score_tempscale(std::span<const double> z, double temperature);

/// -sum over the top_m softmax probabilities of p^gamma (1 - p)^gamma.
/// top_m = 0 means min(100, C).
double score_gen(std::span<const double> z, double gamma = 0.1, std::size_t top_m = 0);

struct MdsModel {
  Matrix class_means;           // C x D
  Matrix shared_precision;      // D x D
  std::vector<double> background_mean;
  Matrix background_precision;  // D x D, empty for plain MDS
};

/// Class means plus shared within-class covariance (1/N normalizer). The
/// ridge is relative: ridge * trace(Sigma) / D is added to the diagonal.
MdsModel fit_mds(const ActivationSet& id_train, double ridge = 1e-6);
MdsModel fit_rmds(const ActivationSet& id_train, double ridge = 1e-6);

/// Squared Mahalanobis distance of a to each class mean.
std::vector<double> class_distances(std::span<const double> a, const MdsModel& model);
double score_mds(std::span<const double> a, const MdsModel& model);
double score_rmds(std::span<const double> a, const MdsModel& model);

struct VimModel {
  std::vector<double> feature_mean;
  Matrix principal_basis;  // D x K
  Matrix residual_basis;   // D x (D - K)
  double alpha = 1.0;
};

VimModel fit_vim(const ActivationSet& id_train, const LinearHead& head, std::size_t subspace_dim);
double vim_residual_norm(std::span<const double> a, const VimModel& model);
double score_vim(std::span<const double> a, const LinearHead& head, const VimModel& model);
/// Same score from precomputed logits (used when features were enhanced).
double score_vim_logits(std::span<const double> a, std::span<const double> z, const VimModel& model);

struct ScorerSpec {
  ScorerKind kind = ScorerKind::Ebo;
  double temperature = 1.0;
  double gen_gamma = 0.1;
  std::optional<std::size_t> gen_top_m;  // default min(100, C)
  double mds_ridge = 1e-6;
  std::size_t vim_subspace_dim = 0;
  std::optional<MdsModel> mds;
  std::optional<VimModel> vim;

  bool uses_features() const noexcept {
    return kind == ScorerKind::Mds || kind == ScorerKind::Rmds || kind == ScorerKind::Vim;
  }
};

/// Fits the MDS/RMDS/ViM model when the scorer needs one. Fitting happens
/// on the enhanced training features, so RAS + MDS sees RAS-shifted data.
ScorerSpec calibrate_scorer(ScorerSpec spec, const ActivationSet& id_train, const LinearHead& head,
                            const EnhancerSpec& enhancer);

double score_sample(std::span<const double> a, const LinearHead& head, const EnhancerSpec& enhancer,
                    const ScorerSpec& scorer);

ScoreSet score_set(const ActivationSet& set, const LinearHead& head, const EnhancerSpec& enhancer,
                   const ScorerSpec& scorer);

}  // namespace rasood
