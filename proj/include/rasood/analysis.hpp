#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rasood/core.hpp"
#include "rasood/enhancers.hpp"

namespace rasood {

enum class GammaEstimator { PerSample, Pooled };

/// Per-sample mass ratios Q_p / Q. Samples with Q = 0 are skipped and their
/// indices reported in `zero_mass`.
struct MassRatios {
  std::vector<double> ratios;
  std::vector<std::size_t> zero_mass;
};

MassRatios mass_ratios(const ActivationSet& set, double p);

struct GammaPoint {
  double p = 0.0;
  double gamma = 0.0;
  double std_error = 0.0;
  std::vector<std::size_t> id_excluded;
  std::vector<std::size_t> ood_excluded;
};

/// Gamma(p) = mean_ID(Q_p/Q) - mean_OoD(Q_p/Q). Throws ZeroMassSample if a
/// side has no usable sample left after exclusion.
GammaPoint gamma_at(const ActivationSet& id_set, const ActivationSet& ood_set, double p,
                    GammaEstimator estimator = GammaEstimator::PerSample);

struct GammaCurve {
  std::vector<double> percentiles;
  std::vector<double> gamma;
  std::vector<double> std_error;
  std::size_t excluded_samples = 0;
};

GammaCurve gamma_curve(const ActivationSet& id_set, const ActivationSet& ood_set, const std::vector<double>& grid,
                       GammaEstimator estimator = GammaEstimator::PerSample);

/// Parses "start:stop:step" into an inclusive grid.
std::vector<double> parse_grid(const std::string& text);

struct MuSigmaCondition {
  double ratio_id = 0.0;
  double ratio_ood = 0.0;
  bool holds = false;
};

/// Pooled mean over pooled (population) standard deviation per set.
MuSigmaCondition mu_sigma_condition(const ActivationSet& id_set, const ActivationSet& ood_set);

/// True when every entry is >= 0.
bool looks_rectified(const ActivationSet& set);

struct ScalingDiagnostics {
  bool rectified = false;
  std::vector<double> factors;               // r = Q / Q_p per usable sample
  std::vector<std::size_t> sample_index;     // row each factor came from
  std::vector<std::size_t> degenerate;       // rows with Q_p = 0
  std::size_t below_one = 0;                 // factors outside [1, inf)
};

ScalingDiagnostics scaling_diagnostics(const ActivationSet& set, double p);

struct ResidualProfile {
  std::vector<double> ood_mean_ranked;
  std::vector<double> residual;
};

ResidualProfile residual_profile(const ActivationSet& ood_set, const ReferenceProfile& profile);

struct EnergyStats {
  double mean = 0.0;
  double stddev = 0.0;
  double baseline_mean = 0.0;
  double baseline_stddev = 0.0;
  double delta_mean_vs_baseline = 0.0;
  double auroc_delta = 0.0;  // only meaningful when computed from an ID/OoD pair
};

/// EBO statistics on one set under `enhancer` versus `baseline`.
EnergyStats energy_stats(const ActivationSet& set, const LinearHead& head, const EnhancerSpec& enhancer,
                         const EnhancerSpec& baseline, double temperature = 1.0);

struct EnergyAblationRow {
  std::string method;
  EnergyStats id;
  EnergyStats ood;
  double auroc = 0.0;
  double auroc_delta = 0.0;
};

/// Rows for EBO, +inhibit, +excite and +RAS on one ID/OoD pair.
std::vector<EnergyAblationRow> energy_ablation(const ActivationSet& id_set, const ActivationSet& ood_set,
                                               const LinearHead& head, const ReferenceProfile& profile,
                                               double temperature = 1.0);

}  // namespace rasood
