#include "rasood/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rasood/metrics.hpp"
#include "rasood/scorers.hpp"

namespace rasood {

namespace {

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;  // unbiased, 0 for a single value
};

MeanVar mean_var(const std::vector<double>& v) {
  MeanVar out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    for (double x : v) out.var += (x - out.mean) * (x - out.mean);
    out.var /= static_cast<double>(v.size() - 1);
  }
  return out;
}

double population_std(const std::vector<double>& v, double mean) {
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

double pooled_ratio(const ActivationSet& set, double p) {
  double q = 0.0;
  double q_p = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const AshSplit split = ash_split(set.row(i), p);
    q += split.q;
    q_p += split.q_p;
  }
  if (q == 0.0) throw Error(ErrorCode::ZeroMassSample, "pooled activation mass is zero");
  return q_p / q;
}

std::vector<double> ebo_scores(const ActivationSet& set, const LinearHead& head, const EnhancerSpec& enhancer,
                               double temperature) {
  std::vector<double> out(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) out[i] = score_ebo(forward(set.row(i), head, enhancer), temperature);
  return out;
}

ScoreSet tagged_scores(const std::vector<double>& id, const std::vector<double>& ood) {
  ScoreSet s;
  s.scores = id;
  s.scores.insert(s.scores.end(), ood.begin(), ood.end());
  s.is_id.assign(id.size(), true);
  s.is_id.insert(s.is_id.end(), ood.size(), false);
  return s;
}

}  // namespace

MassRatios mass_ratios(const ActivationSet& set, double p) {
  MassRatios out;
  out.ratios.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const AshSplit split = ash_split(set.row(i), p);
    if (split.q == 0.0) {
      out.zero_mass.push_back(i);
      continue;
    }
    out.ratios.push_back(split.q_p / split.q);
  }
  return out;
}

GammaPoint gamma_at(const ActivationSet& id_set, const ActivationSet& ood_set, double p, GammaEstimator estimator) {
  const MassRatios id = mass_ratios(id_set, p);
  const MassRatios ood = mass_ratios(ood_set, p);
  if (id.ratios.empty() || ood.ratios.empty()) {
    throw Error(ErrorCode::ZeroMassSample, "every sample on one side has Q = 0 at p = " + std::to_string(p));
  }
  const MeanVar id_stats = mean_var(id.ratios);
  const MeanVar ood_stats = mean_var(ood.ratios);

  GammaPoint out;
  out.p = p;
  out.std_error = std::sqrt(id_stats.var / static_cast<double>(id.ratios.size()) +
                            ood_stats.var / static_cast<double>(ood.ratios.size()));
  out.id_excluded = id.zero_mass;
  out.ood_excluded = ood.zero_mass;
  out.gamma = estimator == GammaEstimator::PerSample ? id_stats.mean - ood_stats.mean
                                                     : pooled_ratio(id_set, p) - pooled_ratio(ood_set, p);
  return out;
}

GammaCurve gamma_curve(const ActivationSet& id_set, const ActivationSet& ood_set, const std::vector<double>& grid,
                       GammaEstimator estimator) {
  GammaCurve curve;
  for (double p : grid) {
    const GammaPoint point = gamma_at(id_set, ood_set, p, estimator);
    curve.percentiles.push_back(p);
    curve.gamma.push_back(point.gamma);
    curve.std_error.push_back(point.std_error);
    curve.excluded_samples += point.id_excluded.size() + point.ood_excluded.size();
  }
  return curve;
}

std::vector<double> parse_grid(const std::string& text) {
  std::istringstream in(text);
  double start = 0.0;
  double stop = 0.0;
  double step = 0.0;
  char c1 = 0;
  char c2 = 0;
  if (!(in >> start >> c1 >> stop >> c2 >> step) || c1 != ':' || c2 != ':' || !(in >> std::ws).eof()) {
    throw Error(ErrorCode::ConfigError, "grid must look like start:stop:step, got '" + text + "'");
  }
  if (!(step > 0.0) || stop < start) throw Error(ErrorCode::ConfigError, "grid needs step > 0 and stop >= start");
  std::vector<double> grid;
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
  for (std::size_t k = 0; k <= count; ++k) grid.push_back(start + static_cast<double>(k) * step);
  return grid;
}

MuSigmaCondition mu_sigma_condition(const ActivationSet& id_set, const ActivationSet& ood_set) {
  auto ratio = [](const ActivationSet& set, const char* side) {
    const auto values = set.data().values();
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double acc = 0.0;
    for (double v : values) acc += (v - mean) * (v - mean);
    const double sd = std::sqrt(acc / static_cast<double>(values.size()));
    if (!(sd > 0.0)) throw Error(ErrorCode::ZeroVariance, std::string(side) + " activations have zero variance");
    return mean / sd;
  };
  MuSigmaCondition out;
  out.ratio_id = ratio(id_set, "ID");
  out.ratio_ood = ratio(ood_set, "OoD");
  out.holds = out.ratio_id > out.ratio_ood;
  return out;
}

bool looks_rectified(const ActivationSet& set) {
  const auto values = set.data().values();
  return std::all_of(values.begin(), values.end(), [](double v) { return v >= 0.0; });
}

ScalingDiagnostics scaling_diagnostics(const ActivationSet& set, double p) {
  ScalingDiagnostics out;
  out.rectified = looks_rectified(set);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const AshSplit split = ash_split(set.row(i), p);
    if (split.q_p == 0.0) {
      out.degenerate.push_back(i);
      continue;
    }
    const double r = split.q / split.q_p;
    out.factors.push_back(r);
    out.sample_index.push_back(i);
    if (!(r >= 1.0)) ++out.below_one;
  }
  return out;
}

ResidualProfile residual_profile(const ActivationSet& ood_set, const ReferenceProfile& profile) {
  if (ood_set.dim() != profile.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "OoD set D " + std::to_string(ood_set.dim()) + " vs profile D " +
                                                  std::to_string(profile.dim()));
  }
  // Same reduction as build_profile so a self-comparison cancels exactly.
  const ReferenceProfile ood_ranked = build_profile(ood_set);
  ResidualProfile out;
  out.ood_mean_ranked = ood_ranked.mu();
  out.residual.resize(profile.dim());
  for (std::size_t j = 0; j < profile.dim(); ++j) out.residual[j] = out.ood_mean_ranked[j] - profile.mu()[j];
  return out;
}

EnergyStats energy_stats(const ActivationSet& set, const LinearHead& head, const EnhancerSpec& enhancer,
                         const EnhancerSpec& baseline, double temperature) {
  const auto edited = ebo_scores(set, head, enhancer, temperature);
  const auto base = ebo_scores(set, head, baseline, temperature);
  EnergyStats out;
  out.mean = mean_var(edited).mean;
  out.stddev = population_std(edited, out.mean);
  out.baseline_mean = mean_var(base).mean;
  out.baseline_stddev = population_std(base, out.baseline_mean);
  out.delta_mean_vs_baseline = out.mean - out.baseline_mean;
  return out;
}

std::vector<EnergyAblationRow> energy_ablation(const ActivationSet& id_set, const ActivationSet& ood_set,
                                               const LinearHead& head, const ReferenceProfile& profile,
                                               double temperature) {
  const auto baseline = EnhancerSpec::identity();
  const std::vector<std::pair<std::string, EnhancerSpec>> variants = {
      {"ebo", baseline},
      {"ebo+ras_inhibit", EnhancerSpec::ras_inhibit(profile)},
      {"ebo+ras_excite", EnhancerSpec::ras_excite(profile)},
      {"ebo+ras", EnhancerSpec::ras(profile)},
  };
  const double base_auroc = auroc(tagged_scores(ebo_scores(id_set, head, baseline, temperature),
                                                ebo_scores(ood_set, head, baseline, temperature)));
  std::vector<EnergyAblationRow> rows;
  for (const auto& [name, spec] : variants) {
    EnergyAblationRow row;
    row.method = name;
    row.id = energy_stats(id_set, head, spec, baseline, temperature);
    row.ood = energy_stats(ood_set, head, spec, baseline, temperature);
    row.auroc = auroc(tagged_scores(ebo_scores(id_set, head, spec, temperature),
                                    ebo_scores(ood_set, head, spec, temperature)));
    row.auroc_delta = row.auroc - base_auroc;
    row.id.auroc_delta = row.auroc_delta;
    row.ood.auroc_delta = row.auroc_delta;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace rasood
