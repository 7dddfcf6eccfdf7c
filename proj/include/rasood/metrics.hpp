#pragma once

#include <string>
#include <vector>

#include "rasood/core.hpp"
#include "rasood/enhancers.hpp"

namespace rasood {

/// Mann-Whitney AUROC with ties counted as one half. ID is the positive class.
double auroc(const ScoreSet& s);

/// FPR at the largest threshold whose TPR (fraction of ID scores >= tau)
/// reaches tpr_target. Step-function convention, no interpolation.
double fpr_at_tpr(const ScoreSet& s, double tpr_target = 0.95);

/// Step-wise area under precision-recall over descending unique thresholds.
/// ID is positive by default; ood_positive flips labels and negates scores.
double aupr(const ScoreSet& s, bool ood_positive = false);

enum class Decision { In, Out };

inline Decision detect(double score, double tau) { return score >= tau ? Decision::In : Decision::Out; }

struct AccuracyDelta {
  double base = 0.0;
  double enhanced = 0.0;
  double delta = 0.0;
  double agreement = 0.0;  // fraction of samples whose argmax is unchanged
};

AccuracyDelta accuracy_delta(const ActivationSet& set, const LinearHead& head, const EnhancerSpec& enhancer);

struct MetricRow {
  std::string method;
  std::string dataset;
  double auroc = 0.0;
  double fpr95 = 0.0;
  double aupr = 0.0;
};

MetricRow evaluate(const std::string& method, const std::string& dataset, const ScoreSet& s);

/// Per-dataset rows followed by their arithmetic mean, labelled "average".
std::vector<MetricRow> with_average(std::vector<MetricRow> rows);

}  // namespace rasood
