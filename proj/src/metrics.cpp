#include "rasood/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rasood {

namespace {

void check_score_set(const ScoreSet& s) {
  if (s.scores.size() != s.is_id.size()) throw Error(ErrorCode::DimensionMismatch, "scores and labels differ in length");
  require_finite(s.scores, "scores");
  const std::size_t n_id = s.num_id();
  if (n_id == 0 || n_id == s.size()) {
    throw Error(ErrorCode::DegenerateSet, "metrics need at least one ID and one OoD score");
  }
}

std::vector<double> split_scores(const ScoreSet& s, bool want_id) {
  std::vector<double> out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.is_id[i] == want_id) out.push_back(s.scores[i]);
  return out;
}

// count of entries >= tau in an ascending vector
std::size_t count_at_least(const std::vector<double>& ascending, double tau) {
  return static_cast<std::size_t>(ascending.end() - std::lower_bound(ascending.begin(), ascending.end(), tau));
}

}  // namespace

double auroc(const ScoreSet& s) {
  check_score_set(s);
  const std::size_t n = s.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return s.scores[l] < s.scores[r]; });

  // Sum of 1-based mid-ranks over ID samples; mid-ranks are multiples of 0.5
  // so the accumulation is exact for any realistic n.
  double id_rank_sum = 0.0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi + 1 < n && s.scores[order[hi + 1]] == s.scores[order[lo]]) ++hi;
    const double mid_rank = 0.5 * static_cast<double>(lo + hi) + 1.0;
    for (std::size_t k = lo; k <= hi; ++k)
      if (s.is_id[order[k]]) id_rank_sum += mid_rank;
    lo = hi + 1;
  }
  const double n_id = static_cast<double>(s.num_id());
  const double n_ood = static_cast<double>(s.num_ood());
  const double u = id_rank_sum - n_id * (n_id + 1.0) / 2.0;
  return u / (n_id * n_ood);
}

double fpr_at_tpr(const ScoreSet& s, double tpr_target) {
  check_score_set(s);
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) throw Error(ErrorCode::BadParameter, "TPR target must lie in (0, 1]");
  auto id = split_scores(s, true);
  auto ood = split_scores(s, false);
  std::sort(id.begin(), id.end());
  std::sort(ood.begin(), ood.end());
  const double n_id = static_cast<double>(id.size());

  // TPR only changes at ID scores; scan them from the top.
  double tau = id.front();
  for (std::size_t k = id.size(); k-- > 0;) {
    if (k + 1 < id.size() && id[k] == id[k + 1]) continue;
    if (static_cast<double>(count_at_least(id, id[k])) / n_id >= tpr_target) {
      tau = id[k];
      break;
    }
  }
  return static_cast<double>(count_at_least(ood, tau)) / static_cast<double>(ood.size());
}

double aupr(const ScoreSet& s, bool ood_positive) {
  check_score_set(s);
  const std::size_t n = s.size();
  std::vector<double> scores(s.scores);
  std::vector<bool> positive(s.is_id);
  if (ood_positive) {
    for (double& v : scores) v = -v;
    positive.flip();
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return scores[l] > scores[r]; });

  const double n_pos = static_cast<double>(std::count(positive.begin(), positive.end(), true));
  double tp = 0.0;
  double fp = 0.0;
  double prev_recall = 0.0;
  double area = 0.0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi + 1 < n && scores[order[hi + 1]] == scores[order[lo]]) ++hi;
    for (std::size_t k = lo; k <= hi; ++k) (positive[order[k]] ? tp : fp) += 1.0;
    const double recall = tp / n_pos;
    const double precision = tp / (tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    lo = hi + 1;
  }
  return area;
}

AccuracyDelta accuracy_delta(const ActivationSet& set, const LinearHead& head, const EnhancerSpec& enhancer) {
  const auto& labels = set.labels();
  const auto identity = EnhancerSpec::identity();
  std::size_t base_hits = 0;
  std::size_t enh_hits = 0;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (labels[i] >= head.num_classes()) {
      throw Error(ErrorCode::InvalidArgument, "label " + std::to_string(labels[i]) + " exceeds head classes");
    }
    const std::size_t base = argmax(forward(set.row(i), head, identity));
    const std::size_t enh = argmax(forward(set.row(i), head, enhancer));
    base_hits += base == labels[i] ? 1 : 0;
    enh_hits += enh == labels[i] ? 1 : 0;
    agree += base == enh ? 1 : 0;
  }
  const double n = static_cast<double>(set.size());
  AccuracyDelta out;
  out.base = static_cast<double>(base_hits) / n;
  out.enhanced = static_cast<double>(enh_hits) / n;
  out.delta = out.enhanced - out.base;
  out.agreement = static_cast<double>(agree) / n;
  return out;
}

MetricRow evaluate(const std::string& method, const std::string& dataset, const ScoreSet& s) {
  return MetricRow{method, dataset, auroc(s), fpr_at_tpr(s, 0.95), aupr(s)};
}

std::vector<MetricRow> with_average(std::vector<MetricRow> rows) {
  if (rows.empty()) return rows;
  MetricRow avg{rows.front().method, "average", 0.0, 0.0, 0.0};
  for (const auto& r : rows) {
    avg.auroc += r.auroc;
    avg.fpr95 += r.fpr95;
    avg.aupr += r.aupr;
  }
  const double n = static_cast<double>(rows.size());
  avg.auroc /= n;
  avg.fpr95 /= n;
  avg.aupr /= n;
  rows.push_back(avg);
  return rows;
}

}  // namespace rasood
