#include "moodminer/eval.hpp"

#include <algorithm>
#include <cmath>

#include "moodminer/errors.hpp"
#include "moodminer/util.hpp"

namespace moodminer::eval {

FoldPlan stratified_kfold(const std::vector<int>& labels, int k,
                          std::uint64_t seed) {
  if (k < 2) throw ConfigInvalid("k must be at least 2");
  std::vector<int> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i)
    (labels[i] ? pos : neg).push_back(static_cast<int>(i));
  if (static_cast<int>(pos.size()) < k || static_cast<int>(neg.size()) < k)
    throw TooFewSamples("each class needs at least k members");

  Rng rng_pos = make_rng(seed, "kfold-pos");
  Rng rng_neg = make_rng(seed, "kfold-neg");
  std::shuffle(pos.begin(), pos.end(), rng_pos);
  std::shuffle(neg.begin(), neg.end(), rng_neg);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.assign(k, {});
  plan.positives_per_fold.assign(k, 0);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    plan.folds[i % k].push_back(pos[i]);
    ++plan.positives_per_fold[i % k];
  }
  for (std::size_t i = 0; i < neg.size(); ++i) plan.folds[i % k].push_back(neg[i]);
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

MetricReport compute_metrics(const std::vector<double>& scores,
                             const std::vector<int>& labels, double threshold) {
  if (scores.size() != labels.size() || scores.empty())
    throw DataError("scores and labels misaligned");
  MetricReport r;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    bool pred = scores[i] >= threshold;
    bool truth = labels[i] != 0;
    if (pred && truth) ++r.tp;
    else if (pred && !truth) ++r.fp;
    else if (!pred && truth) ++r.fn;
    else ++r.tn;
  }
  double n = static_cast<double>(scores.size());
  r.accuracy = (r.tp + r.tn) / n;
  double denom = 2.0 * r.tp + r.fp + r.fn;
  r.f1 = denom > 0 ? 2.0 * r.tp / denom : 0.0;

  long long pos = r.tp + r.fn, neg = r.fp + r.tn;
  if (pos > 0 && neg > 0) {
    // Rank statistic with average ranks on ties.
    std::vector<std::pair<double, int>> sl(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
      sl[i] = {scores[i], labels[i] ? 1 : 0};
    std::sort(sl.begin(), sl.end());
    double rank_sum = 0.0;
    std::size_t i = 0;
    double rank = 1.0;
    while (i < sl.size()) {
      std::size_t j = i;
      while (j < sl.size() && sl[j].first == sl[i].first) ++j;
      double avg_rank = rank + (static_cast<double>(j - i) - 1.0) / 2.0;
      for (std::size_t t = i; t < j; ++t)
        if (sl[t].second) rank_sum += avg_rank;
      rank += static_cast<double>(j - i);
      i = j;
    }
    r.auc = (rank_sum - static_cast<double>(pos) * (pos + 1) / 2.0) /
            (static_cast<double>(pos) * static_cast<double>(neg));
  }
  return r;
}

double auc_trapezoid(const std::vector<double>& scores,
                     const std::vector<int>& labels) {
  std::vector<std::pair<double, int>> sl(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    sl[i] = {scores[i], labels[i] ? 1 : 0};
  std::sort(sl.begin(), sl.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  double pos = 0, neg = 0;
  for (const auto& [s, y] : sl) (y ? pos : neg) += 1.0;
  if (pos == 0 || neg == 0) return 0.5;

  double auc = 0.0, tp = 0.0, fp = 0.0, prev_tp = 0.0, prev_fp = 0.0;
  std::size_t i = 0;
  while (i < sl.size()) {
    std::size_t j = i;
    while (j < sl.size() && sl[j].first == sl[i].first) {
      if (sl[j].second) tp += 1.0;
      else fp += 1.0;
      ++j;
    }
    auc += (fp - prev_fp) / neg * (tp + prev_tp) / (2.0 * pos);
    prev_tp = tp;
    prev_fp = fp;
    i = j;
  }
  return auc;
}

CvSummary summarize_folds(const std::vector<MetricReport>& reports) {
  CvSummary s;
  s.per_fold = reports;
  if (reports.empty()) {
    s.failed = true;
    return s;
  }
  auto agg = [&](auto get, double& mean, double& sd) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : reports) {
      auto v = get(r);
      if (v) {
        sum += *v;
        ++n;
      }
    }
    mean = n > 0 ? sum / n : 0.0;
    double q = 0.0;
    for (const auto& r : reports) {
      auto v = get(r);
      if (v) q += (*v - mean) * (*v - mean);
    }
    sd = n > 1 ? std::sqrt(q / (n - 1)) : 0.0;
  };
  agg([](const MetricReport& r) { return std::optional<double>(r.accuracy); },
      s.mean_accuracy, s.std_accuracy);
  agg([](const MetricReport& r) { return std::optional<double>(r.f1); }, s.mean_f1,
      s.std_f1);
  agg([](const MetricReport& r) { return r.auc; }, s.mean_auc, s.std_auc);
  return s;
}

}  // namespace moodminer::eval
