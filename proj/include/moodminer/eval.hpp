#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace moodminer::eval {

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<int>> folds;  // indices per fold
  std::vector<int> positives_per_fold;
};

// Shuffles within each class by seed and deals round-robin, so per-fold
// positive counts differ by at most one from the proportional share.
FoldPlan stratified_kfold(const std::vector<int>& labels, int k,
                          std::uint64_t seed);

struct MetricReport {
  double accuracy = 0.0;
  double f1 = 0.0;                 // positive class = dropped
  std::optional<double> auc;      // missing when only one class present
  long long tp = 0, fp = 0, fn = 0, tn = 0;
};

// Accuracy and F1 from the thresholded confusion matrix; AUC from the rank
// statistic with ties counted half.
MetricReport compute_metrics(const std::vector<double>& scores,
                             const std::vector<int>& labels,
                             double threshold = 0.5);

// Trapezoidal ROC integration; used as the cross-check oracle for the rank
// statistic.
double auc_trapezoid(const std::vector<double>& scores,
                     const std::vector<int>& labels);

struct CvSummary {
  std::vector<MetricReport> per_fold;
  double mean_accuracy = 0.0, std_accuracy = 0.0;
  double mean_f1 = 0.0, std_f1 = 0.0;
  double mean_auc = 0.0, std_auc = 0.0;
  bool failed = false;
  std::string error;
};

CvSummary summarize_folds(const std::vector<MetricReport>& reports);

}  // namespace moodminer::eval
