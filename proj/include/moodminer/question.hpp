#pragma once

#include <map>
#include <string>
#include <vector>

#include "moodminer/types.hpp"

namespace moodminer::qassoc {

// Smoothed distribution over moods of the decoded states under which a
// question received submissions: Q_k = (count_k + 1) / (total + K).
struct QuestionProfile {
  std::string question_id;
  std::vector<long long> counts;  // per state
  std::vector<double> q;          // simplex, strictly positive
  long long total = 0;
};

std::map<std::string, QuestionProfile> question_state_distribution(
    const std::vector<StudentRecord>& records, int K);

// Uniform profile for questions never seen in the decoded set.
QuestionProfile uniform_profile(const std::string& question_id, int K);

double submission_mismatch(const QuestionProfile& profile, int state);

double student_avg_mismatch(
    const std::vector<int>& path, const std::vector<std::string>& question_ids,
    const std::map<std::string, QuestionProfile>& profiles, int K);

// Fills record.avg_mismatch for every student.
void annotate_mismatch(std::vector<StudentRecord>& records,
                       const std::map<std::string, QuestionProfile>& profiles,
                       int K);

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double pearson_r = 0.0;
  double p_value = 1.0;
  int n_points = 0;
  std::string binning;
  std::vector<std::pair<double, double>> points;  // (mismatch %, dropout %)
  // Unbinned per-student variant, for comparison.
  double student_r = 0.0;
  double student_p = 1.0;
};

// Students are binned into avg-mismatch quantiles; each bin contributes the
// point (mean mismatch %, dropout %); OLS and Pearson's r run over the bin
// points, with a two-sided p from t = r * sqrt((n-2)/(1-r^2)).
RegressionResult mismatch_dropout_regression(
    const std::vector<StudentRecord>& records, int bins = 10);

// OLS + Pearson r over explicit points; the building block above and the
// test surface for exact-fit constructions.
RegressionResult regress_points(const std::vector<std::pair<double, double>>& pts);

std::string profiles_to_csv(const std::map<std::string, QuestionProfile>& profiles,
                            int K);
std::string regression_to_csv(const RegressionResult& r);
std::string scatter_svg(const RegressionResult& r);

}  // namespace moodminer::qassoc
