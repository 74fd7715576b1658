#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "moodminer/types.hpp"

namespace moodminer::mood {

enum class MoodLabel : int {
  E1_ChallengeSeeker = 0,
  E2_SubjectSeeker = 1,
  E3_InterestSeeker = 2,
  E4_JoySeeker = 3,
  E5_NonSeeker = 4,
};

const char* mood_name(MoodLabel m);

// Per-state behavioral footprint. The six summary features follow the
// per-student-within-state convention: each student contributes one value
// per feature to a state's sample set, profiles then report mean/median.
struct StateProfile {
  int state = 0;
  bool empty = false;
  long long submissions = 0;

  double mean_incorrect = 0.0, median_incorrect = 0.0;
  double mean_accepted = 0.0, median_accepted = 0.0;
  double mean_ease = 0.0, median_ease = 0.0;
  double mean_time_spent = 0.0, median_time_spent = 0.0;      // minutes
  double mean_gap = 0.0, median_gap = 0.0;                    // hours
  double mean_repeats = 0.0, median_repeats = 0.0;

  // CDF sample sets: one entry per student with activity in this state.
  std::array<std::vector<double>, 6> cdf_samples;

  std::vector<double> frequency;   // question-id histogram, max bin = 100
  double id_dispersion = 0.0;      // std of numeric question ids
};

// Numeric stand-in for an opaque question id: leading digits if present,
// otherwise a stable rank in the sorted id vocabulary.
std::map<std::string, double> numeric_question_ids(
    const std::vector<StudentRecord>& records);

std::vector<StateProfile> characterize_states(
    const std::vector<StudentRecord>& records, int K, int frequency_bins = 100);

struct LabelAssignment {
  std::map<int, MoodLabel> labels;   // state index -> mood
  bool ambiguous = false;            // some criterion tied within 1e-9
  std::string score_sheet_csv;       // criterion values for every candidate
};

// Greedy assignment in fixed priority: non-seeker takes the largest mean
// attendance gap, challenge-seeker the smallest mean ease of the rest,
// joy-seeker the largest repeat count, subject-seeker the smallest id
// dispersion, interest-seeker the remainder. Requires exactly five
// non-empty profiles.
LabelAssignment assign_mood_labels(const std::vector<StateProfile>& profiles);

struct TransitionMatrix {
  std::vector<std::vector<double>> rows;  // K x K, row-stochastic
  std::vector<int> uniform_rows;          // rows emitted as uniform (no counts)
};

TransitionMatrix empirical_transition_matrix(
    const std::vector<std::vector<int>>& paths, int K);

struct DominantMoodRow {
  MoodLabel mood;
  double share_pct = 0.0;
  double mean_mismatch = 0.0;
  double dropout_pct = 0.0;
  int students = 0;
};

// Dominant mood = most frequent label in the decoded path, ties resolved
// toward the mood occurring earliest in the path.
int dominant_state(const std::vector<int>& path, int K);

std::vector<DominantMoodRow> dominant_mood_report(
    const std::vector<StudentRecord>& records,
    const std::map<int, MoodLabel>& labels, int K);

std::string profiles_to_csv(const std::vector<StateProfile>& profiles);
std::string transition_to_csv(const TransitionMatrix& tm);
std::string dominant_to_csv(const std::vector<DominantMoodRow>& rows);

// Plain SVG renderings (no external renderer).
std::string frequency_svg(const std::vector<StateProfile>& profiles);
std::string cdf_svg(const std::vector<StateProfile>& profiles, int feature_idx,
                    const std::string& title);

}  // namespace moodminer::mood
