#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moodminer/hmm.hpp"
#include "moodminer/types.hpp"

namespace moodminer::synth {

// How a mood picks its questions.
enum class QuestionPolicy {
  HardTail,       // hardest questions, biased toward the highest ids
  SubjectBlocks,  // contiguous id blocks worked through sequentially
  WideUniform,    // uniform over the whole pool
  EasyRepeats,    // a small fixed set of easy questions, resubmitted a lot
  SparseRandom,   // uniform picks, few per visit
};

const char* policy_name(QuestionPolicy p);

struct PlantedState {
  QuestionPolicy policy = QuestionPolicy::WideUniform;
  double session_len_mean = 4.0;   // expected submissions per session
  double endurance_mu = 2.0;       // log1p(minutes) of in-session draws
  double endurance_sigma = 0.6;
  double gap_mu = 4.0;             // log1p(hours) between sessions
  double gap_sigma = 0.5;
};

struct PlantedConfig {
  int n_students = 1000;
  int n_questions = 1500;
  int K = 5;
  std::vector<double> pi;
  std::vector<std::vector<double>> A;
  std::vector<PlantedState> states;
  double beta0 = 0.0;  // dropout hazard: sigmoid(beta0 + beta1 * avg_mismatch)
  double beta1 = 0.0;
  std::uint64_t rng_seed = 0;

  std::int64_t window_start = 0;
  std::int64_t split_instant = 0;  // observation/inspection boundary
  std::int64_t window_end = 0;

  double obs_count_log_mean = 3.90;  // log of target submissions per student
  double obs_count_log_sigma = 0.38;
  int obs_count_min = 8;
  int obs_count_max = 150;
  // Students who start as non-seekers barely submit.
  double nonseeker_count_log_mean = 2.20;
  int nonseeker_count_min = 4;

  bool emit_rank_nationality = true;

  void validate() const;  // throws ConfigInvalid
};

struct StudentTruth {
  std::string student_id;
  std::vector<int> obs_moods;   // aligned with observation submissions
  std::vector<int> insp_moods;  // aligned with inspection submissions
  double avg_mismatch = 0.0;    // true mismatch over the observation window
  double hazard = 0.0;
  bool dropped = false;
  int n_obs = 0;
  int n_insp = 0;
};

struct GroundTruth {
  std::int64_t split_instant = 0;
  std::vector<int> policy_of_state;  // state index -> QuestionPolicy ordinal
  std::vector<StudentTruth> students;
};

// Five moods with the qualitative transition structure observed on real
// question pools: challenge-seekers never turn into joy- or non-seekers,
// joy-seekers never into challenge- or subject-seekers, interest-seekers
// never into challenge-seekers, and joy-seekers hold the stickiest
// self-loop. Emission scales are calibrated so the population session
// duration averages about 21.4 minutes and attendance gaps about 192 hours.
PlantedConfig default_planted_config(std::uint64_t seed);

struct Population {
  std::vector<SubmissionEvent> events;  // sorted by (student_id, timestamp)
  GroundTruth truth;
};

Population generate_population(const PlantedConfig& config);

std::string events_to_csv(const std::vector<SubmissionEvent>& events,
                          bool with_rank_nationality);
std::string truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(const std::string& text);

// Draws state paths and observation vectors directly from an HmmModel's
// emission distributions. This is the exact-family sampler used by the
// parameter-recovery tests.
struct RawSample {
  std::vector<std::vector<int>> paths;
  std::vector<hmm::ObsSequence> sequences;
};
RawSample sample_from_model(const hmm::HmmModel& model, int n_seqs, int len,
                            std::uint64_t seed);

}  // namespace moodminer::synth
