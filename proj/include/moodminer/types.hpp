#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace moodminer {

constexpr int kVerdictCount = 7;

enum class Verdict : int {
  Accepted = 0,
  WrongAnswer = 1,
  TimeLimitExceeded = 2,
  MemoryLimitExceeded = 3,
  RuntimeError = 4,
  CompileError = 5,
  PresentationError = 6,
};

// Parses common online-judge feedback strings, case-insensitively.
// Unknown strings are a hard error, never coerced.
Verdict parse_verdict(const std::string& text);
const char* verdict_name(Verdict v);

struct SubmissionEvent {
  std::string student_id;
  std::string question_id;
  std::int64_t timestamp = 0;  // UTC epoch seconds
  Verdict verdict = Verdict::WrongAnswer;
  std::optional<std::string> rank;
  std::optional<std::string> nationality;

  bool operator==(const SubmissionEvent& o) const {
    return student_id == o.student_id && question_id == o.question_id &&
           timestamp == o.timestamp && verdict == o.verdict;
  }
};

// Maximal run of one student's submissions with inter-submission gaps of at
// most one hour.
struct Session {
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::vector<SubmissionEvent> events;
};

constexpr std::int64_t kSessionGapSeconds = 3600;

// The four manifest features emitted after each submission.
struct ObservationVector {
  double performance = 0.0;            // 1 = Accepted
  double challenge = 0.5;              // question acceptance rate in [0,1]
  double endurance_min = 0.0;          // minutes since session start
  std::optional<double> gap_hours;     // gap before this session; empty for
                                       // the student's first session
};

struct DatasetSplit {
  std::int64_t split_instant = 0;
  std::vector<SubmissionEvent> observation;  // timestamp < split_instant
  std::vector<SubmissionEvent> inspection;   // timestamp >= split_instant
};

struct CommonFeatures {
  double membership_period_days = 0.0;
  std::optional<double> rank;
  std::optional<std::string> nationality;
  double acceptance_rate = 0.0;
  std::array<double, kVerdictCount> error_type_distribution{};
  double avg_submission_gap_hours = 0.0;
};

struct StudentRecord {
  std::string student_id;
  std::vector<Session> sessions;               // observation window only
  std::vector<ObservationVector> observations; // one per observation submission
  std::vector<std::string> question_ids;       // aligned with observations
  std::vector<Verdict> verdicts;               // aligned with observations
  std::vector<std::int64_t> timestamps;        // aligned with observations
  int obs_count = 0;
  int insp_count = 0;
  bool dropped = false;
  CommonFeatures common;
  std::vector<int> mood_path;                  // filled by the HMM decode
  std::optional<double> avg_mismatch;          // filled by question analysis
};

}  // namespace moodminer
