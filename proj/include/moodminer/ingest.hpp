#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "moodminer/types.hpp"

namespace moodminer {

// Column layout of an event log. parse_event_log fills it from the header
// line; tests may construct it directly.
struct ColumnMap {
  int student_id = -1;
  int question_id = -1;
  int timestamp = -1;
  int verdict = -1;
  int rank = -1;         // optional
  int nationality = -1;  // optional
};

// Reads a delimiter-separated event log with header
//   student_id,question_id,timestamp,verdict[,rank][,nationality]
// Timestamps are ISO-8601 or integer epoch seconds. Events come back
// validated and sorted by (student_id, timestamp). Malformed rows raise
// UnknownVerdict / UnparseableTimestamp / MissingColumn with the 1-based
// line number of the offending row.
std::vector<SubmissionEvent> parse_event_log(std::istream& source);
std::vector<SubmissionEvent> parse_event_log_file(const std::string& path);

enum class SplitMode { EqualHalves, At };

// EqualHalves splits at the midpoint of [min_ts, max_ts]; At uses the given
// instant verbatim. Events strictly before the split instant form the
// observation window, the rest the inspection window.
DatasetSplit split_windows(const std::vector<SubmissionEvent>& events,
                           SplitMode mode, std::int64_t at_instant = 0);

// Strict 20% rule: dropped iff insp_count < 0.2 * obs_count.
// obs_count = 0 raises ExcludedStudent.
bool label_dropout(int obs_count, int insp_count);

// Partitions one student's time-sorted events into sessions: a gap of more
// than one hour starts a new session, exactly one hour does not.
std::vector<Session> sessionize(const std::vector<SubmissionEvent>& events);

// Laplace-smoothed acceptance rate per question over the observation window:
// (accepted + 1) / (total + 2), so unseen questions score 0.5.
std::map<std::string, double> compute_question_stats(
    const std::vector<SubmissionEvent>& observation_events);

double question_acceptance(const std::map<std::string, double>& stats,
                           const std::string& question_id);

// One ObservationVector per submission. Endurance counts minutes from the
// session start; the attendance gap is the hours between the previous
// session's end and this session's start, repeated for every submission of
// the session and missing for the student's first session.
std::vector<ObservationVector> compute_observations(
    const std::vector<Session>& sessions,
    const std::map<std::string, double>& question_stats);

CommonFeatures extract_common_features(
    const std::vector<SubmissionEvent>& observation_events);

// Full per-student derivation for a split log. Students with no observation
// submissions are excluded. Records come back sorted by student_id.
std::vector<StudentRecord> build_student_records(const DatasetSplit& split);

// Canonical JSON serialization of student records (stable key order).
// decoded_k > 0 records the state count of the model behind mood_path.
std::string records_to_json(const std::vector<StudentRecord>& records,
                            std::int64_t split_instant, int decoded_k = 0);
struct RecordsFile {
  std::int64_t split_instant = 0;
  int decoded_k = 0;
  std::vector<StudentRecord> records;
};
RecordsFile records_from_json(const std::string& json_text);
RecordsFile load_records(const std::string& path);
void save_records(const std::string& path, const std::vector<StudentRecord>& records,
                  std::int64_t split_instant, int decoded_k = 0);

}  // namespace moodminer
