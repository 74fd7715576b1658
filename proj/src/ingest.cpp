#include "moodminer/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "moodminer/errors.hpp"
#include "moodminer/util.hpp"

namespace moodminer {

Verdict parse_verdict(const std::string& text) {
  static const std::unordered_map<std::string, Verdict> table = {
      {"accepted", Verdict::Accepted},
      {"ac", Verdict::Accepted},
      {"wronganswer", Verdict::WrongAnswer},
      {"wrong", Verdict::WrongAnswer},
      {"wa", Verdict::WrongAnswer},
      {"timelimitexceeded", Verdict::TimeLimitExceeded},
      {"tle", Verdict::TimeLimitExceeded},
      {"memorylimitexceeded", Verdict::MemoryLimitExceeded},
      {"mle", Verdict::MemoryLimitExceeded},
      {"runtimeerror", Verdict::RuntimeError},
      {"re", Verdict::RuntimeError},
      {"compileerror", Verdict::CompileError},
      {"compilationerror", Verdict::CompileError},
      {"ce", Verdict::CompileError},
      {"presentationerror", Verdict::PresentationError},
      {"pe", Verdict::PresentationError},
  };
  std::string key;
  for (char c : lower(text))
    if (c != ' ' && c != '_' && c != '-') key.push_back(c);
  auto it = table.find(key);
  if (it == table.end()) throw DataError("unknown verdict: " + text);
  return it->second;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Accepted: return "Accepted";
    case Verdict::WrongAnswer: return "WrongAnswer";
    case Verdict::TimeLimitExceeded: return "TimeLimitExceeded";
    case Verdict::MemoryLimitExceeded: return "MemoryLimitExceeded";
    case Verdict::RuntimeError: return "RuntimeError";
    case Verdict::CompileError: return "CompileError";
    case Verdict::PresentationError: return "PresentationError";
  }
  return "?";
}

namespace {

ColumnMap map_header(const std::vector<std::string>& header) {
  ColumnMap cm;
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string h = lower(header[i]);
    int idx = static_cast<int>(i);
    if (h == "student_id") cm.student_id = idx;
    else if (h == "question_id") cm.question_id = idx;
    else if (h == "timestamp") cm.timestamp = idx;
    else if (h == "verdict") cm.verdict = idx;
    else if (h == "rank") cm.rank = idx;
    else if (h == "nationality") cm.nationality = idx;
  }
  if (cm.student_id < 0) throw MissingColumn("missing column: student_id");
  if (cm.question_id < 0) throw MissingColumn("missing column: question_id");
  if (cm.timestamp < 0) throw MissingColumn("missing column: timestamp");
  if (cm.verdict < 0) throw MissingColumn("missing column: verdict");
  return cm;
}

}  // namespace

std::vector<SubmissionEvent> parse_event_log(std::istream& source) {
  std::string line;
  if (!std::getline(source, line)) throw EmptyLog("event log is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ColumnMap cm = map_header(split_csv_line(line));
  int max_needed = std::max({cm.student_id, cm.question_id, cm.timestamp, cm.verdict});

  std::vector<SubmissionEvent> events;
  std::size_t line_no = 1;
  while (std::getline(source, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cols = split_csv_line(line);
    if (static_cast<int>(cols.size()) <= max_needed)
      throw MissingColumn("row has too few columns (line " +
                          std::to_string(line_no) + ")");
    SubmissionEvent e;
    e.student_id = cols[cm.student_id];
    e.question_id = cols[cm.question_id];
    if (e.student_id.empty())
      throw ParseError("empty student_id", line_no);
    if (e.question_id.empty())
      throw ParseError("empty question_id", line_no);
    auto ts = parse_instant(cols[cm.timestamp]);
    if (!ts)
      throw UnparseableTimestamp("unparseable timestamp: " + cols[cm.timestamp],
                                 line_no);
    e.timestamp = *ts;
    try {
      e.verdict = parse_verdict(cols[cm.verdict]);
    } catch (const DataError& err) {
      throw UnknownVerdict(err.what(), line_no);
    }
    if (cm.rank >= 0 && cm.rank < static_cast<int>(cols.size()) &&
        !cols[cm.rank].empty())
      e.rank = cols[cm.rank];
    if (cm.nationality >= 0 && cm.nationality < static_cast<int>(cols.size()) &&
        !cols[cm.nationality].empty())
      e.nationality = cols[cm.nationality];
    events.push_back(std::move(e));
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const SubmissionEvent& a, const SubmissionEvent& b) {
                     if (a.student_id != b.student_id)
                       return a.student_id < b.student_id;
                     return a.timestamp < b.timestamp;
                   });
  return events;
}

std::vector<SubmissionEvent> parse_event_log_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  return parse_event_log(in);
}

DatasetSplit split_windows(const std::vector<SubmissionEvent>& events,
                           SplitMode mode, std::int64_t at_instant) {
  if (events.empty()) throw EmptyLog("cannot split an empty log");
  DatasetSplit out;
  if (mode == SplitMode::EqualHalves) {
    std::int64_t lo = events.front().timestamp, hi = events.front().timestamp;
    for (const auto& e : events) {
      lo = std::min(lo, e.timestamp);
      hi = std::max(hi, e.timestamp);
    }
    out.split_instant = lo + (hi - lo) / 2;
  } else {
    out.split_instant = at_instant;
  }
  for (const auto& e : events) {
    if (e.timestamp < out.split_instant)
      out.observation.push_back(e);
    else
      out.inspection.push_back(e);
  }
  return out;
}

bool label_dropout(int obs_count, int insp_count) {
  if (obs_count <= 0)
    throw ExcludedStudent("student has no observation-window submissions");
  return static_cast<double>(insp_count) < 0.2 * static_cast<double>(obs_count);
}

std::vector<Session> sessionize(const std::vector<SubmissionEvent>& events) {
  std::vector<Session> sessions;
  for (const auto& e : events) {
    if (sessions.empty() ||
        e.timestamp - sessions.back().end > kSessionGapSeconds) {
      Session s;
      s.start = e.timestamp;
      s.end = e.timestamp;
      s.events.push_back(e);
      sessions.push_back(std::move(s));
    } else {
      sessions.back().events.push_back(e);
      sessions.back().end = e.timestamp;
    }
  }
  return sessions;
}

std::map<std::string, double> compute_question_stats(
    const std::vector<SubmissionEvent>& observation_events) {
  std::map<std::string, std::pair<int, int>> counts;  // accepted, total
  for (const auto& e : observation_events) {
    auto& c = counts[e.question_id];
    if (e.verdict == Verdict::Accepted) ++c.first;
    ++c.second;
  }
  std::map<std::string, double> out;
  for (const auto& [q, c] : counts)
    out[q] = (c.first + 1.0) / (c.second + 2.0);
  return out;
}

double question_acceptance(const std::map<std::string, double>& stats,
                           const std::string& question_id) {
  auto it = stats.find(question_id);
  return it == stats.end() ? 0.5 : it->second;
}

std::vector<ObservationVector> compute_observations(
    const std::vector<Session>& sessions,
    const std::map<std::string, double>& question_stats) {
  std::vector<ObservationVector> out;
  std::optional<std::int64_t> prev_end;
  for (const auto& s : sessions) {
    std::optional<double> gap;
    if (prev_end) gap = seconds_to_hours(s.start - *prev_end);
    for (const auto& e : s.events) {
      ObservationVector o;
      o.performance = e.verdict == Verdict::Accepted ? 1.0 : 0.0;
      o.challenge = question_acceptance(question_stats, e.question_id);
      o.endurance_min = seconds_to_minutes(e.timestamp - s.start);
      o.gap_hours = gap;
      out.push_back(o);
    }
    prev_end = s.end;
  }
  return out;
}

CommonFeatures extract_common_features(
    const std::vector<SubmissionEvent>& events) {
  CommonFeatures f;
  if (events.empty()) return f;
  int accepted = 0;
  for (const auto& e : events) {
    if (e.verdict == Verdict::Accepted) ++accepted;
    f.error_type_distribution[static_cast<int>(e.verdict)] += 1.0;
    if (e.rank) f.rank = [&]() -> std::optional<double> {
      try {
        return std::stod(*e.rank);
      } catch (...) {
        return std::nullopt;
      }
    }();
    if (e.nationality) f.nationality = e.nationality;
  }
  double n = static_cast<double>(events.size());
  f.acceptance_rate = accepted / n;
  for (auto& v : f.error_type_distribution) v /= n;
  f.membership_period_days =
      (events.back().timestamp - events.front().timestamp) / 86400.0;
  if (events.size() > 1) {
    double total_h = seconds_to_hours(events.back().timestamp -
                                      events.front().timestamp);
    f.avg_submission_gap_hours = total_h / (static_cast<double>(events.size()) - 1.0);
  }
  return f;
}

std::vector<StudentRecord> build_student_records(const DatasetSplit& split) {
  std::map<std::string, std::vector<SubmissionEvent>> obs_by_student;
  std::map<std::string, int> insp_counts;
  for (const auto& e : split.observation) obs_by_student[e.student_id].push_back(e);
  for (const auto& e : split.inspection) ++insp_counts[e.student_id];

  auto stats = compute_question_stats(split.observation);

  std::vector<StudentRecord> records;
  records.reserve(obs_by_student.size());
  for (auto& [sid, events] : obs_by_student) {
    std::sort(events.begin(), events.end(),
              [](const SubmissionEvent& a, const SubmissionEvent& b) {
                return a.timestamp < b.timestamp;
              });
    StudentRecord r;
    r.student_id = sid;
    r.obs_count = static_cast<int>(events.size());
    auto it = insp_counts.find(sid);
    r.insp_count = it == insp_counts.end() ? 0 : it->second;
    r.dropped = label_dropout(r.obs_count, r.insp_count);
    r.sessions = sessionize(events);
    r.observations = compute_observations(r.sessions, stats);
    r.common = extract_common_features(events);
    for (const auto& e : events) {
      r.question_ids.push_back(e.question_id);
      r.verdicts.push_back(e.verdict);
      r.timestamps.push_back(e.timestamp);
    }
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json record_to_json(const StudentRecord& r) {
  ordered_json j;
  j["student_id"] = r.student_id;
  j["obs_count"] = r.obs_count;
  j["insp_count"] = r.insp_count;
  j["dropped"] = r.dropped;
  ordered_json common;
  common["membership_period_days"] = r.common.membership_period_days;
  common["rank"] = r.common.rank ? ordered_json(*r.common.rank) : ordered_json(nullptr);
  common["nationality"] = r.common.nationality ? ordered_json(*r.common.nationality)
                                               : ordered_json(nullptr);
  common["acceptance_rate"] = r.common.acceptance_rate;
  common["error_type_distribution"] = r.common.error_type_distribution;
  common["avg_submission_gap_hours"] = r.common.avg_submission_gap_hours;
  j["common"] = std::move(common);
  ordered_json obs = ordered_json::array();
  for (std::size_t i = 0; i < r.observations.size(); ++i) {
    const auto& o = r.observations[i];
    ordered_json jo;
    jo["question_id"] = r.question_ids[i];
    jo["verdict"] = verdict_name(r.verdicts[i]);
    jo["timestamp"] = r.timestamps[i];
    jo["performance"] = o.performance;
    jo["challenge"] = o.challenge;
    jo["endurance_min"] = o.endurance_min;
    jo["gap_hours"] = o.gap_hours ? ordered_json(*o.gap_hours) : ordered_json(nullptr);
    obs.push_back(std::move(jo));
  }
  j["observations"] = std::move(obs);
  if (!r.mood_path.empty()) j["mood_path"] = r.mood_path;
  if (r.avg_mismatch) j["avg_mismatch"] = *r.avg_mismatch;
  return j;
}

StudentRecord record_from_json(const ordered_json& j) {
  StudentRecord r;
  r.student_id = j.at("student_id").get<std::string>();
  r.obs_count = j.at("obs_count").get<int>();
  r.insp_count = j.at("insp_count").get<int>();
  r.dropped = j.at("dropped").get<bool>();
  const auto& c = j.at("common");
  r.common.membership_period_days = c.at("membership_period_days").get<double>();
  if (!c.at("rank").is_null()) r.common.rank = c.at("rank").get<double>();
  if (!c.at("nationality").is_null())
    r.common.nationality = c.at("nationality").get<std::string>();
  r.common.acceptance_rate = c.at("acceptance_rate").get<double>();
  auto dist = c.at("error_type_distribution");
  for (int i = 0; i < kVerdictCount; ++i)
    r.common.error_type_distribution[i] = dist.at(i).get<double>();
  r.common.avg_submission_gap_hours = c.at("avg_submission_gap_hours").get<double>();
  for (const auto& jo : j.at("observations")) {
    ObservationVector o;
    r.question_ids.push_back(jo.at("question_id").get<std::string>());
    r.verdicts.push_back(parse_verdict(jo.at("verdict").get<std::string>()));
    r.timestamps.push_back(jo.at("timestamp").get<std::int64_t>());
    o.performance = jo.at("performance").get<double>();
    o.challenge = jo.at("challenge").get<double>();
    o.endurance_min = jo.at("endurance_min").get<double>();
    if (!jo.at("gap_hours").is_null()) o.gap_hours = jo.at("gap_hours").get<double>();
    r.observations.push_back(o);
  }
  if (j.contains("mood_path")) r.mood_path = j.at("mood_path").get<std::vector<int>>();
  if (j.contains("avg_mismatch")) r.avg_mismatch = j.at("avg_mismatch").get<double>();
  // Sessions are rebuilt from timestamps so a round-trip loses nothing.
  std::vector<SubmissionEvent> events;
  for (std::size_t i = 0; i < r.timestamps.size(); ++i) {
    SubmissionEvent e;
    e.student_id = r.student_id;
    e.question_id = r.question_ids[i];
    e.timestamp = r.timestamps[i];
    e.verdict = r.verdicts[i];
    events.push_back(std::move(e));
  }
  r.sessions = sessionize(events);
  return r;
}

}  // namespace

std::string records_to_json(const std::vector<StudentRecord>& records,
                            std::int64_t split_instant, int decoded_k) {
  ordered_json j;
  j["schema"] = "students/1";
  j["split_instant"] = split_instant;
  if (decoded_k > 0) j["decoded_k"] = decoded_k;
  ordered_json arr = ordered_json::array();
  for (const auto& r : records) arr.push_back(record_to_json(r));
  j["students"] = std::move(arr);
  return j.dump(1);
}

RecordsFile records_from_json(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw CorruptFile(std::string("invalid students JSON: ") + e.what());
  }
  if (!j.contains("schema") || j.at("schema") != "students/1")
    throw SchemaMismatch("expected schema students/1");
  RecordsFile out;
  out.split_instant = j.at("split_instant").get<std::int64_t>();
  if (j.contains("decoded_k")) out.decoded_k = j.at("decoded_k").get<int>();
  for (const auto& js : j.at("students")) out.records.push_back(record_from_json(js));
  return out;
}

RecordsFile load_records(const std::string& path) {
  return records_from_json(read_text_file(path));
}

void save_records(const std::string& path, const std::vector<StudentRecord>& records,
                  std::int64_t split_instant, int decoded_k) {
  write_text_file(path, records_to_json(records, split_instant, decoded_k));
}

}  // namespace moodminer
