#include "moodminer/mood.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "moodminer/errors.hpp"
#include "moodminer/util.hpp"

namespace moodminer::mood {

const char* mood_name(MoodLabel m) {
  switch (m) {
    case MoodLabel::E1_ChallengeSeeker: return "challenge-seeker";
    case MoodLabel::E2_SubjectSeeker: return "subject-seeker";
    case MoodLabel::E3_InterestSeeker: return "interest-seeker";
    case MoodLabel::E4_JoySeeker: return "joy-seeker";
    case MoodLabel::E5_NonSeeker: return "non-seeker";
  }
  return "?";
}

std::map<std::string, double> numeric_question_ids(
    const std::vector<StudentRecord>& records) {
  std::set<std::string> ids;
  for (const auto& r : records)
    for (const auto& q : r.question_ids) ids.insert(q);

  auto leading_number = [](const std::string& s) -> std::optional<double> {
    std::size_t i = 0;
    while (i < s.size() && !std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i == s.size()) return std::nullopt;
    std::size_t j = i;
    double v = 0.0;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
      v = v * 10.0 + (s[j] - '0');
      ++j;
    }
    return v;
  };

  bool all_numeric = true;
  for (const auto& q : ids)
    if (!leading_number(q)) {
      all_numeric = false;
      break;
    }

  std::map<std::string, double> out;
  if (all_numeric) {
    for (const auto& q : ids) out[q] = *leading_number(q);
  } else {
    double rank = 0.0;
    for (const auto& q : ids) out[q] = rank++;  // sorted vocabulary order
  }
  return out;
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<StateProfile> characterize_states(
    const std::vector<StudentRecord>& records, int K, int frequency_bins) {
  auto qnum = numeric_question_ids(records);
  double id_lo = 0.0, id_hi = 1.0;
  if (!qnum.empty()) {
    id_lo = id_hi = qnum.begin()->second;
    for (const auto& [q, v] : qnum) {
      id_lo = std::min(id_lo, v);
      id_hi = std::max(id_hi, v);
    }
    if (id_hi <= id_lo) id_hi = id_lo + 1.0;
  }

  std::vector<StateProfile> profiles(K);
  std::vector<std::array<std::vector<double>, 6>> samples(K);
  std::vector<std::vector<double>> freq(K, std::vector<double>(frequency_bins, 0.0));
  std::vector<double> id_sum(K, 0.0), id_sq(K, 0.0);
  std::vector<long long> id_n(K, 0);

  for (const auto& r : records) {
    if (r.mood_path.size() != r.observations.size())
      throw DataError("student " + r.student_id + " has no decoded mood path");
    // Per-student per-state accumulators for the six features.
    std::vector<double> inc(K, 0), acc(K, 0), ease(K, 0), time(K, 0), gap(K, 0),
        rep(K, 0);
    std::vector<double> n(K, 0), gap_n(K, 0);
    std::set<std::string> seen;
    for (std::size_t t = 0; t < r.observations.size(); ++t) {
      int z = r.mood_path[t];
      if (z < 0 || z >= K) throw DataError("mood path state out of range");
      const auto& o = r.observations[t];
      n[z] += 1;
      if (o.performance >= 0.5)
        acc[z] += 1;
      else
        inc[z] += 1;
      ease[z] += o.challenge;
      time[z] += o.endurance_min;
      if (o.gap_hours) {
        gap[z] += *o.gap_hours;
        gap_n[z] += 1;
      }
      if (!seen.insert(r.question_ids[t]).second) rep[z] += 1;

      auto it = qnum.find(r.question_ids[t]);
      double v = it == qnum.end() ? id_lo : it->second;
      int bin = std::min(frequency_bins - 1,
                         static_cast<int>((v - id_lo) / (id_hi - id_lo) *
                                          frequency_bins));
      freq[z][bin] += 1.0;
      id_sum[z] += v;
      id_sq[z] += v * v;
      ++id_n[z];
    }
    for (int k = 0; k < K; ++k) {
      if (n[k] <= 0) continue;
      samples[k][0].push_back(inc[k]);
      samples[k][1].push_back(acc[k]);
      samples[k][2].push_back(ease[k] / n[k]);
      samples[k][3].push_back(time[k] / n[k]);
      if (gap_n[k] > 0) samples[k][4].push_back(gap[k] / gap_n[k]);
      samples[k][5].push_back(rep[k]);
    }
  }

  for (int k = 0; k < K; ++k) {
    StateProfile& p = profiles[k];
    p.state = k;
    p.submissions = id_n[k];
    p.empty = id_n[k] == 0;
    if (p.empty) continue;
    p.cdf_samples = samples[k];
    p.mean_incorrect = mean_of(samples[k][0]);
    p.median_incorrect = median_of(samples[k][0]);
    p.mean_accepted = mean_of(samples[k][1]);
    p.median_accepted = median_of(samples[k][1]);
    p.mean_ease = mean_of(samples[k][2]);
    p.median_ease = median_of(samples[k][2]);
    p.mean_time_spent = mean_of(samples[k][3]);
    p.median_time_spent = median_of(samples[k][3]);
    p.mean_gap = mean_of(samples[k][4]);
    p.median_gap = median_of(samples[k][4]);
    p.mean_repeats = mean_of(samples[k][5]);
    p.median_repeats = median_of(samples[k][5]);

    double mx = *std::max_element(freq[k].begin(), freq[k].end());
    p.frequency = freq[k];
    if (mx > 0)
      for (double& b : p.frequency) b = b / mx * 100.0;

    double mean_id = id_sum[k] / static_cast<double>(id_n[k]);
    p.id_dispersion = std::sqrt(
        std::max(0.0, id_sq[k] / static_cast<double>(id_n[k]) - mean_id * mean_id));
  }
  return profiles;
}

LabelAssignment assign_mood_labels(const std::vector<StateProfile>& profiles) {
  std::vector<const StateProfile*> live;
  for (const auto& p : profiles)
    if (!p.empty) live.push_back(&p);
  if (live.size() != 5)
    throw NotFiveStates("mood labeling needs exactly 5 non-empty states, got " +
                        std::to_string(live.size()));

  LabelAssignment out;
  std::set<int> taken;

  // Picks the extreme candidate; ties within 1e-9 fall to the lower index.
  auto pick = [&](auto value, bool want_max) {
    int best = -1;
    double best_v = 0.0;
    for (const auto* p : live) {
      if (taken.count(p->state)) continue;
      double v = value(*p);
      if (best < 0 || (want_max ? v > best_v : v < best_v)) {
        best = p->state;
        best_v = v;
      }
    }
    for (const auto* p : live) {
      if (p->state == best || taken.count(p->state)) continue;
      if (std::abs(value(*p) - best_v) < 1e-9) out.ambiguous = true;
    }
    taken.insert(best);
    return best;
  };

  int e5 = pick([](const StateProfile& p) { return p.mean_gap; }, true);
  int e1 = pick([](const StateProfile& p) { return p.mean_ease; }, false);
  int e4 = pick([](const StateProfile& p) { return p.mean_repeats; }, true);
  int e2 = pick([](const StateProfile& p) { return p.id_dispersion; }, false);
  int e3 = -1;
  for (const auto* p : live)
    if (!taken.count(p->state)) e3 = p->state;

  out.labels[e1] = MoodLabel::E1_ChallengeSeeker;
  out.labels[e2] = MoodLabel::E2_SubjectSeeker;
  out.labels[e3] = MoodLabel::E3_InterestSeeker;
  out.labels[e4] = MoodLabel::E4_JoySeeker;
  out.labels[e5] = MoodLabel::E5_NonSeeker;

  std::ostringstream sheet;
  sheet << "state,mean_gap_h,mean_ease,mean_repeats,id_dispersion,label\n";
  for (const auto* p : live)
    sheet << p->state << ',' << p->mean_gap << ',' << p->mean_ease << ','
          << p->mean_repeats << ',' << p->id_dispersion << ','
          << mood_name(out.labels.at(p->state)) << "\n";
  out.score_sheet_csv = sheet.str();
  return out;
}

TransitionMatrix empirical_transition_matrix(
    const std::vector<std::vector<int>>& paths, int K) {
  if (paths.empty()) throw DataError("no decoded paths");
  TransitionMatrix tm;
  std::vector<std::vector<double>> counts(K, std::vector<double>(K, 0.0));
  for (const auto& path : paths)
    for (std::size_t t = 0; t + 1 < path.size(); ++t)
      counts[path[t]][path[t + 1]] += 1.0;
  tm.rows.assign(K, std::vector<double>(K, 0.0));
  for (int i = 0; i < K; ++i) {
    double rsum = 0.0;
    for (int j = 0; j < K; ++j) rsum += counts[i][j];
    if (rsum > 0) {
      for (int j = 0; j < K; ++j) tm.rows[i][j] = counts[i][j] / rsum;
    } else {
      for (int j = 0; j < K; ++j) tm.rows[i][j] = 1.0 / K;
      tm.uniform_rows.push_back(i);
    }
  }
  return tm;
}

int dominant_state(const std::vector<int>& path, int K) {
  std::vector<int> counts(K, 0), first(K, -1);
  for (std::size_t t = 0; t < path.size(); ++t) {
    ++counts[path[t]];
    if (first[path[t]] < 0) first[path[t]] = static_cast<int>(t);
  }
  int best = -1;
  for (int k = 0; k < K; ++k) {
    if (counts[k] == 0) continue;
    if (best < 0 || counts[k] > counts[best] ||
        (counts[k] == counts[best] && first[k] < first[best]))
      best = k;
  }
  return best;
}

std::vector<DominantMoodRow> dominant_mood_report(
    const std::vector<StudentRecord>& records,
    const std::map<int, MoodLabel>& labels, int K) {
  std::map<MoodLabel, DominantMoodRow> rows;
  for (const auto& [state, label] : labels) rows[label].mood = label;
  int total = 0;
  for (const auto& r : records) {
    if (r.mood_path.empty()) continue;
    int dom = dominant_state(r.mood_path, K);
    auto it = labels.find(dom);
    if (it == labels.end()) continue;
    auto& row = rows[it->second];
    ++row.students;
    ++total;
    if (r.avg_mismatch) row.mean_mismatch += *r.avg_mismatch;
    if (r.dropped) row.dropout_pct += 1.0;
  }
  std::vector<DominantMoodRow> out;
  for (auto& [label, row] : rows) {
    if (row.students > 0) {
      row.share_pct = 100.0 * row.students / total;
      row.mean_mismatch /= row.students;
      row.dropout_pct = 100.0 * row.dropout_pct / row.students;
    }
    out.push_back(row);
  }
  return out;
}

std::string profiles_to_csv(const std::vector<StateProfile>& profiles) {
  std::ostringstream out;
  out << "state,submissions,mean_incorrect,median_incorrect,mean_accepted,"
         "median_accepted,mean_ease,median_ease,mean_time_spent_min,"
         "median_time_spent_min,mean_gap_h,median_gap_h,mean_repeats,"
         "median_repeats,id_dispersion,empty\n";
  for (const auto& p : profiles) {
    out << p.state << ',' << p.submissions << ',' << p.mean_incorrect << ','
        << p.median_incorrect << ',' << p.mean_accepted << ',' << p.median_accepted
        << ',' << p.mean_ease << ',' << p.median_ease << ',' << p.mean_time_spent
        << ',' << p.median_time_spent << ',' << p.mean_gap << ',' << p.median_gap
        << ',' << p.mean_repeats << ',' << p.median_repeats << ','
        << p.id_dispersion << ',' << (p.empty ? 1 : 0) << "\n";
  }
  return out.str();
}

std::string transition_to_csv(const TransitionMatrix& tm) {
  std::ostringstream out;
  out << "from";
  for (std::size_t j = 0; j < tm.rows.size(); ++j) out << ",to_" << j;
  out << "\n";
  for (std::size_t i = 0; i < tm.rows.size(); ++i) {
    out << i;
    for (double v : tm.rows[i]) out << ',' << format_double(v);
    out << "\n";
  }
  return out.str();
}

std::string dominant_to_csv(const std::vector<DominantMoodRow>& rows) {
  std::ostringstream out;
  out << "mood,students,share_pct,mean_mismatch,dropout_pct\n";
  for (const auto& r : rows)
    out << mood_name(r.mood) << ',' << r.students << ',' << r.share_pct << ','
        << r.mean_mismatch << ',' << r.dropout_pct << "\n";
  return out.str();
}

namespace {

const char* kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

std::string frequency_svg(const std::vector<StateProfile>& profiles) {
  const int W = 280, H = 120, pad = 24;
  int cols = 3;
  int rows = (static_cast<int>(profiles.size()) + cols - 1) / cols;
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << cols * W
      << "' height='" << rows * H << "'>\n";
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    const auto& p = profiles[k];
    int ox = static_cast<int>(k % cols) * W + pad;
    int oy = static_cast<int>(k / cols) * H + pad;
    svg << "<text x='" << ox << "' y='" << oy - 8 << "' font-size='10'>state "
        << p.state << "</text>\n";
    if (p.frequency.empty()) continue;
    double bw = static_cast<double>(W - 2 * pad) / p.frequency.size();
    for (std::size_t b = 0; b < p.frequency.size(); ++b) {
      double h = p.frequency[b] / 100.0 * (H - 2 * pad);
      svg << "<rect x='" << ox + b * bw << "' y='" << oy + (H - 2 * pad) - h
          << "' width='" << bw << "' height='" << h << "' fill='"
          << kPalette[k % 8] << "'/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string cdf_svg(const std::vector<StateProfile>& profiles, int feature_idx,
                    const std::string& title) {
  const int W = 420, H = 300, pad = 36;
  double lo = 0.0, hi = 1.0;
  bool any = false;
  for (const auto& p : profiles)
    for (double v : p.cdf_samples[feature_idx]) {
      if (!any) {
        lo = hi = v;
        any = true;
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (hi <= lo) hi = lo + 1.0;

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='"
      << H << "'>\n<text x='" << pad << "' y='16' font-size='12'>" << title
      << "</text>\n";
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    auto v = profiles[k].cdf_samples[feature_idx];
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    svg << "<polyline fill='none' stroke='" << kPalette[k % 8] << "' points='";
    for (std::size_t i = 0; i < v.size(); ++i) {
      double x = pad + (v[i] - lo) / (hi - lo) * (W - 2 * pad);
      double y = H - pad - (static_cast<double>(i + 1) / v.size()) * (H - 2 * pad);
      svg << x << ',' << y << ' ';
    }
    svg << "'/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace moodminer::mood
