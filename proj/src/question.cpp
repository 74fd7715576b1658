#include "moodminer/question.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "moodminer/errors.hpp"
#include "moodminer/util.hpp"

namespace moodminer::qassoc {

std::map<std::string, QuestionProfile> question_state_distribution(
    const std::vector<StudentRecord>& records, int K) {
  std::map<std::string, QuestionProfile> out;
  for (const auto& r : records) {
    if (r.mood_path.size() != r.question_ids.size())
      throw DataError("student " + r.student_id + " has no decoded mood path");
    for (std::size_t t = 0; t < r.question_ids.size(); ++t) {
      auto& p = out[r.question_ids[t]];
      if (p.counts.empty()) {
        p.question_id = r.question_ids[t];
        p.counts.assign(K, 0);
      }
      int z = r.mood_path[t];
      if (z < 0 || z >= K) throw DataError("decoded state out of range");
      ++p.counts[z];
      ++p.total;
    }
  }
  for (auto& [qid, p] : out) {
    p.q.resize(K);
    for (int k = 0; k < K; ++k)
      p.q[k] = (p.counts[k] + 1.0) / (static_cast<double>(p.total) + K);
  }
  return out;
}

QuestionProfile uniform_profile(const std::string& question_id, int K) {
  QuestionProfile p;
  p.question_id = question_id;
  p.counts.assign(K, 0);
  p.total = 0;
  p.q.assign(K, 1.0 / K);
  return p;
}

double submission_mismatch(const QuestionProfile& profile, int state) {
  return 1.0 - profile.q.at(state);
}

double student_avg_mismatch(
    const std::vector<int>& path, const std::vector<std::string>& question_ids,
    const std::map<std::string, QuestionProfile>& profiles, int K) {
  if (path.size() != question_ids.size() || path.empty())
    throw DataError("mood path and submissions misaligned");
  double sum = 0.0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    auto it = profiles.find(question_ids[t]);
    if (it == profiles.end())
      sum += 1.0 - 1.0 / K;
    else
      sum += submission_mismatch(it->second, path[t]);
  }
  return sum / static_cast<double>(path.size());
}

void annotate_mismatch(std::vector<StudentRecord>& records,
                       const std::map<std::string, QuestionProfile>& profiles,
                       int K) {
  for (auto& r : records)
    r.avg_mismatch = student_avg_mismatch(r.mood_path, r.question_ids, profiles, K);
}

RegressionResult regress_points(const std::vector<std::pair<double, double>>& pts) {
  RegressionResult res;
  res.points = pts;
  res.n_points = static_cast<int>(pts.size());
  const double n = static_cast<double>(pts.size());
  if (pts.size() < 2) throw InsufficientData("need at least 2 points");

  double sx = 0, sy = 0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
  }
  double mx = sx / n, my = sy / n;
  double sxx = 0, syy = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
    sxy += (x - mx) * (y - my);
  }
  if (sxx <= 0) throw InsufficientData("degenerate x values");
  res.slope = sxy / sxx;
  res.intercept = my - res.slope * mx;
  res.pearson_r = syy > 0 ? sxy / std::sqrt(sxx * syy) : 0.0;

  if (pts.size() > 2) {
    double r2 = res.pearson_r * res.pearson_r;
    if (r2 >= 1.0) {
      res.p_value = 0.0;
    } else {
      double t = res.pearson_r * std::sqrt((n - 2.0) / (1.0 - r2));
      boost::math::students_t dist(n - 2.0);
      res.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    }
  }
  return res;
}

RegressionResult mismatch_dropout_regression(
    const std::vector<StudentRecord>& records, int bins) {
  std::vector<std::pair<double, bool>> students;  // (mismatch, dropped)
  for (const auto& r : records)
    if (r.avg_mismatch) students.emplace_back(*r.avg_mismatch, r.dropped);
  if (students.size() < 20)
    throw InsufficientData("need at least 20 students with mismatch labels");

  std::sort(students.begin(), students.end());
  std::vector<std::pair<double, double>> pts;
  const std::size_t n = students.size();
  for (int b = 0; b < bins; ++b) {
    std::size_t lo = b * n / bins, hi = (b + 1) * n / bins;
    if (hi <= lo) continue;
    double mism = 0.0, drop = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      mism += students[i].first;
      drop += students[i].second ? 1.0 : 0.0;
    }
    double cnt = static_cast<double>(hi - lo);
    pts.emplace_back(100.0 * mism / cnt, 100.0 * drop / cnt);
  }

  RegressionResult res = regress_points(pts);
  res.binning = std::to_string(bins) + " equal-count mismatch bins";

  // Unbinned per-student variant for comparison.
  std::vector<std::pair<double, double>> raw;
  raw.reserve(n);
  for (const auto& [m, d] : students)
    raw.emplace_back(100.0 * m, d ? 100.0 : 0.0);
  try {
    RegressionResult unbinned = regress_points(raw);
    res.student_r = unbinned.pearson_r;
    res.student_p = unbinned.p_value;
  } catch (const InsufficientData&) {
    res.student_r = 0.0;
    res.student_p = 1.0;
  }
  return res;
}

std::string profiles_to_csv(const std::map<std::string, QuestionProfile>& profiles,
                            int K) {
  std::ostringstream out;
  out << "question_id,total";
  for (int k = 1; k <= K; ++k) out << ",Q" << k;
  out << "\n";
  for (const auto& [qid, p] : profiles) {
    out << qid << ',' << p.total;
    for (int k = 0; k < K; ++k) out << ',' << format_double(p.q[k]);
    out << "\n";
  }
  return out.str();
}

std::string regression_to_csv(const RegressionResult& r) {
  std::ostringstream out;
  out << "# slope=" << format_double(r.slope)
      << " intercept=" << format_double(r.intercept)
      << " pearson_r=" << format_double(r.pearson_r)
      << " p_value=" << format_double(r.p_value) << " n_points=" << r.n_points
      << " binning=" << r.binning << "\n";
  out << "# unbinned_student_r=" << format_double(r.student_r)
      << " unbinned_student_p=" << format_double(r.student_p) << "\n";
  out << "mismatch_pct,dropout_pct,fitted_dropout_pct\n";
  for (const auto& [x, y] : r.points)
    out << x << ',' << y << ',' << (r.intercept + r.slope * x) << "\n";
  return out.str();
}

std::string scatter_svg(const RegressionResult& r) {
  const int W = 420, H = 320, pad = 40;
  double xlo = 0, xhi = 100, ylo = 0, yhi = 100;
  for (const auto& [x, y] : r.points) {
    xlo = std::min(xlo, x);
    xhi = std::max(xhi, x);
    ylo = std::min(ylo, y);
    yhi = std::max(yhi, y);
  }
  auto X = [&](double x) { return pad + (x - xlo) / (xhi - xlo) * (W - 2 * pad); };
  auto Y = [&](double y) {
    return H - pad - (y - ylo) / (yhi - ylo) * (H - 2 * pad);
  };
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='"
      << H << "'>\n";
  svg << "<line x1='" << pad << "' y1='" << H - pad << "' x2='" << W - pad
      << "' y2='" << H - pad << "' stroke='black'/>\n";
  svg << "<line x1='" << pad << "' y1='" << pad << "' x2='" << pad << "' y2='"
      << H - pad << "' stroke='black'/>\n";
  for (const auto& [x, y] : r.points)
    svg << "<circle cx='" << X(x) << "' cy='" << Y(y) << "' r='4' fill='#1f77b4'/>\n";
  svg << "<line x1='" << X(xlo) << "' y1='" << Y(r.intercept + r.slope * xlo)
      << "' x2='" << X(xhi) << "' y2='" << Y(r.intercept + r.slope * xhi)
      << "' stroke='#d62728'/>\n";
  svg << "<text x='" << pad << "' y='16' font-size='11'>dropout% vs mismatch%"
      << " (slope " << r.slope << ", r " << r.pearson_r << ")</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace moodminer::qassoc
