#include "moodminer/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "moodminer/errors.hpp"
#include "moodminer/util.hpp"

namespace moodminer::synth {

const char* policy_name(QuestionPolicy p) {
  switch (p) {
    case QuestionPolicy::HardTail: return "hard_tail";
    case QuestionPolicy::SubjectBlocks: return "subject_blocks";
    case QuestionPolicy::WideUniform: return "wide_uniform";
    case QuestionPolicy::EasyRepeats: return "easy_repeats";
    case QuestionPolicy::SparseRandom: return "sparse_random";
  }
  return "?";
}

void PlantedConfig::validate() const {
  if (n_students < 1 || n_questions < 10) throw ConfigInvalid("population too small");
  if (K < 1) throw ConfigInvalid("K must be positive");
  if (static_cast<int>(pi.size()) != K || static_cast<int>(A.size()) != K ||
      static_cast<int>(states.size()) != K)
    throw ConfigInvalid("state arrays inconsistent with K");
  double ps = 0.0;
  for (double p : pi) ps += p;
  if (std::abs(ps - 1.0) > 1e-12) throw ConfigInvalid("pi does not sum to 1");
  for (const auto& row : A) {
    if (static_cast<int>(row.size()) != K) throw ConfigInvalid("A row size");
    double rs = 0.0;
    for (double a : row) {
      if (a < 0.0) throw ConfigInvalid("negative transition probability");
      rs += a;
    }
    if (std::abs(rs - 1.0) > 1e-12) throw ConfigInvalid("A row does not sum to 1");
  }
  if (!(window_start < split_instant && split_instant < window_end))
    throw ConfigInvalid("time windows not ordered");
  for (const auto& s : states)
    if (s.session_len_mean < 1.0) throw ConfigInvalid("session_len_mean below 1");
}

PlantedConfig default_planted_config(std::uint64_t seed) {
  PlantedConfig c;
  c.rng_seed = seed;
  c.K = 5;
  // State order: 0 challenge-seeker, 1 subject-seeker, 2 interest-seeker,
  // 3 joy-seeker, 4 non-seeker.
  c.pi = {0.12, 0.15, 0.35, 0.12, 0.26};
  c.A = {
      {0.955, 0.018, 0.027, 0.000, 0.000},
      {0.007, 0.958, 0.022, 0.007, 0.006},
      {0.000, 0.013, 0.960, 0.009, 0.018},
      {0.000, 0.000, 0.022, 0.968, 0.010},
      {0.005, 0.013, 0.032, 0.005, 0.945},
  };
  // session_len_mean caps sessions; endurance here is the in-session
  // minute delta between consecutive submissions (log1p scale).
  c.states = {
      {QuestionPolicy::HardTail, 9.0, 1.15, 0.80, 3.30, 0.22},
      {QuestionPolicy::SubjectBlocks, 8.5, 1.05, 0.80, 4.00, 0.22},
      {QuestionPolicy::WideUniform, 8.0, 0.95, 0.80, 5.55, 0.22},
      {QuestionPolicy::EasyRepeats, 8.0, 0.70, 0.80, 4.85, 0.22},
      {QuestionPolicy::SparseRandom, 7.0, 0.60, 0.80, 6.20, 0.26},
  };
  c.beta0 = -4.95;
  c.beta1 = 11.00;
  // 2019-01-25 .. 2019-04-21 .. 2019-07-16, 86-day halves.
  c.window_start = 1548374400;
  c.split_instant = 1555804800;
  c.window_end = 1563235200;
  return c;
}

namespace {

struct QuestionBank {
  std::vector<double> difficulty;  // acceptance probability per question
};

QuestionBank make_bank(const PlantedConfig& cfg) {
  Rng rng(derive_seed(cfg.rng_seed, "questions"));
  std::normal_distribution<double> noise(0.0, 0.03);
  QuestionBank bank;
  bank.difficulty.resize(cfg.n_questions);
  for (int q = 0; q < cfg.n_questions; ++q) {
    double base = 0.92 - 0.85 * static_cast<double>(q) / cfg.n_questions;
    bank.difficulty[q] = std::clamp(base + noise(rng), 0.03, 0.97);
  }
  return bank;
}

// Per-student mutable policy state.
struct PolicyState {
  int block_start = -1;
  int block_cursor = 0;
  std::vector<int> easy_set;
};

constexpr int kBlockWidth = 30;

// The id axis is partitioned so every mood has a home turf: easy wide
// region for interest-seekers (with the joy-seekers' repeat sets buried
// inside its dense traffic), a mid band for subject blocks, and the hardest
// tail for challenge-seekers. Non-seekers roam the whole pool.
int choose_question(QuestionPolicy policy, const PlantedConfig& cfg,
                    PolicyState& ps, Rng& rng) {
  const int n = cfg.n_questions;
  switch (policy) {
    case QuestionPolicy::HardTail: {
      std::normal_distribution<double> off(0.0, 0.02 * n);
      int lo = static_cast<int>(0.935 * n);
      int id = n - 1 - static_cast<int>(std::abs(off(rng)));
      return std::clamp(id, lo, n - 1);
    }
    case QuestionPolicy::SubjectBlocks: {
      if (ps.block_start < 0 || ps.block_cursor >= kBlockWidth) {
        std::uniform_int_distribution<int> start(static_cast<int>(0.65 * n),
                                                 static_cast<int>(0.84 * n) - kBlockWidth);
        ps.block_start = start(rng);
        ps.block_cursor = 0;
      }
      return std::min(ps.block_start + ps.block_cursor, n - 1);
    }
    case QuestionPolicy::WideUniform: {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(0.42 * n) - 1);
      return pick(rng);
    }
    case QuestionPolicy::SparseRandom: {
      std::uniform_int_distribution<int> pick(0, n - 1);
      return pick(rng);
    }
    case QuestionPolicy::EasyRepeats: {
      if (ps.easy_set.empty()) {
        std::uniform_int_distribution<int> pick(0, static_cast<int>(0.42 * n) - 1);
        for (int i = 0; i < 5; ++i) ps.easy_set.push_back(pick(rng));
      }
      std::uniform_int_distribution<std::size_t> pick(0, ps.easy_set.size() - 1);
      return ps.easy_set[pick(rng)];
    }
  }
  return 0;
}

void advance_policy(QuestionPolicy policy, PolicyState& ps, bool accepted,
                    Rng& rng) {
  if (policy != QuestionPolicy::SubjectBlocks) return;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (accepted || u(rng) < 0.75) ++ps.block_cursor;
}

struct PendingEvent {
  std::int64_t ts = 0;
  int question = 0;
  bool accepted = false;
  int state = 0;
};

// Bounded log1p-normal draw with rejection, so the bounds never pile up
// probability mass on a single value.
double draw_log1p(Rng& rng, double mu, double sigma, double lo, double hi) {
  std::normal_distribution<double> n(mu, sigma);
  for (int tries = 0; tries < 64; ++tries) {
    double v = std::expm1(n(rng));
    if (v >= lo && v <= hi) return v;
  }
  std::uniform_real_distribution<double> mid(lo, hi);
  return mid(rng);
}

// Generates one contiguous stretch of sessions inside [window_lo, window_hi).
// A session ends when the mood switches or the mood's length cap fires, so
// every session is opened (and its attendance gap drawn) by the mood that
// owns it. Within a session, submissions advance by per-mood minute deltas.
// The chain continues in/out via `state`; when advance_first is set it steps
// before the first submission (used when resuming a student).
std::vector<PendingEvent> generate_stretch(const PlantedConfig& cfg,
                                           const QuestionBank& bank,
                                           PolicyState& ps, Rng& rng, int& state,
                                           int target_count, bool advance_first,
                                           std::int64_t start_hint,
                                           std::int64_t window_lo,
                                           std::int64_t window_hi,
                                           std::int64_t prev_last_ts,
                                           bool force_count) {
  std::vector<PendingEvent> events;
  if (target_count <= 0) return events;
  std::uniform_real_distribution<double> u(0.0, 1.0);

  std::int64_t last_ts = prev_last_ts;
  bool have_prev = prev_last_ts > 0;
  int prev_state = -1;
  // A student's first-ever session is a short exploratory visit; keeping it
  // small bounds the share of missing-gap submissions.
  std::uniform_int_distribution<int> first_len(2, 4);
  int first_session_remaining = have_prev ? -1 : first_len(rng);

  for (int t = 0; t < target_count; ++t) {
    if (t > 0 || advance_first) {
      double r = u(rng), acc = 0.0;
      int next = cfg.K - 1;
      for (int k = 0; k < cfg.K; ++k) {
        acc += cfg.A[state][k];
        if (r < acc) {
          next = k;
          break;
        }
      }
      state = next;
    }
    const PlantedState& st = cfg.states[state];

    bool new_session = events.empty() || state != prev_state ||
                       u(rng) < 1.0 / st.session_len_mean ||
                       first_session_remaining == 0;
    if (first_session_remaining > 0) --first_session_remaining;
    if (new_session && !events.empty()) first_session_remaining = -1;
    std::int64_t ts;
    if (new_session) {
      if (!have_prev && events.empty()) {
        ts = start_hint;
      } else {
        double gap_h = draw_log1p(rng, st.gap_mu, st.gap_sigma, 1.05, 672.0);
        ts = last_ts + static_cast<std::int64_t>(std::llround(gap_h * 3600.0));
      }
      ts = std::max(ts, window_lo);
      if (force_count) {
        // Inspection windows must realize the drawn submission count, so
        // late sessions are pulled forward; these gaps never feed the model.
        std::int64_t budget =
            static_cast<std::int64_t>(target_count - t) * 3700 + 7200;
        if (ts > window_hi - budget) {
          ts = std::max(window_lo, window_hi - budget);
          if (ts <= last_ts) ts = last_ts + 3661;
        }
      }
      if (ts >= window_hi) break;  // window exhausted
    } else {
      double delta_min =
          draw_log1p(rng, st.endurance_mu, st.endurance_sigma, 1.0 / 60.0, 55.0);
      ts = last_ts + std::max<std::int64_t>(
                         1, static_cast<std::int64_t>(std::llround(delta_min * 60.0)));
      if (ts >= window_hi) break;
    }

    PendingEvent e;
    e.state = state;
    e.ts = ts;
    e.question = choose_question(st.policy, cfg, ps, rng);
    e.accepted = u(rng) < bank.difficulty[e.question];
    advance_policy(st.policy, ps, e.accepted, rng);
    events.push_back(e);
    last_ts = ts;
    prev_state = state;
  }

  while (!events.empty() && events.back().ts >= window_hi) events.pop_back();
  return events;
}

std::string student_name(int i, int n_students) {
  int width = 1;
  for (int v = n_students; v >= 10; v /= 10) ++width;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s%0*d", width, i);
  return buf;
}

}  // namespace

Population generate_population(const PlantedConfig& cfg) {
  cfg.validate();
  QuestionBank bank = make_bank(cfg);

  struct StudentDraft {
    std::vector<PendingEvent> obs;
    PolicyState policy;
    int last_state = 0;
    std::optional<std::string> rank;
    std::optional<std::string> nationality;
  };
  std::vector<StudentDraft> drafts(cfg.n_students);

  static const char* kNats[] = {"CN", "US", "IN", "RU", "BR", "DE", "JP", "KR"};

  // Pass 1: observation-window activity, independently per student.
  parallel_for(static_cast<std::size_t>(cfg.n_students), [&](std::size_t i) {
    Rng rng = make_rng(cfg.rng_seed, "student", i);
    StudentDraft& d = drafts[i];
    std::uniform_real_distribution<double> u(0.0, 1.0);

    // Initial mood first: non-seeker starters submit far less.
    int state = cfg.K - 1;
    double r = u(rng), acc = 0.0;
    for (int k = 0; k < cfg.K; ++k) {
      acc += cfg.pi[k];
      if (r < acc) {
        state = k;
        break;
      }
    }
    bool nonseeker_start =
        cfg.states[state].policy == QuestionPolicy::SparseRandom;
    double log_mean =
        nonseeker_start ? cfg.nonseeker_count_log_mean : cfg.obs_count_log_mean;
    int count_min = nonseeker_start ? cfg.nonseeker_count_min : cfg.obs_count_min;
    std::normal_distribution<double> count_draw(log_mean, cfg.obs_count_log_sigma);
    int target = std::clamp(static_cast<int>(std::lround(std::exp(count_draw(rng)))),
                            count_min, cfg.obs_count_max);

    std::int64_t obs_span = cfg.split_instant - cfg.window_start;
    std::uniform_int_distribution<std::int64_t> start_off(0, obs_span / 4);
    std::int64_t start_hint = cfg.window_start + start_off(rng);

    d.obs = generate_stretch(cfg, bank, d.policy, rng, state, target,
                             /*advance_first=*/false, start_hint,
                             cfg.window_start, cfg.split_instant, 0,
                             /*force_count=*/false);
    d.last_state = d.obs.empty() ? state : d.obs.back().state;
    if (d.obs.empty()) {
      // Guarantee at least one observation submission.
      PendingEvent e;
      e.state = state;
      e.question = 0;
      e.accepted = true;
      e.ts = start_hint;
      d.obs.push_back(e);
      d.last_state = state;
    }
    if (cfg.emit_rank_nationality) {
      std::uniform_int_distribution<int> rank_draw(1, 5000);
      std::uniform_int_distribution<int> nat_draw(0, 7);
      d.rank = std::to_string(rank_draw(rng));
      d.nationality = kNats[nat_draw(rng)];
    }
  });

  // Pass 2: true question-mood associativity over the observation window.
  std::vector<std::vector<double>> counts(cfg.n_questions,
                                          std::vector<double>(cfg.K, 0.0));
  for (const auto& d : drafts)
    for (const auto& e : d.obs) counts[e.question][e.state] += 1.0;

  auto mismatch_of = [&](int question, int state) {
    double total = 0.0;
    for (int k = 0; k < cfg.K; ++k) total += counts[question][k];
    double q = (counts[question][state] + 1.0) / (total + cfg.K);
    return 1.0 - q;
  };

  Population pop;
  pop.truth.split_instant = cfg.split_instant;
  for (int k = 0; k < cfg.K; ++k)
    pop.truth.policy_of_state.push_back(
        static_cast<int>(cfg.states[k].policy));
  pop.truth.students.resize(cfg.n_students);

  // Pass 3: dropout hazard and inspection-window activity.
  std::vector<std::vector<PendingEvent>> insp(cfg.n_students);
  parallel_for(static_cast<std::size_t>(cfg.n_students), [&](std::size_t i) {
    StudentDraft& d = drafts[i];
    StudentTruth& t = pop.truth.students[i];
    t.student_id = student_name(static_cast<int>(i), cfg.n_students);
    t.n_obs = static_cast<int>(d.obs.size());
    double mism = 0.0;
    for (const auto& e : d.obs) {
      t.obs_moods.push_back(e.state);
      mism += mismatch_of(e.question, e.state);
    }
    t.avg_mismatch = mism / static_cast<double>(d.obs.size());
    t.hazard = sigmoid(cfg.beta0 + cfg.beta1 * t.avg_mismatch);

    Rng drop_rng = make_rng(cfg.rng_seed, "dropout", i);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    t.dropped = u(drop_rng) < t.hazard;

    int lo_keep = static_cast<int>(std::ceil(0.2 * t.n_obs));
    int target;
    if (t.dropped) {
      std::uniform_int_distribution<int> pick(0, std::max(0, lo_keep - 1));
      target = pick(drop_rng);
    } else {
      int hi = std::max(lo_keep, static_cast<int>(0.8 * t.n_obs));
      std::uniform_int_distribution<int> pick(lo_keep, hi);
      target = pick(drop_rng);
    }

    Rng insp_rng = make_rng(cfg.rng_seed, "inspection", i);
    int state = d.last_state;
    insp[i] = generate_stretch(cfg, bank, d.policy, insp_rng, state, target,
                               /*advance_first=*/true, 0, cfg.split_instant,
                               cfg.window_end, d.obs.back().ts,
                               /*force_count=*/true);
    t.n_insp = static_cast<int>(insp[i].size());
    for (const auto& e : insp[i]) t.insp_moods.push_back(e.state);
  });

  // Assemble the event log, already sorted by (student_id, timestamp).
  for (int i = 0; i < cfg.n_students; ++i) {
    const auto& t = pop.truth.students[i];
    auto emit = [&](const PendingEvent& e) {
      SubmissionEvent ev;
      ev.student_id = t.student_id;
      ev.question_id = std::to_string(e.question);
      ev.timestamp = e.ts;
      ev.verdict = e.accepted ? Verdict::Accepted : Verdict::WrongAnswer;
      ev.rank = drafts[i].rank;
      ev.nationality = drafts[i].nationality;
      pop.events.push_back(std::move(ev));
    };
    for (const auto& e : drafts[i].obs) emit(e);
    for (const auto& e : insp[i]) emit(e);
  }
  return pop;
}

std::string events_to_csv(const std::vector<SubmissionEvent>& events,
                          bool with_rank_nationality) {
  std::ostringstream out;
  out << "student_id,question_id,timestamp,verdict";
  if (with_rank_nationality) out << ",rank,nationality";
  out << "\n";
  for (const auto& e : events) {
    out << e.student_id << ',' << e.question_id << ',' << e.timestamp << ','
        << verdict_name(e.verdict);
    if (with_rank_nationality)
      out << ',' << (e.rank ? *e.rank : "") << ','
          << (e.nationality ? *e.nationality : "");
    out << "\n";
  }
  return out.str();
}

namespace {
using ordered_json = nlohmann::ordered_json;
}

std::string truth_to_json(const GroundTruth& truth) {
  ordered_json j;
  j["schema"] = "truth/1";
  j["split_instant"] = truth.split_instant;
  j["policy_of_state"] = truth.policy_of_state;
  ordered_json arr = ordered_json::array();
  for (const auto& s : truth.students) {
    ordered_json js;
    js["student_id"] = s.student_id;
    js["dropped"] = s.dropped;
    js["hazard"] = s.hazard;
    js["avg_mismatch"] = s.avg_mismatch;
    js["n_obs"] = s.n_obs;
    js["n_insp"] = s.n_insp;
    js["obs_moods"] = s.obs_moods;
    js["insp_moods"] = s.insp_moods;
    arr.push_back(std::move(js));
  }
  j["students"] = std::move(arr);
  return j.dump(1);
}

GroundTruth truth_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw CorruptFile(std::string("invalid ground-truth JSON: ") + e.what());
  }
  if (!j.contains("schema") || j.at("schema") != "truth/1")
    throw SchemaMismatch("expected schema truth/1");
  GroundTruth out;
  out.split_instant = j.at("split_instant").get<std::int64_t>();
  out.policy_of_state = j.at("policy_of_state").get<std::vector<int>>();
  for (const auto& js : j.at("students")) {
    StudentTruth s;
    s.student_id = js.at("student_id").get<std::string>();
    s.dropped = js.at("dropped").get<bool>();
    s.hazard = js.at("hazard").get<double>();
    s.avg_mismatch = js.at("avg_mismatch").get<double>();
    s.n_obs = js.at("n_obs").get<int>();
    s.n_insp = js.at("n_insp").get<int>();
    s.obs_moods = js.at("obs_moods").get<std::vector<int>>();
    s.insp_moods = js.at("insp_moods").get<std::vector<int>>();
    out.students.push_back(std::move(s));
  }
  return out;
}

RawSample sample_from_model(const hmm::HmmModel& model, int n_seqs, int len,
                            std::uint64_t seed) {
  model.validate();
  RawSample out;
  out.paths.resize(n_seqs);
  out.sequences.resize(n_seqs);
  for (int s = 0; s < n_seqs; ++s) {
    Rng rng = make_rng(seed, "raw-sample", static_cast<std::uint64_t>(s));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto pick = [&](const std::vector<double>& dist) {
      double r = u(rng), acc = 0.0;
      for (std::size_t k = 0; k < dist.size(); ++k) {
        acc += dist[k];
        if (r < acc) return static_cast<int>(k);
      }
      return static_cast<int>(dist.size()) - 1;
    };
    int state = pick(model.pi);
    for (int t = 0; t < len; ++t) {
      if (t > 0) state = pick(model.A[state]);
      const auto& e = model.emissions[state];
      hmm::TransformedObs o;
      o.perf = u(rng) < e.p_accept ? 1.0 : 0.0;
      std::normal_distribution<double> ch(e.challenge.mean,
                                          std::sqrt(e.challenge.var));
      std::normal_distribution<double> en(e.endurance.mean,
                                          std::sqrt(e.endurance.var));
      std::normal_distribution<double> gp(e.gap.mean, std::sqrt(e.gap.var));
      o.challenge_logit = ch(rng);
      o.endurance_log = en(rng);
      if (u(rng) < e.missing_rate) {
        o.gap_missing = true;
      } else {
        o.gap_missing = false;
        o.gap_log = gp(rng);
      }
      out.paths[s].push_back(state);
      out.sequences[s].push_back(o);
    }
  }
  return out;
}

}  // namespace moodminer::synth
