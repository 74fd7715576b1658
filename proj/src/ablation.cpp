#include "moodminer/ablation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "moodminer/errors.hpp"
#include "moodminer/ingest.hpp"
#include "moodminer/util.hpp"

namespace moodminer::eval {

namespace {

std::vector<SubmissionEvent> record_events(const StudentRecord& r) {
  std::vector<SubmissionEvent> events;
  events.reserve(r.timestamps.size());
  for (std::size_t i = 0; i < r.timestamps.size(); ++i) {
    SubmissionEvent e;
    e.student_id = r.student_id;
    e.question_id = r.question_ids[i];
    e.timestamp = r.timestamps[i];
    e.verdict = r.verdicts[i];
    events.push_back(std::move(e));
  }
  return events;
}

void rederive_observations(StudentRecord& r,
                           const std::map<std::string, double>& stats) {
  r.observations = compute_observations(r.sessions, stats);
}

std::vector<hmm::ObsSequence> to_sequences(
    const std::vector<StudentRecord>& records) {
  std::vector<hmm::ObsSequence> seqs;
  seqs.reserve(records.size());
  for (const auto& r : records) seqs.push_back(hmm::transform(r.observations));
  return seqs;
}

void decode_records(std::vector<StudentRecord>& records,
                    const hmm::HmmModel& model) {
  parallel_for(records.size(), [&](std::size_t i) {
    records[i].mood_path =
        hmm::viterbi(model, hmm::transform(records[i].observations)).path;
  });
}

// Feature standardization fitted on the training fold.
struct Scaler {
  std::vector<double> mean, sd;

  void fit(const std::vector<std::vector<double>>& X) {
    std::size_t d = X[0].size();
    mean.assign(d, 0.0);
    sd.assign(d, 0.0);
    for (const auto& row : X)
      for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
    for (auto& m : mean) m /= static_cast<double>(X.size());
    for (const auto& row : X)
      for (std::size_t j = 0; j < d; ++j)
        sd[j] += (row[j] - mean[j]) * (row[j] - mean[j]);
    for (auto& s : sd) {
      s = std::sqrt(s / static_cast<double>(X.size()));
      if (s < 1e-9) s = 1.0;
    }
  }
  std::vector<double> apply(const std::vector<double>& x) const {
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / sd[j];
    return out;
  }
};

}  // namespace

std::uint64_t FoldArtifacts::fingerprint() const {
  std::ostringstream blob;
  blob << hmm::model_to_json(model);
  for (const auto& [q, v] : question_stats) blob << q << '=' << format_double(v) << ';';
  blob << qassoc::profiles_to_csv(profiles, model.K);
  for (const auto& r : train) {
    blob << r.student_id << ':';
    for (int z : r.mood_path) blob << z << ',';
    if (r.avg_mismatch) blob << format_double(*r.avg_mismatch);
    blob << '|';
  }
  return fnv1a64(blob.str());
}

FoldArtifacts build_fold_artifacts(const std::vector<StudentRecord>& train_records,
                                   const AblationOptions& opts,
                                   std::uint64_t seed, int fold_index) {
  FoldArtifacts art;
  art.train = train_records;

  std::vector<SubmissionEvent> train_events;
  for (const auto& r : art.train) {
    auto ev = record_events(r);
    train_events.insert(train_events.end(), ev.begin(), ev.end());
  }
  art.question_stats = compute_question_stats(train_events);
  for (auto& r : art.train) rederive_observations(r, art.question_stats);

  auto seqs = to_sequences(art.train);
  auto [model, report] = hmm::fit_multistart(
      opts.K, seqs, opts.hmm_seeds,
      derive_seed(seed, "fold-hmm", static_cast<std::uint64_t>(fold_index)),
      opts.fit);
  art.model = std::move(model);

  decode_records(art.train, art.model);
  art.profiles = qassoc::question_state_distribution(art.train, opts.K);
  qassoc::annotate_mismatch(art.train, art.profiles, opts.K);
  return art;
}

std::vector<StudentRecord> apply_fold_artifacts(
    const FoldArtifacts& art, const std::vector<StudentRecord>& records) {
  std::vector<StudentRecord> out = records;
  for (auto& r : out) rederive_observations(r, art.question_stats);
  decode_records(out, art.model);
  qassoc::annotate_mismatch(out, art.profiles, art.model.K);
  return out;
}

const AblationCell* AblationTable::find(const std::string& model,
                                        bool with_ef) const {
  for (const auto& c : cells)
    if (c.model == model && c.with_ef == with_ef) return &c;
  return nullptr;
}

AblationTable run_ablation(const std::vector<StudentRecord>& records,
                           const AblationOptions& opts, std::uint64_t seed) {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(r.dropped ? 1 : 0);
  FoldPlan plan = stratified_kfold(labels, opts.folds, derive_seed(seed, "folds"));

  struct CellAccum {
    std::vector<MetricReport> reports;
    std::string error;
  };
  // cell key -> per-fold reports; filled sequentially by fold index later.
  std::map<std::pair<std::string, bool>, std::vector<CellAccum>> cell_slots;
  for (const auto& m : opts.models)
    for (bool ef : {true, false})
      cell_slots[{m, ef}] = std::vector<CellAccum>(opts.folds);

  // Global HMM variant (leaks across folds; off by default, kept as a flag).
  std::optional<FoldArtifacts> global_art;
  if (!opts.fold_local_hmm) {
    global_art = build_fold_artifacts(records, opts, seed, -1);
  }

  parallel_for(static_cast<std::size_t>(opts.folds), [&](std::size_t f) {
    std::set<int> test_idx(plan.folds[f].begin(), plan.folds[f].end());
    std::vector<StudentRecord> train_records, test_records;
    for (std::size_t i = 0; i < records.size(); ++i)
      (test_idx.count(static_cast<int>(i)) ? test_records : train_records)
          .push_back(records[i]);

    FoldArtifacts art;
    std::vector<StudentRecord> test;
    try {
      if (opts.fold_local_hmm) {
        art = build_fold_artifacts(train_records, opts, seed,
                                   static_cast<int>(f));
      } else {
        art = *global_art;
        art.train = apply_fold_artifacts(*global_art, train_records);
      }
      test = apply_fold_artifacts(art, test_records);
    } catch (const std::exception& e) {
      for (auto& [key, slots] : cell_slots) slots[f].error = e.what();
      return;
    }

    std::vector<int> y_train, y_test;
    for (const auto& r : art.train) y_train.push_back(r.dropped ? 1 : 0);
    for (const auto& r : test) y_test.push_back(r.dropped ? 1 : 0);

    for (bool ef : {true, false}) {
      // Sequence models.
      if (std::find(opts.models.begin(), opts.models.end(), "dp") !=
          opts.models.end()) {
        auto& slot = cell_slots[{"dp", ef}][f];
        try {
          nn::Encoder enc =
              nn::fit_encoder(art.train, opts.K, ef, opts.dp.max_seq_len);
          auto enc_train = nn::build_sequences(enc, art.train, art.profiles);
          auto enc_test = nn::build_sequences(enc, test, art.profiles);

          // Carve a stratified validation slice out of the training fold.
          FoldPlan val_plan = stratified_kfold(
              y_train, 5, derive_seed(seed, "dp-val", f));
          std::set<int> val_idx(val_plan.folds[0].begin(),
                                val_plan.folds[0].end());
          std::vector<nn::EncodedStudent> inner_train, inner_val;
          for (std::size_t i = 0; i < enc_train.size(); ++i)
            (val_idx.count(static_cast<int>(i)) ? inner_val : inner_train)
                .push_back(enc_train[i]);

          auto [params, hist] = nn::train_dp(
              inner_train, inner_val, derive_seed(seed, "dp-train", f), opts.dp,
              enc.step_dim(), enc.static_dim());

          std::vector<double> scores;
          for (const auto& e : enc_test)
            scores.push_back(nn::dp_predict(params, e));
          slot.reports.push_back(compute_metrics(scores, y_test));
        } catch (const std::exception& e) {
          slot.error = e.what();
        }
      }

      // Fixed-length baselines.
      std::vector<std::vector<double>> X_train, X_test;
      bool feats_ok = true;
      try {
        for (const auto& r : art.train)
          X_train.push_back(ml::aggregate_features(r, ef, opts.K).values);
        for (const auto& r : test)
          X_test.push_back(ml::aggregate_features(r, ef, opts.K).values);
      } catch (const std::exception&) {
        feats_ok = false;
      }
      Scaler scaler;
      if (feats_ok) {
        scaler.fit(X_train);
        for (auto& x : X_train) x = scaler.apply(x);
        for (auto& x : X_test) x = scaler.apply(x);
      }
      for (const auto& name : opts.models) {
        if (name == "dp") continue;
        auto& slot = cell_slots[{name, ef}][f];
        if (!feats_ok) {
          slot.error = "feature aggregation failed";
          continue;
        }
        try {
          auto kind = ml::baseline_kind_from_name(name);
          auto model = ml::train_baseline(
              kind, X_train, y_train, opts.baseline,
              derive_seed(seed, "baseline-" + name, f));
          std::vector<double> scores;
          for (const auto& x : X_test)
            scores.push_back(ml::predict_baseline(model, x));
          slot.reports.push_back(compute_metrics(scores, y_test));
        } catch (const std::exception& e) {
          slot.error = e.what();
        }
      }
    }
  });

  AblationTable table;
  table.folds = opts.folds;
  table.n_students = static_cast<int>(records.size());
  for (const auto& m : opts.models) {
    for (bool ef : {true, false}) {
      AblationCell cell;
      cell.model = m;
      cell.with_ef = ef;
      std::vector<MetricReport> reports;
      std::string error;
      for (const auto& slot : cell_slots[{m, ef}]) {
        for (const auto& r : slot.reports) reports.push_back(r);
        if (!slot.error.empty()) error = slot.error;
      }
      cell.summary = summarize_folds(reports);
      if (!error.empty()) {
        cell.summary.failed = true;
        cell.summary.error = error;
      }
      table.cells.push_back(std::move(cell));
    }
  }
  table.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return table;
}

std::string ablation_to_csv(const AblationTable& table) {
  std::ostringstream out;
  out << "# 10-fold cross-validated ablation; values in percent (mean over "
         "folds, std in brackets)\n";
  out << "# reference (HDU, not reproducible here): accuracy 78.22, F1 81.28, "
         "AUC 89.10\n";
  out << "model,ef_accuracy,ef_f1,ef_auc,noef_accuracy,noef_f1,noef_auc,"
         "ef_accuracy_std,ef_f1_std,ef_auc_std,noef_accuracy_std,noef_f1_std,"
         "noef_auc_std,status\n";
  std::set<std::string> models;
  for (const auto& c : table.cells) models.insert(c.model);
  char buf[64];
  auto pct = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.2f", v * 100.0);
    return std::string(buf);
  };
  for (const auto& m : models) {
    const AblationCell* ef = table.find(m, true);
    const AblationCell* noef = table.find(m, false);
    if (!ef || !noef) continue;
    std::string status = (ef->summary.failed || noef->summary.failed)
                             ? "Failed: " + ef->summary.error + noef->summary.error
                             : "ok";
    out << m << ',' << pct(ef->summary.mean_accuracy) << ','
        << pct(ef->summary.mean_f1) << ',' << pct(ef->summary.mean_auc) << ','
        << pct(noef->summary.mean_accuracy) << ',' << pct(noef->summary.mean_f1)
        << ',' << pct(noef->summary.mean_auc) << ','
        << pct(ef->summary.std_accuracy) << ',' << pct(ef->summary.std_f1) << ','
        << pct(ef->summary.std_auc) << ',' << pct(noef->summary.std_accuracy)
        << ',' << pct(noef->summary.std_f1) << ',' << pct(noef->summary.std_auc)
        << ',' << status << "\n";
  }
  return out.str();
}

}  // namespace moodminer::eval
