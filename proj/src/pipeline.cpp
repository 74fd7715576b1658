#include "moodminer/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "moodminer/ablation.hpp"
#include "moodminer/errors.hpp"
#include "moodminer/hmm.hpp"
#include "moodminer/ingest.hpp"
#include "moodminer/mood.hpp"
#include "moodminer/neural.hpp"
#include "moodminer/question.hpp"
#include "moodminer/synthgen.hpp"
#include "moodminer/util.hpp"

namespace fs = std::filesystem;

namespace moodminer::pipeline {

std::string tool_version() { return "0.1.0"; }

std::string Config::get(const std::string& key, const std::string& fallback) const {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (...) {
    throw ConfigInvalid("config key " + key + " is not a number: " + it->second);
  }
}

int Config::get_int(const std::string& key, int fallback) const {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (...) {
    throw ConfigInvalid("config key " + key + " is not an integer: " + it->second);
  }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (...) {
    throw ConfigInvalid("config key " + key + " is not an integer: " + it->second);
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::string v = lower(it->second);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigInvalid("config key " + key + " is not a boolean: " + it->second);
}

Config parse_config(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigInvalid("config line " + std::to_string(line_no) +
                          " is not key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigInvalid("empty config key");
    cfg.kv[key] = value;
  }
  return cfg;
}

Config load_config(const std::string& path) {
  return parse_config(read_text_file(path));
}

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_out_dir(const RunContext& ctx) {
  if (ctx.out_dir.empty()) throw ConfigInvalid("--out directory is required");
  fs::create_directories(ctx.out_dir);
}

}  // namespace

void write_manifest(const RunContext& ctx,
                    const std::vector<std::string>& output_names) {
  nlohmann::ordered_json j;
  j["schema"] = "manifest/1";
  j["subcommand"] = ctx.subcommand;
  j["tool_version"] = tool_version();
  j["seed"] = ctx.seed;
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : ctx.config.kv) cfg[k] = v;
  j["config"] = std::move(cfg);
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  for (const auto& path : ctx.inputs) {
    nlohmann::ordered_json ji;
    ji["path"] = path;
    ji["fnv64"] = hash_file_hex(path);
    inputs.push_back(std::move(ji));
  }
  j["inputs"] = std::move(inputs);
  j["outputs"] = output_names;
  j["generated_at"] = format_instant(static_cast<std::int64_t>(::time(nullptr)));
  write_text_file(join_path(ctx.out_dir, "manifest.json"), j.dump(1));
}

Summary run_simulate(const RunContext& ctx) {
  ensure_out_dir(ctx);
  synth::PlantedConfig cfg = synth::default_planted_config(ctx.seed);
  cfg.n_students = ctx.config.get_int("students", cfg.n_students);
  cfg.n_questions = ctx.config.get_int("questions", cfg.n_questions);
  cfg.beta0 = ctx.config.get_double("beta0", cfg.beta0);
  cfg.beta1 = ctx.config.get_double("beta1", cfg.beta1);
  cfg.obs_count_log_mean =
      ctx.config.get_double("obs_count_log_mean", cfg.obs_count_log_mean);
  cfg.obs_count_log_sigma =
      ctx.config.get_double("obs_count_log_sigma", cfg.obs_count_log_sigma);
  cfg.emit_rank_nationality =
      ctx.config.get_bool("emit_rank_nationality", cfg.emit_rank_nationality);

  write_manifest(ctx, {"events.csv", "ground_truth.json"});
  synth::Population pop = synth::generate_population(cfg);
  write_text_file(join_path(ctx.out_dir, "events.csv"),
                  synth::events_to_csv(pop.events, cfg.emit_rank_nationality));
  write_text_file(join_path(ctx.out_dir, "ground_truth.json"),
                  synth::truth_to_json(pop.truth));

  int dropped = 0;
  for (const auto& s : pop.truth.students) dropped += s.dropped ? 1 : 0;
  Summary s;
  s["events"] = pop.events.size();
  s["students"] = cfg.n_students;
  s["dropped_fraction"] = static_cast<double>(dropped) / cfg.n_students;
  s["split_instant"] = format_instant(cfg.split_instant);
  return s;
}

Summary run_ingest(const RunContext& ctx, const std::string& input,
                   const std::string& split_spec) {
  ensure_out_dir(ctx);
  write_manifest(ctx, {"students.json"});
  auto events = parse_event_log_file(input);

  DatasetSplit split;
  if (split_spec == "equal_halves" || split_spec == "equal" || split_spec.empty()) {
    split = split_windows(events, SplitMode::EqualHalves);
  } else {
    std::string spec = split_spec;
    if (spec.rfind("at:", 0) == 0) spec = spec.substr(3);
    auto at = parse_instant(spec);
    if (!at) throw ConfigInvalid("unparseable split instant: " + split_spec);
    split = split_windows(events, SplitMode::At, *at);
  }

  // Students visible only after the split get no record; warn about them.
  std::set<std::string> obs_students, insp_students;
  for (const auto& e : split.observation) obs_students.insert(e.student_id);
  for (const auto& e : split.inspection) insp_students.insert(e.student_id);
  int excluded = 0;
  for (const auto& sid : insp_students)
    if (!obs_students.count(sid)) {
      std::cerr << "EmptyObservationWindow: student " << sid
                << " has no observation-window submissions; excluded\n";
      ++excluded;
    }

  auto records = build_student_records(split);
  save_records(join_path(ctx.out_dir, "students.json"), records,
               split.split_instant);

  int dropped = 0;
  for (const auto& r : records) dropped += r.dropped ? 1 : 0;
  Summary s;
  s["events"] = events.size();
  s["students"] = records.size();
  s["excluded_students"] = excluded;
  s["dropped"] = dropped;
  s["split_instant"] = format_instant(split.split_instant);
  return s;
}

namespace {

std::vector<hmm::ObsSequence> sequences_of(const RecordsFile& rf) {
  std::vector<hmm::ObsSequence> seqs;
  seqs.reserve(rf.records.size());
  for (const auto& r : rf.records) seqs.push_back(hmm::transform(r.observations));
  return seqs;
}

std::size_t total_obs(const std::vector<hmm::ObsSequence>& seqs) {
  std::size_t n = 0;
  for (const auto& s : seqs) n += s.size();
  return n;
}

}  // namespace

Summary run_fit_hmm(const RunContext& ctx, const std::string& students_path) {
  ensure_out_dir(ctx);
  write_manifest(ctx, {"hmm.json", "fit_report.csv"});
  auto rf = load_records(students_path);
  auto seqs = sequences_of(rf);

  int K = ctx.config.get_int("k", 5);
  int seeds = ctx.config.get_int("seeds", 10);
  hmm::FitOptions opts;
  opts.tol = ctx.config.get_double("tol", opts.tol);
  opts.max_iter = ctx.config.get_int("max_iter", opts.max_iter);

  auto [model, report] = hmm::fit_multistart(K, seqs, seeds, ctx.seed, opts);
  hmm::save_model(join_path(ctx.out_dir, "hmm.json"), model);

  std::ostringstream trace;
  trace << "iteration,log_likelihood\n";
  for (std::size_t i = 0; i < report.ll_trace.size(); ++i)
    trace << i << ',' << format_double(report.ll_trace[i]) << "\n";
  write_text_file(join_path(ctx.out_dir, "fit_report.csv"), trace.str());

  auto ic = hmm::information_criteria(K, report.log_likelihood, total_obs(seqs));
  Summary s;
  s["K"] = K;
  s["log_likelihood"] = report.log_likelihood;
  s["iterations"] = report.iterations;
  s["converged"] = report.converged;
  s["aic"] = ic.aic;
  s["bic"] = ic.bic;
  s["k_params"] = ic.k_params;
  return s;
}

Summary run_select_k(const RunContext& ctx, const std::string& students_path) {
  ensure_out_dir(ctx);
  write_manifest(ctx, {"selection.csv", "hmm.json"});
  auto rf = load_records(students_path);
  auto seqs = sequences_of(rf);

  int k_min = ctx.config.get_int("k_min", 2);
  int k_max = ctx.config.get_int("k_max", 10);
  int seeds = ctx.config.get_int("seeds", 10);
  hmm::FitOptions opts;
  opts.tol = ctx.config.get_double("tol", opts.tol);
  opts.max_iter = ctx.config.get_int("max_iter", opts.max_iter);

  auto sel = hmm::model_selection(seqs, k_min, k_max, seeds, ctx.seed, opts);

  std::ostringstream csv;
  csv << "K,seed_best,logL,k_params,AIC,BIC\n";
  for (const auto& row : sel.table)
    csv << row.K << ',' << row.seed_best << ',' << format_double(row.log_likelihood)
        << ',' << row.k_params << ',' << format_double(row.aic) << ','
        << format_double(row.bic) << "\n";
  write_text_file(join_path(ctx.out_dir, "selection.csv"), csv.str());

  for (std::size_t i = 0; i < sel.table.size(); ++i)
    if (sel.table[i].K == sel.chosen_K)
      hmm::save_model(join_path(ctx.out_dir, "hmm.json"), sel.models[i]);

  if (sel.criteria_disagree)
    std::cerr << "model selection: AIC prefers K=" << sel.aic_choice
              << ", BIC prefers K=" << sel.chosen_K << "; using BIC\n";

  Summary s;
  s["chosen_K"] = sel.chosen_K;
  s["aic_choice"] = sel.aic_choice;
  s["criteria_disagree"] = sel.criteria_disagree;
  return s;
}

Summary run_decode(const RunContext& ctx, const std::string& students_path,
                   const std::string& model_path) {
  ensure_out_dir(ctx);
  write_manifest(ctx, {"decoded.json"});
  auto rf = load_records(students_path);
  auto model = hmm::load_model(model_path);

  parallel_for(rf.records.size(), [&](std::size_t i) {
    rf.records[i].mood_path =
        hmm::viterbi(model, hmm::transform(rf.records[i].observations)).path;
  });
  save_records(join_path(ctx.out_dir, "decoded.json"), rf.records,
               rf.split_instant, model.K);
  Summary s;
  s["students"] = rf.records.size();
  s["K"] = model.K;
  return s;
}

namespace {

RecordsFile load_decoded(const std::string& path) {
  auto rf = load_records(path);
  if (rf.decoded_k <= 0)
    throw DataError("records at " + path + " carry no decoded mood paths");
  for (const auto& r : rf.records)
    if (r.mood_path.size() != r.observations.size())
      throw DataError("student " + r.student_id + " has no decoded mood path");
  return rf;
}

}  // namespace

Summary run_characterize(const RunContext& ctx, const std::string& decoded_path) {
  ensure_out_dir(ctx);
  std::vector<std::string> outputs = {
      "state_profiles.csv", "transition_matrix.csv", "dominant_moods.csv",
      "frequency_plots.svg"};
  static const char* kCdfNames[6] = {"cdf_incorrect.svg", "cdf_accepted.svg",
                                     "cdf_ease.svg",      "cdf_time.svg",
                                     "cdf_gap.svg",       "cdf_repeats.svg"};
  for (const auto* n : kCdfNames) outputs.push_back(n);
  auto rf = load_decoded(decoded_path);
  const int K = rf.decoded_k;
  if (K == 5) outputs.push_back("mood_labels.json");
  write_manifest(ctx, outputs);

  auto profiles = mood::characterize_states(rf.records, K);
  write_text_file(join_path(ctx.out_dir, "state_profiles.csv"),
                  mood::profiles_to_csv(profiles));

  std::vector<std::vector<int>> paths;
  for (const auto& r : rf.records) paths.push_back(r.mood_path);
  auto tm = mood::empirical_transition_matrix(paths, K);
  for (int row : tm.uniform_rows)
    std::cerr << "transition matrix: state " << row
              << " has no outgoing transitions; row emitted as uniform\n";
  write_text_file(join_path(ctx.out_dir, "transition_matrix.csv"),
                  mood::transition_to_csv(tm));

  write_text_file(join_path(ctx.out_dir, "frequency_plots.svg"),
                  mood::frequency_svg(profiles));
  static const char* kCdfTitles[6] = {"incorrect answers", "accepted answers",
                                      "question ease",     "time spent (min)",
                                      "attendance gap (h)", "repeated submissions"};
  for (int fidx = 0; fidx < 6; ++fidx)
    write_text_file(join_path(ctx.out_dir, kCdfNames[fidx]),
                    mood::cdf_svg(profiles, fidx, kCdfTitles[fidx]));

  Summary s;
  s["K"] = K;

  // Mismatch feeds the dominant-mood table.
  auto qprofiles = qassoc::question_state_distribution(rf.records, K);
  qassoc::annotate_mismatch(rf.records, qprofiles, K);

  if (K == 5) {
    auto labels = mood::assign_mood_labels(profiles);
    if (labels.ambiguous)
      std::cerr << "mood labeling: a criterion tied within 1e-9; "
                   "index order used as the tie-break\n";
    nlohmann::ordered_json jl;
    jl["schema"] = "mood-labels/1";
    nlohmann::ordered_json lm;
    for (const auto& [state, label] : labels.labels)
      lm[std::to_string(state)] = mood::mood_name(label);
    jl["labels"] = std::move(lm);
    jl["ambiguous"] = labels.ambiguous;
    jl["score_sheet"] = labels.score_sheet_csv;
    write_text_file(join_path(ctx.out_dir, "mood_labels.json"), jl.dump(1));

    auto dom = mood::dominant_mood_report(rf.records, labels.labels, K);
    write_text_file(join_path(ctx.out_dir, "dominant_moods.csv"),
                    mood::dominant_to_csv(dom));
    s["labels_assigned"] = true;
  } else {
    // Profiles only; no automatic naming away from five states.
    std::map<int, mood::MoodLabel> empty;
    write_text_file(join_path(ctx.out_dir, "dominant_moods.csv"),
                    "mood,students,share_pct,mean_mismatch,dropout_pct\n");
    s["labels_assigned"] = false;
  }
  return s;
}

Summary run_mismatch(const RunContext& ctx, const std::string& decoded_path) {
  ensure_out_dir(ctx);
  write_manifest(ctx, {"question_profiles.csv", "mismatch_regression.csv",
                       "mismatch_scatter.svg", "students_mismatch.json"});
  auto rf = load_decoded(decoded_path);
  const int K = rf.decoded_k;

  auto profiles = qassoc::question_state_distribution(rf.records, K);
  qassoc::annotate_mismatch(rf.records, profiles, K);
  write_text_file(join_path(ctx.out_dir, "question_profiles.csv"),
                  qassoc::profiles_to_csv(profiles, K));

  int bins = ctx.config.get_int("bins", 10);
  auto reg = qassoc::mismatch_dropout_regression(rf.records, bins);
  write_text_file(join_path(ctx.out_dir, "mismatch_regression.csv"),
                  qassoc::regression_to_csv(reg));
  write_text_file(join_path(ctx.out_dir, "mismatch_scatter.svg"),
                  qassoc::scatter_svg(reg));
  save_records(join_path(ctx.out_dir, "students_mismatch.json"), rf.records,
               rf.split_instant, K);

  Summary s;
  s["slope"] = reg.slope;
  s["pearson_r"] = reg.pearson_r;
  s["p_value"] = reg.p_value;
  s["n_points"] = reg.n_points;
  s["unbinned_student_r"] = reg.student_r;
  return s;
}

Summary run_train_dp(const RunContext& ctx, const std::string& decoded_path) {
  ensure_out_dir(ctx);
  write_manifest(ctx, {"dp_model.json", "train_history.csv"});
  auto rf = load_decoded(decoded_path);
  const int K = rf.decoded_k;

  auto profiles = qassoc::question_state_distribution(rf.records, K);
  qassoc::annotate_mismatch(rf.records, profiles, K);

  nn::DpHyper hyper;
  hyper.hidden = ctx.config.get_int("hidden", hyper.hidden);
  hyper.fusion = ctx.config.get_int("fusion", hyper.fusion);
  hyper.learning_rate = ctx.config.get_double("lr", hyper.learning_rate);
  hyper.max_epochs = ctx.config.get_int("epochs", hyper.max_epochs);
  hyper.batch_size = ctx.config.get_int("batch", hyper.batch_size);
  hyper.max_seq_len = ctx.config.get_int("max_seq_len", hyper.max_seq_len);
  hyper.patience = ctx.config.get_int("patience", hyper.patience);
  bool with_ef = ctx.config.get_bool("with_ef", true);

  nn::Encoder enc = nn::fit_encoder(rf.records, K, with_ef, hyper.max_seq_len);
  auto encoded = nn::build_sequences(enc, rf.records, profiles);

  std::vector<int> labels;
  for (const auto& r : rf.records) labels.push_back(r.dropped ? 1 : 0);
  auto plan = eval::stratified_kfold(labels, 5, derive_seed(ctx.seed, "dp-val"));
  std::set<int> val_idx(plan.folds[0].begin(), plan.folds[0].end());
  std::vector<nn::EncodedStudent> train, val;
  for (std::size_t i = 0; i < encoded.size(); ++i)
    (val_idx.count(static_cast<int>(i)) ? val : train).push_back(encoded[i]);

  auto [params, hist] = nn::train_dp(train, val, ctx.seed, hyper, enc.step_dim(),
                                     enc.static_dim());
  write_text_file(join_path(ctx.out_dir, "dp_model.json"),
                  nn::params_to_json(params));
  write_text_file(join_path(ctx.out_dir, "train_history.csv"),
                  nn::history_to_csv(hist));

  Summary s;
  s["epochs_run"] = hist.stopped_epoch;
  s["best_val_auc"] =
      hist.val_auc.empty() ? 0.0
                           : *std::max_element(hist.val_auc.begin(), hist.val_auc.end());
  s["with_ef"] = with_ef;
  return s;
}

Summary run_ablate(const RunContext& ctx, const std::string& students_path) {
  ensure_out_dir(ctx);
  write_manifest(ctx, {"ablation_table.csv"});
  auto rf = load_records(students_path);

  eval::AblationOptions opts;
  opts.folds = ctx.config.get_int("folds", opts.folds);
  opts.K = ctx.config.get_int("k", opts.K);
  opts.hmm_seeds = ctx.config.get_int("hmm_seeds", opts.hmm_seeds);
  opts.fold_local_hmm = ctx.config.get_bool("fold_local_hmm", true);
  opts.fit.tol = ctx.config.get_double("tol", opts.fit.tol);
  opts.fit.max_iter = ctx.config.get_int("max_iter", opts.fit.max_iter);
  opts.dp.max_epochs = ctx.config.get_int("epochs", opts.dp.max_epochs);
  opts.dp.hidden = ctx.config.get_int("hidden", opts.dp.hidden);
  opts.dp.fusion = ctx.config.get_int("fusion", opts.dp.fusion);
  if (ctx.config.has("models")) {
    opts.models.clear();
    std::string list = ctx.config.get("models", "");
    for (auto& part : split_csv_line(list))
      if (!part.empty()) opts.models.push_back(part);
  }

  auto table = eval::run_ablation(rf.records, opts, ctx.seed);
  write_text_file(join_path(ctx.out_dir, "ablation_table.csv"),
                  eval::ablation_to_csv(table));

  Summary s;
  s["wall_seconds"] = table.wall_seconds;
  s["folds"] = table.folds;
  s["students"] = table.n_students;
  for (const auto& c : table.cells) {
    std::string key = c.model + (c.with_ef ? "_ef" : "_noef") + "_auc";
    s[key] = c.summary.failed ? -1.0 : c.summary.mean_auc;
  }
  return s;
}

Summary run_report(const RunContext& ctx, const std::string& run_dir) {
  ensure_out_dir(ctx);
  static const char* kNeeded[] = {"selection.csv", "mood_labels.json",
                                  "transition_matrix.csv",
                                  "mismatch_regression.csv", "ablation_table.csv"};
  std::vector<std::string> missing;
  for (const auto* name : kNeeded)
    if (!fs::exists(fs::path(run_dir) / name)) missing.push_back(name);
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw MissingArtifact("missing artifacts in " + run_dir + ": " + list);
  }
  write_manifest(ctx, {"report.md"});

  auto csv_to_md = [](const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    bool header = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (line[0] == '#') {
        out += "> " + line.substr(1) + "\n";
        continue;
      }
      std::string row = "| ";
      for (const auto& cell : split_csv_line(line)) row += cell + " | ";
      out += row + "\n";
      if (header) {
        std::size_t cols = split_csv_line(line).size();
        out += "|";
        for (std::size_t i = 0; i < cols; ++i) out += " --- |";
        out += "\n";
        header = false;
      }
    }
    return out;
  };

  std::ostringstream md;
  md << "# Pipeline report\n\n";
  md << "## State-count selection\n\n"
     << csv_to_md(read_text_file(join_path(run_dir, "selection.csv"))) << "\n";

  auto jl = nlohmann::ordered_json::parse(
      read_text_file(join_path(run_dir, "mood_labels.json")));
  md << "## Mood labels\n\n";
  for (const auto& [state, name] : jl.at("labels").items())
    md << "- state " << state << ": **" << name.get<std::string>() << "**\n";
  md << "\nScore sheet:\n\n"
     << csv_to_md(jl.at("score_sheet").get<std::string>()) << "\n";

  md << "## Mood transition matrix\n\n"
     << csv_to_md(read_text_file(join_path(run_dir, "transition_matrix.csv")))
     << "\n";
  md << "## Mismatch vs dropout\n\n"
     << csv_to_md(read_text_file(join_path(run_dir, "mismatch_regression.csv")))
     << "\n";
  md << "## Ablation\n\n"
     << csv_to_md(read_text_file(join_path(run_dir, "ablation_table.csv")))
     << "\n";

  write_text_file(join_path(ctx.out_dir, "report.md"), md.str());
  Summary s;
  s["sections"] = 5;
  return s;
}

}  // namespace moodminer::pipeline
