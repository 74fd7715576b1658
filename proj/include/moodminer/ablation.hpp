#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "moodminer/baselines.hpp"
#include "moodminer/eval.hpp"
#include "moodminer/hmm.hpp"
#include "moodminer/neural.hpp"
#include "moodminer/question.hpp"
#include "moodminer/types.hpp"

namespace moodminer::eval {

struct AblationOptions {
  int folds = 10;
  int K = 5;
  int hmm_seeds = 10;
  bool fold_local_hmm = true;  // refit the HMM inside each training fold
  hmm::FitOptions fit;
  nn::DpHyper dp;
  ml::BaselineHyper baseline;
  std::vector<std::string> models = {"dp", "logreg", "tree", "forest", "gbt"};
};

// Everything fitted on one training fold. Observations are rebuilt with
// fold-local question acceptance rates so nothing depends on test rows.
struct FoldArtifacts {
  std::vector<StudentRecord> train;  // re-derived, decoded, mismatch-annotated
  hmm::HmmModel model;
  std::map<std::string, double> question_stats;
  std::map<std::string, qassoc::QuestionProfile> profiles;
  std::uint64_t fingerprint() const;
};

FoldArtifacts build_fold_artifacts(const std::vector<StudentRecord>& train_records,
                                   const AblationOptions& opts,
                                   std::uint64_t seed, int fold_index);

// Applies a fold's fitted artifacts to held-out records (recompute
// observations with the fold's question stats, decode, annotate mismatch).
std::vector<StudentRecord> apply_fold_artifacts(
    const FoldArtifacts& art, const std::vector<StudentRecord>& records);

struct AblationCell {
  std::string model;
  bool with_ef = false;
  CvSummary summary;
};

struct AblationTable {
  std::vector<AblationCell> cells;
  double wall_seconds = 0.0;
  int folds = 0;
  int n_students = 0;

  const AblationCell* find(const std::string& model, bool with_ef) const;
};

AblationTable run_ablation(const std::vector<StudentRecord>& records,
                           const AblationOptions& opts, std::uint64_t seed);

// Table 6-style layout: rows = models, column groups = with/without EF.
std::string ablation_to_csv(const AblationTable& table);

}  // namespace moodminer::eval
