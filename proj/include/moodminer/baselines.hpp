#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "moodminer/types.hpp"

namespace moodminer::ml {

// Fixed-length feature vector for the non-sequential classifiers: the common
// block always, plus the engagement block (per-mood time fractions, mean
// mismatch, flattened transition counts, dominant-mood one-hot) when
// with_ef is set.
struct AggregatedFeatures {
  std::vector<double> values;
  bool with_ef = false;
  int K = 0;
};

// Dimensionality contract: switching EF off shortens the vector by exactly
// K (fractions) + 1 (mean mismatch) + K*K (transitions) + K (dominant).
int ef_block_size(int K);

AggregatedFeatures aggregate_features(const StudentRecord& record, bool with_ef,
                                      int K);

enum class BaselineKind { LogReg, Tree, Forest, Gbt };

BaselineKind baseline_kind_from_name(const std::string& name);
const char* baseline_name(BaselineKind k);

struct LogRegModel {
  std::vector<double> weights;  // last entry is the intercept
  double l2 = 1e-2;
};

struct TreeNode {
  int feature = -1;       // -1 marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  double positive = 0.0;  // leaf statistics
  double total = 0.0;
  double value = 0.0;     // leaf prediction (prob or regression value)
};

struct TreeModel {
  std::vector<TreeNode> nodes;
  int dims = 0;
  double predict(const std::vector<double>& x) const;
};

struct ForestModel {
  std::vector<TreeModel> trees;
  int dims = 0;
};

struct GbtModel {
  std::vector<TreeModel> trees;
  double prior_logodds = 0.0;
  double shrinkage = 0.1;
  int dims = 0;
};

using BaselineModel = std::variant<LogRegModel, TreeModel, ForestModel, GbtModel>;

struct BaselineHyper {
  double logreg_l2 = 1e-2;
  double logreg_tol = 1e-6;
  int logreg_max_iter = 5000;
  int tree_max_depth = 8;
  int tree_min_leaf = 5;
  int forest_trees = 100;
  int gbt_trees = 100;
  int gbt_depth = 3;
  double gbt_shrinkage = 0.1;
};

// Deterministic given (data, seed). Raises SingleClassTrainingSet when only
// one label is present.
BaselineModel train_baseline(BaselineKind kind,
                             const std::vector<std::vector<double>>& X,
                             const std::vector<int>& y,
                             const BaselineHyper& hyper, std::uint64_t seed);

double predict_baseline(const BaselineModel& model, const std::vector<double>& x);

std::string baseline_to_json(const BaselineModel& model);

}  // namespace moodminer::ml
