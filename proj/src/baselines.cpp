#include "moodminer/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "moodminer/errors.hpp"
#include "moodminer/mood.hpp"
#include "moodminer/util.hpp"

namespace moodminer::ml {

int ef_block_size(int K) { return K + 1 + K * K + K; }

AggregatedFeatures aggregate_features(const StudentRecord& record, bool with_ef,
                                      int K) {
  AggregatedFeatures f;
  f.with_ef = with_ef;
  f.K = K;
  auto& v = f.values;

  v.push_back(record.common.membership_period_days);
  v.push_back(record.common.acceptance_rate);
  v.push_back(record.common.avg_submission_gap_hours);
  for (double d : record.common.error_type_distribution) v.push_back(d);
  v.push_back(record.common.rank ? *record.common.rank : 0.0);
  v.push_back(record.common.rank ? 0.0 : 1.0);  // rank-missing flag
  double obs = static_cast<double>(record.obs_count);
  v.push_back(obs);

  if (!with_ef) return f;

  if (record.mood_path.size() != record.observations.size())
    throw DataError("student " + record.student_id + " lacks a decoded path");
  std::vector<double> frac(K, 0.0);
  for (int z : record.mood_path) frac[z] += 1.0;
  for (double& x : frac) x /= static_cast<double>(record.mood_path.size());
  for (double x : frac) v.push_back(x);

  v.push_back(record.avg_mismatch ? *record.avg_mismatch : 1.0 - 1.0 / K);

  std::vector<double> trans(K * K, 0.0);
  for (std::size_t t = 0; t + 1 < record.mood_path.size(); ++t)
    trans[record.mood_path[t] * K + record.mood_path[t + 1]] += 1.0;
  for (double x : trans) v.push_back(x);

  int dom = mood::dominant_state(record.mood_path, K);
  for (int k = 0; k < K; ++k) v.push_back(k == dom ? 1.0 : 0.0);
  return f;
}

BaselineKind baseline_kind_from_name(const std::string& name) {
  std::string n = lower(name);
  if (n == "logreg") return BaselineKind::LogReg;
  if (n == "tree") return BaselineKind::Tree;
  if (n == "forest") return BaselineKind::Forest;
  if (n == "gbt") return BaselineKind::Gbt;
  throw ConfigInvalid("unknown baseline: " + name);
}

const char* baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::LogReg: return "logreg";
    case BaselineKind::Tree: return "tree";
    case BaselineKind::Forest: return "forest";
    case BaselineKind::Gbt: return "gbt";
  }
  return "?";
}

namespace {

void check_two_classes(const std::vector<int>& y) {
  bool pos = false, neg = false;
  for (int v : y) (v ? pos : neg) = true;
  if (!pos || !neg)
    throw SingleClassTrainingSet("training set has a single class");
}

LogRegModel fit_logreg(const std::vector<std::vector<double>>& X,
                       const std::vector<int>& y, const BaselineHyper& hyper) {
  const std::size_t n = X.size();
  const std::size_t d = X[0].size();
  LogRegModel m;
  m.l2 = hyper.logreg_l2;
  m.weights.assign(d + 1, 0.0);

  auto loss_grad = [&](const std::vector<double>& w, std::vector<double>& g) {
    double loss = 0.0;
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double z = w[d];
      for (std::size_t j = 0; j < d; ++j) z += w[j] * X[i][j];
      double yi = y[i] ? 1.0 : 0.0;
      loss += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - z * yi;
      double dz = sigmoid(z) - yi;
      for (std::size_t j = 0; j < d; ++j) g[j] += dz * X[i][j];
      g[d] += dz;
    }
    loss /= n;
    for (auto& gv : g) gv /= n;
    for (std::size_t j = 0; j < d; ++j) {  // intercept not regularized
      loss += 0.5 * m.l2 * w[j] * w[j];
      g[j] += m.l2 * w[j];
    }
    return loss;
  };

  std::vector<double> g(d + 1), trial(d + 1);
  double lr = 1.0;
  double loss = loss_grad(m.weights, g);
  for (int iter = 0; iter < hyper.logreg_max_iter; ++iter) {
    double gnorm = 0.0;
    for (double gv : g) gnorm = std::max(gnorm, std::abs(gv));
    if (gnorm < hyper.logreg_tol) break;
    // Backtracking step on the full-batch gradient.
    while (true) {
      for (std::size_t j = 0; j <= d; ++j) trial[j] = m.weights[j] - lr * g[j];
      std::vector<double> gt(d + 1);
      double lt = loss_grad(trial, gt);
      if (lt <= loss || lr < 1e-12) {
        m.weights = trial;
        loss = lt;
        g = gt;
        lr = std::min(lr * 1.25, 64.0);
        break;
      }
      lr *= 0.5;
    }
  }
  return m;
}

struct TreeTarget {
  const std::vector<std::vector<double>>& X;
  const std::vector<double>& target;     // labels (0/1) or residuals
  bool classification;
};

struct Splitter {
  int max_depth;
  int min_leaf;
  int features_per_split;  // 0 = all
  Rng* rng = nullptr;

  void build(TreeModel& tree, const TreeTarget& tt,
             std::vector<int>& idx, int depth) {
    build_node(tree, tt, idx, 0, static_cast<int>(idx.size()), depth);
  }

 private:
  // Builds a node over idx[lo, hi) and returns its index.
  int build_node(TreeModel& tree, const TreeTarget& tt, std::vector<int>& idx,
                 int lo, int hi, int depth) {
    int me = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    double sum = 0.0, pos = 0.0;
    for (int i = lo; i < hi; ++i) {
      sum += tt.target[idx[i]];
      if (tt.target[idx[i]] > 0.5) pos += 1.0;
    }
    int count = hi - lo;
    auto make_leaf = [&]() {
      TreeNode& nd = tree.nodes[me];
      nd.feature = -1;
      nd.total = count;
      nd.positive = tt.classification ? pos : 0.0;
      nd.value = tt.classification ? pos / count : sum / count;
    };
    if (depth <= 0 || count < 2 * min_leaf) {
      make_leaf();
      return me;
    }

    const int d = static_cast<int>(tt.X[0].size());
    std::vector<int> feats(d);
    std::iota(feats.begin(), feats.end(), 0);
    if (features_per_split > 0 && features_per_split < d && rng) {
      std::shuffle(feats.begin(), feats.end(), *rng);
      feats.resize(features_per_split);
      std::sort(feats.begin(), feats.end());
    }

    // Best split by impurity decrease: Gini for classification, sum of
    // squared deviations for regression.
    double best_score = 0.0;
    int best_f = -1;
    double best_thr = 0.0;
    std::vector<std::pair<double, int>> vals(count);

    double total_sum = sum, total_sq = 0.0;
    if (!tt.classification)
      for (int i = lo; i < hi; ++i)
        total_sq += tt.target[idx[i]] * tt.target[idx[i]];

    for (int f : feats) {
      for (int i = lo; i < hi; ++i)
        vals[i - lo] = {tt.X[idx[i]][f], idx[i]};
      std::sort(vals.begin(), vals.end());
      double lsum = 0.0, lpos = 0.0;
      for (int i = 0; i + 1 < count; ++i) {
        lsum += tt.target[vals[i].second];
        if (tt.target[vals[i].second] > 0.5) lpos += 1.0;
        if (vals[i].first == vals[i + 1].first) continue;
        int ln = i + 1, rn = count - ln;
        if (ln < min_leaf || rn < min_leaf) continue;
        double score;
        if (tt.classification) {
          double rpos = pos - lpos;
          double gl = lpos / ln, gr = rpos / rn;
          double gini =
              (ln * 2.0 * gl * (1 - gl) + rn * 2.0 * gr * (1 - gr)) / count;
          double parent = 2.0 * (pos / count) * (1 - pos / count);
          score = parent - gini;
        } else {
          double rsum = total_sum - lsum;
          score = lsum * lsum / ln + rsum * rsum / rn -
                  total_sum * total_sum / count;
        }
        if (score > best_score + 1e-12) {
          best_score = score;
          best_f = f;
          best_thr = 0.5 * (vals[i].first + vals[i + 1].first);
        }
      }
    }

    if (best_f < 0) {
      make_leaf();
      return me;
    }

    int mid = lo;
    for (int i = lo; i < hi; ++i)
      if (tt.X[idx[i]][best_f] <= best_thr) std::swap(idx[mid++], idx[i]);
    if (mid == lo || mid == hi) {
      make_leaf();
      return me;
    }
    tree.nodes[me].feature = best_f;
    tree.nodes[me].threshold = best_thr;
    int l = build_node(tree, tt, idx, lo, mid, depth - 1);
    int r = build_node(tree, tt, idx, mid, hi, depth - 1);
    tree.nodes[me].left = l;
    tree.nodes[me].right = r;
    return me;
  }
};

TreeModel fit_tree(const std::vector<std::vector<double>>& X,
                   const std::vector<double>& target, bool classification,
                   int max_depth, int min_leaf, int features_per_split,
                   Rng* rng, const std::vector<int>* sample) {
  TreeModel tree;
  tree.dims = static_cast<int>(X[0].size());
  std::vector<int> idx;
  if (sample)
    idx = *sample;
  else {
    idx.resize(X.size());
    std::iota(idx.begin(), idx.end(), 0);
  }
  TreeTarget tt{X, target, classification};
  Splitter sp{max_depth, min_leaf, features_per_split, rng};
  sp.build(tree, tt, idx, max_depth);
  return tree;
}

}  // namespace

double TreeModel::predict(const std::vector<double>& x) const {
  int at = 0;
  while (nodes[at].feature >= 0)
    at = x[nodes[at].feature] <= nodes[at].threshold ? nodes[at].left
                                                     : nodes[at].right;
  return nodes[at].value;
}

BaselineModel train_baseline(BaselineKind kind,
                             const std::vector<std::vector<double>>& X,
                             const std::vector<int>& y,
                             const BaselineHyper& hyper, std::uint64_t seed) {
  if (X.empty() || X.size() != y.size()) throw DataError("bad training data");
  check_two_classes(y);
  const std::size_t n = X.size();
  const int d = static_cast<int>(X[0].size());

  switch (kind) {
    case BaselineKind::LogReg:
      return fit_logreg(X, y, hyper);

    case BaselineKind::Tree: {
      std::vector<double> target(y.begin(), y.end());
      return fit_tree(X, target, true, hyper.tree_max_depth, hyper.tree_min_leaf,
                      0, nullptr, nullptr);
    }

    case BaselineKind::Forest: {
      ForestModel forest;
      forest.dims = d;
      forest.trees.resize(hyper.forest_trees);
      std::vector<double> target(y.begin(), y.end());
      int mtry = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(d))));
      parallel_for(static_cast<std::size_t>(hyper.forest_trees), [&](std::size_t t) {
        Rng rng = make_rng(seed, "forest-tree", t);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<int> sample(n);
        for (std::size_t i = 0; i < n; ++i)
          sample[i] = static_cast<int>(pick(rng));
        forest.trees[t] = fit_tree(X, target, true, hyper.tree_max_depth,
                                   hyper.tree_min_leaf, mtry, &rng, &sample);
      });
      return forest;
    }

    case BaselineKind::Gbt: {
      GbtModel gbt;
      gbt.dims = d;
      gbt.shrinkage = hyper.gbt_shrinkage;
      double pos = 0.0;
      for (int v : y) pos += v;
      double prior = clamp_prob(pos / static_cast<double>(n));
      gbt.prior_logodds = std::log(prior / (1.0 - prior));

      std::vector<double> score(n, gbt.prior_logodds), residual(n);
      for (int round = 0; round < hyper.gbt_trees; ++round) {
        for (std::size_t i = 0; i < n; ++i)
          residual[i] = (y[i] ? 1.0 : 0.0) - sigmoid(score[i]);
        TreeModel tree = fit_tree(X, residual, false, hyper.gbt_depth,
                                  hyper.tree_min_leaf, 0, nullptr, nullptr);
        for (std::size_t i = 0; i < n; ++i)
          score[i] += gbt.shrinkage * tree.predict(X[i]);
        gbt.trees.push_back(std::move(tree));
      }
      return gbt;
    }
  }
  throw ConfigInvalid("unreachable baseline kind");
}

double predict_baseline(const BaselineModel& model, const std::vector<double>& x) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LogRegModel>) {
          if (x.size() + 1 != m.weights.size())
            throw DimensionMismatch("feature dimension mismatch");
          double z = m.weights.back();
          for (std::size_t j = 0; j < x.size(); ++j) z += m.weights[j] * x[j];
          return sigmoid(z);
        } else if constexpr (std::is_same_v<T, TreeModel>) {
          if (static_cast<int>(x.size()) != m.dims)
            throw DimensionMismatch("feature dimension mismatch");
          return m.predict(x);
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          if (static_cast<int>(x.size()) != m.dims)
            throw DimensionMismatch("feature dimension mismatch");
          double s = 0.0;
          for (const auto& t : m.trees) s += t.predict(x);
          return s / static_cast<double>(m.trees.size());
        } else {
          if (static_cast<int>(x.size()) != m.dims)
            throw DimensionMismatch("feature dimension mismatch");
          double z = m.prior_logodds;
          for (const auto& t : m.trees) z += m.shrinkage * t.predict(x);
          return sigmoid(z);
        }
      },
      model);
}

std::string baseline_to_json(const BaselineModel& model) {
  nlohmann::ordered_json j;
  auto tree_json = [](const TreeModel& t) {
    nlohmann::ordered_json jt;
    for (const auto& nd : t.nodes)
      jt.push_back({{"f", nd.feature},
                    {"thr", nd.threshold},
                    {"l", nd.left},
                    {"r", nd.right},
                    {"pos", nd.positive},
                    {"n", nd.total},
                    {"v", nd.value}});
    return jt;
  };
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LogRegModel>) {
          j["schema"] = "baseline-logreg/1";
          j["weights"] = m.weights;
          j["l2"] = m.l2;
        } else if constexpr (std::is_same_v<T, TreeModel>) {
          j["schema"] = "baseline-tree/1";
          j["dims"] = m.dims;
          j["nodes"] = tree_json(m);
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          j["schema"] = "baseline-forest/1";
          j["dims"] = m.dims;
          nlohmann::ordered_json arr;
          for (const auto& t : m.trees) arr.push_back(tree_json(t));
          j["trees"] = std::move(arr);
        } else {
          j["schema"] = "baseline-gbt/1";
          j["dims"] = m.dims;
          j["prior_logodds"] = m.prior_logodds;
          j["shrinkage"] = m.shrinkage;
          nlohmann::ordered_json arr;
          for (const auto& t : m.trees) arr.push_back(tree_json(t));
          j["trees"] = std::move(arr);
        }
      },
      model);
  return j.dump();
}

}  // namespace moodminer::ml
