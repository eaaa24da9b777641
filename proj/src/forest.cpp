#include "memg/forest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "memg/errors.hpp"
#include "memg/rng.hpp"

namespace memg {

namespace {

double gini(const std::vector<int>& counts, int total) {
  if (total == 0) return 0.0;
  double sum_sq = 0.0;
  for (int c : counts) {
    const double p = static_cast<double>(c) / total;
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

int majority_class(const std::vector<int>& counts) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(counts.size()); ++c)
    if (counts[c] > counts[best]) best = c;
  return best;
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double decrease = 0.0;
};

// Per-tree growth state. Nodes are appended root-first; children are built
// before their parent entry is finalized, so writes go through indices
// rather than references that a vector reallocation would invalidate.
struct TreeGrower {
  const Eigen::MatrixXd& x;
  const Eigen::VectorXi& y;
  const ForestConfig& cfg;
  int n_classes;
  int mtry;
  int n_root;
  Rng& rng;
  Tree& tree;
  Eigen::VectorXd& importance;

  int grow(std::vector<int>& idx, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});

    TreeNode node;
    node.class_counts.assign(n_classes, 0);
    for (int r : idx) ++node.class_counts[y[r]];
    node.leaf_class = majority_class(node.class_counts);

    const int n = static_cast<int>(idx.size());
    const double parent_gini = gini(node.class_counts, n);
    const bool splittable =
        depth < cfg.max_depth && n >= cfg.min_samples_split && parent_gini > 0.0;

    SplitChoice best;
    if (splittable) best = best_split(idx, node.class_counts, parent_gini);

    if (best.feature < 0) {
      tree.nodes[id] = std::move(node);
      return id;
    }

    importance[best.feature] +=
        static_cast<double>(n) / n_root * best.decrease;

    std::vector<int> left, right;
    for (int r : idx) (x(r, best.feature) <= best.threshold ? left : right).push_back(r);

    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = grow(left, depth + 1);
    node.right = grow(right, depth + 1);
    tree.nodes[id] = std::move(node);
    return id;
  }

  // Greedy Gini split over a random feature subset. Candidates are scanned
  // in ascending feature index and ascending threshold, and a new best must
  // strictly improve, so ties land on the lowest feature then threshold.
  SplitChoice best_split(const std::vector<int>& idx, const std::vector<int>& parent_counts,
                         double parent_gini) {
    const int d = static_cast<int>(x.cols());
    std::vector<int> feats(d);
    for (int f = 0; f < d; ++f) feats[f] = f;
    for (int i = 0; i < mtry; ++i) {
      const int j = i + static_cast<int>(rng.below(d - i));
      std::swap(feats[i], feats[j]);
    }
    feats.resize(mtry);
    std::sort(feats.begin(), feats.end());

    const int n = static_cast<int>(idx.size());
    SplitChoice best;
    std::vector<std::pair<double, int>> ordered(n);
    std::vector<int> left_counts(n_classes);
    for (int f : feats) {
      for (int i = 0; i < n; ++i) ordered[i] = {x(idx[i], f), y[idx[i]]};
      std::sort(ordered.begin(), ordered.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      std::fill(left_counts.begin(), left_counts.end(), 0);
      std::vector<int> right_counts = parent_counts;
      for (int i = 0; i + 1 < n; ++i) {
        ++left_counts[ordered[i].second];
        --right_counts[ordered[i].second];
        if (ordered[i].first == ordered[i + 1].first) continue;
        const int nl = i + 1;
        const int nr = n - nl;
        if (nl < cfg.min_samples_leaf || nr < cfg.min_samples_leaf) continue;
        const double decrease = parent_gini -
                                static_cast<double>(nl) / n * gini(left_counts, nl) -
                                static_cast<double>(nr) / n * gini(right_counts, nr);
        if (decrease > best.decrease) {
          best.feature = f;
          best.threshold = 0.5 * (ordered[i].first + ordered[i + 1].first);
          best.decrease = decrease;
        }
      }
    }
    return best;
  }
};

}  // namespace

TrainedForest train_forest(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                           const ForestConfig& cfg) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (n < 1 || d < 1) throw UsageError("train_forest: empty training matrix");
  if (y.size() != n) throw UsageError("train_forest: row and label counts differ");
  if (cfg.n_trees < 1 || cfg.max_depth < 1 || cfg.min_samples_leaf < 1 ||
      cfg.min_samples_split < 2 || cfg.features_per_split < 0 || cfg.features_per_split > d)
    throw UsageError("train_forest: invalid forest configuration");

  int n_classes = 0;
  for (int i = 0; i < n; ++i) {
    if (y[i] < 0) throw UsageError("train_forest: labels must be nonnegative class indices");
    n_classes = std::max(n_classes, y[i] + 1);
  }
  std::vector<int> class_totals(n_classes, 0);
  for (int i = 0; i < n; ++i) ++class_totals[y[i]];
  int present = 0;
  for (int c : class_totals) present += c > 0;
  if (present < 2)
    throw DegenerateTrainingError("train_forest: training set holds a single class");

  TrainedForest forest;
  forest.config = cfg;
  forest.n_features = d;
  forest.n_classes = n_classes;
  forest.feature_importances = Eigen::VectorXd::Zero(d);
  const int mtry = cfg.features_per_split == 0
                       ? static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))))
                       : cfg.features_per_split;

  // Per-tree seeds are drawn up front so trees are independent of each
  // other's consumption of the stream.
  Rng master(cfg.seed);
  std::vector<std::uint64_t> tree_seeds(cfg.n_trees);
  for (auto& s : tree_seeds) s = master.raw();

  Eigen::MatrixXi oob_votes = Eigen::MatrixXi::Zero(n, n_classes);
  for (int t = 0; t < cfg.n_trees; ++t) {
    Rng rng(tree_seeds[t]);
    std::vector<int> idx(n);
    std::vector<bool> inbag(n, !cfg.bootstrap);
    if (cfg.bootstrap) {
      for (int i = 0; i < n; ++i) {
        idx[i] = static_cast<int>(rng.below(n));
        inbag[idx[i]] = true;
      }
    } else {
      for (int i = 0; i < n; ++i) idx[i] = i;
    }

    Tree tree;
    TreeGrower grower{x, y, cfg, n_classes, mtry, n, rng, tree, forest.feature_importances};
    grower.grow(idx, 0);

    for (int i = 0; i < n; ++i)
      if (!inbag[i]) ++oob_votes(i, predict_row(tree, x.row(i)));
    forest.trees.push_back(std::move(tree));
  }

  const double total = forest.feature_importances.sum();
  if (total > 0.0) forest.feature_importances /= total;

  int scored = 0;
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    if (oob_votes.row(i).sum() == 0) continue;
    int pred = 0;
    for (int c = 1; c < n_classes; ++c)
      if (oob_votes(i, c) > oob_votes(i, pred)) pred = c;
    ++scored;
    correct += pred == y[i];
  }
  if (scored > 0) forest.oob_accuracy = static_cast<double>(correct) / scored;
  return forest;
}

int predict_row(const Tree& tree, const Eigen::RowVectorXd& row) {
  if (tree.nodes.empty()) throw UsageError("predict_row: empty tree");
  int id = 0;
  while (tree.nodes[id].feature >= 0) {
    const TreeNode& node = tree.nodes[id];
    id = row[node.feature] <= node.threshold ? node.left : node.right;
  }
  return tree.nodes[id].leaf_class;
}

Eigen::MatrixXd predict_votes(const TrainedForest& forest, const Eigen::MatrixXd& x) {
  if (forest.trees.empty()) throw UsageError("predict_votes: forest has no trees");
  if (x.rows() > 0 && x.cols() != forest.n_features)
    throw UsageError("predict_votes: feature count differs from training");

  Eigen::MatrixXd votes = Eigen::MatrixXd::Zero(x.rows(), forest.n_classes);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (const Tree& tree : forest.trees) votes(i, predict_row(tree, x.row(i))) += 1.0;
  return votes / static_cast<double>(forest.trees.size());
}

Eigen::VectorXi predict(const TrainedForest& forest, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd votes = predict_votes(forest, x);
  Eigen::VectorXi labels(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < forest.n_classes; ++c)
      if (votes(i, c) > votes(i, best)) best = c;
    labels[i] = best;
  }
  return labels;
}

Metrics evaluate(const Eigen::VectorXi& predicted, const Eigen::VectorXi& truth) {
  if (predicted.size() != truth.size())
    throw UsageError("evaluate: prediction and truth lengths differ");

  Metrics m;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    if (predicted[i] < 0 || predicted[i] > 1 || truth[i] < 0 || truth[i] > 1)
      throw UsageError("evaluate: labels must be binary");
    ++m.confusion(truth[i], predicted[i]);
  }

  const double tp = m.confusion(1, 1);
  const double fp = m.confusion(0, 1);
  const double fn = m.confusion(1, 0);
  m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  m.recall_defined = tp + fn > 0;
  m.recall = m.recall_defined ? tp / (tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                    : 0.0;
  if (!m.recall_defined) m.f1 = 0.0;
  return m;
}

namespace {

FeatureMatrix take_rows(const FeatureMatrix& m, const std::vector<int>& rows) {
  FeatureMatrix out;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), m.values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = m.values.row(rows[i]);
    out.frame.push_back(m.frame[rows[i]]);
    out.component.push_back(m.component[rows[i]]);
    out.labels.push_back(m.labels[rows[i]]);
  }
  out.active = m.active;
  out.mu_s = m.mu_s;
  out.sigma_s = m.sigma_s;
  out.standardized = m.standardized;
  return out;
}

}  // namespace

std::pair<FeatureMatrix, FeatureMatrix> split_frames(const FeatureMatrix& m,
                                                     double train_fraction,
                                                     std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw UsageError("split_frames: train_fraction must lie in (0, 1)");
  if (m.rows() == 0) throw SplitError("split_frames: feature matrix has no rows");

  std::set<int> frame_set(m.frame.begin(), m.frame.end());
  std::vector<int> frames(frame_set.begin(), frame_set.end());
  const int f = static_cast<int>(frames.size());
  const int n_test = static_cast<int>(std::floor((1.0 - train_fraction) * f));
  if (n_test == 0 || n_test == f)
    throw SplitError("split_frames: a partition would receive zero frames");

  // Stratify by whether a frame contains an object-labeled component, then
  // hand the test side floor((1 - fraction) * stratum size) frames each,
  // with the leftover unit going to the larger fractional remainder.
  std::vector<std::vector<int>> strata(2);
  for (int fr : frames) {
    bool object = false;
    for (std::size_t i = 0; i < m.frame.size(); ++i)
      object = object || (m.frame[i] == fr && m.labels[i] == 1);
    strata[object ? 1 : 0].push_back(fr);
  }

  int test_quota[2];
  double rem[2];
  for (int s = 0; s < 2; ++s) {
    const double exact = (1.0 - train_fraction) * strata[s].size();
    test_quota[s] = static_cast<int>(std::floor(exact));
    rem[s] = exact - test_quota[s];
  }
  if (test_quota[0] + test_quota[1] < n_test) ++test_quota[rem[1] > rem[0] ? 1 : 0];

  Rng rng(seed);
  std::set<int> test_frames;
  for (int s = 0; s < 2; ++s) {
    rng.shuffle(strata[s]);
    for (int i = 0; i < test_quota[s]; ++i) test_frames.insert(strata[s][i]);
  }

  std::vector<int> train_rows, test_rows;
  for (std::size_t i = 0; i < m.frame.size(); ++i)
    (test_frames.count(m.frame[i]) ? test_rows : train_rows).push_back(static_cast<int>(i));
  if (train_rows.empty() || test_rows.empty())
    throw SplitError("split_frames: a partition received zero rows");
  return {take_rows(m, train_rows), take_rows(m, test_rows)};
}

}  // namespace memg
