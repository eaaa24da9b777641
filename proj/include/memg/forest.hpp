#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "memg/features.hpp"
#include "memg/types.hpp"

namespace memg {

// Hyperparameters of the bagged-tree classifier.
struct ForestConfig {
  int n_trees = 10;
  int max_depth = 6;
  int min_samples_leaf = 1;
  int min_samples_split = 2;
  int features_per_split = 0;  // 0 selects ceil(sqrt(feature count))
  std::uint64_t seed = 0;
  bool bootstrap = true;
};

// One node of a decision tree stored in a flat array. Interior nodes route
// rows with value <= threshold to the left child; leaves have feature == -1
// and keep their training class counts.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf_class = -1;
  std::vector<int> class_counts;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct TrainedForest {
  std::vector<Tree> trees;
  Eigen::VectorXd feature_importances;  // normalized impurity decrease
  int n_features = 0;
  int n_classes = 0;
  // Majority-vote accuracy over rows left out of the bootstrap resamples;
  // NaN when bagging is disabled and no row is ever out of bag.
  double oob_accuracy = std::numeric_limits<double>::quiet_NaN();
  ForestConfig config;  // settings the forest was grown with
};

// Binary detection scores for the positive class (label 1). confusion has
// rows = truth, columns = prediction. recall_defined is false when the truth
// holds no positives; f1 is reported as 0 in that case.
struct Metrics {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  Eigen::Matrix2i confusion = Eigen::Matrix2i::Zero();
  bool recall_defined = true;
};

// Grows cfg.n_trees CART trees on bootstrap resamples of (x, y) with Gini
// impurity splits over random feature subsets. Labels must be dense class
// indices starting at 0.
TrainedForest train_forest(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                           const ForestConfig& cfg = {});

int predict_row(const Tree& tree, const Eigen::RowVectorXd& row);

// Per-class fraction of trees voting for each row (rows x n_classes).
Eigen::MatrixXd predict_votes(const TrainedForest& forest, const Eigen::MatrixXd& x);

// Majority vote across trees; ties resolve toward the lower class index.
Eigen::VectorXi predict(const TrainedForest& forest, const Eigen::MatrixXd& x);

Metrics evaluate(const Eigen::VectorXi& predicted, const Eigen::VectorXi& truth);

// Partitions rows into train and test by frame index, keeping every
// component of a frame on one side. Frames are stratified by whether they
// contain an object-labeled row; the test side receives
// floor((1 - train_fraction) * frames) of them.
std::pair<FeatureMatrix, FeatureMatrix> split_frames(const FeatureMatrix& m,
                                                     double train_fraction,
                                                     std::uint64_t seed);

}  // namespace memg
