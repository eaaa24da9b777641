#ifndef MEMG_FEATURES_HPP
#define MEMG_FEATURES_HPP

#include <string>
#include <utility>
#include <vector>

#include "memg/staged_fit.hpp"
#include "memg/types.hpp"

namespace memg {

// Value column layout of a feature matrix. conf is the per-component
// confidence; the first six mirror the model parameter order.
enum FeatureColumn : int {
  kFeatAlpha = 0,
  kFeatMu = 1,
  kFeatSigma = 2,
  kFeatEta = 3,
  kFeatFreq = 4,
  kFeatPhase = 5,
  kFeatConf = 6,
};

constexpr int kFeatureColumns = 7;

const char* feature_name(int column);
int feature_index(const std::string& name);

// Rows are retained components. labels uses -1 for unlabeled rows. active
// lists the columns that participate in standardization and classification.
struct FeatureMatrix {
  Eigen::MatrixXd values;  // n x 7
  std::vector<int> frame;
  std::vector<int> component;
  std::vector<int> labels;
  std::vector<int> active;
  Eigen::VectorXd mu_s;     // per active column, set by standardize
  Eigen::VectorXd sigma_s;  // per active column, set by standardize
  bool standardized = false;

  Eigen::Index rows() const { return values.rows(); }
  // values restricted to the active columns, in active order
  Eigen::MatrixXd active_values() const;
};

std::vector<int> default_active_columns();

// Inverse l2 distance between the max-normalized model and the max-normalized
// frame; capped at 1e12.
double frame_confidence(const FitResult& fit, const Frame& frame);

// Inverse l2 norm of the raw residual restricted to mu_k +- 5 sigma_k,
// clipped to the frame; capped at 1e12.
double component_confidence(const FitResult& fit, const Frame& frame, int k);

// Drops components with mu < 0, sigma < 0, or mu past frame_end. Returns the
// survivors and the dropped indices, both in original order.
std::pair<ParamSetd, std::vector<int>> reject_outliers(
    const ParamSetd& ps, double frame_end = std::numeric_limits<double>::infinity());

// Builds one row per component of fit, filling the first seven columns and
// the given label.
void append_rows(FeatureMatrix& m, const FitResult& fit, int frame_index, int label = -1);

// Columnwise (x - mean) / sd over the active columns using this matrix as the
// training partition; stores the statistics for later reuse on test rows.
void standardize(FeatureMatrix& m);

// Applies previously computed statistics (e.g. from the training partition).
void apply_standardization(FeatureMatrix& m, const Eigen::VectorXd& mu_s, const Eigen::VectorXd& sigma_s);

}  // namespace memg

#endif
