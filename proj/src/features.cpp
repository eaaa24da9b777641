#include "memg/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "memg/errors.hpp"
#include "memg/model.hpp"

namespace memg {

namespace {
constexpr double kConfidenceEpsilon = 1e-12;
constexpr const char* kFeatureNames[kFeatureColumns] = {"alpha", "mu",    "sigma", "eta",
                                                        "freq",  "phase", "conf"};
}  // namespace

const char* feature_name(int column) {
  if (column < 0 || column >= kFeatureColumns) throw UsageError("feature_name: bad column index");
  return kFeatureNames[column];
}

int feature_index(const std::string& name) {
  for (int i = 0; i < kFeatureColumns; ++i)
    if (name == kFeatureNames[i]) return i;
  throw UsageError("unknown feature name '" + name + "'");
}

Eigen::MatrixXd FeatureMatrix::active_values() const {
  Eigen::MatrixXd out(values.rows(), static_cast<Eigen::Index>(active.size()));
  for (std::size_t i = 0; i < active.size(); ++i) {
    if (active[i] < 0 || active[i] >= kFeatureColumns)
      throw UsageError("active column index out of range");
    out.col(static_cast<Eigen::Index>(i)) = values.col(active[i]);
  }
  return out;
}

std::vector<int> default_active_columns() {
  return {kFeatAlpha, kFeatSigma, kFeatEta, kFeatConf};
}

double frame_confidence(const FitResult& fit, const Frame& frame) {
  if (frame.size() == 0) throw UsageError("frame_confidence: empty frame");
  const double ymax = frame.samples.cwiseAbs().maxCoeff();
  if (ymax == 0.0)
    throw NumericError("frame_confidence: all-zero frame has undefined confidence");

  Eigen::VectorXd model = reconstruct(fit, frame.time_axis());
  const double mmax = model.cwiseAbs().maxCoeff();
  if (mmax > 0.0) model /= mmax;
  const double dist = (model - frame.samples / ymax).norm();
  return 1.0 / std::max(dist, kConfidenceEpsilon);
}

double component_confidence(const FitResult& fit, const Frame& frame, int k) {
  if (frame.size() == 0) throw UsageError("component_confidence: empty frame");
  if (k < 0 || k >= static_cast<int>(fit.params.components.size()))
    throw UsageError("component_confidence: component index out of range");

  const EchoParams<double>& p = fit.params.components[static_cast<std::size_t>(k)];
  const double lo = p.mu - 5.0 * p.sigma;
  const double hi = p.mu + 5.0 * p.sigma;

  std::vector<Eigen::Index> window;
  for (Eigen::Index i = 0; i < frame.size(); ++i) {
    const double x = i * frame.dt;
    if (x >= lo && x <= hi) window.push_back(i);
  }
  if (window.empty())
    throw NumericError("component_confidence: window does not intersect the frame");

  Eigen::VectorXd xs(static_cast<Eigen::Index>(window.size()));
  Eigen::VectorXd ys(static_cast<Eigen::Index>(window.size()));
  for (std::size_t i = 0; i < window.size(); ++i) {
    xs[static_cast<Eigen::Index>(i)] = window[i] * frame.dt;
    ys[static_cast<Eigen::Index>(i)] = frame.samples[window[i]];
  }
  const double dist = (reconstruct(fit, xs) - ys).norm();
  return 1.0 / std::max(dist, kConfidenceEpsilon);
}

std::pair<ParamSetd, std::vector<int>> reject_outliers(const ParamSetd& ps, double frame_end) {
  ParamSetd kept;
  kept.frame_index = ps.frame_index;
  std::vector<int> dropped;
  for (std::size_t k = 0; k < ps.components.size(); ++k) {
    const EchoParams<double>& p = ps.components[k];
    if (p.mu < 0.0 || p.sigma < 0.0 || p.mu > frame_end)
      dropped.push_back(static_cast<int>(k));
    else
      kept.components.push_back(p);
  }
  return {kept, dropped};
}

void append_rows(FeatureMatrix& m, const FitResult& fit, int frame_index, int label) {
  if (m.values.cols() != kFeatureColumns) m.values.resize(0, kFeatureColumns);
  const Eigen::Index base = m.values.rows();
  const Eigen::Index count = static_cast<Eigen::Index>(fit.params.components.size());
  m.values.conservativeResize(base + count, kFeatureColumns);
  for (Eigen::Index k = 0; k < count; ++k) {
    const EchoParams<double>& p = fit.params.components[static_cast<std::size_t>(k)];
    m.values(base + k, kFeatAlpha) = p.alpha;
    m.values(base + k, kFeatMu) = p.mu;
    m.values(base + k, kFeatSigma) = p.sigma;
    m.values(base + k, kFeatEta) = p.eta;
    m.values(base + k, kFeatFreq) = p.freq;
    m.values(base + k, kFeatPhase) = p.phase;
    m.values(base + k, kFeatConf) =
        fit.component_conf.size() > k ? fit.component_conf[k] : 0.0;
    m.frame.push_back(frame_index);
    m.component.push_back(static_cast<int>(k));
    m.labels.push_back(label);
  }
  if (m.active.empty()) m.active = default_active_columns();
}

void standardize(FeatureMatrix& m) {
  if (m.rows() < 2) throw UsageError("standardize: need at least two rows");
  if (m.active.empty()) throw UsageError("standardize: no active columns");

  const Eigen::Index n = m.rows();
  m.mu_s.resize(static_cast<Eigen::Index>(m.active.size()));
  m.sigma_s.resize(static_cast<Eigen::Index>(m.active.size()));
  for (std::size_t i = 0; i < m.active.size(); ++i) {
    const int c = m.active[i];
    const double mean = m.values.col(c).mean();
    const double sd =
        std::sqrt((m.values.col(c).array() - mean).square().sum() / static_cast<double>(n - 1));
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean)))
      throw NumericError(std::string("standardize: feature '") + feature_name(c) +
                         "' has no spread");
    m.values.col(c) = (m.values.col(c).array() - mean) / sd;
    m.mu_s[static_cast<Eigen::Index>(i)] = mean;
    m.sigma_s[static_cast<Eigen::Index>(i)] = sd;
  }
  m.standardized = true;
}

void apply_standardization(FeatureMatrix& m, const Eigen::VectorXd& mu_s,
                           const Eigen::VectorXd& sigma_s) {
  if (m.active.empty()) throw UsageError("apply_standardization: no active columns");
  if (mu_s.size() != static_cast<Eigen::Index>(m.active.size()) || sigma_s.size() != mu_s.size())
    throw UsageError("apply_standardization: statistics do not match the active columns");
  for (std::size_t i = 0; i < m.active.size(); ++i) {
    const Eigen::Index idx = static_cast<Eigen::Index>(i);
    if (sigma_s[idx] <= 0.0) throw UsageError("apply_standardization: non-positive sd");
    m.values.col(m.active[i]) = (m.values.col(m.active[i]).array() - mu_s[idx]) / sigma_s[idx];
  }
  m.mu_s = mu_s;
  m.sigma_s = sigma_s;
  m.standardized = true;
}

}  // namespace memg
