#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "memg/features.hpp"
#include "memg/model.hpp"

using namespace memg;

namespace {

constexpr double kDt = 1.0 / 300.0;

Eigen::VectorXd axis(int n) {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = i * kDt;
  return x;
}

EchoParams<double> comp(double a, double m, double s, double e, double f, double ph) {
  EchoParams<double> p;
  p.alpha = a;
  p.mu = m;
  p.sigma = s;
  p.eta = e;
  p.freq = f;
  p.phase = ph;
  return p;
}

FitResult fit_of(const std::vector<EchoParams<double>>& comps, bool oscillating = true) {
  FitResult fit;
  fit.params.components = comps;
  fit.oscillating = oscillating;
  return fit;
}

Frame frame_from(const Eigen::VectorXd& samples) {
  Frame f;
  f.samples = samples;
  f.dt = kDt;
  return f;
}

}  // namespace

TEST_CASE("frame_confidence caps at 1e12 for a perfect fit") {
  FitResult fit = fit_of({comp(60.0, 1.0, 0.06, 1.5, 50.0, 0.4)});
  Frame f = frame_from(eval_model(fit.params, axis(600), true));
  CHECK(frame_confidence(fit, f) == 1e12);
}

TEST_CASE("frame_confidence against a zero model is the inverse norm of the normalized frame") {
  FitResult empty;  // reconstructs to zero
  Eigen::VectorXd y(5);
  y << 1.0, -2.0, 4.0, 0.5, -1.0;
  Frame f = frame_from(y);
  const double expect = 1.0 / (y / 4.0).norm();
  CHECK(frame_confidence(empty, f) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("frame_confidence rejects an all-zero frame") {
  FitResult fit = fit_of({comp(1.0, 0.5, 0.1, 0.0, 50.0, 0.0)});
  CHECK_THROWS_AS(frame_confidence(fit, frame_from(Eigen::VectorXd::Zero(100))), NumericError);
  CHECK_THROWS_AS(frame_confidence(fit, frame_from(Eigen::VectorXd())), UsageError);
}

TEST_CASE("frame_confidence grows as the residual shrinks") {
  FitResult fit = fit_of({comp(60.0, 1.0, 0.06, 1.5, 50.0, 0.4)});
  Eigen::VectorXd model = eval_model(fit.params, axis(600), true);

  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd r(600);
  for (int i = 0; i < 600; ++i) r[i] = nd(gen);
  // keep the frame maximum pinned to the model maximum
  Eigen::Index peak;
  model.cwiseAbs().maxCoeff(&peak);
  r[peak] = 0.0;

  const double big = frame_confidence(fit, frame_from(model + r));
  const double small = frame_confidence(fit, frame_from(model + 0.5 * r));
  CHECK(small >= big);
}

TEST_CASE("frame_confidence is invariant to joint positive rescaling") {
  FitResult fit = fit_of({comp(60.0, 1.0, 0.06, 1.5, 50.0, 0.4)});
  Eigen::VectorXd model = eval_model(fit.params, axis(600), true);
  Eigen::VectorXd y = model;
  for (int i = 0; i < 600; i += 7) y[i] += 0.3;

  FitResult scaled = fit_of({comp(60.0 * 3.7, 1.0, 0.06, 1.5, 50.0, 0.4)});
  const double c1 = frame_confidence(fit, frame_from(y));
  const double c2 = frame_confidence(scaled, frame_from(3.7 * y));
  CHECK(c1 == doctest::Approx(c2).epsilon(1e-12));
}

TEST_CASE("component_confidence is the inverse norm of the windowed residual") {
  FitResult fit = fit_of({comp(50.0, 1.0, 0.1003, 0.5, 50.0, 0.2)});
  const int n = 600;
  Eigen::VectorXd x = axis(n);
  Eigen::VectorXd model = eval_model(fit.params, x, true);

  std::mt19937_64 gen(13);
  std::normal_distribution<double> nd(0.0, 0.5);
  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i) r[i] = nd(gen);
  Frame f = frame_from(model + r);

  const double lo = 1.0 - 5.0 * 0.1003;
  const double hi = 1.0 + 5.0 * 0.1003;
  double ss = 0.0;
  for (int i = 0; i < n; ++i)
    if (x[i] >= lo && x[i] <= hi) ss += r[i] * r[i];
  CHECK(component_confidence(fit, f, 0) == doctest::Approx(1.0 / std::sqrt(ss)).epsilon(1e-12));
}

TEST_CASE("component_confidence caps for a perfect local fit") {
  FitResult fit = fit_of({comp(50.0, 1.0, 0.08, 0.0, 50.0, 0.0)});
  Frame f = frame_from(eval_model(fit.params, axis(600), true));
  CHECK(component_confidence(fit, f, 0) == 1e12);
}

TEST_CASE("component_confidence clips windows at the frame edge") {
  FitResult fit = fit_of({comp(30.0, 0.05, 0.04, 0.0, 50.0, 0.0)});
  Frame f = frame_from(eval_model(fit.params, axis(300), true));
  const double c = component_confidence(fit, f, 0);
  CHECK(std::isfinite(c));
  CHECK(c > 0.0);
}

TEST_CASE("component_confidence errors on windows outside the frame") {
  FitResult fit = fit_of({comp(30.0, -10.0, 0.01, 0.0, 50.0, 0.0)});
  Eigen::VectorXd y = Eigen::VectorXd::Constant(100, 1.0);
  CHECK_THROWS_AS(component_confidence(fit, frame_from(y), 0), NumericError);
  CHECK_THROWS_AS(component_confidence(fit, frame_from(y), 3), UsageError);
}

TEST_CASE("reject_outliers drops negative mu, negative sigma, and out-of-frame mu") {
  ParamSetd ps;
  ps.frame_index = 4;
  ps.components.push_back(comp(10.0, 0.5, 0.1, 0.0, 50.0, 0.0));
  ps.components.push_back(comp(11.0, -1.0, 0.1, 0.0, 50.0, 0.0));
  ps.components.push_back(comp(12.0, 0.8, -0.3, 0.0, 50.0, 0.0));
  ps.components.push_back(comp(13.0, 4.0, 0.1, 0.0, 50.0, 0.0));

  auto [kept, dropped] = reject_outliers(ps, 2.0);
  CHECK(kept.frame_index == 4);
  REQUIRE(kept.size() == 1);
  CHECK(kept.components[0].alpha == 10.0);
  CHECK(dropped == std::vector<int>{1, 2, 3});

  // without a frame end, only the sign rules apply
  auto [kept2, dropped2] = reject_outliers(ps);
  CHECK(kept2.size() == 2);
  CHECK(dropped2 == std::vector<int>{1, 2});
}

TEST_CASE("reject_outliers preserves survivors bitwise") {
  ParamSetd ps;
  ps.components.push_back(comp(10.1, 0.51, 0.11, 1.3, 50.2, 0.21));
  ps.components.push_back(comp(11.5, -2.0, 0.12, -0.4, 49.8, -0.3));
  ps.components.push_back(comp(12.9, 1.44, 0.13, 0.9, 50.9, 1.7));
  auto [kept, dropped] = reject_outliers(ps, 2.0);
  REQUIRE(kept.size() == 2);
  for (int d = 0; d < kParamsPerComponent; ++d) {
    CHECK(kept.components[0][d] == ps.components[0][d]);
    CHECK(kept.components[1][d] == ps.components[2][d]);
  }
  CHECK(reject_outliers(ParamSetd{}).first.size() == 0);
}

TEST_CASE("append_rows lays out parameters, confidence, and label") {
  FitResult fit = fit_of({comp(10.0, 0.5, 0.1, 1.0, 50.0, 0.2), comp(20.0, 1.5, 0.2, -1.0, 51.0, -0.2)});
  fit.component_conf.resize(2);
  fit.component_conf << 3.5, 4.5;

  FeatureMatrix m;
  append_rows(m, fit, 7, 1);
  REQUIRE(m.rows() == 2);
  CHECK(m.values(0, kFeatAlpha) == 10.0);
  CHECK(m.values(1, kFeatMu) == 1.5);
  CHECK(m.values(0, kFeatSigma) == 0.1);
  CHECK(m.values(1, kFeatEta) == -1.0);
  CHECK(m.values(0, kFeatFreq) == 50.0);
  CHECK(m.values(1, kFeatPhase) == -0.2);
  CHECK(m.values(0, kFeatConf) == 3.5);
  CHECK(m.values(1, kFeatConf) == 4.5);
  CHECK(m.frame == std::vector<int>{7, 7});
  CHECK(m.component == std::vector<int>{0, 1});
  CHECK(m.labels == std::vector<int>{1, 1});
}

TEST_CASE("standardize maps a two-point column to plus and minus one over root two") {
  FeatureMatrix m;
  m.values.resize(2, kFeatureColumns);
  m.values.setZero();
  m.values(0, kFeatSigma) = 1.0;
  m.values(1, kFeatSigma) = 3.0;
  m.values(0, kFeatEta) = -2.0;
  m.values(1, kFeatEta) = 2.0;
  m.active = {kFeatSigma, kFeatEta};
  standardize(m);
  const double root_half = 1.0 / std::sqrt(2.0);
  CHECK(m.values(0, kFeatSigma) == doctest::Approx(-root_half).epsilon(1e-14));
  CHECK(m.values(1, kFeatSigma) == doctest::Approx(root_half).epsilon(1e-14));
  CHECK(m.mu_s[0] == 2.0);
  CHECK(m.sigma_s[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(m.standardized);
}

TEST_CASE("standardize leaves inactive columns untouched") {
  std::mt19937_64 gen(19);
  std::normal_distribution<double> nd(5.0, 2.0);
  FeatureMatrix m;
  m.values.resize(30, kFeatureColumns);
  for (Eigen::Index i = 0; i < 30; ++i)
    for (int c = 0; c < kFeatureColumns; ++c) m.values(i, c) = nd(gen);
  m.active = {kFeatAlpha, kFeatSigma, kFeatEta, kFeatConf};
  const Eigen::VectorXd mu_before = m.values.col(kFeatMu);
  standardize(m);
  CHECK((m.values.col(kFeatMu) - mu_before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("standardized columns have zero mean and unit sample deviation") {
  std::mt19937_64 gen(29);
  std::normal_distribution<double> nd(-3.0, 7.0);
  FeatureMatrix m;
  m.values.resize(50, kFeatureColumns);
  for (Eigen::Index i = 0; i < 50; ++i)
    for (int c = 0; c < kFeatureColumns; ++c) m.values(i, c) = nd(gen);
  m.active = {kFeatAlpha, kFeatSigma, kFeatEta, kFeatConf};
  standardize(m);
  for (int c : m.active) {
    const double mean = m.values.col(c).mean();
    const double sd = std::sqrt((m.values.col(c).array() - mean).square().sum() / 49.0);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(sd - 1.0) < 1e-9);
  }
}

TEST_CASE("standardize is idempotent within rounding") {
  std::mt19937_64 gen(31);
  std::normal_distribution<double> nd(0.0, 1.0);
  FeatureMatrix m;
  m.values.resize(40, kFeatureColumns);
  for (Eigen::Index i = 0; i < 40; ++i)
    for (int c = 0; c < kFeatureColumns; ++c) m.values(i, c) = nd(gen);
  m.active = {kFeatSigma, kFeatEta};
  standardize(m);
  Eigen::MatrixXd once = m.values;
  standardize(m);
  CHECK((m.values - once).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("standardize rejects degenerate inputs") {
  FeatureMatrix one;
  one.values.resize(1, kFeatureColumns);
  one.values.setZero();
  one.active = {kFeatSigma};
  CHECK_THROWS_AS(standardize(one), UsageError);

  FeatureMatrix flat;
  flat.values.resize(5, kFeatureColumns);
  flat.values.setConstant(2.5);
  flat.active = {kFeatSigma};
  CHECK_THROWS_AS(standardize(flat), NumericError);
}

TEST_CASE("test rows standardized with training statistics are not zero mean") {
  std::mt19937_64 gen(37);
  std::normal_distribution<double> train_dist(10.0, 2.0);
  std::normal_distribution<double> test_dist(14.0, 2.0);

  FeatureMatrix train;
  train.values.resize(60, kFeatureColumns);
  train.values.setZero();
  for (Eigen::Index i = 0; i < 60; ++i) train.values(i, kFeatSigma) = train_dist(gen);
  train.active = {kFeatSigma};
  standardize(train);

  FeatureMatrix test;
  test.values.resize(40, kFeatureColumns);
  test.values.setZero();
  for (Eigen::Index i = 0; i < 40; ++i) test.values(i, kFeatSigma) = test_dist(gen);
  test.active = {kFeatSigma};
  apply_standardization(test, train.mu_s, train.sigma_s);
  CHECK(test.values.col(kFeatSigma).mean() > 1.0);  // offset (14 - 10) / 2

  Eigen::VectorXd wrong(2);
  wrong << 0.0, 1.0;
  CHECK_THROWS_AS(apply_standardization(test, wrong, wrong), UsageError);
}

TEST_CASE("feature names and indices round-trip") {
  for (int c = 0; c < kFeatureColumns; ++c) CHECK(feature_index(feature_name(c)) == c);
  CHECK(feature_name(kFeatConf) == std::string("conf"));
  CHECK_THROWS_AS(feature_index("bogus"), UsageError);
  CHECK_THROWS_AS(feature_name(9), UsageError);
}

TEST_CASE("active_values selects columns in order") {
  FeatureMatrix m;
  m.values.resize(2, kFeatureColumns);
  for (int c = 0; c < kFeatureColumns; ++c) {
    m.values(0, c) = c;
    m.values(1, c) = 10 + c;
  }
  m.active = {kFeatConf, kFeatAlpha};
  Eigen::MatrixXd v = m.active_values();
  REQUIRE(v.rows() == 2);
  REQUIRE(v.cols() == 2);
  CHECK(v(0, 0) == double(kFeatConf));
  CHECK(v(0, 1) == double(kFeatAlpha));
  CHECK(v(1, 0) == 10.0 + double(kFeatConf));
}
