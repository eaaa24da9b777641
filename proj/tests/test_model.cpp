#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "memg/model.hpp"

using namespace memg;

namespace {

// Scalar long double reference, composed term by term straight from the model
// definition and independent of the Eigen evaluation path.
long double ref_component(const EchoParams<long double>& p, long double x, bool oscillating) {
  const long double dx = x - p.mu;
  const long double N = std::exp(-dx * dx / (2.0L * p.sigma * p.sigma));
  const long double P = 1.0L + std::erf(p.eta * dx / (p.sigma * std::sqrt(2.0L)));
  const long double A =
      oscillating ? std::cos(2.0L * static_cast<long double>(EIGEN_PI) * p.freq * dx + p.phase) : 1.0L;
  return p.alpha * N * P * A;
}

EchoParams<long double> widen(const EchoParamsd& p) {
  EchoParams<long double> q;
  for (int d = 0; d < kParamsPerComponent; ++d) q[d] = static_cast<long double>(p[d]);
  return q;
}

Eigen::VectorXd axis(int n, double lo, double hi) {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = lo + (hi - lo) * i / (n - 1);
  return x;
}

EchoParamsd random_component(std::mt19937_64& gen, double mu_lo, double mu_hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EchoParamsd p;
  p.alpha = 0.5 + 99.5 * u(gen);
  p.mu = mu_lo + (mu_hi - mu_lo) * u(gen);
  p.sigma = 0.05 + 4.95 * u(gen);
  p.eta = -10.0 + 20.0 * u(gen);
  p.freq = 10.0 + 490.0 * u(gen);
  p.phase = -3.0 + 6.0 * u(gen);
  return p;
}

}  // namespace

TEST_CASE("eval_component matches a hand-composed spot value") {
  EchoParamsd p;
  p.alpha = 1.0;
  p.mu = 0.0;
  p.sigma = 1.0;
  p.eta = 1.0;
  p.freq = 0.5;
  p.phase = 0.0;
  Eigen::VectorXd x(1);
  x << 1.0;
  Eigen::VectorXd m = eval_component(p, x);
  // exp(-1/2) * (1 + erf(1/sqrt 2)) * cos(pi), frozen from a long double
  // scalar evaluation.
  CHECK(m[0] == doctest::Approx(-1.0206027677574228).epsilon(1e-14));
}

TEST_CASE("eval_component agrees with long double term-by-term reference") {
  std::mt19937_64 gen(12345);
  Eigen::VectorXd x = axis(257, 0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    EchoParamsd p = random_component(gen, 0.2, 1.8);
    for (bool osc : {true, false}) {
      Eigen::VectorXd m = eval_component(p, x, osc);
      for (int i = 0; i < x.size(); ++i) {
        const long double r = ref_component(widen(p), static_cast<long double>(x[i]), osc);
        // Error budget is relative to the component amplitude: near carrier
        // zeros the pointwise relative error is dominated by double rounding
        // of the cosine argument and says nothing about the formula.
        CHECK(std::abs(m[i] - static_cast<double>(r)) <= 1e-11 * std::abs(p.alpha));
      }
    }
  }
}

TEST_CASE("eval_model equals the brute-force component sum") {
  std::mt19937_64 gen(777);
  Eigen::VectorXd x = axis(123, 0.0, 3.0);
  ParamSetd ps;
  for (int k = 0; k < 4; ++k) ps.components.push_back(random_component(gen, 0.3, 2.7));

  Eigen::VectorXd m = eval_model(ps, x);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.size());
  for (const auto& p : ps.components) sum += eval_component(p, x);
  CHECK((m - sum).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two identical components double the single-component model exactly") {
  EchoParamsd p;
  p.alpha = 7.0;
  p.mu = 1.0;
  p.sigma = 0.3;
  p.eta = 2.0;
  p.freq = 40.0;
  p.phase = 0.7;
  Eigen::VectorXd x = axis(64, 0.0, 2.0);
  ParamSetd ps;
  ps.components = {p, p};
  Eigen::VectorXd two = eval_model(ps, x);
  Eigen::VectorXd one = eval_component(p, x);
  for (int i = 0; i < x.size(); ++i) CHECK(two[i] == 2.0 * one[i]);
}

TEST_CASE("eta = 0 gives a symmetric non-oscillating pulse") {
  EchoParamsd p;
  p.alpha = 3.0;
  p.mu = 1.0;
  p.sigma = 0.25;
  p.eta = 0.0;
  Eigen::VectorXd x(2);
  for (double d : {0.1, 0.37, 0.6}) {
    x << p.mu - d, p.mu + d;
    Eigen::VectorXd m = eval_component(p, x, false);
    CHECK(std::abs(m[0] - m[1]) < 1e-12 * std::abs(m[0]));
  }
}

TEST_CASE("positive eta shifts pulse mass to the right of mu") {
  EchoParamsd p;
  p.alpha = 1.0;
  p.mu = 0.0;
  p.sigma = 0.5;
  p.eta = 3.0;
  Eigen::VectorXd x = axis(4001, -5.0, 5.0);
  Eigen::VectorXd m = eval_component(p, x, false);
  double left = 0.0, right = 0.0;
  for (int i = 0; i < x.size(); ++i) (x[i] < 0.0 ? left : right) += m[i];
  CHECK(right > 5.0 * left);

  p.eta = -3.0;
  m = eval_component(p, x, false);
  left = right = 0.0;
  for (int i = 0; i < x.size(); ++i) (x[i] < 0.0 ? left : right) += m[i];
  CHECK(left > 5.0 * right);
}

TEST_CASE("alpha column of the jacobian reproduces eval_component at alpha = 1") {
  std::mt19937_64 gen(42);
  Eigen::VectorXd x = axis(101, 0.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    EchoParamsd p = random_component(gen, 0.2, 1.8);
    ParamSetd ps;
    ps.components = {p};
    Eigen::MatrixXd J = jacobian(ps, x);
    EchoParamsd unit = p;
    unit.alpha = 1.0;
    Eigen::VectorXd m1 = eval_component(unit, x);
    for (int i = 0; i < x.size(); ++i) CHECK(J(i, kAlpha) == m1[i]);
  }
}

TEST_CASE("jacobian matches central finite differences") {
  std::mt19937_64 gen(2024);
  Eigen::VectorXd x = axis(151, 0.0, 2.0);

  auto check_fd = [&](const ParamSetd& ps, const ParamMask& mask, bool osc) {
    Eigen::MatrixXd J = jacobian(ps, x, mask, osc);
    int col = 0;
    for (int k = 0; k < ps.size(); ++k) {
      for (int d = 0; d < kParamsPerComponent; ++d) {
        if (!mask[d]) continue;
        const double h = 1e-6 * std::max(1.0, std::abs(ps.components[k][d]));
        ParamSetd hi = ps, lo = ps;
        hi.components[k][d] += h;
        lo.components[k][d] -= h;
        Eigen::VectorXd fd = (eval_model(hi, x, osc) - eval_model(lo, x, osc)) / (2.0 * h);
        const double err = (fd - J.col(col)).norm();
        CHECK(err <= 1e-5 * (1.0 + J.col(col).norm()));
        ++col;
      }
    }
    CHECK(col == J.cols());
  };

  for (int trial = 0; trial < 25; ++trial) {
    ParamSetd ps;
    const int K = 1 + static_cast<int>(gen() % 3);
    for (int k = 0; k < K; ++k) ps.components.push_back(random_component(gen, 0.2, 1.8));
    check_fd(ps, kAllParams, true);
    check_fd(ps, kEnvelopeParams, false);
    check_fd(ps, kOscillationParams, true);
  }
}

TEST_CASE("freq and phase columns vanish for a non-oscillating model") {
  std::mt19937_64 gen(7);
  Eigen::VectorXd x = axis(64, 0.0, 2.0);
  ParamSetd ps;
  ps.components = {random_component(gen, 0.5, 1.5)};
  Eigen::MatrixXd J = jacobian(ps, x, kAllParams, false);
  CHECK(J.col(kFreq).cwiseAbs().maxCoeff() == 0.0);
  CHECK(J.col(kPhase).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("normalize_phase wraps into (-pi, pi]") {
  const double pi = EIGEN_PI;
  CHECK(normalize_phase(pi) == pi);
  CHECK(normalize_phase(-pi) == pi);
  CHECK(normalize_phase(0.0) == 0.0);
  CHECK(normalize_phase(7.5) == doctest::Approx(1.2168146928204135).epsilon(1e-15));
  CHECK(normalize_phase(-1.5 * pi) == doctest::Approx(0.5 * pi).epsilon(1e-15));
  CHECK(normalize_phase(3.0 * pi) == doctest::Approx(pi).epsilon(1e-15));

  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 200; ++i) {
    const double w = normalize_phase(u(gen));
    CHECK(w > -pi);
    CHECK(w <= pi);
    CHECK(normalize_phase(w) == w);
  }
  CHECK_THROWS_AS(normalize_phase(std::numeric_limits<double>::quiet_NaN()), NumericError);
  CHECK_THROWS_AS(normalize_phase(std::numeric_limits<double>::infinity()), NumericError);
}

TEST_CASE("degenerate and invalid inputs are rejected") {
  Eigen::VectorXd x = axis(8, 0.0, 1.0);
  EchoParamsd p;
  p.alpha = 1.0;

  p.sigma = 0.0;
  CHECK_THROWS_AS(eval_component(p, x), NumericError);
  p.sigma = 1e-10;
  CHECK_THROWS_AS(eval_component(p, x), NumericError);
  p.sigma = -1e-10;
  CHECK_THROWS_AS(eval_component(p, x), NumericError);

  p.sigma = 1.0;
  p.mu = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(eval_component(p, x), NumericError);

  p.mu = 0.0;
  Eigen::VectorXd bad = x;
  bad[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(eval_component(p, bad), NumericError);

  ParamSetd empty;
  CHECK_THROWS_AS(eval_model(empty, x), NumericError);
  CHECK_THROWS_AS(jacobian(empty, x), NumericError);

  ParamSetd one;
  one.components = {p};
  ParamMask none = {false, false, false, false, false, false};
  CHECK_THROWS_AS(jacobian(one, x, none), UsageError);
}

TEST_CASE("negative sigma mirrors the skew factor") {
  // |sigma| leaves the Gaussian untouched but flips the erf argument, so a
  // sign flip of sigma is equivalent to a sign flip of eta.
  EchoParamsd p;
  p.alpha = 2.0;
  p.mu = 1.0;
  p.sigma = 0.3;
  p.eta = 1.7;
  Eigen::VectorXd x = axis(33, 0.0, 2.0);
  EchoParamsd q = p;
  q.sigma = -p.sigma;
  q.eta = -p.eta;
  Eigen::VectorXd a = eval_component(p, x, false);
  Eigen::VectorXd b = eval_component(q, x, false);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("flatten and unflatten round-trip") {
  std::mt19937_64 gen(5);
  ParamSetd ps;
  ps.frame_index = 3;
  for (int k = 0; k < 3; ++k) ps.components.push_back(random_component(gen, 0.0, 2.0));
  Eigen::VectorXd v = ps.flatten();
  CHECK(v.size() == 18);
  ParamSetd back = ParamSetd::unflatten(v, ps.frame_index);
  CHECK(back.frame_index == 3);
  REQUIRE(back.size() == ps.size());
  for (int k = 0; k < ps.size(); ++k)
    for (int d = 0; d < kParamsPerComponent; ++d)
      CHECK(back.components[k][d] == ps.components[k][d]);

  Eigen::VectorXd short_v(7);
  short_v.setZero();
  CHECK_THROWS_AS(ParamSetd::unflatten(short_v), UsageError);
}
