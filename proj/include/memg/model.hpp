#pragma once

#include <cmath>
#include <limits>

#include "memg/types.hpp"

// Oscillating, exponentially modified Gaussian echo model
//
//   m(p; x) = alpha * G(x) * (1 + erf(eta * (x - mu) / (sigma * sqrt(2)))) * cos(2 pi f (x - mu) + phi)
//   G(x)    = exp(-(x - mu)^2 / (2 sigma^2))
//
// and its sum over components plus analytic partial derivatives. Everything is
// templated on the scalar type so that tests can cross-check against a long
// double evaluation path.

namespace memg {

// Spreads below this are treated as degenerate (the Gaussian collapses to a
// spike narrower than any realistic sample period).
inline constexpr double kSigmaFloor = 1e-9;

// Wraps an angle into (-pi, pi].
template <class Scalar = double>
Scalar normalize_phase(Scalar phi) {
  if (!std::isfinite(static_cast<double>(phi)))
    throw NumericError("normalize_phase: phase is not finite");
  const Scalar pi = static_cast<Scalar>(EIGEN_PI);
  const Scalar two_pi = Scalar(2) * pi;
  Scalar r = std::fmod(phi, two_pi);
  if (r <= -pi) r += two_pi;
  else if (r > pi) r -= two_pi;
  return r;
}

namespace detail {

template <class Scalar>
void check_axis(const VectorX<Scalar>& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!std::isfinite(static_cast<double>(x[i])))
      throw NumericError("model axis contains a non-finite value");
}

template <class Scalar>
void check_params(const EchoParams<Scalar>& p) {
  for (int d = 0; d < kParamsPerComponent; ++d)
    if (!std::isfinite(static_cast<double>(p[d])))
      throw NumericError(std::string("component parameter ") + param_name(d) + " is not finite");
  if (std::abs(static_cast<double>(p.sigma)) < kSigmaFloor)
    throw NumericError("degenerate spread: |sigma| below 1e-9");
}

}  // namespace detail

// Evaluates one component on the axis x. With oscillating = false the carrier
// factor is dropped and the envelope alpha * G * (1 + erf(...)) is returned.
template <class Scalar>
VectorX<Scalar> eval_component(const EchoParams<Scalar>& p, const VectorX<Scalar>& x,
                               bool oscillating = true) {
  detail::check_axis(x);
  detail::check_params(p);

  const Scalar sqrt2 = std::sqrt(Scalar(2));
  using Arr = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Arr dx = x.array() - p.mu;
  Arr z = dx / p.sigma;
  Arr m = (Scalar(-0.5) * z.square()).exp();

  if (p.eta != Scalar(0)) {
    m *= Scalar(1) + ((p.eta / sqrt2) * z).unaryExpr([](Scalar v) {
      using std::erf;
      return erf(v);
    });
  }
  if (oscillating) {
    const Scalar w = Scalar(2) * static_cast<Scalar>(EIGEN_PI) * p.freq;
    m *= (w * dx + p.phase).cos();
  }
  return (p.alpha * m).matrix();
}

// Sum of all components, accumulated in component order.
template <class Scalar>
VectorX<Scalar> eval_model(const ParamSet<Scalar>& ps, const VectorX<Scalar>& x,
                           bool oscillating = true) {
  if (ps.components.empty()) throw NumericError("eval_model: model has no components");
  VectorX<Scalar> acc = VectorX<Scalar>::Zero(x.size());
  for (const auto& p : ps.components) acc += eval_component(p, x, oscillating);
  return acc;
}

// Partial derivatives of the summed model with respect to every active
// parameter, laid out as columns in flattened component order (component 0's
// active parameters first, then component 1's, ...). Masked-out parameters get
// no column. With oscillating = false the carrier is absent, so freq and phase
// columns, if requested, are identically zero.
template <class Scalar>
MatrixX<Scalar> jacobian(const ParamSet<Scalar>& ps, const VectorX<Scalar>& x,
                               const ParamMask& mask = kAllParams, bool oscillating = true) {
  if (ps.components.empty()) throw NumericError("jacobian: model has no components");
  const int na = active_count(mask);
  if (na == 0) throw UsageError("jacobian: no free parameters selected");
  detail::check_axis(x);

  using Arr = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  const Scalar pi = static_cast<Scalar>(EIGEN_PI);
  const Scalar sqrt2 = std::sqrt(Scalar(2));
  const Scalar two_over_sqrt_pi = Scalar(2) / std::sqrt(pi);

  MatrixX<Scalar> J(x.size(), static_cast<Eigen::Index>(na) * ps.size());
  Eigen::Index col = 0;

  for (const auto& p : ps.components) {
    detail::check_params(p);

    Arr dx = x.array() - p.mu;
    Arr z = dx / p.sigma;
    Arr G = (Scalar(-0.5) * z.square()).exp();

    // Skew factor E = 1 + erf(t) with t = eta * z / sqrt(2); Ed is the exact
    // derivative of erf at t, i.e. 2/sqrt(pi) * exp(-t^2).
    Arr t = (p.eta / sqrt2) * z;
    Arr E = Scalar(1) + t.unaryExpr([](Scalar v) {
      using std::erf;
      return erf(v);
    });
    Arr Ed = two_over_sqrt_pi * (-t.square()).exp();

    Arr A, S;
    if (oscillating) {
      Arr theta = (Scalar(2) * pi * p.freq) * dx + p.phase;
      A = theta.cos();
      S = theta.sin();
    } else {
      A = Arr::Ones(x.size());
      S = Arr::Zero(x.size());
    }

    if (mask[kAlpha]) J.col(col++) = (G * E * A).matrix();
    if (mask[kMu]) {
      // d/dmu of G, E and A in turn.
      Arr dG = G * (dx / (p.sigma * p.sigma));
      Arr dE = Ed * (-p.eta / (p.sigma * sqrt2));
      Arr term = dG * E * A + G * dE * A;
      if (oscillating) term += G * E * (Scalar(2) * pi * p.freq) * S;
      J.col(col++) = (p.alpha * term).matrix();
    }
    if (mask[kSigma]) {
      Arr dG = G * (z.square() / p.sigma);
      Arr dE = Ed * (-t / p.sigma);
      J.col(col++) = (p.alpha * (dG * E + G * dE) * A).matrix();
    }
    if (mask[kEta]) J.col(col++) = (p.alpha * G * Ed * (z / sqrt2) * A).matrix();
    if (mask[kFreq]) J.col(col++) = (-p.alpha * G * E * S * (Scalar(2) * pi) * dx).matrix();
    if (mask[kPhase]) J.col(col++) = (-p.alpha * G * E * S).matrix();
  }
  return J;
}

}  // namespace memg
