#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "memg/errors.hpp"

namespace memg {

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Flattened parameter order of one echo component.
enum ParamIndex : int { kAlpha = 0, kMu = 1, kSigma = 2, kEta = 3, kFreq = 4, kPhase = 5 };
inline constexpr int kParamsPerComponent = 6;

inline const char* param_name(int d) {
  static const char* names[kParamsPerComponent] = {"alpha", "mu", "sigma", "eta", "freq", "phase"};
  if (d < 0 || d >= kParamsPerComponent) throw UsageError("param index out of range");
  return names[d];
}

// Selects which of the six parameters an optimizer stage may move.
using ParamMask = std::array<bool, kParamsPerComponent>;

inline constexpr ParamMask kAllParams = {true, true, true, true, true, true};
inline constexpr ParamMask kEnvelopeParams = {true, true, true, true, false, false};
inline constexpr ParamMask kOscillationParams = {false, false, false, false, true, true};

inline int active_count(const ParamMask& mask) {
  int n = 0;
  for (bool b : mask) n += b ? 1 : 0;
  return n;
}

// One echo component. Units: mu and sigma in ms, freq in kHz, phase in rad;
// alpha carries the signal's amplitude units.
template <class Scalar = double>
struct EchoParams {
  Scalar alpha{0};
  Scalar mu{0};
  Scalar sigma{1};
  Scalar eta{0};
  Scalar freq{0};
  Scalar phase{0};

  using Vector6 = Eigen::Matrix<Scalar, kParamsPerComponent, 1>;

  Scalar& operator[](int d) {
    switch (d) {
      case kAlpha: return alpha;
      case kMu: return mu;
      case kSigma: return sigma;
      case kEta: return eta;
      case kFreq: return freq;
      case kPhase: return phase;
      default: throw UsageError("param index out of range");
    }
  }

  Scalar operator[](int d) const { return const_cast<EchoParams&>(*this)[d]; }

  Vector6 to_vector() const {
    Vector6 v;
    v << alpha, mu, sigma, eta, freq, phase;
    return v;
  }

  static EchoParams from_vector(const Vector6& v) {
    EchoParams p;
    for (int d = 0; d < kParamsPerComponent; ++d) p[d] = v[d];
    return p;
  }
};

using EchoParamsd = EchoParams<double>;

// A K-component model for one frame.
template <class Scalar = double>
struct ParamSet {
  std::vector<EchoParams<Scalar>> components;
  int frame_index{0};

  int size() const { return static_cast<int>(components.size()); }

  // Concatenates component vectors in component order: [p_1; p_2; ...].
  VectorX<Scalar> flatten() const {
    VectorX<Scalar> v(size() * kParamsPerComponent);
    for (int k = 0; k < size(); ++k)
      v.template segment<kParamsPerComponent>(k * kParamsPerComponent) = components[k].to_vector();
    return v;
  }

  static ParamSet unflatten(const VectorX<Scalar>& v, int frame_index = 0) {
    if (v.size() % kParamsPerComponent != 0)
      throw UsageError("flattened parameter vector length is not a multiple of 6");
    ParamSet ps;
    ps.frame_index = frame_index;
    ps.components.resize(v.size() / kParamsPerComponent);
    for (int k = 0; k < ps.size(); ++k)
      ps.components[k] =
          EchoParams<Scalar>::from_vector(v.template segment<kParamsPerComponent>(k * kParamsPerComponent));
    return ps;
  }
};

using ParamSetd = ParamSet<double>;

// A sampled time series. dt is the sample period in ms, so sample i sits at
// t = i * dt relative to the frame start.
struct Frame {
  Eigen::VectorXd samples;
  double dt{1.0};
  int frame_index{0};

  int size() const { return static_cast<int>(samples.size()); }
  double duration() const { return dt * static_cast<double>(samples.size()); }

  Eigen::VectorXd time_axis() const {
    Eigen::VectorXd x(samples.size());
    for (Eigen::Index i = 0; i < samples.size(); ++i) x[i] = static_cast<double>(i) * dt;
    return x;
  }
};

}  // namespace memg
