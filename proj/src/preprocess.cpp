#include "memg/preprocess.hpp"

#include <unsupported/Eigen/FFT>
#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace memg {

namespace {

std::vector<std::complex<double>> full_spectrum(const Eigen::VectorXd& y) {
  std::vector<double> in(y.data(), y.data() + y.size());
  std::vector<std::complex<double>> out;
  Eigen::FFT<double> fft;
  fft.fwd(out, in);
  return out;
}

}  // namespace

Eigen::VectorXd hilbert_envelope(const Frame& frame) {
  const Eigen::Index n = frame.samples.size();
  if (n < 2) throw UsageError("hilbert_envelope: need at least 2 samples");

  std::vector<std::complex<double>> spec = full_spectrum(frame.samples);

  // Analytic-signal weights: DC and (for even n) Nyquist stay, positive
  // frequencies double, negative ones vanish.
  const Eigen::Index last_pos = (n - 1) / 2;
  for (Eigen::Index i = 1; i <= last_pos; ++i) spec[i] *= 2.0;
  for (Eigen::Index i = n / 2 + 1; i < n; ++i) spec[i] = 0.0;

  std::vector<std::complex<double>> analytic;
  Eigen::FFT<double> fft;
  fft.inv(analytic, spec);

  Eigen::VectorXd env(n);
  for (Eigen::Index i = 0; i < n; ++i) env[i] = std::abs(analytic[i]);
  return env;
}

double dominant_frequency(const Frame& frame) {
  const Eigen::Index n = frame.samples.size();
  if (n < 4) throw UsageError("dominant_frequency: need at least 4 samples");
  if (frame.dt <= 0.0) throw UsageError("dominant_frequency: nonpositive sample period");

  // Hann window keeps sidelobe leakage low enough for the log-parabolic
  // refinement below to be meaningful for off-bin tones.
  Eigen::VectorXd windowed(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = 0.5 * (1.0 - std::cos(2.0 * EIGEN_PI * i / (n - 1)));
    windowed[i] = frame.samples[i] * w;
  }

  std::vector<std::complex<double>> spec = full_spectrum(windowed);
  const Eigen::Index last = n / 2;  // Nyquist bin for even n, (n-1)/2 rounded down for odd

  Eigen::Index peak = 0;
  double peak_mag = 0.0;
  for (Eigen::Index i = 1; i <= last; ++i) {
    const double mag = std::abs(spec[i]);
    if (mag > peak_mag) {
      peak_mag = mag;
      peak = i;
    }
  }
  if (peak == 0 || peak_mag <= 0.0)
    throw NumericError("dominant_frequency: spectrum has no positive-frequency content");

  const double bin_width = 1.0 / (frame.dt * n);  // kHz per bin
  double offset = 0.0;
  if (peak > 1 && peak < last) {
    const double m0 = std::abs(spec[peak - 1]);
    const double m2 = std::abs(spec[peak + 1]);
    if (m0 > 0.0 && m2 > 0.0) {
      const double l0 = std::log(m0), l1 = std::log(peak_mag), l2 = std::log(m2);
      const double denom = l0 - 2.0 * l1 + l2;
      if (denom < 0.0) offset = std::clamp(0.5 * (l0 - l2) / denom, -0.5, 0.5);
    }
  }
  return (static_cast<double>(peak) + offset) * bin_width;
}

Frame bandpass(const Frame& frame, double center_khz, double rel_bandwidth) {
  const Eigen::Index n = frame.samples.size();
  if (n < 2) throw UsageError("bandpass: need at least 2 samples");
  if (frame.dt <= 0.0) throw UsageError("bandpass: nonpositive sample period");
  const double nyquist = 0.5 / frame.dt;
  if (!(center_khz > 0.0) || center_khz >= nyquist)
    throw UsageError("bandpass: center must lie strictly between 0 and Nyquist");
  if (!(rel_bandwidth > 0.0) || rel_bandwidth > 1.0)
    throw UsageError("bandpass: rel_bandwidth must lie in (0, 1]");

  std::vector<std::complex<double>> spec = full_spectrum(frame.samples);

  const double half_width = 0.5 * rel_bandwidth * center_khz;
  const double bin_width = 1.0 / (frame.dt * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index mirror = i <= n / 2 ? i : n - i;
    const double f = mirror * bin_width;
    const double d = std::abs(f - center_khz);
    const double w = d <= half_width ? 0.5 * (1.0 + std::cos(EIGEN_PI * d / half_width)) : 0.0;
    spec[i] *= w;
  }

  std::vector<std::complex<double>> filtered;
  Eigen::FFT<double> fft;
  fft.inv(filtered, spec);

  Frame out = frame;
  for (Eigen::Index i = 0; i < n; ++i) out.samples[i] = filtered[i].real();
  return out;
}

Eigen::VectorXd quantize8(const Eigen::VectorXd& y) {
  Eigen::VectorXd q(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i)
    // + 0.0 folds the negative zero that round() yields on small negative
    // inputs into plain zero, so quantized levels serialize uniformly
    q[i] = std::clamp(std::round(y[i]), -128.0, 127.0) + 0.0;
  return q;
}

GainFit fit_gain(const Eigen::VectorXd& envelope, const Eigen::VectorXd& x, int blind_zone) {
  if (envelope.size() != x.size()) throw UsageError("fit_gain: envelope and axis lengths differ");

  // strictly positive local maxima past the blind zone, at x > 0
  std::vector<Eigen::Index> peaks;
  for (Eigen::Index i = 1; i + 1 < envelope.size(); ++i) {
    if (i < blind_zone) continue;
    if (envelope[i] > envelope[i - 1] && envelope[i] >= envelope[i + 1] && envelope[i] > 0.0 &&
        x[i] > 0.0)
      peaks.push_back(i);
  }
  if (peaks.size() < 2)
    throw NumericError("fit_gain: need at least 2 positive envelope peaks to fit a decay law");

  double su = 0.0, sv = 0.0, suu = 0.0, suv = 0.0;
  for (Eigen::Index i : peaks) {
    const double u = std::log(x[i]);
    const double v = std::log(envelope[i]);
    su += u;
    sv += v;
    suu += u * u;
    suv += u * v;
  }
  const double m = static_cast<double>(peaks.size());
  const double var = suu - su * su / m;
  if (var <= 0.0) throw NumericError("fit_gain: peak positions do not span the axis");
  const double slope = (suv - su * sv / m) / var;
  const double intercept = (sv - slope * su) / m;

  GainFit g;
  g.b = slope == 0.0 ? 0.0 : -slope;
  g.a = std::exp(intercept);
  return g;
}

Frame apply_gain(const Frame& frame, const GainFit& g, int blind_zone) {
  if (!(g.a > 0.0)) throw UsageError("apply_gain: scale a must be positive");
  if (!std::isfinite(g.b)) throw UsageError("apply_gain: exponent b must be finite");

  Frame out = frame;
  for (Eigen::Index i = blind_zone; i < out.samples.size(); ++i) {
    const double x = static_cast<double>(i) * out.dt;
    out.samples[i] *= std::pow(x, g.b) / g.a;
  }
  return out;
}

}  // namespace memg
