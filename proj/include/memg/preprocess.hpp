#pragma once

#include "memg/types.hpp"

// Frame conditioning ahead of the staged fit: analytic-signal envelope,
// spectral band-pass, dominant-frequency detection, distance-gain
// compensation and 8-bit quantization.

namespace memg {

// Magnitude of the analytic signal, computed in the transform domain (double
// positive frequencies, zero negative ones, keep DC and Nyquist).
Eigen::VectorXd hilbert_envelope(const Frame& frame);

// Frequency (kHz) of the largest-magnitude positive-frequency bin of the
// Hann-windowed spectrum, DC excluded, refined by parabolic interpolation
// over the log magnitudes of the three bins around the peak.
double dominant_frequency(const Frame& frame);

// Zero-phase spectral-mask band-pass: raised-cosine window centered at
// center_khz with full width rel_bandwidth * center_khz, applied to positive
// and mirrored negative frequencies.
Frame bandpass(const Frame& frame, double center_khz, double rel_bandwidth = 1.0);

// Round-half-away-from-zero onto the signed 8-bit grid [-128, 127].
Eigen::VectorXd quantize8(const Eigen::VectorXd& y);

// Distance-decay law envelope(x) ~ a / x^b.
struct GainFit {
  double a = 1.0;
  double b = 0.0;
};

// Log-log linear regression through the envelope's strictly positive local
// maxima at x > 0. Peaks before blind_zone samples are ignored.
GainFit fit_gain(const Eigen::VectorXd& envelope, const Eigen::VectorXd& x, int blind_zone = 0);

// Multiplies samples by x^b / a past the blind zone; blind-zone samples are
// passed through untouched.
Frame apply_gain(const Frame& frame, const GainFit& g, int blind_zone = 0);

}  // namespace memg
