#ifndef MEMG_STAGED_FIT_HPP
#define MEMG_STAGED_FIT_HPP

#include <vector>

#include "memg/optimizer.hpp"
#include "memg/types.hpp"

namespace memg {

// Component detection settings. tau is the threshold on the strided envelope
// gradient, grad_separation the stride in samples. min_peak_distance < 0
// selects the default of twice the stride. f_e <= 0 lets fit_frame pick the
// carrier from the frame spectrum. max_components > 0 keeps only that many
// detections, strongest envelope peaks first, for callers that know how many
// echoes a frame can hold.
struct InitConfig {
  double tau = 0.1;
  int grad_separation = 20;
  int min_peak_distance = -1;
  double f_e = 0.0;
  bool normalize_envelope = true;
  int blind_zone = 0;
  int max_components = 0;
};

enum class StageTarget { envelope, raw };

struct Stage {
  ParamMask mask = kAllParams;
  bool oscillating = true;
  StageTarget target = StageTarget::raw;
};

struct StagePlan {
  std::vector<Stage> stages;

  // envelope regression of {alpha, mu, sigma, eta}, then {f, phi} on the raw
  // frame, then all parameters jointly on the raw frame
  static StagePlan memg();
  // the first stage alone, for envelope-level work where oscillation is ignored
  static StagePlan envelope_only();
  // the full schedule with the skew parameter frozen at zero
  static StagePlan memg_no_skew();
};

struct StageResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int accepted_steps = 0;
  int iterations = 0;  // candidate evaluations, rejected steps included
  bool aborted = false;
  bool improved() const { return final_loss < initial_loss; }
};

struct FitResult {
  ParamSetd params;
  std::vector<StageResult> stages;
  bool degraded = false;
  bool oscillating = true;
  double frame_conf = 0.0;
  Eigen::VectorXd component_conf;
};

// One initial component per contiguous run of supra-tau strided envelope
// differences, placed at the following local envelope maximum. dt converts
// sample indices to time.
ParamSetd detect_components(const Eigen::VectorXd& envelope, double dt, const InitConfig& cfg);

// Detection plus the staged refinement schedule. The frame is expected to be
// pre-processed (band-pass, gain) by the caller. When the schedule reaches
// its first frequency-moving stage, each component's carrier start is
// re-estimated from the data on that component's support; echoes in one frame
// need not share a carrier and a far-off start locks onto a cycle-slipped
// local minimum.
FitResult fit_frame(const Frame& frame, const InitConfig& init, const StagePlan& plan = StagePlan::memg(),
                    const LMConfig& lm = {});

// The same schedule started from explicit parameters instead of detection.
FitResult fit_frame_from(const Frame& frame, const ParamSetd& initial, const StagePlan& plan = StagePlan::memg(),
                         const LMConfig& lm = {});

// Model evaluation on the fitted parameters; empty fits give a zero vector.
Eigen::VectorXd reconstruct(const FitResult& fit, const Eigen::VectorXd& x);

}  // namespace memg

#endif
