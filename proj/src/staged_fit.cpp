#include "memg/staged_fit.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "memg/errors.hpp"
#include "memg/features.hpp"
#include "memg/model.hpp"
#include "memg/preprocess.hpp"

namespace memg {

StagePlan StagePlan::memg() {
  StagePlan p;
  p.stages.push_back({kEnvelopeParams, false, StageTarget::envelope});
  p.stages.push_back({kOscillationParams, true, StageTarget::raw});
  p.stages.push_back({kAllParams, true, StageTarget::raw});
  return p;
}

StagePlan StagePlan::envelope_only() {
  StagePlan p;
  p.stages.push_back({kEnvelopeParams, false, StageTarget::envelope});
  return p;
}

StagePlan StagePlan::memg_no_skew() {
  ParamMask env_mask = kEnvelopeParams;
  env_mask[kEta] = false;
  ParamMask joint_mask = kAllParams;
  joint_mask[kEta] = false;
  StagePlan p;
  p.stages.push_back({env_mask, false, StageTarget::envelope});
  p.stages.push_back({kOscillationParams, true, StageTarget::raw});
  p.stages.push_back({joint_mask, true, StageTarget::raw});
  return p;
}

ParamSetd detect_components(const Eigen::VectorXd& envelope, double dt, const InitConfig& cfg) {
  if (cfg.tau <= 0.0) throw UsageError("detect_components: tau must be positive");
  if (cfg.grad_separation < 1) throw UsageError("detect_components: grad_separation must be >= 1");
  if (dt <= 0.0) throw UsageError("detect_components: dt must be positive");
  const Eigen::Index n = envelope.size();
  if (n < 2) throw UsageError("detect_components: envelope too short");

  Eigen::VectorXd env = envelope;
  if (cfg.normalize_envelope) {
    const double peak = env.cwiseAbs().maxCoeff();
    if (peak > 0.0) env /= peak;
  }

  const Eigen::Index s = cfg.grad_separation;
  const Eigen::Index min_dist =
      cfg.min_peak_distance < 0 ? 2 * s : static_cast<Eigen::Index>(cfg.min_peak_distance);

  // one candidate per contiguous run of strided differences above tau
  struct Candidate {
    Eigen::Index index;
    double value;
  };
  std::vector<Candidate> found;
  Eigen::Index run_start = -1;
  Eigen::Index prev_j = -2;
  auto close_run = [&](Eigen::Index run_end) {
    const Eigen::Index lo = run_start * s;
    const Eigen::Index hi = std::min((run_end + 2) * s, n - 1);
    Eigen::Index peak = lo;
    for (Eigen::Index i = lo + 1; i <= hi; ++i)
      if (env[i] > env[peak]) peak = i;
    while (peak + 1 < n && env[peak + 1] > env[peak]) ++peak;
    found.push_back({peak, envelope[peak]});
  };
  for (Eigen::Index j = 0; (j + 1) * s < n; ++j) {
    if (j * s < cfg.blind_zone) continue;
    const bool hot = env[(j + 1) * s] - env[j * s] > cfg.tau;
    if (hot) {
      if (j != prev_j + 1) {
        if (run_start >= 0) close_run(prev_j);
        run_start = j;
      }
      prev_j = j;
    }
  }
  if (run_start >= 0) close_run(prev_j);
  if (found.empty())
    throw NoComponentsError("detect_components: no envelope gradient exceeds tau");

  // merge near-coincident candidates, keeping the larger envelope value
  std::vector<Candidate> merged;
  for (const Candidate& c : found) {
    if (!merged.empty() && c.index - merged.back().index < min_dist) {
      if (c.value > merged.back().value) merged.back() = c;
    } else {
      merged.push_back(c);
    }
  }

  // keep the strongest peaks when the caller caps the component count
  if (cfg.max_components > 0 && merged.size() > static_cast<std::size_t>(cfg.max_components)) {
    std::stable_sort(merged.begin(), merged.end(),
                     [](const Candidate& a, const Candidate& b) { return a.value > b.value; });
    merged.resize(static_cast<std::size_t>(cfg.max_components));
    std::sort(merged.begin(), merged.end(),
              [](const Candidate& a, const Candidate& b) { return a.index < b.index; });
  }

  // One sample period as the initial spread. Wider starts (of order the echo
  // spacing) make components latch onto the nonzero mean of the rectified
  // noise floor instead of their echo; a spike-width start always grows into
  // the local pulse.
  const double sigma0 = dt;
  ParamSetd ps;
  for (const Candidate& c : merged) {
    EchoParams<double> p;
    p.alpha = c.value;
    p.mu = c.index * dt;
    p.sigma = sigma0;
    p.eta = 0.0;
    p.freq = cfg.f_e > 0.0 ? cfg.f_e : 0.0;
    p.phase = 0.0;
    ps.components.push_back(p);
  }
  return ps;
}

namespace {

// Carrier estimate restricted to one component's support. Echoes in a frame
// need not share a carrier, and an oscillation fit started more than the
// envelope-width reciprocal away from the true frequency locks onto a
// cycle-slipped local minimum it cannot leave.
double local_carrier(const Frame& frame, double mu, double sigma, double fallback) {
  const double half = 4.0 * sigma;
  Eigen::Index i0 = static_cast<Eigen::Index>(std::ceil((mu - half) / frame.dt));
  Eigen::Index i1 = static_cast<Eigen::Index>(std::floor((mu + half) / frame.dt));
  i0 = std::max<Eigen::Index>(i0, 0);
  i1 = std::min<Eigen::Index>(i1, frame.size() - 1);
  if (i1 - i0 + 1 < 32) return fallback;

  Frame slice;
  slice.dt = frame.dt;
  slice.samples = frame.samples.segment(i0, i1 - i0 + 1);
  try {
    const double f = dominant_frequency(slice);
    if (f <= 0.0 || f >= 0.5 / frame.dt) return fallback;
    return f;
  } catch (const Error&) {
    return fallback;
  }
}

FitResult run_stages(const Frame& frame, const Eigen::VectorXd& envelope, ParamSetd ps,
                     const StagePlan& plan, const LMConfig& lm, bool placeholder_freqs) {
  if (plan.stages.empty()) throw UsageError("fit_frame: stage plan is empty");
  const Eigen::VectorXd x = frame.time_axis();

  FitResult out;
  const Eigen::VectorXd* last_target = &frame.samples;
  for (const Stage& st : plan.stages) {
    const Eigen::VectorXd& target =
        st.target == StageTarget::envelope ? envelope : frame.samples;

    // entering the first stage that moves the frequencies: replace the shared
    // placeholder carrier with a per-component estimate from the data
    if (placeholder_freqs && st.oscillating && st.mask[kFreq]) {
      for (auto& c : ps.components) c.freq = local_carrier(frame, c.mu, c.sigma, c.freq);
      placeholder_freqs = false;
    }

    MinimizeResult res = minimize(ps, x, target, lm, st.mask, st.oscillating);

    StageResult sr;
    sr.initial_loss = res.trace.initial_loss;
    sr.final_loss = res.trace.best_loss();
    sr.accepted_steps = res.trace.accepted_count();
    sr.iterations = static_cast<int>(res.trace.records.size());
    sr.aborted = res.trace.aborted;

    // a stage that tried steps and accepted none leaves the parameters of the
    // previous stage in place
    const bool failed =
        sr.accepted_steps == 0 && (res.trace.aborted || res.trace.hit_iteration_cap);
    if (failed) {
      out.degraded = true;
      sr.final_loss = sr.initial_loss;
    } else {
      ps = res.params;
    }
    out.stages.push_back(sr);
    out.oscillating = st.oscillating;
    last_target = &target;
  }
  out.params = ps;

  // confidences are measured against the final stage's target
  Frame conf_frame = frame;
  conf_frame.samples = *last_target;
  out.frame_conf = frame_confidence(out, conf_frame);
  const int k_count = static_cast<int>(out.params.components.size());
  out.component_conf.resize(k_count);
  for (int k = 0; k < k_count; ++k) {
    try {
      out.component_conf[k] = component_confidence(out, conf_frame, k);
    } catch (const NumericError&) {
      out.component_conf[k] = 0.0;  // window missed the frame entirely
    }
  }
  return out;
}

}  // namespace

FitResult fit_frame(const Frame& frame, const InitConfig& init, const StagePlan& plan,
                    const LMConfig& lm) {
  bool oscillates = false;
  for (const Stage& st : plan.stages) oscillates = oscillates || st.oscillating;

  InitConfig cfg = init;
  if (cfg.f_e <= 0.0) cfg.f_e = oscillates ? dominant_frequency(frame) : 0.0;

  const Eigen::VectorXd envelope = hilbert_envelope(frame);
  ParamSetd ps = detect_components(envelope, frame.dt, cfg);
  ps.frame_index = frame.frame_index;
  return run_stages(frame, envelope, std::move(ps), plan, lm, true);
}

FitResult fit_frame_from(const Frame& frame, const ParamSetd& initial, const StagePlan& plan,
                         const LMConfig& lm) {
  // the caller's frequencies are real values, never the detection placeholder
  ParamSetd ps = initial;
  ps.frame_index = frame.frame_index;
  return run_stages(frame, hilbert_envelope(frame), std::move(ps), plan, lm, false);
}

Eigen::VectorXd reconstruct(const FitResult& fit, const Eigen::VectorXd& x) {
  if (fit.params.components.empty()) return Eigen::VectorXd::Zero(x.size());
  return eval_model(fit.params, x, fit.oscillating);
}

}  // namespace memg
