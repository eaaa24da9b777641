#ifndef MEMG_IO_HPP
#define MEMG_IO_HPP

#include <string>
#include <vector>

#include "memg/features.hpp"
#include "memg/forest.hpp"
#include "memg/staged_fit.hpp"
#include "memg/types.hpp"

// Persistence: waveforms as CSV with a JSON metadata sidecar, structured
// results as schema-versioned JSON. Waveform samples are written with nine
// significant digits; JSON numbers use shortest-round-trip decimals, so
// reloading a document reproduces every double bit for bit.

namespace memg {

// A frame together with its acquisition metadata. blind_zone_samples marks
// the leading transducer ring-down region; f_e_khz is the nominal emission
// frequency, zero when unknown.
struct FrameRecord {
  Frame frame;
  int blind_zone_samples = 0;
  double f_e_khz = 0.0;
};

// Writes `t_ms,amplitude` rows beside a metadata sidecar whose path is the
// CSV path with its extension replaced by .json.
void write_frame(const FrameRecord& rec, const std::string& csv_path);

// Reads one CSV/sidecar pair. Errors name the offending file and line.
FrameRecord read_frame(const std::string& csv_path);

// Reads a single CSV file or every *.csv in a directory, sorted by
// frame_index. A directory without frame files gives an empty list.
std::vector<FrameRecord> read_frames(const std::string& path);

// Fit results for a set of frames as one versioned JSON document.
void write_params(const std::vector<FitResult>& fits, const std::string& path);
std::vector<FitResult> read_params(const std::string& path);

// The write_params document as a string, for stream output.
std::string params_json(const std::vector<FitResult>& fits);

// Feature rows as CSV under the fixed header
// frame,k,alpha,mu,sigma,eta,freq,phase,conf,label.
void write_features(const FeatureMatrix& m, const std::string& path);
FeatureMatrix read_features(const std::string& path);

// A trained forest plus the feature schema needed to apply it: which columns
// the model consumes and, when the training matrix was standardized, the
// per-column location and scale to reproduce that transform.
struct ModelFile {
  TrainedForest forest;
  std::vector<int> active;
  Eigen::VectorXd mu_s;
  Eigen::VectorXd sigma_s;
  bool standardized = false;
};

void write_model(const ModelFile& model, const std::string& path);
ModelFile read_model(const std::string& path);

}  // namespace memg

#endif
