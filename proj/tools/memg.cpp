// memg: multimodal echo model fitting over frames of acoustic time series.
// Subcommands cover the full pipeline: synthetic frame generation, staged
// model fitting, reconstruction/denoising, and echo-vs-clutter classification.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "memg/errors.hpp"
#include "memg/features.hpp"
#include "memg/forest.hpp"
#include "memg/io.hpp"
#include "memg/model.hpp"
#include "memg/preprocess.hpp"
#include "memg/staged_fit.hpp"
#include "memg/synth.hpp"

namespace {

using nlohmann::json;
using namespace memg;

struct GlobalOpts {
  std::uint64_t seed = 1;
  std::string output;
  std::string format = "json";
  bool quiet = false;
};

// stdout unless --output was given
void emit(const GlobalOpts& g, const std::string& text) {
  if (!g.output.empty()) {
    std::ofstream out(g.output);
    if (!out) throw UsageError("cannot open for writing: " + g.output);
    out << text;
    if (!out.good()) throw UsageError("write failed: " + g.output);
  } else if (!g.quiet) {
    std::cout << text;
  }
}

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

int thread_budget(std::size_t jobs) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("MEMG_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1)
      throw UsageError("MEMG_THREADS must be a positive integer");
    hw = std::min<unsigned>(hw, static_cast<unsigned>(cap));
  }
  return static_cast<int>(std::min<std::size_t>(hw, jobs));
}

// ---------------------------------------------------------------------------
// synth

struct SynthOpts {
  int k = 4;
  double fs = 300.0;
  double noise = 10.0;
  int x_samples = 60000;
  bool no_quantize = false;
  bool stock = false;
};

json spec_to_json(const SynthSpec& spec) {
  json j;
  j["schema_version"] = 1;
  j["fs_khz"] = spec.fs;
  j["x_samples"] = spec.x_samples;
  j["noise_sigma"] = spec.noise_sigma;
  j["quantize"] = spec.quantize;
  j["seed"] = spec.seed;
  json comps = json::array();
  for (const auto& c : spec.components.components)
    comps.push_back({{"alpha", c.alpha},
                     {"mu", c.mu},
                     {"sigma", c.sigma},
                     {"eta", c.eta},
                     {"freq", c.freq},
                     {"phase", c.phase}});
  j["components"] = std::move(comps);
  return j;
}

int cmd_synth(const GlobalOpts& g, const SynthOpts& o) {
  SynthSpec spec;
  spec.fs = o.fs;
  spec.x_samples = o.x_samples;
  spec.noise_sigma = o.noise;
  spec.quantize = !o.no_quantize;
  spec.seed = g.seed;
  if (o.stock)
    spec.components = default_spec().components;
  else
    spec = random_spec(g.seed, o.k, spec);

  SynthResult r = generate(spec);
  const std::string dir = g.output.empty() ? "." : g.output;
  std::filesystem::create_directories(dir);

  FrameRecord rec;
  rec.frame = r.clean;
  write_frame(rec, dir + "/gt.csv");
  rec.frame = r.noisy;
  write_frame(rec, dir + "/noisy.csv");

  json spec_doc = spec_to_json(spec);
  {
    std::ofstream out(dir + "/spec.json");
    if (!out) throw UsageError("cannot open for writing: " + dir + "/spec.json");
    out << spec_doc.dump(2) << '\n';
  }
  if (!g.quiet) {
    json note;
    note["wrote"] = {dir + "/gt.csv", dir + "/noisy.csv", dir + "/spec.json"};
    note["spec"] = std::move(spec_doc);
    std::cout << note.dump(2) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitOpts {
  std::string input;
  double tau = 0.1;
  int grad_sep = 20;
  double fe = 0.0;  // 0 = sidecar, then spectrum peak
  int max_iter = 200;
  std::string plan = "memg";
  std::string env_norm = "auto";
  int max_k = 0;
};

StagePlan plan_by_name(const std::string& name) {
  if (name == "memg") return StagePlan::memg();
  if (name == "envelope") return StagePlan::envelope_only();
  throw UsageError("unknown stage plan '" + name + "', expected memg or envelope");
}

// One frame through band-pass and the staged fit.
FitResult fit_one(const FrameRecord& rec, const FitOpts& o) {
  InitConfig cfg;
  cfg.tau = o.tau;
  cfg.grad_separation = o.grad_sep;
  cfg.blind_zone = rec.blind_zone_samples;
  cfg.max_components = o.max_k;
  if (o.env_norm == "on")
    cfg.normalize_envelope = true;
  else if (o.env_norm == "off")
    cfg.normalize_envelope = false;
  else if (o.env_norm == "auto")
    // thresholds above 1 cannot fire on a unit-peak envelope, so they are
    // read as raw envelope-gradient units
    cfg.normalize_envelope = o.tau <= 1.0;
  else
    throw UsageError("unknown env-norm mode '" + o.env_norm + "', expected auto, on or off");

  double fe = o.fe > 0.0 ? o.fe : rec.f_e_khz;
  if (fe <= 0.0) fe = dominant_frequency(rec.frame);
  const double nyquist = 0.5 / rec.frame.dt;
  fe = std::min(fe, nyquist * (1.0 - 1e-9));
  cfg.f_e = fe;

  LMConfig lm;
  lm.max_iterations = o.max_iter;

  Frame banded = bandpass(rec.frame, fe, 1.0);
  FitResult fit = fit_frame(banded, cfg, plan_by_name(o.plan), lm);
  fit.params.frame_index = rec.frame.frame_index;
  return fit;
}

std::vector<FitResult> fit_all(const std::vector<FrameRecord>& recs, const FitOpts& o) {
  std::vector<FitResult> fits(recs.size());
  const int n_threads = thread_budget(recs.size());
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < recs.size(); ++i) fits[i] = fit_one(recs[i], o);
    return fits;
  }
  // frames are independent; results land in input order regardless of timing
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(recs.size());
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < recs.size(); i = next.fetch_add(1)) {
        try {
          fits[i] = fit_one(recs[i], o);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  // surface the failure of the lowest-indexed frame, keeping its category
  for (std::size_t i = 0; i < recs.size(); ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);
  return fits;
}

std::string fits_csv(const std::vector<FitResult>& fits) {
  std::ostringstream out;
  out << "frame,k,alpha,mu,sigma,eta,freq,phase,conf\n";
  for (const FitResult& fit : fits)
    for (int k = 0; k < fit.params.size(); ++k) {
      const auto& c = fit.params.components[static_cast<std::size_t>(k)];
      out << fit.params.frame_index << ',' << k;
      for (int d = 0; d < kParamsPerComponent; ++d) out << ',' << fmt9(c[d]);
      out << ',' << fmt9(k < fit.component_conf.size() ? fit.component_conf[k] : 0.0) << '\n';
    }
  return out.str();
}

int cmd_fit(const GlobalOpts& g, const FitOpts& o) {
  std::vector<FrameRecord> recs = read_frames(o.input);
  std::vector<FitResult> fits = fit_all(recs, o);
  emit(g, g.format == "csv" ? fits_csv(fits) : params_json(fits));
  return 0;
}

// ---------------------------------------------------------------------------
// denoise

struct DenoiseOpts {
  std::string input;  // empty = built-in synthetic experiment
  std::string gt;
  std::string from_params;
  std::string recon;
  FitOpts fit;
  double noise = 10.0;
  int x_samples = 60000;
};

json report_fit_json(const FitResult& fit) {
  json jf;
  jf["degraded"] = fit.degraded;
  jf["frame_conf"] = fit.frame_conf;
  json comps = json::array();
  for (int k = 0; k < fit.params.size(); ++k) {
    const auto& c = fit.params.components[static_cast<std::size_t>(k)];
    comps.push_back({{"alpha", c.alpha},
                     {"mu", c.mu},
                     {"sigma", c.sigma},
                     {"eta", c.eta},
                     {"freq", c.freq},
                     {"phase", c.phase},
                     {"conf", k < fit.component_conf.size() ? fit.component_conf[k] : 0.0}});
  }
  jf["components"] = std::move(comps);
  json stages = json::array();
  for (const StageResult& s : fit.stages)
    stages.push_back({{"initial_loss", s.initial_loss},
                      {"final_loss", s.final_loss},
                      {"accepted_steps", s.accepted_steps},
                      {"iterations", s.iterations},
                      {"aborted", s.aborted}});
  jf["stages"] = std::move(stages);
  return jf;
}

int cmd_denoise(const GlobalOpts& g, const DenoiseOpts& o) {
  if (o.input.empty()) {
    // built-in synthetic experiment on the stock spec
    SynthSpec spec = default_spec();
    spec.seed = g.seed;
    spec.noise_sigma = o.noise;
    spec.x_samples = o.x_samples;
    InitConfig cfg;
    cfg.tau = o.fit.tau;
    cfg.grad_separation = o.fit.grad_sep;
    cfg.max_components = o.fit.max_k;
    LMConfig lm;
    lm.max_iterations = o.fit.max_iter;
    DenoiseReport report = denoise_experiment(spec, cfg, plan_by_name(o.fit.plan), lm);

    json doc;
    doc["schema_version"] = 1;
    doc["psnr_raw_db"] = report.psnr_raw_db;
    doc["psnr_fit_db"] = report.psnr_fit_db;
    doc["gain_db"] = report.gain_db;
    doc["carrier_khz"] = report.carrier_khz;
    doc["spec"] = spec_to_json(report.spec);
    doc["fit_params"] = report_fit_json(report.fit);
    emit(g, doc.dump(2) + "\n");
    if (!o.recon.empty()) {
      SynthResult syn = generate(spec);
      FrameRecord rec;
      rec.frame.dt = syn.noisy.dt;
      rec.frame.samples = reconstruct(report.fit, syn.noisy.time_axis());
      write_frame(rec, o.recon);
    }
    return 0;
  }

  FrameRecord rec = read_frame(o.input);
  FitResult fit;
  if (!o.from_params.empty()) {
    std::vector<FitResult> fits = read_params(o.from_params);
    auto it = std::find_if(fits.begin(), fits.end(), [&](const FitResult& f) {
      return f.params.frame_index == rec.frame.frame_index;
    });
    if (it == fits.end())
      throw UsageError("no fit for frame " + std::to_string(rec.frame.frame_index) + " in " +
                       o.from_params);
    fit = std::move(*it);
  } else {
    fit = fit_one(rec, o.fit);
  }

  Eigen::VectorXd x = rec.frame.time_axis();
  Eigen::VectorXd recon = reconstruct(fit, x);

  json doc;
  doc["schema_version"] = 1;
  doc["frame_index"] = rec.frame.frame_index;
  doc["fit_params"] = report_fit_json(fit);
  if (!o.gt.empty()) {
    FrameRecord gt = read_frame(o.gt);
    if (gt.frame.samples.size() != rec.frame.samples.size())
      throw UsageError("ground truth and input disagree on length: " +
                       std::to_string(gt.frame.samples.size()) + " vs " +
                       std::to_string(rec.frame.samples.size()));
    doc["psnr_raw_db"] = psnr(gt.frame.samples, rec.frame.samples);
    doc["psnr_fit_db"] = psnr(gt.frame.samples, recon);
    doc["gain_db"] = doc["psnr_fit_db"].get<double>() - doc["psnr_raw_db"].get<double>();
  }

  const std::string recon_path = !o.recon.empty() ? o.recon : g.output;
  if (!recon_path.empty()) {
    FrameRecord out;
    out.frame.samples = recon;
    out.frame.dt = rec.frame.dt;
    out.frame.frame_index = rec.frame.frame_index;
    out.blind_zone_samples = rec.blind_zone_samples;
    out.f_e_khz = rec.f_e_khz;
    write_frame(out, recon_path);
  }
  if (!g.quiet) std::cout << doc.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// classify

struct ClassifyOpts {
  std::string input;
  int trees = 10;
  int max_depth = 6;
  int min_leaf = 1;
  int min_split = 2;
  int mtry = 0;
  bool no_bootstrap = false;
  double train_frac = 0.7;
  std::vector<std::string> exclude;
  bool no_standardize = false;
  std::string save_model;
  std::string load_model;
};

json metrics_json(const Metrics& m) {
  json j;
  j["f1"] = m.f1;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["recall_defined"] = m.recall_defined;
  j["confusion"] = {{m.confusion(0, 0), m.confusion(0, 1)},
                    {m.confusion(1, 0), m.confusion(1, 1)}};
  return j;
}

FeatureMatrix labeled_rows(const FeatureMatrix& m) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    if (m.labels[static_cast<std::size_t>(i)] >= 0) keep.push_back(i);
  FeatureMatrix out;
  out.values.resize(static_cast<Eigen::Index>(keep.size()), m.values.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    out.values.row(static_cast<Eigen::Index>(r)) = m.values.row(keep[r]);
    out.frame.push_back(m.frame[static_cast<std::size_t>(keep[r])]);
    out.component.push_back(m.component[static_cast<std::size_t>(keep[r])]);
    out.labels.push_back(m.labels[static_cast<std::size_t>(keep[r])]);
  }
  out.active = m.active;
  return out;
}

Eigen::VectorXi labels_vector(const FeatureMatrix& m) {
  Eigen::VectorXi y(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) y[i] = m.labels[static_cast<std::size_t>(i)];
  return y;
}

int cmd_classify(const GlobalOpts& g, const ClassifyOpts& o) {
  FeatureMatrix all = read_features(o.input);

  if (!o.load_model.empty()) {
    // prediction with a stored model; metrics only where labels exist
    ModelFile model = read_model(o.load_model);
    all.active = model.active;
    if (model.standardized) apply_standardization(all, model.mu_s, model.sigma_s);
    Eigen::VectorXi pred = predict(model.forest, all.active_values());

    json doc;
    doc["schema_version"] = 1;
    json rows = json::array();
    for (Eigen::Index i = 0; i < all.rows(); ++i)
      rows.push_back({{"frame", all.frame[static_cast<std::size_t>(i)]},
                      {"k", all.component[static_cast<std::size_t>(i)]},
                      {"predicted", pred[i]}});
    doc["predictions"] = std::move(rows);
    std::vector<int> truth, guessed;
    for (Eigen::Index i = 0; i < all.rows(); ++i)
      if (all.labels[static_cast<std::size_t>(i)] >= 0) {
        truth.push_back(all.labels[static_cast<std::size_t>(i)]);
        guessed.push_back(pred[i]);
      }
    if (!truth.empty()) {
      Eigen::VectorXi t = Eigen::Map<Eigen::VectorXi>(truth.data(), static_cast<Eigen::Index>(truth.size()));
      Eigen::VectorXi p = Eigen::Map<Eigen::VectorXi>(guessed.data(), static_cast<Eigen::Index>(guessed.size()));
      doc["metrics"] = metrics_json(evaluate(p, t));
    }
    emit(g, doc.dump(2) + "\n");
    return 0;
  }

  FeatureMatrix data = labeled_rows(all);
  for (const std::string& name : o.exclude) {
    const int col = feature_index(name);
    data.active.erase(std::remove(data.active.begin(), data.active.end(), col),
                      data.active.end());
  }
  if (data.active.empty()) throw UsageError("every feature column was excluded");

  auto [train, test] = split_frames(data, o.train_frac, g.seed);
  if (!o.no_standardize) {
    standardize(train);
    apply_standardization(test, train.mu_s, train.sigma_s);
  }

  ForestConfig cfg;
  cfg.n_trees = o.trees;
  cfg.max_depth = o.max_depth;
  cfg.min_samples_leaf = o.min_leaf;
  cfg.min_samples_split = o.min_split;
  cfg.features_per_split = o.mtry;
  cfg.bootstrap = !o.no_bootstrap;
  cfg.seed = g.seed;

  TrainedForest forest = train_forest(train.active_values(), labels_vector(train), cfg);
  Eigen::VectorXi pred = predict(forest, test.active_values());
  Metrics metrics = evaluate(pred, labels_vector(test));

  json doc;
  doc["schema_version"] = 1;
  doc["n_train_rows"] = train.rows();
  doc["n_test_rows"] = test.rows();
  doc["unlabeled_rows_dropped"] = all.rows() - data.rows();
  doc["oob_accuracy"] = forest.oob_accuracy;
  doc["metrics"] = metrics_json(metrics);
  json importances;
  for (std::size_t a = 0; a < train.active.size(); ++a)
    importances[feature_name(train.active[a])] =
        forest.feature_importances[static_cast<Eigen::Index>(a)];
  doc["feature_importances"] = std::move(importances);
  emit(g, doc.dump(2) + "\n");

  if (!o.save_model.empty()) {
    ModelFile model;
    model.forest = std::move(forest);
    model.active = train.active;
    model.mu_s = train.mu_s;
    model.sigma_s = train.sigma_s;
    model.standardized = train.standardized;
    write_model(model, o.save_model);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multimodal echo model fitting for acoustic time series"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "seed for every stochastic step")->capture_default_str();
  app.add_option("--output", g.output, "write the primary result here instead of stdout");
  app.add_option("--format", g.format, "stdout payload format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  app.add_flag("--quiet", g.quiet, "suppress stdout reports");
  app.fallthrough();

  SynthOpts so;
  CLI::App* synth = app.add_subcommand("synth", "render a synthetic frame pair with known echoes");
  synth->add_option("--k", so.k, "number of echo components")->capture_default_str();
  synth->add_option("--fs", so.fs, "sampling rate in kHz")->capture_default_str();
  synth->add_option("--noise", so.noise, "noise standard deviation in quantized units")
      ->capture_default_str();
  synth->add_option("--x", so.x_samples, "samples per frame")->capture_default_str();
  synth->add_flag("--no-quantize", so.no_quantize, "keep the continuous signal");
  synth->add_flag("--stock", so.stock, "use the fixed benchmark echoes instead of seeded ones");

  FitOpts fo;
  CLI::App* fit = app.add_subcommand("fit", "fit the staged echo model to frames");
  fit->add_option("input", fo.input, "frame CSV or a directory of frames")->required();
  auto add_fit_flags = [](CLI::App* cmd, FitOpts& fop) {
    cmd->add_option("--tau", fop.tau, "envelope gradient threshold")->capture_default_str();
    cmd->add_option("--grad-sep", fop.grad_sep, "gradient sample separation")->capture_default_str();
    cmd->add_option("--fe", fop.fe, "emission frequency in kHz; 0 = sidecar, then spectrum peak")
        ->capture_default_str();
    cmd->add_option("--max-iter", fop.max_iter, "iteration cap per stage")->capture_default_str();
    cmd->add_option("--plan", fop.plan, "stage schedule")
        ->check(CLI::IsMember({"memg", "envelope"}))
        ->capture_default_str();
    cmd->add_option("--env-norm", fop.env_norm,
                    "normalize the detection envelope to unit peak (auto: only when tau <= 1)")
        ->check(CLI::IsMember({"auto", "on", "off"}))
        ->capture_default_str();
    cmd->add_option("--max-k", fop.max_k, "keep only the strongest detections; 0 = no cap")
        ->capture_default_str();
  };
  add_fit_flags(fit, fo);

  DenoiseOpts dn;
  CLI::App* denoise =
      app.add_subcommand("denoise", "reconstruct a frame from its fitted echoes and score it");
  denoise->add_option("input", dn.input, "frame CSV; omit to run the built-in synthetic experiment");
  denoise->add_option("--gt", dn.gt, "ground-truth frame CSV for PSNR scoring");
  denoise->add_option("--from-params", dn.from_params, "reuse a fit document instead of fitting");
  denoise->add_option("--recon", dn.recon, "write the reconstruction to this frame CSV");
  denoise->add_option("--noise", dn.noise, "experiment noise standard deviation")
      ->capture_default_str();
  denoise->add_option("--x", dn.x_samples, "experiment samples per frame")->capture_default_str();
  add_fit_flags(denoise, dn.fit);

  ClassifyOpts co;
  CLI::App* classify =
      app.add_subcommand("classify", "train and score the echo-vs-clutter forest on features");
  classify->add_option("input", co.input, "feature CSV")->required();
  classify->add_option("--trees", co.trees, "forest size")->capture_default_str();
  classify->add_option("--max-depth", co.max_depth, "tree depth cap")->capture_default_str();
  classify->add_option("--min-leaf", co.min_leaf, "smallest leaf")->capture_default_str();
  classify->add_option("--min-split", co.min_split, "smallest splittable node")
      ->capture_default_str();
  classify->add_option("--mtry", co.mtry, "features tried per split; 0 = ceil(sqrt(d))")
      ->capture_default_str();
  classify->add_flag("--no-bootstrap", co.no_bootstrap, "train every tree on the full set");
  classify->add_option("--train-frac", co.train_frac, "fraction of frames used for training")
      ->capture_default_str();
  classify->add_option("--exclude", co.exclude, "feature columns to drop")->delimiter(',');
  classify->add_flag("--no-standardize", co.no_standardize, "skip feature standardization");
  classify->add_option("--save-model", co.save_model, "store the trained model as JSON");
  classify->add_option("--load-model", co.load_model, "predict with a stored model");

  try {
    app.parse(argc, argv);
    if (synth->parsed()) return cmd_synth(g, so);
    if (fit->parsed()) return cmd_fit(g, fo);
    if (denoise->parsed()) return cmd_denoise(g, dn);
    if (classify->parsed()) return cmd_classify(g, co);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
