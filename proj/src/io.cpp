#include "memg/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "memg/errors.hpp"

namespace memg {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kSchemaVersion = 1;

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string at_line(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line);
}

double parse_double(std::string_view field, const std::string& path, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw FormatError(at_line(path, line) + ": malformed number '" + std::string(field) + "'");
  return v;
}

int parse_int(std::string_view field, const std::string& path, std::size_t line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw FormatError(at_line(path, line) + ": malformed integer '" + std::string(field) + "'");
  return v;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

// strips a trailing carriage return so CRLF files parse like LF ones
std::string_view chomp(const std::string& line) {
  std::string_view v = line;
  if (!v.empty() && v.back() == '\r') v.remove_suffix(1);
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open: " + path);
  return in;
}

json parse_json_file(const std::string& path) {
  std::ifstream in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void require_version(const json& doc, const std::string& path) {
  if (!doc.contains("schema_version"))
    throw FormatError(path + ": missing schema version");
  const int v = doc.at("schema_version").get<int>();
  if (v != kSchemaVersion)
    throw FormatError(path + ": unsupported schema version " + std::to_string(v) +
                      ", this reader handles version " + std::to_string(kSchemaVersion));
}

std::string sidecar_path(const std::string& csv_path) {
  return fs::path(csv_path).replace_extension(".json").string();
}

double json_number(const json& j) {
  // dumped NaN and infinity come back as null
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

void write_frame(const FrameRecord& rec, const std::string& csv_path) {
  std::ofstream out = open_out(csv_path);
  out << "t_ms,amplitude\n";
  for (Eigen::Index i = 0; i < rec.frame.samples.size(); ++i)
    out << fmt9(static_cast<double>(i) * rec.frame.dt) << ',' << fmt9(rec.frame.samples[i])
        << '\n';
  if (!out.good()) throw UsageError("write failed: " + csv_path);

  json meta;
  meta["fs_khz"] = 1.0 / rec.frame.dt;
  meta["frame_index"] = rec.frame.frame_index;
  meta["blind_zone_samples"] = rec.blind_zone_samples;
  meta["f_e_khz"] = rec.f_e_khz;
  std::ofstream side = open_out(sidecar_path(csv_path));
  side << meta.dump(2) << '\n';
  if (!side.good()) throw UsageError("write failed: " + sidecar_path(csv_path));
}

FrameRecord read_frame(const std::string& csv_path) {
  if (!fs::exists(csv_path)) throw UsageError("no such path: " + csv_path);
  const std::string side = sidecar_path(csv_path);
  if (!fs::exists(side))
    throw FormatError(csv_path + ": missing metadata sidecar " + side);
  const json meta = parse_json_file(side);
  for (const char* key : {"fs_khz", "frame_index", "blind_zone_samples", "f_e_khz"})
    if (!meta.contains(key))
      throw FormatError(side + ": missing metadata field '" + std::string(key) + "'");

  FrameRecord rec;
  const double fs = meta.at("fs_khz").get<double>();
  if (!(fs > 0.0)) throw FormatError(side + ": fs_khz must be positive");
  rec.frame.dt = 1.0 / fs;
  rec.frame.frame_index = meta.at("frame_index").get<int>();
  rec.blind_zone_samples = meta.at("blind_zone_samples").get<int>();
  rec.f_e_khz = meta.at("f_e_khz").get<double>();

  std::ifstream in = open_in(csv_path);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || chomp(line) != "t_ms,amplitude")
    throw FormatError(at_line(csv_path, 1) + ": expected header 't_ms,amplitude'");

  std::vector<double> samples;
  double prev_t = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = chomp(line);
    if (body.empty()) continue;
    const auto fields = split_fields(body);
    if (fields.size() != 2)
      throw FormatError(at_line(csv_path, line_no) + ": expected 2 comma-separated values");
    const double t = parse_double(fields[0], csv_path, line_no);
    if (t <= prev_t)
      throw FormatError(at_line(csv_path, line_no) + ": time axis is not strictly increasing");
    prev_t = t;
    samples.push_back(parse_double(fields[1], csv_path, line_no));
  }
  rec.frame.samples = Eigen::Map<Eigen::VectorXd>(samples.data(), static_cast<Eigen::Index>(samples.size()));
  return rec;
}

std::vector<FrameRecord> read_frames(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("no such path: " + path);
  std::vector<FrameRecord> out;
  if (fs::is_directory(path)) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.is_regular_file() && entry.path().extension() == ".csv")
        files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back(read_frame(f));
  } else {
    out.push_back(read_frame(path));
  }
  std::stable_sort(out.begin(), out.end(), [](const FrameRecord& a, const FrameRecord& b) {
    return a.frame.frame_index < b.frame.frame_index;
  });
  return out;
}

std::string params_json(const std::vector<FitResult>& fits) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  json frames = json::array();
  for (const FitResult& fit : fits) {
    json jf;
    jf["frame_index"] = fit.params.frame_index;
    jf["oscillating"] = fit.oscillating;
    jf["degraded"] = fit.degraded;
    jf["frame_conf"] = fit.frame_conf;
    json comps = json::array();
    for (int k = 0; k < fit.params.size(); ++k) {
      const auto& c = fit.params.components[static_cast<std::size_t>(k)];
      json jc;
      jc["alpha"] = c.alpha;
      jc["mu"] = c.mu;
      jc["sigma"] = c.sigma;
      jc["eta"] = c.eta;
      jc["freq"] = c.freq;
      jc["phase"] = c.phase;
      jc["conf"] = k < fit.component_conf.size() ? fit.component_conf[k] : 0.0;
      comps.push_back(std::move(jc));
    }
    jf["components"] = std::move(comps);
    json stages = json::array();
    for (const StageResult& s : fit.stages) {
      json js;
      js["initial_loss"] = s.initial_loss;
      js["final_loss"] = s.final_loss;
      js["accepted_steps"] = s.accepted_steps;
      js["iterations"] = s.iterations;
      js["aborted"] = s.aborted;
      stages.push_back(std::move(js));
    }
    jf["stages"] = std::move(stages);
    frames.push_back(std::move(jf));
  }
  doc["frames"] = std::move(frames);
  return doc.dump(2) + '\n';
}

void write_params(const std::vector<FitResult>& fits, const std::string& path) {
  std::ofstream out = open_out(path);
  out << params_json(fits);
  if (!out.good()) throw UsageError("write failed: " + path);
}

std::vector<FitResult> read_params(const std::string& path) {
  const json doc = parse_json_file(path);
  require_version(doc, path);
  if (!doc.contains("frames")) throw FormatError(path + ": missing 'frames' array");
  std::vector<FitResult> fits;
  try {
    for (const json& jf : doc.at("frames")) {
      FitResult fit;
      fit.params.frame_index = jf.at("frame_index").get<int>();
      fit.oscillating = jf.at("oscillating").get<bool>();
      fit.degraded = jf.at("degraded").get<bool>();
      fit.frame_conf = json_number(jf.at("frame_conf"));
      const json& comps = jf.at("components");
      fit.component_conf = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(comps.size()));
      Eigen::Index k = 0;
      for (const json& jc : comps) {
        EchoParamsd c;
        c.alpha = json_number(jc.at("alpha"));
        c.mu = json_number(jc.at("mu"));
        c.sigma = json_number(jc.at("sigma"));
        c.eta = json_number(jc.at("eta"));
        c.freq = json_number(jc.at("freq"));
        c.phase = json_number(jc.at("phase"));
        fit.params.components.push_back(c);
        fit.component_conf[k++] = json_number(jc.at("conf"));
      }
      for (const json& js : jf.at("stages")) {
        StageResult s;
        s.initial_loss = json_number(js.at("initial_loss"));
        s.final_loss = json_number(js.at("final_loss"));
        s.accepted_steps = js.at("accepted_steps").get<int>();
        s.iterations = js.at("iterations").get<int>();
        s.aborted = js.at("aborted").get<bool>();
        fit.stages.push_back(s);
      }
      fits.push_back(std::move(fit));
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return fits;
}

void write_features(const FeatureMatrix& m, const std::string& path) {
  if (m.values.rows() > 0 && m.values.cols() != kFeatureColumns)
    throw UsageError("write_features: matrix must have the full seven feature columns");
  std::ofstream out = open_out(path);
  out << "frame,k,alpha,mu,sigma,eta,freq,phase,conf,label\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << m.frame[static_cast<std::size_t>(i)] << ',' << m.component[static_cast<std::size_t>(i)];
    for (int c = 0; c < kFeatureColumns; ++c) out << ',' << fmt9(m.values(i, c));
    out << ',' << m.labels[static_cast<std::size_t>(i)] << '\n';
  }
  if (!out.good()) throw UsageError("write failed: " + path);
}

FeatureMatrix read_features(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || chomp(line) != "frame,k,alpha,mu,sigma,eta,freq,phase,conf,label")
    throw FormatError(at_line(path, 1) + ": expected the feature CSV header");

  std::vector<std::array<double, kFeatureColumns>> rows;
  FeatureMatrix m;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = chomp(line);
    if (body.empty()) continue;
    const auto fields = split_fields(body);
    if (fields.size() != kFeatureColumns + 3)
      throw FormatError(at_line(path, line_no) + ": expected 10 comma-separated values");
    m.frame.push_back(parse_int(fields[0], path, line_no));
    m.component.push_back(parse_int(fields[1], path, line_no));
    std::array<double, kFeatureColumns> row;
    for (int c = 0; c < kFeatureColumns; ++c)
      row[static_cast<std::size_t>(c)] = parse_double(fields[static_cast<std::size_t>(c) + 2], path, line_no);
    rows.push_back(row);
    m.labels.push_back(parse_int(fields.back(), path, line_no));
  }
  m.values.resize(static_cast<Eigen::Index>(rows.size()), kFeatureColumns);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int c = 0; c < kFeatureColumns; ++c)
      m.values(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
  m.active = default_active_columns();
  return m;
}

void write_model(const ModelFile& model, const std::string& path) {
  json doc;
  doc["schema_version"] = kSchemaVersion;

  json jforest;
  const ForestConfig& cfg = model.forest.config;
  jforest["config"] = {{"n_trees", cfg.n_trees},
                       {"max_depth", cfg.max_depth},
                       {"min_samples_leaf", cfg.min_samples_leaf},
                       {"min_samples_split", cfg.min_samples_split},
                       {"features_per_split", cfg.features_per_split},
                       {"seed", cfg.seed},
                       {"bootstrap", cfg.bootstrap}};
  jforest["n_features"] = model.forest.n_features;
  jforest["n_classes"] = model.forest.n_classes;
  jforest["oob_accuracy"] = model.forest.oob_accuracy;
  jforest["feature_importances"] =
      std::vector<double>(model.forest.feature_importances.begin(), model.forest.feature_importances.end());
  json trees = json::array();
  for (const Tree& tree : model.forest.trees) {
    json nodes = json::array();
    for (const TreeNode& n : tree.nodes)
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"leaf_class", n.leaf_class},
                       {"class_counts", n.class_counts}});
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  jforest["trees"] = std::move(trees);
  doc["forest"] = std::move(jforest);

  doc["features"] = {{"active", model.active},
                     {"standardized", model.standardized},
                     {"mu", std::vector<double>(model.mu_s.begin(), model.mu_s.end())},
                     {"sigma", std::vector<double>(model.sigma_s.begin(), model.sigma_s.end())}};

  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
  if (!out.good()) throw UsageError("write failed: " + path);
}

ModelFile read_model(const std::string& path) {
  const json doc = parse_json_file(path);
  require_version(doc, path);
  ModelFile model;
  try {
    const json& jforest = doc.at("forest");
    const json& jcfg = jforest.at("config");
    ForestConfig cfg;
    cfg.n_trees = jcfg.at("n_trees").get<int>();
    cfg.max_depth = jcfg.at("max_depth").get<int>();
    cfg.min_samples_leaf = jcfg.at("min_samples_leaf").get<int>();
    cfg.min_samples_split = jcfg.at("min_samples_split").get<int>();
    cfg.features_per_split = jcfg.at("features_per_split").get<int>();
    cfg.seed = jcfg.at("seed").get<std::uint64_t>();
    cfg.bootstrap = jcfg.at("bootstrap").get<bool>();
    model.forest.config = cfg;
    model.forest.n_features = jforest.at("n_features").get<int>();
    model.forest.n_classes = jforest.at("n_classes").get<int>();
    model.forest.oob_accuracy = json_number(jforest.at("oob_accuracy"));
    const auto imp = jforest.at("feature_importances").get<std::vector<double>>();
    model.forest.feature_importances =
        Eigen::Map<const Eigen::VectorXd>(imp.data(), static_cast<Eigen::Index>(imp.size()));
    for (const json& jt : jforest.at("trees")) {
      Tree tree;
      for (const json& jn : jt.at("nodes")) {
        TreeNode n;
        n.feature = jn.at("feature").get<int>();
        n.threshold = json_number(jn.at("threshold"));
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
        n.leaf_class = jn.at("leaf_class").get<int>();
        n.class_counts = jn.at("class_counts").get<std::vector<int>>();
        tree.nodes.push_back(std::move(n));
      }
      model.forest.trees.push_back(std::move(tree));
    }
    model.active = doc.at("features").at("active").get<std::vector<int>>();
    model.standardized = doc.at("features").at("standardized").get<bool>();
    const auto mu = doc.at("features").at("mu").get<std::vector<double>>();
    const auto sg = doc.at("features").at("sigma").get<std::vector<double>>();
    model.mu_s = Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    model.sigma_s = Eigen::Map<const Eigen::VectorXd>(sg.data(), static_cast<Eigen::Index>(sg.size()));
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return model;
}

}  // namespace memg
