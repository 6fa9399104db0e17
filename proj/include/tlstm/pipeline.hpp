#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include <json.hpp>

#include "tlstm/checkpoint.hpp"
#include "tlstm/features.hpp"
#include "tlstm/metrics.hpp"
#include "tlstm/projection.hpp"
#include "tlstm/telemetry.hpp"
#include "tlstm/trainer.hpp"
#include "tlstm/windowing.hpp"

namespace tlstm {

inline constexpr const char* kToolkitVersion = "0.1.0";

enum class ModelMode { Baseline, Tucker };

inline std::string to_string(ModelMode m) { return m == ModelMode::Baseline ? "baseline" : "tucker"; }

inline ModelMode parse_mode(const std::string& s) {
  if (s == "baseline") return ModelMode::Baseline;
  if (s == "tucker") return ModelMode::Tucker;
  throw Error(Errc::ConfigError, "mode must be baseline or tucker, got '" + s + "'");
}

/// Every effective parameter of a run. Serialized as the config-echo file and
/// accepted back as a config.
struct RunConfig {
  std::string data;
  ModelMode mode = ModelMode::Tucker;
  std::size_t n_components = 10;
  std::size_t window_size = 10;
  std::size_t horizon = 1;
  std::string output_dir = "runs/default";
  ColumnMap column_map;
  TrainConfig train;

  void validate() const {
    if (data.empty()) throw Error(Errc::ConfigError, "config field 'data' is required");
    if (window_size == 0) throw Error(Errc::ConfigError, "window_size must be positive");
    if (horizon == 0) throw Error(Errc::ConfigError, "horizon must be positive");
    if (n_components < 1 || n_components > kFeatureCount)
      throw Error(Errc::ConfigError, "n_components must be in [1, 14]");
    if (train.batch_size == 0) throw Error(Errc::ConfigError, "batch_size must be positive");
    if (train.max_epochs <= 0) throw Error(Errc::ConfigError, "max_epochs must be positive");
    if (!(train.lr0 > 0.0)) throw Error(Errc::ConfigError, "lr0 must be positive");
    if (!(train.plateau_factor > 0.0 && train.plateau_factor < 1.0))
      throw Error(Errc::ConfigError, "plateau_factor must be in (0, 1)");
    if (train.plateau_patience <= 0 || train.early_stop_patience < 0)
      throw Error(Errc::ConfigError, "patiences must be positive");
    if (!(train.min_lr >= 0.0)) throw Error(Errc::ConfigError, "min_lr must be non-negative");
  }
};

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["toolkit_version"] = kToolkitVersion;
  j["data"] = c.data;
  j["mode"] = to_string(c.mode);
  j["n_components"] = c.n_components;
  j["window_size"] = c.window_size;
  j["horizon"] = c.horizon;
  j["output_dir"] = c.output_dir;
  j["column_map"] = c.column_map;
  j["lr0"] = c.train.lr0;
  j["batch_size"] = c.train.batch_size;
  j["plateau_factor"] = c.train.plateau_factor;
  j["plateau_patience"] = c.train.plateau_patience;
  j["plateau_threshold"] = c.train.plateau_threshold;
  j["early_stop_patience"] = c.train.early_stop_patience;
  j["max_epochs"] = c.train.max_epochs;
  j["seed"] = c.train.seed;
  j["min_lr"] = c.train.min_lr;
  j["clip_norm"] = c.train.clip_norm;
  return j;
}

/// Parses a run config. Unknown keys are rejected; missing keys keep defaults.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::ConfigError, "config must be a JSON object");
  static const std::set<std::string> known = {
      "toolkit_version", "data", "mode", "n_components", "window_size", "horizon", "output_dir",
      "column_map", "lr0", "batch_size", "plateau_factor", "plateau_patience", "plateau_threshold",
      "early_stop_patience", "max_epochs", "seed", "min_lr", "clip_norm"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw Error(Errc::ConfigError, "unknown config key '" + key + "'");

  RunConfig c;
  try {
    auto opt = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    opt("data", c.data);
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    opt("n_components", c.n_components);
    opt("window_size", c.window_size);
    opt("horizon", c.horizon);
    opt("output_dir", c.output_dir);
    opt("column_map", c.column_map);
    opt("lr0", c.train.lr0);
    opt("batch_size", c.train.batch_size);
    opt("plateau_factor", c.train.plateau_factor);
    opt("plateau_patience", c.train.plateau_patience);
    opt("plateau_threshold", c.train.plateau_threshold);
    opt("early_stop_patience", c.train.early_stop_patience);
    opt("max_epochs", c.train.max_epochs);
    opt("seed", c.train.seed);
    opt("min_lr", c.train.min_lr);
    opt("clip_norm", c.train.clip_norm);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, std::string("bad config value: ") + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

/// Fitted preprocessing: feature z-scores, target z-score and (tucker) projection.
struct Preprocessing {
  FeatureStats features;
  double target_mean = 0.0;
  double target_scale = 1.0;
  std::optional<ProjectionModel> projection;
};

inline nlohmann::ordered_json to_json(const Preprocessing& p) {
  nlohmann::ordered_json j;
  j["feature_names"] = std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end());
  j["feature_means"] = to_json(p.features.means);
  j["feature_scales"] = to_json(p.features.scales);
  j["target_mean"] = p.target_mean;
  j["target_scale"] = p.target_scale;
  return j;
}

inline Preprocessing preprocessing_from_json(const nlohmann::json& j) {
  Preprocessing p;
  p.features.means = vector_from_json(j.at("feature_means"));
  p.features.scales = vector_from_json(j.at("feature_scales"));
  p.target_mean = j.at("target_mean").get<double>();
  p.target_scale = j.at("target_scale").get<double>();
  return p;
}

/// Split data ready for training. `model_input` holds standardized (and, in
/// tucker mode, projected) inputs with z-scored targets; `standardized` keeps
/// the unprojected inputs and SOC targets in percent for metrics.
struct PreparedData {
  SplitDataset standardized;  // standardized features, SOC targets in percent
  SplitDataset model_input;
  Preprocessing prep;
  ParseReport parse;
};

inline SplitDataset map_inputs(const SplitDataset& s, const std::function<WindowedDataset(const WindowedDataset&)>& fn) {
  return {fn(s.train), fn(s.val), fn(s.test), s.counts};
}

/// Ingest -> features -> chronological split -> train-only standardization ->
/// (tucker) train-only projection. With `fitted`, stored statistics are
/// applied instead of refitting.
inline PreparedData prepare_data(const RunConfig& cfg, ModelMode mode,
                                 const std::optional<Preprocessing>& fitted = std::nullopt) {
  PreparedData out;
  out.parse = parse_telemetry(std::filesystem::path(cfg.data), cfg.column_map);
  const FeatureFrame frame = engineer_features(out.parse.records);

  const WindowSpec spec{cfg.window_size, 1, cfg.horizon};
  const std::size_t n_windows = window_count(frame.rows(), spec);
  if (n_windows == 0) throw Error(Errc::SeriesTooShort, "series shorter than window_size + horizon");
  const SplitCounts counts = split_counts(n_windows);

  if (fitted) {
    out.prep = *fitted;
  } else {
    // Only rows feeding training-window inputs contribute to the statistics.
    const std::size_t train_rows = counts.train - 1 + cfg.window_size;
    out.prep.features = fit_feature_stats(frame.head(train_rows).features);
  }
  const auto [std_frame, stats] = standardize(frame, out.prep.features);
  out.standardized = chrono_split(window(std_frame, spec));

  if (!fitted) {
    const Vector& y = out.standardized.train.y;
    out.prep.target_mean = y.mean();
    const double sd = std::sqrt((y.array() - out.prep.target_mean).square().mean());
    out.prep.target_scale = sd > 0.0 ? sd : 1.0;
    if (mode == ModelMode::Tucker)
      out.prep.projection = fit_projection(out.standardized.train.x, cfg.n_components, out.prep.features);
  }
  if (mode == ModelMode::Tucker && !out.prep.projection)
    throw Error(Errc::ConfigError, "tucker mode requires a projection");

  const Preprocessing& prep = out.prep;
  out.model_input = map_inputs(out.standardized, [&](const WindowedDataset& d) {
    WindowedDataset r = d;
    if (mode == ModelMode::Tucker) r.x = project(d.x, *prep.projection);
    r.y = (d.y.array() - prep.target_mean) / prep.target_scale;
    return r;
  });
  return out;
}

inline Vector predict_soc(const LstmModel& m, const WindowedDataset& d, const Preprocessing& prep) {
  return (predict(m, d.x).array() * prep.target_scale + prep.target_mean).matrix();
}

struct RunArtifacts {
  LstmModel model;
  TrainReport report;
  Preprocessing prep;
  MetricsReport train_metrics, val_metrics, test_metrics;
  Vector test_pred;
  Vector test_truth;
  std::vector<std::int64_t> test_times;
};

inline nlohmann::ordered_json to_json(const TrainReport& r, bool include_timing = false) {
  nlohmann::ordered_json j;
  j["best_epoch"] = r.best_epoch;
  j["best_val_loss"] = r.best_val_loss;
  j["stop_reason"] = to_string(r.stop_reason);
  j["epochs_run"] = r.epochs.size();
  nlohmann::ordered_json ep = nlohmann::ordered_json::array();
  for (const auto& e : r.epochs)
    ep.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"lr", e.lr},
                  {"clipped_batches", e.clipped_batches}});
  j["epochs"] = ep;
  if (include_timing) j["wall_time_s"] = r.wall_time_s;
  return j;
}

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream o(p, std::ios::binary);
  if (!o) throw Error(Errc::IoError, "cannot write " + p.string());
  o << s;
  if (!o) throw Error(Errc::IoError, "failed writing " + p.string());
}

inline void prepare_output_dir(const std::filesystem::path& dir, bool force) {
  namespace fs = std::filesystem;
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw Error(Errc::ConfigError, dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir) && !force)
      throw Error(Errc::ConfigError, "output directory " + dir.string() + " is not empty (use --force)");
  }
  fs::create_directories(dir);
}

}  // namespace detail

/// Trains one mode on prepared data and writes its artifacts into `dir`:
/// model.ckpt, preprocess.json, projection.json (tucker only),
/// train_report.json, loss_curve.csv, metrics.json, test_*.csv, timing.json.
/// Everything except timing.json is a deterministic function of the inputs.
inline RunArtifacts train_and_write(const RunConfig& cfg, ModelMode mode, const PreparedData& data,
                                    const std::filesystem::path& dir, const EpochCallback& on_epoch = {}) {
  std::filesystem::create_directories(dir);
  RunArtifacts a;
  a.prep = data.prep;
  const std::size_t input_dim = data.model_input.train.x.features();
  LstmModel init = init_params(cfg.train.seed, input_dim);
  TrainResult tr = train(std::move(init), data.model_input, cfg.train, on_epoch);
  a.model = std::move(tr.best);
  a.report = tr.report;

  const auto eval = [&](const WindowedDataset& in, const WindowedDataset& raw, const char* name) {
    return compute_metrics(predict_soc(a.model, in, a.prep), raw.y, name);
  };
  a.train_metrics = eval(data.model_input.train, data.standardized.train, "train");
  a.val_metrics = eval(data.model_input.val, data.standardized.val, "val");
  a.test_pred = predict_soc(a.model, data.model_input.test, a.prep);
  a.test_truth = data.standardized.test.y;
  a.test_times = data.standardized.test.target_times;
  a.test_metrics = compute_metrics(a.test_pred, a.test_truth, "test");

  save_checkpoint(dir / "model.ckpt", a.model);
  detail::write_text(dir / "preprocess.json", to_json(a.prep).dump(2) + "\n");
  if (mode == ModelMode::Tucker) detail::write_text(dir / "projection.json", to_json(*a.prep.projection).dump(2) + "\n");
  detail::write_text(dir / "train_report.json", to_json(a.report).dump(2) + "\n");
  {
    std::ostringstream os;
    os << "epoch,train_loss,val_loss,lr\n";
    for (const auto& e : a.report.epochs)
      os << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << ','
         << format_double(e.lr) << '\n';
    detail::write_text(dir / "loss_curve.csv", os.str());
  }
  nlohmann::ordered_json mj;
  mj["mode"] = to_string(mode);
  mj["input_dim"] = input_dim;
  mj["splits"] = {to_json(a.train_metrics), to_json(a.val_metrics), to_json(a.test_metrics)};
  detail::write_text(dir / "metrics.json", mj.dump(2) + "\n");
  residual_artifacts(a.test_pred, a.test_truth, a.test_times, dir, "test_");
  detail::write_text(dir / "timing.json", nlohmann::ordered_json{{"wall_time_s", a.report.wall_time_s}}.dump(2) + "\n");
  return a;
}

inline void write_config_echo(const RunConfig& cfg, const std::filesystem::path& dir) {
  detail::write_text(dir / "config_echo.json", to_json(cfg).dump(2) + "\n");
}

inline RunArtifacts run_train(const RunConfig& cfg, bool force = false, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  const std::filesystem::path dir(cfg.output_dir);
  detail::prepare_output_dir(dir, force);
  const PreparedData data = prepare_data(cfg, cfg.mode);
  write_config_echo(cfg, dir);
  return train_and_write(cfg, cfg.mode, data, dir, on_epoch);
}

/// Re-evaluates a trained run directory on the data named in `cfg`, applying
/// the stored preprocessing. Writes evaluation.json into the run directory.
inline std::array<MetricsReport, 3> run_evaluate(const RunConfig& cfg, const std::filesystem::path& run_dir) {
  namespace fs = std::filesystem;
  const LstmModel model = load_checkpoint(run_dir / "model.ckpt");
  std::ifstream pin(run_dir / "preprocess.json");
  if (!pin) throw Error(Errc::FileNotFound, (run_dir / "preprocess.json").string());
  Preprocessing prep = preprocessing_from_json(nlohmann::json::parse(pin));
  ModelMode mode = ModelMode::Baseline;
  if (fs::exists(run_dir / "projection.json")) {
    std::ifstream jin(run_dir / "projection.json");
    prep.projection = projection_from_json(nlohmann::json::parse(jin));
    mode = ModelMode::Tucker;
  }
  const PreparedData data = prepare_data(cfg, mode, prep);
  std::array<MetricsReport, 3> out;
  const std::array<std::pair<const WindowedDataset*, const WindowedDataset*>, 3> splits = {{
      {&data.model_input.train, &data.standardized.train},
      {&data.model_input.val, &data.standardized.val},
      {&data.model_input.test, &data.standardized.test}}};
  const std::array<const char*, 3> names = {"train", "val", "test"};
  nlohmann::ordered_json j;
  j["mode"] = to_string(mode);
  j["splits"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < 3; ++i) {
    out[i] = compute_metrics(predict_soc(model, *splits[i].first, prep), splits[i].second->y, names[i]);
    j["splits"].push_back(to_json(out[i]));
  }
  detail::write_text(run_dir / "evaluation.json", j.dump(2) + "\n");
  return out;
}

struct CompareArtifacts {
  RunArtifacts baseline;
  RunArtifacts tucker;
  ComparisonReport comparison;
};

/// Trains both modes with the same seed and hyperparameters on the same
/// chronological split and writes baseline/, tucker/, comparison.{txt,json}.
inline CompareArtifacts run_compare(const RunConfig& cfg, bool force = false,
                                    const std::function<void(ModelMode, const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  const std::filesystem::path dir(cfg.output_dir);
  detail::prepare_output_dir(dir, force);
  const PreparedData tucker_data = prepare_data(cfg, ModelMode::Tucker);
  PreparedData baseline_data = tucker_data;  // same split and standardization, no projection step
  baseline_data.prep.projection.reset();
  baseline_data.model_input = map_inputs(tucker_data.standardized, [&](const WindowedDataset& d) {
    WindowedDataset r = d;
    r.y = (d.y.array() - tucker_data.prep.target_mean) / tucker_data.prep.target_scale;
    return r;
  });

  write_config_echo(cfg, dir);

  CompareArtifacts out;
  auto run = [&](ModelMode mode, const PreparedData& d, RunArtifacts& slot) {
    RunConfig c = cfg;
    c.mode = mode;
    c.output_dir = (dir / to_string(mode)).string();
    slot = train_and_write(c, mode, d, c.output_dir, [&, mode](const EpochRecord& e) {
      if (on_epoch) on_epoch(mode, e);
    });
    write_config_echo(c, c.output_dir);
  };
  if (std::thread::hardware_concurrency() >= 2) {
    std::exception_ptr err;
    std::thread worker([&] {
      try {
        run(ModelMode::Tucker, tucker_data, out.tucker);
      } catch (...) {
        err = std::current_exception();
      }
    });
    run(ModelMode::Baseline, baseline_data, out.baseline);
    worker.join();
    if (err) std::rethrow_exception(err);
  } else {
    run(ModelMode::Baseline, baseline_data, out.baseline);
    run(ModelMode::Tucker, tucker_data, out.tucker);
  }

  out.comparison = comparison_report(out.baseline.test_metrics, out.tucker.test_metrics);
  detail::write_text(dir / "comparison.txt", to_text(out.comparison));
  detail::write_text(dir / "comparison.json", to_json(out.comparison).dump(2) + "\n");
  return out;
}

}  // namespace tlstm
