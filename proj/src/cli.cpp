#include "kmn/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "kmn/io.hpp"

namespace kmn {

namespace {

namespace fs = std::filesystem;

// ---- config file support ----
// --config names a JSON file whose keys are long flag names ("n-train",
// "seed"); values fill in for flags absent from the command line. A manifest
// written by any command works directly: its "flags" object is used.

Json load_config_arg(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config" && i + 1 < args.size())
      path = args[i + 1];
    else if (a.rfind("--config=", 0) == 0)
      path = a.substr(9);
  }
  if (path.empty()) return Json::object();
  Json j = load_json(path);
  if (j.contains("flags") && j["flags"].is_object()) return j["flags"];
  if (!j.is_object())
    throw ValidationError("config file must hold a JSON object: " + path);
  return j;
}

template <typename T>
void cfg(const Json& config, const char* key, T& target) {
  if (config.contains(key)) {
    try {
      config.at(key).get_to(target);
    } catch (const Json::exception&) {
      throw ValidationError(std::string("config value for \"") + key +
                            "\" has the wrong type");
    }
  }
}

void ensure_out_dir(const std::string& out) {
  if (out.empty()) throw ValidationError("--out directory is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out + ": " +
                        ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// Dataset flags may point at a directory (expects the standard file name
// inside) or directly at a .jsonl file.
std::string resolve_dataset(const std::string& path,
                            const std::string& default_name) {
  if (fs::is_directory(path)) return join_path(path, default_name);
  return path;
}

Json manifest_skeleton(const std::string& command, std::uint64_t seed) {
  Json m;
  m["format"] = "kmn-manifest";
  m["version"] = kToolVersion;
  m["command"] = command;
  m["seed"] = seed;
  return m;
}

std::vector<Scalar> parse_scalar_list(const std::string& csv) {
  std::vector<Scalar> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError("cannot parse number \"" + item + "\"");
    }
  }
  return out;
}

// ---- simulate ----

struct SimulateOpts {
  std::string experiment = "oscillator";
  long n_train = 5000;
  long n_valid = 50;
  std::uint64_t seed = 0;
  std::string out;
  Scalar dt = 0.01;
  Scalar duration = 4.0;
  Scalar obs_noise_sd = -1.0;  // < 0: per-experiment default
  Scalar noise_scale = 0.8;
  Scalar burn_in = 2.0;
  Scalar x0_lo = 0.0;  // equal bounds: every trial starts at exactly x0_lo
  Scalar x0_hi = 0.0;
  Scalar angular_rate = 4.0 * kPi;
  Scalar taylor_df = 3.0;
};

int cmd_simulate(const SimulateOpts& opt) {
  if (opt.experiment != "oscillator" && opt.experiment != "phase")
    throw ValidationError("--experiment must be oscillator or phase");
  if (opt.n_train < 1 || opt.n_valid < 1)
    throw ValidationError("--n-train and --n-valid must be >= 1");
  if (opt.x0_hi < opt.x0_lo)
    throw ValidationError("--x0-hi must be >= --x0-lo");
  ensure_out_dir(opt.out);

  OscillatorParams osc;
  PhaseModelParams phase;
  Scalar obs_sd = opt.obs_noise_sd;
  if (opt.experiment == "oscillator") {
    if (obs_sd < 0.0) obs_sd = 1.0;
    osc.dt = opt.dt;
    osc.duration = opt.duration;
    osc.obs_noise_sd = obs_sd;
    osc.noise_scale = opt.noise_scale;
    osc.burn_in = opt.burn_in;
  } else {
    if (obs_sd < 0.0) obs_sd = 2.0;
    phase.dt = opt.dt;
    phase.duration = opt.duration;
    phase.obs_noise_sd = obs_sd;
    phase.angular_rate = opt.angular_rate;
    phase.taylor_df = opt.taylor_df;
  }

  const long total = opt.n_train + opt.n_valid;
  std::vector<TrialRecord> train, valid;
  train.reserve(static_cast<std::size_t>(opt.n_train));
  valid.reserve(static_cast<std::size_t>(opt.n_valid));
  for (long i = 0; i < total; ++i) {
    Rng rng = Rng::derive(opt.seed, "trial", static_cast<std::uint64_t>(i));
    Scalar x0 = opt.x0_lo;
    if (opt.x0_hi > opt.x0_lo) x0 = rng.uniform(opt.x0_lo, opt.x0_hi);
    TrialRecord trial = opt.experiment == "oscillator"
                            ? simulate_oscillator(osc, rng, x0)
                            : simulate_phase_trial(phase, rng);
    trial.trial_id = i;
    (i < opt.n_train ? train : valid).push_back(std::move(trial));
  }
  save_trials_jsonl(train, join_path(opt.out, "train.jsonl"));
  save_trials_jsonl(valid, join_path(opt.out, "valid.jsonl"));

  Json manifest = manifest_skeleton("simulate", opt.seed);
  manifest["generator"] = opt.experiment == "oscillator"
                              ? "oscillator-euler-maruyama-v1"
                              : "phase-wave-v1";
  manifest["counts"] = {{"train", opt.n_train}, {"valid", opt.n_valid}};
  Json flags;
  flags["experiment"] = opt.experiment;
  flags["n-train"] = opt.n_train;
  flags["n-valid"] = opt.n_valid;
  flags["seed"] = opt.seed;
  flags["out"] = opt.out;
  flags["dt"] = opt.dt;
  flags["duration"] = opt.duration;
  flags["obs-noise-sd"] = obs_sd;
  if (opt.experiment == "oscillator") {
    flags["noise-scale"] = opt.noise_scale;
    flags["burn-in"] = opt.burn_in;
    flags["x0-lo"] = opt.x0_lo;
    flags["x0-hi"] = opt.x0_hi;
  } else {
    flags["angular-rate"] = opt.angular_rate;
    flags["taylor-df"] = opt.taylor_df;
  }
  manifest["flags"] = flags;
  save_json(manifest, join_path(opt.out, "manifest_simulate.json"));
  std::cout << "wrote " << opt.n_train << " train / " << opt.n_valid
            << " valid trials to " << opt.out << "\n";
  return 0;
}

// ---- train ----

struct TrainOpts {
  std::string data;
  std::string head = "kmn";
  std::string kernel = "auto";
  std::string kernel_params;  // comma list, empty -> default grid
  Scalar delta = -1.0;
  int window = 128;
  std::vector<int> hidden = {256, 256};
  std::string outer = "rectified_quadratic";
  Scalar weight_eps = 1e-12;
  long iterations = 3000;
  int batch_size = 64;
  Scalar lr = 1e-3;
  long eval_interval = 100;
  Scalar bin_size = 0.25;
  Scalar bin_lo = -6.0;
  Scalar bin_hi = 6.0;
  int bin_count = 48;
  std::uint64_t seed = 0;
  std::string name;
  std::string out;
};

int cmd_train(const TrainOpts& opt) {
  if (opt.data.empty()) throw ValidationError("--data is required");
  ensure_out_dir(opt.out);
  const auto train_trials =
      load_trials_jsonl(resolve_dataset(opt.data, "train.jsonl"));
  const auto valid_trials =
      load_trials_jsonl(resolve_dataset(opt.data, "valid.jsonl"));
  const std::string experiment = train_trials.front().experiment;

  TrainConfig config;
  config.head = opt.head;
  config.window = opt.window;
  config.hidden = opt.hidden;
  config.outer_activation = activation_from_string(opt.outer);
  config.weight_eps = opt.weight_eps;
  config.iterations = opt.iterations;
  config.batch_size = opt.batch_size;
  config.learning_rate = opt.lr;
  config.eval_interval = opt.eval_interval;
  config.seed = opt.seed;
  config.model_name = opt.name;

  std::string kernel = opt.kernel;
  if (kernel == "auto")
    kernel = experiment == "phase" ? "von_mises" : "gaussian";
  config.family = kernel_family_from_string(kernel);
  if (!opt.kernel_params.empty())
    config.kernel_params = parse_scalar_list(opt.kernel_params);

  config.delta = opt.delta;
  if (config.delta < 0.0 && experiment == "phase") {
    // The library default (a tenth of the sharpest kernel scale) would put
    // thousands of centers on the circle; 2 pi / 256 keeps the head around
    // 256 centers, plenty for the 48-bin baseline comparison.
    config.delta = kTwoPi / 256.0;
  }

  if (opt.head == "quantized") {
    if (experiment == "phase") {
      if (opt.bin_count < 2) throw ValidationError("--bin-count must be >= 2");
      const Vector edges = linspace(-kPi, kPi, opt.bin_count + 1);
      config.bin_edges.assign(edges.data(), edges.data() + edges.size());
    } else {
      if (!(opt.bin_size > 0.0) || !(opt.bin_lo < opt.bin_hi))
        throw ValidationError("quantized bins need bin_size > 0, bin_lo < bin_hi");
      const long n = std::lround((opt.bin_hi - opt.bin_lo) / opt.bin_size);
      if (n < 1 ||
          std::abs(opt.bin_lo + static_cast<Scalar>(n) * opt.bin_size -
                   opt.bin_hi) > 1e-9)
        throw ValidationError("bin size must evenly divide the bin range");
      for (long i = 0; i <= n; ++i)
        config.bin_edges.push_back(opt.bin_lo +
                                   opt.bin_size * static_cast<Scalar>(i));
    }
  }

  TrainResult result = train_filter(config, train_trials, valid_trials);

  Json train_meta;
  train_meta["seed"] = opt.seed;
  train_meta["iterations"] = opt.iterations;
  train_meta["batch_size"] = opt.batch_size;
  train_meta["learning_rate"] = opt.lr;
  train_meta["eval_interval"] = opt.eval_interval;
  train_meta["data"] = opt.data;
  save_checkpoint(result.model, train_meta,
                  join_path(opt.out, "checkpoint.json"));
  std::ostringstream curve;
  write_curve_csv(result.curve, curve);
  write_text_file(join_path(opt.out, "curve.csv"), curve.str());

  Json manifest = manifest_skeleton("train", opt.seed);
  Json flags;
  flags["data"] = opt.data;
  flags["head"] = opt.head;
  flags["kernel"] = kernel;
  if (!opt.kernel_params.empty()) flags["kernel-params"] = opt.kernel_params;
  flags["delta"] = config.delta;
  flags["window"] = opt.window;
  flags["hidden"] = opt.hidden;
  flags["outer"] = opt.outer;
  flags["weight-eps"] = opt.weight_eps;
  flags["iterations"] = opt.iterations;
  flags["batch-size"] = opt.batch_size;
  flags["lr"] = opt.lr;
  flags["eval-interval"] = opt.eval_interval;
  if (opt.head == "quantized") {
    if (experiment == "phase") {
      flags["bin-count"] = opt.bin_count;
    } else {
      flags["bin-size"] = opt.bin_size;
      flags["bin-lo"] = opt.bin_lo;
      flags["bin-hi"] = opt.bin_hi;
    }
  }
  flags["seed"] = opt.seed;
  if (!opt.name.empty()) flags["name"] = opt.name;
  flags["out"] = opt.out;
  manifest["flags"] = flags;
  manifest["skipped_trials"] = result.skipped_trials;
  save_json(manifest, join_path(opt.out, "manifest_train.json"));

  if (result.diverged) {
    std::cerr << "training aborted (" << result.abort_reason
              << "); wrote the last good checkpoint\n";
    return 4;
  }
  std::cout << "trained " << result.model.model_name << " ("
            << result.curve.back().loss << " final validation NLL); wrote "
            << join_path(opt.out, "checkpoint.json") << "\n";
  return 0;
}

// ---- evaluate ----

struct EvaluateOpts {
  std::vector<std::string> models;
  std::string data;
  bool ekf = false;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_evaluate(const EvaluateOpts& opt) {
  if (opt.models.empty()) throw ValidationError("--models needs a checkpoint");
  if (opt.data.empty()) throw ValidationError("--data is required");
  ensure_out_dir(opt.out);
  const auto trials = load_trials_jsonl(resolve_dataset(opt.data, "valid.jsonl"));

  std::vector<FilterModel> models;
  for (const std::string& path : opt.models)
    models.push_back(load_checkpoint(path));
  for (const FilterModel& m : models)
    if (m.experiment != trials.front().experiment)
      throw ValidationError("model " + m.model_name +
                            " was trained on a different experiment");
  if (opt.ekf && trials.front().experiment != "oscillator")
    throw ValidationError("--ekf applies to oscillator datasets only");

  // All models (and the EKF) are averaged over one shared time range so the
  // per-trial numbers are comparable.
  int start = 0;
  for (const FilterModel& m : models) start = std::max(start, m.window);

  std::vector<std::string> names;
  std::vector<Vector> nlls;
  std::set<std::string> used;
  for (const FilterModel& m : models) {
    std::string name = m.model_name;
    int suffix = 2;
    while (!used.insert(name).second)
      name = m.model_name + "#" + std::to_string(suffix++);
    names.push_back(name);
    nlls.push_back(evaluate_filter_nll(m, trials, start));
  }
  if (opt.ekf) {
    names.push_back("ekf");
    nlls.push_back(evaluate_ekf_nll(trials, start));
  }

  std::vector<long> trial_ids;
  for (const TrialRecord& t : trials) trial_ids.push_back(t.trial_id);
  std::ostringstream csv;
  const ComparisonSummary summary =
      emit_comparison(names, nlls, trial_ids, csv);
  write_text_file(join_path(opt.out, "comparison.csv"), csv.str());

  Json manifest = manifest_skeleton("evaluate", opt.seed);
  Json flags;
  flags["models"] = opt.models;
  flags["data"] = opt.data;
  flags["ekf"] = opt.ekf;
  flags["seed"] = opt.seed;
  flags["out"] = opt.out;
  manifest["flags"] = flags;
  save_json(manifest, join_path(opt.out, "manifest_evaluate.json"));

  for (std::size_t m = 0; m < names.size(); ++m)
    std::cout << names[m] << " mean NLL "
              << format_g17(summary.means[static_cast<Index>(m)]) << "\n";
  return 0;
}

// ---- density ----

struct DensityOpts {
  std::string checkpoint;
  std::string data;
  long trial = 0;
  std::vector<int> times;
  Index grid_n = 401;
  Scalar grid_lo = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar grid_hi = std::numeric_limits<Scalar>::quiet_NaN();
  std::uint64_t seed = 0;
  std::string out;
};

const TrialRecord& find_trial(const std::vector<TrialRecord>& trials,
                              long trial_id) {
  for (const TrialRecord& t : trials)
    if (t.trial_id == trial_id) return t;
  throw ValidationError("trial_id " + std::to_string(trial_id) +
                        " not present in the dataset");
}

// Default evaluation range: the kernel/bin support, padded for gaussians.
std::pair<Scalar, Scalar> default_grid_range(const FilterModel& model) {
  if (model.manifold == Manifold::circle) return {-kPi, kPi};
  if (model.head == "quantized")
    return {model.bin_edges.front(), model.bin_edges.back()};
  const Scalar max_sigma =
      *std::max_element(model.kernels.params.begin(), model.kernels.params.end());
  return {model.centers.centers.front() - 4.0 * max_sigma,
          model.centers.centers.back() + 4.0 * max_sigma};
}

int cmd_density(const DensityOpts& opt) {
  if (opt.checkpoint.empty()) throw ValidationError("--checkpoint is required");
  if (opt.data.empty()) throw ValidationError("--data is required");
  if (opt.times.empty()) throw ValidationError("--times needs at least one index");
  if (opt.grid_n < 3) throw ValidationError("--grid-n must be >= 3");
  ensure_out_dir(opt.out);

  const FilterModel model = load_checkpoint(opt.checkpoint);
  const auto trials = load_trials_jsonl(resolve_dataset(opt.data, "valid.jsonl"));
  const TrialRecord& trial = find_trial(trials, opt.trial);

  Scalar lo = opt.grid_lo, hi = opt.grid_hi;
  if (std::isnan(lo) || std::isnan(hi)) {
    const auto range = default_grid_range(model);
    if (std::isnan(lo)) lo = range.first;
    if (std::isnan(hi)) hi = range.second;
  }
  Vector xs;
  if (model.manifold == Manifold::circle) {
    // Cell midpoints, strictly inside (-pi, pi), so the boundary angle never
    // falls on a bin edge.
    xs.resize(opt.grid_n);
    const Scalar step = kTwoPi / static_cast<Scalar>(opt.grid_n);
    for (Index i = 0; i < opt.grid_n; ++i)
      xs[i] = -kPi + step * (static_cast<Scalar>(i) + 0.5);
  } else {
    xs = linspace(lo, hi, opt.grid_n);
  }

  std::ostringstream csv;
  model_heatmap(model, trial, opt.times, xs, csv);
  write_text_file(join_path(opt.out, "slices.csv"), csv.str());

  Json manifest = manifest_skeleton("density", opt.seed);
  Json flags;
  flags["checkpoint"] = opt.checkpoint;
  flags["data"] = opt.data;
  flags["trial"] = opt.trial;
  flags["times"] = opt.times;
  flags["grid-n"] = opt.grid_n;
  flags["grid-lo"] = xs[0];
  flags["grid-hi"] = xs[xs.size() - 1];
  flags["seed"] = opt.seed;
  flags["out"] = opt.out;
  manifest["flags"] = flags;
  save_json(manifest, join_path(opt.out, "manifest_density.json"));
  std::cout << "wrote " << opt.times.size() << " density slices to "
            << join_path(opt.out, "slices.csv") << "\n";
  return 0;
}

// ---- sample ----

struct SampleOpts {
  std::string checkpoint;
  std::string data;
  long trial = 0;
  int time = -1;
  bool window_stdin = false;
  long n = 1000;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_sample(const SampleOpts& opt) {
  if (opt.checkpoint.empty()) throw ValidationError("--checkpoint is required");
  if (opt.n < 0) throw ValidationError("--n must be >= 0");
  ensure_out_dir(opt.out);
  const FilterModel model = load_checkpoint(opt.checkpoint);

  // The conditioning window comes either from a dataset trial or as raw
  // observation values on stdin (standardization happens here, matching the
  // training pipeline).
  Vector window(model.window);
  if (opt.window_stdin) {
    std::vector<Scalar> values;
    Scalar v;
    while (std::cin >> v) values.push_back(v);
    if (!std::cin.eof())
      throw ValidationError("conditioning window on stdin is not numeric");
    if (static_cast<int>(values.size()) != model.window)
      throw ValidationError("conditioning window needs exactly " +
                            std::to_string(model.window) + " values, got " +
                            std::to_string(values.size()));
    for (int i = 0; i < model.window; ++i)
      window[i] = (values[static_cast<std::size_t>(i)] - model.feature_mean) /
                  model.feature_sd;
  } else {
    if (opt.data.empty())
      throw ValidationError("--data (with --trial/--time) or --window-stdin "
                            "must supply the conditioning window");
    if (opt.time < 0) throw ValidationError("--time is required with --data");
    const auto trials =
        load_trials_jsonl(resolve_dataset(opt.data, "valid.jsonl"));
    const TrialRecord& trial = find_trial(trials, opt.trial);
    window = model_window(model, trial, opt.time);
  }

  Rng rng = Rng::derive(opt.seed, "sample");
  const Vector samples =
      model_sample(model, window, static_cast<Index>(opt.n), rng);
  std::ostringstream csv;
  csv << "sample\n";
  for (Index i = 0; i < samples.size(); ++i)
    csv << format_g17(samples[i]) << '\n';
  write_text_file(join_path(opt.out, "samples.csv"), csv.str());

  Json manifest = manifest_skeleton("sample", opt.seed);
  Json flags;
  flags["checkpoint"] = opt.checkpoint;
  if (!opt.data.empty()) flags["data"] = opt.data;
  flags["trial"] = opt.trial;
  flags["time"] = opt.time;
  flags["window-stdin"] = opt.window_stdin;
  flags["n"] = opt.n;
  flags["seed"] = opt.seed;
  flags["out"] = opt.out;
  manifest["flags"] = flags;
  save_json(manifest, join_path(opt.out, "manifest_sample.json"));
  std::cout << "wrote " << opt.n << " samples to "
            << join_path(opt.out, "samples.csv") << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

int run_cli(const std::vector<std::string>& args) {
  try {
    const Json config = load_config_arg(args);

    CLI::App app{"kernel mixture network toolkit: conditional density "
                 "estimation and Bayesian filtering benchmarks"};
    app.require_subcommand(1);
    std::string config_path;  // parsed for help text; handled above

    SimulateOpts sim;
    cfg(config, "experiment", sim.experiment);
    cfg(config, "n-train", sim.n_train);
    cfg(config, "n-valid", sim.n_valid);
    cfg(config, "seed", sim.seed);
    cfg(config, "out", sim.out);
    cfg(config, "dt", sim.dt);
    cfg(config, "duration", sim.duration);
    cfg(config, "obs-noise-sd", sim.obs_noise_sd);
    cfg(config, "noise-scale", sim.noise_scale);
    cfg(config, "burn-in", sim.burn_in);
    cfg(config, "x0-lo", sim.x0_lo);
    cfg(config, "x0-hi", sim.x0_hi);
    cfg(config, "angular-rate", sim.angular_rate);
    cfg(config, "taylor-df", sim.taylor_df);
    CLI::App* simulate =
        app.add_subcommand("simulate", "generate synthetic trial datasets");
    simulate->add_option("--config", config_path, "JSON config/manifest with flag defaults");
    simulate->add_option("--experiment", sim.experiment, "oscillator or phase");
    simulate->add_option("--n-train", sim.n_train, "training trial count");
    simulate->add_option("--n-valid", sim.n_valid, "validation trial count");
    simulate->add_option("--seed", sim.seed, "master seed");
    simulate->add_option("--out", sim.out, "output directory");
    simulate->add_option("--dt", sim.dt, "integration step (s)");
    simulate->add_option("--duration", sim.duration, "recorded span per trial (s)");
    simulate->add_option("--obs-noise-sd", sim.obs_noise_sd,
                         "observation noise sd (default 1 oscillator, 2 phase)");
    simulate->add_option("--noise-scale", sim.noise_scale,
                         "oscillator diffusion amplitude");
    simulate->add_option("--burn-in", sim.burn_in,
                         "oscillator burn-in discarded before recording (s)");
    simulate->add_option("--x0-lo", sim.x0_lo,
                         "oscillator start position, lower bound");
    simulate->add_option("--x0-hi", sim.x0_hi,
                         "oscillator start position, upper bound (each trial "
                         "draws uniformly when the bounds differ)");
    simulate->add_option("--angular-rate", sim.angular_rate,
                         "phase angular rate (rad/s)");
    simulate->add_option("--taylor-df", sim.taylor_df,
                         "degrees of freedom of the waveform coefficients");

    TrainOpts tr;
    cfg(config, "data", tr.data);
    cfg(config, "head", tr.head);
    cfg(config, "kernel", tr.kernel);
    cfg(config, "kernel-params", tr.kernel_params);
    cfg(config, "delta", tr.delta);
    cfg(config, "window", tr.window);
    cfg(config, "hidden", tr.hidden);
    cfg(config, "outer", tr.outer);
    cfg(config, "weight-eps", tr.weight_eps);
    cfg(config, "iterations", tr.iterations);
    cfg(config, "batch-size", tr.batch_size);
    cfg(config, "lr", tr.lr);
    cfg(config, "eval-interval", tr.eval_interval);
    cfg(config, "bin-size", tr.bin_size);
    cfg(config, "bin-lo", tr.bin_lo);
    cfg(config, "bin-hi", tr.bin_hi);
    cfg(config, "bin-count", tr.bin_count);
    cfg(config, "seed", tr.seed);
    cfg(config, "name", tr.name);
    cfg(config, "out", tr.out);
    CLI::App* train =
        app.add_subcommand("train", "train a filter on a simulated dataset");
    train->add_option("--config", config_path, "JSON config/manifest with flag defaults");
    train->add_option("--data", tr.data, "dataset directory (train/valid.jsonl)");
    train->add_option("--head", tr.head, "kmn or quantized");
    train->add_option("--kernel", tr.kernel,
                      "kernel family (auto, gaussian, von_mises)");
    train->add_option("--kernel-params", tr.kernel_params,
                      "comma list overriding the default parameter grid");
    train->add_option("--delta", tr.delta,
                      "center subsampling threshold (default: a tenth of the "
                      "smallest kernel scale; phase: 2pi/256)");
    train->add_option("--window", tr.window, "observation window length");
    train->add_option("--hidden", tr.hidden, "hidden layer sizes")
        ->delimiter(',');
    train->add_option("--outer", tr.outer,
                      "outer activation for the kmn head");
    train->add_option("--weight-eps", tr.weight_eps,
                      "epsilon added to mixture weights");
    train->add_option("--iterations", tr.iterations, "optimization steps");
    train->add_option("--batch-size", tr.batch_size, "mini-batch size");
    train->add_option("--lr", tr.lr, "Adam learning rate");
    train->add_option("--eval-interval", tr.eval_interval,
                      "iterations between curve records");
    train->add_option("--bin-size", tr.bin_size, "quantized bin width");
    train->add_option("--bin-lo", tr.bin_lo, "quantized range lower edge");
    train->add_option("--bin-hi", tr.bin_hi, "quantized range upper edge");
    train->add_option("--bin-count", tr.bin_count,
                      "quantized bin count on the circle");
    train->add_option("--seed", tr.seed, "master seed");
    train->add_option("--name", tr.name, "model name in comparison output");
    train->add_option("--out", tr.out, "output directory");

    EvaluateOpts ev;
    cfg(config, "models", ev.models);
    cfg(config, "data", ev.data);
    cfg(config, "ekf", ev.ekf);
    cfg(config, "seed", ev.seed);
    cfg(config, "out", ev.out);
    CLI::App* evaluate = app.add_subcommand(
        "evaluate", "per-trial NLL comparison of trained filters");
    evaluate->add_option("--config", config_path, "JSON config/manifest with flag defaults");
    evaluate->add_option("--models", ev.models, "checkpoint files");
    evaluate->add_option("--data", ev.data, "validation dataset");
    evaluate->add_flag("--ekf", ev.ekf, "add the EKF baseline (oscillator)");
    evaluate->add_option("--seed", ev.seed, "recorded in the manifest");
    evaluate->add_option("--out", ev.out, "output directory");

    DensityOpts de;
    cfg(config, "checkpoint", de.checkpoint);
    cfg(config, "data", de.data);
    cfg(config, "trial", de.trial);
    cfg(config, "times", de.times);
    cfg(config, "grid-n", de.grid_n);
    cfg(config, "grid-lo", de.grid_lo);
    cfg(config, "grid-hi", de.grid_hi);
    cfg(config, "seed", de.seed);
    cfg(config, "out", de.out);
    CLI::App* density = app.add_subcommand(
        "density", "evaluate conditional density slices on a grid");
    density->add_option("--config", config_path, "JSON config/manifest with flag defaults");
    density->add_option("--checkpoint", de.checkpoint, "trained checkpoint");
    density->add_option("--data", de.data, "dataset holding the trial");
    density->add_option("--trial", de.trial, "trial id");
    density->add_option("--times", de.times, "time indices (t >= window)")
        ->delimiter(',');
    density->add_option("--grid-n", de.grid_n, "grid point count");
    density->add_option("--grid-lo", de.grid_lo, "grid lower bound");
    density->add_option("--grid-hi", de.grid_hi, "grid upper bound");
    density->add_option("--seed", de.seed, "recorded in the manifest");
    density->add_option("--out", de.out, "output directory");

    SampleOpts sa;
    cfg(config, "checkpoint", sa.checkpoint);
    cfg(config, "data", sa.data);
    cfg(config, "trial", sa.trial);
    cfg(config, "time", sa.time);
    cfg(config, "window-stdin", sa.window_stdin);
    cfg(config, "n", sa.n);
    cfg(config, "seed", sa.seed);
    cfg(config, "out", sa.out);
    CLI::App* sample = app.add_subcommand(
        "sample", "draw samples from a conditional density");
    sample->add_option("--config", config_path, "JSON config/manifest with flag defaults");
    sample->add_option("--checkpoint", sa.checkpoint, "trained checkpoint");
    sample->add_option("--data", sa.data, "dataset holding the trial");
    sample->add_option("--trial", sa.trial, "trial id");
    sample->add_option("--time", sa.time, "time index of the window");
    sample->add_flag("--window-stdin", sa.window_stdin,
                     "read the raw conditioning window from stdin");
    sample->add_option("--n", sa.n, "number of samples");
    sample->add_option("--seed", sa.seed, "master seed");
    sample->add_option("--out", sa.out, "output directory");

    std::vector<std::string> cli_args(args.rbegin(), args.rend());
    try {
      app.parse(cli_args);
    } catch (const CLI::ParseError& e) {
      return app.exit(e);
    }

    if (simulate->parsed()) return cmd_simulate(sim);
    if (train->parsed()) return cmd_train(tr);
    if (evaluate->parsed()) return cmd_evaluate(ev);
    if (density->parsed()) return cmd_density(de);
    if (sample->parsed()) return cmd_sample(sa);
    throw ValidationError("no subcommand given");
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace kmn
