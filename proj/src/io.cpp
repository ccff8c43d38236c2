#include "kmn/io.hpp"

#include <fstream>
#include <sstream>

namespace kmn {

namespace {

Json vector_to_json(const Vector& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const Json& arr) {
  Vector v(static_cast<Index>(arr.size()));
  Index i = 0;
  for (const auto& x : arr) v[i++] = x.get<Scalar>();
  return v;
}

Json scalars_to_json(const std::vector<Scalar>& v) {
  Json arr = Json::array();
  for (Scalar x : v) arr.push_back(x);
  return arr;
}

std::vector<Scalar> scalars_from_json(const Json& arr) {
  std::vector<Scalar> v;
  v.reserve(arr.size());
  for (const auto& x : arr) v.push_back(x.get<Scalar>());
  return v;
}

Json matrix_to_json_row_major(const Matrix& m) {
  Json arr = Json::array();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  return arr;
}

Matrix matrix_from_json_row_major(const Json& arr, Index rows, Index cols) {
  if (static_cast<Index>(arr.size()) != rows * cols)
    throw ValidationError("weight array size does not match layer dims");
  Matrix m(rows, cols);
  Index i = 0;
  for (const auto& x : arr) {
    m(i / cols, i % cols) = x.get<Scalar>();
    ++i;
  }
  return m;
}

Json oscillator_params_to_json(const OscillatorParams& p) {
  Json j;
  j["omega0"] = p.omega0;
  j["beta"] = p.beta;
  j["k2"] = p.k2;
  j["k3"] = p.k3;
  j["noise_scale"] = p.noise_scale;
  j["dt"] = p.dt;
  j["duration"] = p.duration;
  j["obs_noise_sd"] = p.obs_noise_sd;
  j["burn_in"] = p.burn_in;
  return j;
}

OscillatorParams oscillator_params_from_json(const Json& j) {
  OscillatorParams p;
  p.omega0 = j.at("omega0").get<Scalar>();
  p.beta = j.at("beta").get<Scalar>();
  p.k2 = j.at("k2").get<Scalar>();
  p.k3 = j.at("k3").get<Scalar>();
  p.noise_scale = j.at("noise_scale").get<Scalar>();
  p.dt = j.at("dt").get<Scalar>();
  p.duration = j.at("duration").get<Scalar>();
  p.obs_noise_sd = j.at("obs_noise_sd").get<Scalar>();
  p.burn_in = j.at("burn_in").get<Scalar>();
  return p;
}

Json phase_params_to_json(const PhaseModelParams& p) {
  Json j;
  j["angular_rate"] = p.angular_rate;
  j["obs_noise_sd"] = p.obs_noise_sd;
  j["taylor_df"] = p.taylor_df;
  j["dt"] = p.dt;
  j["duration"] = p.duration;
  return j;
}

PhaseModelParams phase_params_from_json(const Json& j) {
  PhaseModelParams p;
  p.angular_rate = j.at("angular_rate").get<Scalar>();
  p.obs_noise_sd = j.at("obs_noise_sd").get<Scalar>();
  p.taylor_df = j.at("taylor_df").get<Scalar>();
  p.dt = j.at("dt").get<Scalar>();
  p.duration = j.at("duration").get<Scalar>();
  return p;
}

}  // namespace

Json model_to_json(const FilterModel& model, const Json& train_metadata) {
  validate_model(model);
  Json j;
  j["format"] = "kmn-checkpoint";
  j["format_version"] = 1;
  j["model_name"] = model.model_name;
  j["head"] = model.head;
  j["experiment"] = model.experiment;
  j["manifold"] = to_string(model.manifold);
  j["window"] = model.window;
  j["feature_mean"] = model.feature_mean;
  j["feature_sd"] = model.feature_sd;
  j["weight_eps"] = model.weight_eps;

  Json net;
  net["layer_dims"] = model.net.layer_dims;
  Json acts = Json::array();
  for (Activation a : model.net.activations) acts.push_back(to_string(a));
  net["activations"] = acts;
  Json weights = Json::array();
  for (const Matrix& w : model.net.weights)
    weights.push_back(matrix_to_json_row_major(w));
  net["weights"] = weights;
  Json biases = Json::array();
  for (const Vector& b : model.net.biases) biases.push_back(vector_to_json(b));
  net["biases"] = biases;
  j["net"] = net;

  if (model.head == "kmn") {
    Json centers;
    centers["delta"] = model.centers.delta;
    centers["manifold"] = to_string(model.centers.manifold);
    centers["points"] = scalars_to_json(model.centers.centers);
    j["centers"] = centers;
    Json kernels;
    kernels["family"] = to_string(model.kernels.family);
    kernels["manifold"] = to_string(model.kernels.manifold);
    kernels["params"] = scalars_to_json(model.kernels.params);
    j["kernels"] = kernels;
  } else {
    j["bin_edges"] = scalars_to_json(model.bin_edges);
  }
  if (!train_metadata.is_null()) j["train"] = train_metadata;
  return j;
}

FilterModel model_from_json(const Json& j) {
  if (j.value("format", "") != "kmn-checkpoint")
    throw ValidationError("not a kmn checkpoint file");
  if (j.at("format_version").get<int>() != 1)
    throw ValidationError("unsupported checkpoint version");

  FilterModel model;
  model.model_name = j.at("model_name").get<std::string>();
  model.head = j.at("head").get<std::string>();
  model.experiment = j.at("experiment").get<std::string>();
  model.manifold = manifold_from_string(j.at("manifold").get<std::string>());
  model.window = j.at("window").get<int>();
  model.feature_mean = j.at("feature_mean").get<Scalar>();
  model.feature_sd = j.at("feature_sd").get<Scalar>();
  model.weight_eps = j.at("weight_eps").get<Scalar>();

  const Json& net = j.at("net");
  model.net.layer_dims = net.at("layer_dims").get<std::vector<int>>();
  for (const auto& a : net.at("activations"))
    model.net.activations.push_back(
        activation_from_string(a.get<std::string>()));
  const Json& weights = net.at("weights");
  const Json& biases = net.at("biases");
  if (weights.size() + 1 != model.net.layer_dims.size() ||
      biases.size() != weights.size())
    throw ValidationError("checkpoint layer counts are inconsistent");
  for (std::size_t k = 0; k < weights.size(); ++k) {
    model.net.weights.push_back(matrix_from_json_row_major(
        weights[k], model.net.layer_dims[k + 1], model.net.layer_dims[k]));
    model.net.biases.push_back(vector_from_json(biases[k]));
  }

  if (model.head == "kmn") {
    const Json& centers = j.at("centers");
    model.centers.delta = centers.at("delta").get<Scalar>();
    model.centers.manifold =
        manifold_from_string(centers.at("manifold").get<std::string>());
    model.centers.centers = scalars_from_json(centers.at("points"));
    const Json& kernels = j.at("kernels");
    model.kernels.family =
        kernel_family_from_string(kernels.at("family").get<std::string>());
    model.kernels.manifold =
        manifold_from_string(kernels.at("manifold").get<std::string>());
    model.kernels.params = scalars_from_json(kernels.at("params"));
  } else {
    model.bin_edges = scalars_from_json(j.at("bin_edges"));
  }
  validate_model(model);
  return model;
}

void save_checkpoint(const FilterModel& model, const Json& train_metadata,
                     const std::string& path) {
  save_json(model_to_json(model, train_metadata), path);
}

FilterModel load_checkpoint(const std::string& path) {
  try {
    return model_from_json(load_json(path));
  } catch (const Json::exception& e) {
    throw IoError("malformed checkpoint " + path + ": " + e.what());
  }
}

Json trial_to_json(const TrialRecord& trial) {
  Json j;
  j["trial_id"] = trial.trial_id;
  j["experiment"] = trial.experiment;
  j["dt"] = trial.dt;
  j["params"] = trial.experiment == "phase"
                    ? phase_params_to_json(trial.phase_params)
                    : oscillator_params_to_json(trial.oscillator_params);
  j["latent"] = vector_to_json(trial.latent);
  j["observations"] = vector_to_json(trial.observations);
  return j;
}

TrialRecord trial_from_json(const Json& j) {
  TrialRecord trial;
  trial.trial_id = j.at("trial_id").get<long>();
  trial.experiment = j.at("experiment").get<std::string>();
  trial.dt = j.at("dt").get<Scalar>();
  if (trial.experiment == "phase") {
    trial.manifold = Manifold::circle;
    trial.phase_params = phase_params_from_json(j.at("params"));
  } else if (trial.experiment == "oscillator") {
    trial.manifold = Manifold::real_line;
    trial.oscillator_params = oscillator_params_from_json(j.at("params"));
  } else {
    throw ValidationError("unknown experiment tag: " + trial.experiment);
  }
  trial.latent = vector_from_json(j.at("latent"));
  trial.observations = vector_from_json(j.at("observations"));
  validate_trial(trial);
  return trial;
}

void save_trials_jsonl(const std::vector<TrialRecord>& trials,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const TrialRecord& trial : trials) out << trial_to_json(trial) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

std::vector<TrialRecord> load_trials_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path);
  std::vector<TrialRecord> trials;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      trials.push_back(trial_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw IoError("malformed trial at " + path + ":" +
                    std::to_string(line_no) + ": " + e.what());
    }
  }
  if (trials.empty()) throw IoError("dataset " + path + " holds no trials");
  return trials;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_json(const Json& j, const std::string& path) {
  write_text_file(path, j.dump(2) + "\n");
}

Json load_json(const std::string& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw IoError("malformed JSON in " + path + ": " + e.what());
  }
}

}  // namespace kmn
