#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "kmn/io.hpp"
#include "kmn/rng.hpp"

using namespace kmn;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

FilterModel sample_model() {
  Rng rng(31);
  FilterModel model;
  model.model_name = "roundtrip";
  model.head = "kmn";
  model.experiment = "oscillator";
  model.manifold = Manifold::real_line;
  model.window = 4;
  model.feature_mean = 0.123456789123456789;
  model.feature_sd = 1.9876543210987654;
  model.weight_eps = 1e-12;
  model.net = make_dense_net(
      {4, 6, 6}, {Activation::relu, Activation::rectified_quadratic}, rng);
  model.centers.centers = {-1.0, 0.25, 2.0};
  model.centers.delta = 0.1;
  model.kernels.family = KernelFamily::gaussian;
  model.kernels.params = {0.5, 1.5};
  return model;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("checkpoints round-trip value-exact") {
  const FilterModel model = sample_model();
  const std::string path = temp_path("kmn_io_ckpt.json");
  Json meta;
  meta["seed"] = 99;
  save_checkpoint(model, meta, path);
  const FilterModel back = load_checkpoint(path);
  CHECK(back.model_name == model.model_name);
  CHECK(back.head == model.head);
  CHECK(back.experiment == model.experiment);
  CHECK(back.manifold == model.manifold);
  CHECK(back.window == model.window);
  CHECK(back.feature_mean == model.feature_mean);  // bitwise
  CHECK(back.feature_sd == model.feature_sd);
  CHECK(back.weight_eps == model.weight_eps);
  REQUIRE(back.net.layer_dims == model.net.layer_dims);
  REQUIRE(back.net.activations == model.net.activations);
  for (Index k = 0; k < model.net.layer_count(); ++k) {
    CHECK(back.net.weights[k] == model.net.weights[k]);
    CHECK(back.net.biases[k] == model.net.biases[k]);
  }
  CHECK(back.centers.centers == model.centers.centers);
  CHECK(back.centers.delta == model.centers.delta);
  CHECK(back.kernels.family == model.kernels.family);
  CHECK(back.kernels.params == model.kernels.params);
  std::remove(path.c_str());
}

TEST_CASE("quantized checkpoints keep their bin edges") {
  Rng rng(32);
  FilterModel model;
  model.model_name = "bins";
  model.head = "quantized";
  model.experiment = "oscillator";
  model.window = 2;
  model.feature_sd = 1.0;
  model.net = make_dense_net({2, 3}, {Activation::linear}, rng);
  model.bin_edges = {-6.0, -5.75, -5.5, -5.25};
  const std::string path = temp_path("kmn_io_qckpt.json");
  save_checkpoint(model, Json::object(), path);
  const FilterModel back = load_checkpoint(path);
  CHECK(back.bin_edges == model.bin_edges);
  CHECK(back.centers.centers.empty());
  std::remove(path.c_str());
}

TEST_CASE("trials round-trip through jsonl") {
  OscillatorParams p;
  p.duration = 0.5;
  p.noise_scale = 0.7;
  Rng rng(33);
  std::vector<TrialRecord> trials;
  trials.push_back(simulate_oscillator(p, rng));
  trials[0].trial_id = 5;
  PhaseModelParams pp;
  pp.duration = 0.5;
  trials.push_back(simulate_phase_trial(pp, rng));
  trials[1].trial_id = 6;
  const std::string path = temp_path("kmn_io_trials.jsonl");
  save_trials_jsonl(trials, path);
  const auto back = load_trials_jsonl(path);
  REQUIRE(back.size() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(back[i].trial_id == trials[i].trial_id);
    CHECK(back[i].experiment == trials[i].experiment);
    CHECK(back[i].manifold == trials[i].manifold);
    CHECK(back[i].dt == trials[i].dt);
    CHECK(back[i].latent == trials[i].latent);            // bitwise
    CHECK(back[i].observations == trials[i].observations);
  }
  CHECK(back[0].oscillator_params.noise_scale == p.noise_scale);
  CHECK(back[1].phase_params.angular_rate == pp.angular_rate);
  std::remove(path.c_str());
}

TEST_CASE("io failures carry the path or line") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/nope.json"), IoError);
  CHECK_THROWS_AS(load_trials_jsonl("/nonexistent/nope.jsonl"), IoError);
  const std::string path = temp_path("kmn_io_bad.jsonl");
  write_text_file(path, "{\"trial_id\": 0}\nnot json at all\n");
  // the error names the offending line
  CHECK_THROWS_WITH_AS(load_trials_jsonl(path), doctest::Contains(":1:"),
                       IoError);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint format is versioned and rejects strangers") {
  const std::string path = temp_path("kmn_io_strange.json");
  // unparseable JSON is an I/O problem, a parseable non-checkpoint is a
  // validation problem
  write_text_file(path, "this is not json\n");
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
  write_text_file(path, "{\"format\": \"something-else\"}\n");
  CHECK_THROWS_AS(load_checkpoint(path), ValidationError);
  std::remove(path.c_str());
}

}  // TEST_SUITE
