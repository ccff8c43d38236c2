#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "kmn/cli.hpp"
#include "kmn/io.hpp"

using namespace kmn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("kmn_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& sub = "") const {
    return (sub.empty() ? path : path / sub).string();
  }
};

int run(std::vector<std::string> args) { return run_cli(args); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("simulate then train then evaluate round trip") {
  TempDir dir("roundtrip");
  CHECK(run({"simulate", "--experiment", "oscillator", "--n-train", "6",
             "--n-valid", "3", "--duration", "1.5", "--seed", "5", "--out",
             dir.str("data")}) == 0);
  CHECK(fs::exists(dir.str("data") + "/train.jsonl"));
  CHECK(fs::exists(dir.str("data") + "/valid.jsonl"));
  CHECK(fs::exists(dir.str("data") + "/manifest_simulate.json"));

  CHECK(run({"train", "--data", dir.str("data"), "--head", "kmn", "--window",
             "8", "--hidden", "8", "--iterations", "30", "--eval-interval",
             "10", "--seed", "2", "--name", "m", "--out",
             dir.str("model")}) == 0);
  CHECK(fs::exists(dir.str("model") + "/checkpoint.json"));
  const std::string curve = read_text_file(dir.str("model") + "/curve.csv");
  CHECK(curve.rfind("iteration,split,loss\n", 0) == 0);

  CHECK(run({"evaluate", "--models", dir.str("model") + "/checkpoint.json",
             "--ekf", "--data", dir.str("data"), "--out",
             dir.str("eval")}) == 0);
  const std::string comparison =
      read_text_file(dir.str("eval") + "/comparison.csv");
  CHECK(comparison.find("winrate,m>ekf,") != std::string::npos);
  CHECK(comparison.find("mean,ekf,") != std::string::npos);

  CHECK(run({"density", "--checkpoint", dir.str("model") + "/checkpoint.json",
             "--data", dir.str("data"), "--trial", "6", "--times", "10,20",
             "--grid-n", "21", "--out", dir.str("den")}) == 0);
  const std::string slices = read_text_file(dir.str("den") + "/slices.csv");
  CHECK(slices.rfind("t,x,density\n", 0) == 0);

  CHECK(run({"sample", "--checkpoint", dir.str("model") + "/checkpoint.json",
             "--data", dir.str("data"), "--trial", "6", "--time", "10", "--n",
             "0", "--seed", "1", "--out", dir.str("sam")}) == 0);
  CHECK(read_text_file(dir.str("sam") + "/samples.csv") == "sample\n");
}

TEST_CASE("exit codes distinguish failure classes") {
  TempDir dir("codes");
  // missing dataset file: I/O
  CHECK(run({"train", "--data", dir.str("absent"), "--out",
             dir.str("out")}) == 3);
  // bad flag value: validation
  CHECK(run({"simulate", "--experiment", "nonsense", "--out",
             dir.str("out2")}) == 2);
  // missing checkpoint: I/O
  CHECK(run({"sample", "--checkpoint", dir.str("absent.json"), "--out",
             dir.str("out3")}) == 3);
  // unknown option: CLI11's own nonzero exit
  CHECK(run({"simulate", "--frobnicate"}) != 0);
  // no subcommand
  CHECK(run({}) != 0);
}

TEST_CASE("gaussian kernels are rejected on circle data") {
  TempDir dir("manifold");
  REQUIRE(run({"simulate", "--experiment", "phase", "--n-train", "4",
               "--n-valid", "2", "--duration", "0.6", "--seed", "3", "--out",
               dir.str("data")}) == 0);
  CHECK(run({"train", "--data", dir.str("data"), "--kernel", "gaussian",
             "--window", "8", "--hidden", "8", "--iterations", "5",
             "--out", dir.str("model")}) == 2);
  // auto picks von Mises and trains fine
  CHECK(run({"train", "--data", dir.str("data"), "--window", "8", "--hidden",
             "8", "--iterations", "5", "--eval-interval", "5", "--delta",
             "0.1", "--out", dir.str("model2")}) == 0);
  const FilterModel model =
      load_checkpoint(dir.str("model2") + "/checkpoint.json");
  CHECK(model.kernels.family == KernelFamily::von_mises);
  CHECK(model.manifold == Manifold::circle);
}

TEST_CASE("seeded reruns are byte-identical") {
  TempDir dir("determinism");
  auto simulate = [&](const std::string& out) {
    return run({"simulate", "--experiment", "phase", "--n-train", "5",
                "--n-valid", "2", "--duration", "1.0", "--seed", "11",
                "--out", dir.str(out)});
  };
  REQUIRE(simulate("a") == 0);
  REQUIRE(simulate("b") == 0);
  CHECK(read_text_file(dir.str("a") + "/train.jsonl") ==
        read_text_file(dir.str("b") + "/train.jsonl"));
  CHECK(read_text_file(dir.str("a") + "/valid.jsonl") ==
        read_text_file(dir.str("b") + "/valid.jsonl"));

  auto train = [&](const std::string& out) {
    return run({"train", "--data", dir.str("a"), "--window", "8", "--hidden",
                "8", "--iterations", "20", "--eval-interval", "10", "--delta",
                "0.1", "--seed", "7", "--out", dir.str(out)});
  };
  REQUIRE(train("ma") == 0);
  REQUIRE(train("mb") == 0);
  CHECK(read_text_file(dir.str("ma") + "/curve.csv") ==
        read_text_file(dir.str("mb") + "/curve.csv"));
  CHECK(read_text_file(dir.str("ma") + "/checkpoint.json") ==
        read_text_file(dir.str("mb") + "/checkpoint.json"));
}

TEST_CASE("a manifest reruns its command through --config") {
  TempDir dir("config");
  REQUIRE(run({"simulate", "--experiment", "oscillator", "--n-train", "4",
               "--n-valid", "2", "--duration", "1.0", "--seed", "13", "--out",
               dir.str("a")}) == 0);
  // replay the manifest, overriding only the output directory
  REQUIRE(run({"simulate", "--config",
               dir.str("a") + "/manifest_simulate.json", "--out",
               dir.str("b")}) == 0);
  CHECK(read_text_file(dir.str("a") + "/train.jsonl") ==
        read_text_file(dir.str("b") + "/train.jsonl"));
}

TEST_CASE("sampling with a fixed seed is reproducible") {
  TempDir dir("samplerepro");
  REQUIRE(run({"simulate", "--experiment", "oscillator", "--n-train", "4",
               "--n-valid", "2", "--duration", "1.0", "--seed", "17", "--out",
               dir.str("data")}) == 0);
  REQUIRE(run({"train", "--data", dir.str("data"), "--window", "8",
               "--hidden", "8", "--iterations", "20", "--eval-interval", "10",
               "--seed", "19", "--out", dir.str("model")}) == 0);
  auto sample = [&](const std::string& out) {
    return run({"sample", "--checkpoint",
                dir.str("model") + "/checkpoint.json", "--data",
                dir.str("data"), "--trial", "4", "--time", "9", "--n", "50",
                "--seed", "23", "--out", dir.str(out)});
  };
  REQUIRE(sample("sa") == 0);
  REQUIRE(sample("sb") == 0);
  CHECK(read_text_file(dir.str("sa") + "/samples.csv") ==
        read_text_file(dir.str("sb") + "/samples.csv"));
}

}  // TEST_SUITE
