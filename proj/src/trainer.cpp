#include <algorithm>
#include <cmath>

#include "kmn/filtering.hpp"

namespace kmn {

namespace {

// Mean NLL over a whole pair set, evaluated in chunks so large nets stay
// within memory. Used for the validation curve.
Scalar pairs_nll(const TrainingPairs& pairs, const FilterModel& model) {
  const Index n = pairs.size();
  const Index chunk = 2048;
  Scalar total = 0.0;
  Matrix features;
  Vector targets;
  std::vector<Index> rows;
  for (Index start = 0; start < n; start += chunk) {
    const Index b = std::min(chunk, n - start);
    rows.resize(static_cast<std::size_t>(b));
    for (Index i = 0; i < b; ++i) rows[static_cast<std::size_t>(i)] = start + i;
    pairs.gather(rows, features, targets);
    if (model.head == "kmn") {
      const Matrix weights = forward_batch(model.net, features, nullptr);
      const Matrix lk =
          log_kernel_matrix(model.centers.centers, model.kernels, targets);
      total -= batch_log_density(weights, lk, model.weight_eps).sum();
    } else {
      const Matrix logits = forward_batch(model.net, features, nullptr);
      for (Index c = 0; c < b; ++c)
        total -=
            quantized_log_density(logits.col(c), model.bin_edges, targets[c]);
    }
  }
  return total / static_cast<Scalar>(n);
}

Scalar smallest_bandwidth(const KernelSpec& spec) {
  Scalar smallest = std::numeric_limits<Scalar>::infinity();
  if (spec.family == KernelFamily::gaussian) {
    for (Scalar s : spec.params) smallest = std::min(smallest, s);
  } else if (spec.family == KernelFamily::von_mises) {
    // The scale of a von Mises kernel is 1/sqrt(kappa).
    for (Scalar k : spec.params)
      smallest = std::min(smallest, 1.0 / std::sqrt(k));
  } else {
    for (std::size_t i = 1; i < spec.params.size(); ++i)
      smallest = std::min(smallest, spec.params[i] - spec.params[i - 1]);
  }
  return smallest;
}

}  // namespace

TrainResult train_filter(const TrainConfig& config,
                         const std::vector<TrialRecord>& train_trials,
                         const std::vector<TrialRecord>& valid_trials) {
  if (config.head != "kmn" && config.head != "quantized")
    throw ValidationError("head must be kmn or quantized");
  if (config.batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (config.iterations < 1) throw ValidationError("iterations must be >= 1");
  if (config.eval_interval < 1)
    throw ValidationError("eval_interval must be >= 1");
  if (train_trials.empty() || valid_trials.empty())
    throw ValidationError("need both training and validation trials");

  const std::string experiment = train_trials.front().experiment;
  const Manifold manifold = train_trials.front().manifold;
  for (const TrialRecord& t : train_trials)
    if (t.experiment != experiment)
      throw ValidationError("mixed experiments in the training set");

  FilterModel model;
  model.head = config.head;
  model.experiment = experiment;
  model.manifold = manifold;
  model.window = config.window;
  model.weight_eps = config.head == "kmn" ? config.weight_eps : 0.0;
  model.model_name =
      config.model_name.empty() ? config.head : config.model_name;

  TrainingPairs train_pairs = make_training_pairs(train_trials, config.window);
  TrainingPairs valid_pairs =
      make_training_pairs(valid_trials, config.window, train_pairs.feature_mean,
                          train_pairs.feature_sd);
  model.feature_mean = train_pairs.feature_mean;
  model.feature_sd = train_pairs.feature_sd;

  Index output_dim = 0;
  if (config.head == "kmn") {
    model.kernels.family = config.family;
    model.kernels.manifold =
        config.family == KernelFamily::von_mises ? Manifold::circle
                                                 : Manifold::real_line;
    model.kernels.params =
        !config.kernel_params.empty() ? config.kernel_params
        : config.family == KernelFamily::gaussian ? default_gaussian_grid()
        : config.family == KernelFamily::von_mises ? default_von_mises_grid()
        : std::vector<Scalar>{};
    validate_kernel_spec(model.kernels);
    if (model.kernels.manifold != manifold)
      throw ValidationError("kernel family does not match the dataset "
                            "manifold (" + to_string(model.kernels.family) +
                            " vs " + to_string(manifold) + " data)");
    const Scalar delta = config.delta >= 0.0
                             ? config.delta
                             : 0.1 * smallest_bandwidth(model.kernels);
    model.centers =
        select_centers(train_pairs.all_targets(), delta, manifold);
    output_dim = model.centers.size() * model.kernels.kernel_count();
  } else {
    model.bin_edges = config.bin_edges;
    if (model.bin_edges.empty()) {
      if (experiment == "phase") {
        const Vector edges = linspace(-kPi, kPi, 49);
        model.bin_edges.assign(edges.data(), edges.data() + edges.size());
      } else {
        for (int i = 0; i <= 48; ++i)
          model.bin_edges.push_back(-6.0 + 0.25 * static_cast<Scalar>(i));
      }
    }
    output_dim = static_cast<Index>(model.bin_edges.size()) - 1;
  }

  std::vector<int> dims;
  dims.push_back(config.window);
  for (int h : config.hidden) dims.push_back(h);
  dims.push_back(static_cast<int>(output_dim));
  std::vector<Activation> acts(config.hidden.size(),
                               config.hidden_activation);
  // The quantized head consumes raw logits; the mixture head needs
  // non-negative weights.
  acts.push_back(config.head == "kmn" ? config.outer_activation
                                      : Activation::linear);
  Rng init_rng = Rng::derive(config.seed, "net.init");
  model.net = make_dense_net(dims, acts, init_rng);
  validate_model(model);

  OptimizerState opt = make_adam(config.learning_rate);
  Rng batch_rng = Rng::derive(config.seed, "train.batch");

  TrainResult result;
  result.skipped_trials = train_pairs.skipped_trials;

  DenseNet last_good = model.net;
  std::vector<Index> rows(static_cast<std::size_t>(config.batch_size));
  Matrix features;
  Vector targets;
  Scalar interval_loss = 0.0;
  long interval_count = 0;

  for (long it = 1; it <= config.iterations; ++it) {
    for (auto& r : rows)
      r = static_cast<Index>(
          batch_rng.uniform_index(static_cast<std::uint64_t>(train_pairs.size())));
    train_pairs.gather(rows, features, targets);

    bool bad_step = false;
    std::string reason;
    try {
      NllResult step =
          config.head == "kmn"
              ? kmn_nll(targets, features, model.net, model.centers,
                        model.kernels, model.weight_eps)
              : quantized_nll(targets, features, model.net, model.bin_edges);
      if (!std::isfinite(step.loss)) {
        bad_step = true;
        reason = "loss became non-finite at iteration " + std::to_string(it);
      } else {
        interval_loss += step.loss;
        ++interval_count;
        optimizer_step(opt, model.net, step.grads);
      }
    } catch (const NumericError& e) {
      bad_step = true;
      reason = e.what();
    }
    if (bad_step) {
      model.net = last_good;
      result.diverged = true;
      result.abort_reason = reason;
      break;
    }

    if (it % config.eval_interval == 0 || it == config.iterations) {
      const Scalar train_loss =
          interval_count > 0 ? interval_loss / static_cast<Scalar>(interval_count)
                             : 0.0;
      interval_loss = 0.0;
      interval_count = 0;
      const Scalar valid_loss = pairs_nll(valid_pairs, model);
      result.curve.push_back({it, "train", train_loss});
      result.curve.push_back({it, "valid", valid_loss});
      last_good = model.net;
    }
  }

  result.model = std::move(model);
  return result;
}

}  // namespace kmn
