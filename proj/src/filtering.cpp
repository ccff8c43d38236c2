#include "kmn/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Eigenvalues>

namespace kmn {

namespace {
constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();
}

void validate_trial(const TrialRecord& trial) {
  if (trial.latent.size() != trial.observations.size())
    throw ValidationError("latent and observation series lengths differ");
  if (trial.latent.size() == 0) throw ValidationError("empty trial");
  if (!trial.latent.allFinite() || !trial.observations.allFinite())
    throw ValidationError("non-finite value in trial " +
                          std::to_string(trial.trial_id));
  if (!(trial.dt > 0.0)) throw ValidationError("trial dt must be positive");
  if (trial.manifold == Manifold::circle)
    for (Index t = 0; t < trial.latent.size(); ++t)
      if (!(trial.latent[t] > -kPi && trial.latent[t] <= kPi))
        throw ValidationError("phase latent outside (-pi, pi]");
}

TrialRecord simulate_oscillator(const OscillatorParams& params, Rng& rng,
                                Scalar x0, Scalar v0) {
  if (!(params.dt > 0.0)) throw ValidationError("dt must be positive");
  if (!(params.duration > params.dt))
    throw ValidationError("duration must exceed dt");
  if (!(params.omega0 > 0.0)) throw ValidationError("omega0 must be positive");
  if (params.burn_in < 0.0) throw ValidationError("burn_in must be >= 0");

  const long burn_steps = std::lround(params.burn_in / params.dt);
  const long record_steps = std::lround(params.duration / params.dt);
  const Scalar sqrt_dt = std::sqrt(params.dt);

  TrialRecord trial;
  trial.dt = params.dt;
  trial.manifold = Manifold::real_line;
  trial.experiment = "oscillator";
  trial.oscillator_params = params;
  trial.latent.resize(record_steps);
  trial.observations.resize(record_steps);

  Scalar x = x0;
  Scalar v = v0;
  for (long step = 0; step < burn_steps + record_steps; ++step) {
    // Sequential update: the velocity kick sees the already-advanced
    // position. At dt = 0.01 this is indistinguishable from the
    // simultaneous form but keeps the energy drift of long burn-ins small.
    x += v * params.dt;
    const Scalar accel = -params.omega0 * params.omega0 * x - params.beta * v +
                         params.k2 * x * x + params.k3 * x * x * x;
    v += accel * params.dt + params.noise_scale * sqrt_dt * rng.normal();
    if (!std::isfinite(x) || !std::isfinite(v))
      throw NumericError("oscillator simulation diverged at step " +
                         std::to_string(step));
    if (step >= burn_steps) trial.latent[step - burn_steps] = x;
  }
  for (long k = 0; k < record_steps; ++k)
    trial.observations[k] =
        trial.latent[k] + params.obs_noise_sd * rng.normal();
  return trial;
}

TrialRecord simulate_phase_trial(const PhaseModelParams& params, Rng& rng) {
  if (!(params.dt > 0.0)) throw ValidationError("dt must be positive");
  if (!(params.duration > params.dt))
    throw ValidationError("duration must exceed dt");
  if (!(params.obs_noise_sd > 0.0))
    throw ValidationError("obs_noise_sd must be positive");
  if (!(params.taylor_df > 0.0))
    throw ValidationError("taylor_df must be positive");

  const long steps = std::lround(params.duration / params.dt);
  const Scalar theta0 = rng.uniform_angle();
  // Waveform coefficients: odd powers positive (truncated t), even powers
  // unrestricted. Draw order is fixed for reproducibility.
  Scalar coeff[5];
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  for (int k = 0; k < 5; ++k)
    coeff[k] = (k % 2 == 0)
                   ? sample_truncated_t(params.taylor_df, 0.0, inf, rng)
                   : rng.student_t(params.taylor_df);

  TrialRecord trial;
  trial.dt = params.dt;
  trial.manifold = Manifold::circle;
  trial.experiment = "phase";
  trial.phase_params = params;
  trial.latent.resize(steps);
  trial.observations.resize(steps);
  for (long k = 0; k < steps; ++k) {
    const Scalar t = params.dt * static_cast<Scalar>(k + 1);
    const Scalar theta = wrap_angle(theta0 + params.angular_rate * t);
    trial.latent[k] = theta;
    const Scalar c = std::cos(theta);
    Scalar y = 0.0;
    Scalar power = 1.0;
    for (int m = 0; m < 5; ++m) {
      power *= c;
      y += coeff[m] * power;
    }
    trial.observations[k] = y + params.obs_noise_sd * rng.normal();
  }
  return trial;
}

Scalar sample_truncated_t(Scalar df, Scalar lo, Scalar hi, Rng& rng) {
  if (!(df > 0.0)) throw ValidationError("df must be positive");
  if (!(lo < hi)) throw ValidationError("truncation needs lo < hi");
  // Plain rejection. For the (0, inf) truncation used by the phase model the
  // acceptance rate is one half, so this terminates quickly.
  for (long attempt = 0; attempt < 100000; ++attempt) {
    const Scalar draw = rng.student_t(df);
    if (draw > lo && draw < hi) return draw;
  }
  throw NumericError("truncated t rejection failed to accept; interval (" +
                     std::to_string(lo) + ", " + std::to_string(hi) +
                     ") is too narrow");
}

namespace {

TrainingPairs build_pairs(const std::vector<TrialRecord>& trials, int window,
                          bool compute_stats, Scalar feature_mean,
                          Scalar feature_sd) {
  if (window < 1) throw ValidationError("window must be >= 1");
  if (trials.empty()) throw ValidationError("no trials given");
  TrainingPairs pairs;
  pairs.trials = &trials;
  pairs.window = window;

  Scalar sum = 0.0, sum_sq = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const Index n = trials[i].latent.size();
    if (n <= window) {
      ++pairs.skipped_trials;
      continue;
    }
    for (Index t = window; t < n; ++t)
      pairs.index.emplace_back(static_cast<std::int32_t>(i),
                               static_cast<std::int32_t>(t));
    if (compute_stats) {
      sum += trials[i].observations.sum();
      sum_sq += trials[i].observations.squaredNorm();
      count += n;
    }
  }
  if (pairs.index.empty())
    throw ValidationError("every trial is shorter than the window");

  if (compute_stats) {
    const Scalar mean = sum / static_cast<Scalar>(count);
    const Scalar var = sum_sq / static_cast<Scalar>(count) - mean * mean;
    pairs.feature_mean = mean;
    pairs.feature_sd = var > 1e-24 ? std::sqrt(var) : 1.0;
  } else {
    pairs.feature_mean = feature_mean;
    pairs.feature_sd = feature_sd;
  }
  return pairs;
}

}  // namespace

TrainingPairs make_training_pairs(const std::vector<TrialRecord>& trials,
                                  int window) {
  return build_pairs(trials, window, true, 0.0, 1.0);
}

TrainingPairs make_training_pairs(const std::vector<TrialRecord>& trials,
                                  int window, Scalar feature_mean,
                                  Scalar feature_sd) {
  if (!(feature_sd > 0.0)) throw ValidationError("feature_sd must be positive");
  return build_pairs(trials, window, false, feature_mean, feature_sd);
}

Scalar TrainingPairs::target(Index i) const {
  const auto& [trial, t] = index[static_cast<std::size_t>(i)];
  return (*trials)[static_cast<std::size_t>(trial)].latent[t];
}

std::vector<Scalar> TrainingPairs::all_targets() const {
  std::vector<Scalar> out;
  out.reserve(index.size());
  for (Index i = 0; i < size(); ++i) out.push_back(target(i));
  return out;
}

void TrainingPairs::gather(const std::vector<Index>& rows, Matrix& features,
                           Vector& targets) const {
  features.resize(window, static_cast<Index>(rows.size()));
  targets.resize(static_cast<Index>(rows.size()));
  for (std::size_t col = 0; col < rows.size(); ++col) {
    const auto& [trial_idx, t] = index[static_cast<std::size_t>(rows[col])];
    const TrialRecord& trial = (*trials)[static_cast<std::size_t>(trial_idx)];
    features.col(static_cast<Index>(col)) =
        (trial.observations.segment(t - window, window).array() -
         feature_mean) /
        feature_sd;
    targets[static_cast<Index>(col)] = trial.latent[t];
  }
}

GaussianBelief stationary_belief(const OscillatorParams& params) {
  GaussianBelief belief;
  const Scalar var_v =
      params.noise_scale * params.noise_scale / (2.0 * params.beta);
  const Scalar var_x = var_v / (params.omega0 * params.omega0);
  belief.mean.setZero();
  belief.cov << std::max(var_x, 1e-12), 0.0, 0.0, std::max(var_v, 1e-12);
  return belief;
}

namespace {

// Symmetrize and clamp tiny negative eigenvalues; anything more negative
// than the tolerance means the filter itself broke down.
void repair_covariance(Eigen::Matrix2d& cov) {
  cov = 0.5 * (cov + cov.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const Eigen::Vector2d lambda = eig.eigenvalues();
  if (lambda.minCoeff() < -1e-12)
    throw NumericError("EKF covariance lost positive semi-definiteness "
                       "(eigenvalue " + std::to_string(lambda.minCoeff()) + ")");
  if (lambda.minCoeff() < 0.0) {
    const Eigen::Vector2d clamped = lambda.cwiseMax(0.0);
    cov = eig.eigenvectors() * clamped.asDiagonal() *
          eig.eigenvectors().transpose();
    cov = 0.5 * (cov + cov.transpose()).eval();
  }
}

}  // namespace

std::vector<GaussianBelief> ekf_filter(const Eigen::Ref<const Vector>& observations,
                                       const OscillatorParams& params,
                                       const GaussianBelief& init) {
  if (!(params.obs_noise_sd > 0.0))
    throw ValidationError("EKF needs obs_noise_sd > 0");
  const Scalar dt = params.dt;
  const Scalar r = params.obs_noise_sd * params.obs_noise_sd;
  Eigen::Matrix2d q = Eigen::Matrix2d::Zero();
  q(1, 1) = params.noise_scale * params.noise_scale * dt;

  std::vector<GaussianBelief> beliefs;
  beliefs.reserve(static_cast<std::size_t>(observations.size()));
  Eigen::Vector2d mean = init.mean;
  Eigen::Matrix2d cov = init.cov;
  for (Index k = 0; k < observations.size(); ++k) {
    // Predict: one explicit Euler step of the drift, linearized at the
    // current mean.
    const Scalar x = mean[0];
    const Scalar v = mean[1];
    const Scalar accel = -params.omega0 * params.omega0 * x - params.beta * v +
                         params.k2 * x * x + params.k3 * x * x * x;
    Eigen::Matrix2d f;
    f << 1.0, dt,
        dt * (-params.omega0 * params.omega0 + 2.0 * params.k2 * x +
              3.0 * params.k3 * x * x),
        1.0 - params.beta * dt;
    mean[0] = x + v * dt;
    mean[1] = v + accel * dt;
    cov = (f * cov * f.transpose() + q).eval();

    // Update with y_k; H = [1, 0].
    const Scalar s = cov(0, 0) + r;
    const Eigen::Vector2d gain = cov.col(0) / s;
    mean += gain * (observations[k] - mean[0]);
    Eigen::Matrix2d ikh = Eigen::Matrix2d::Identity();
    ikh(0, 0) -= gain[0];
    ikh(1, 0) -= gain[1];
    cov = (ikh * cov).eval();
    repair_covariance(cov);

    if (!mean.allFinite() || !cov.allFinite())
      throw NumericError("EKF diverged at step " + std::to_string(k));
    beliefs.push_back(GaussianBelief{mean, cov});
  }
  return beliefs;
}

Vector ekf_nll(const std::vector<GaussianBelief>& beliefs,
               const Eigen::Ref<const Vector>& latent) {
  if (static_cast<Index>(beliefs.size()) != latent.size())
    throw ValidationError("belief and latent series lengths differ");
  Vector nll(latent.size());
  for (Index k = 0; k < latent.size(); ++k) {
    const Scalar var = beliefs[static_cast<std::size_t>(k)].cov(0, 0);
    if (!(var > 0.0))
      throw NumericError("EKF marginal variance vanished at step " +
                         std::to_string(k));
    const Scalar d = latent[k] - beliefs[static_cast<std::size_t>(k)].mean[0];
    nll[k] = 0.5 * std::log(kTwoPi * var) + 0.5 * d * d / var;
  }
  return nll;
}

void validate_model(const FilterModel& model) {
  if (model.head != "kmn" && model.head != "quantized")
    throw ValidationError("unknown model head: " + model.head);
  if (model.window < 1) throw ValidationError("model window must be >= 1");
  if (!(model.feature_sd > 0.0))
    throw ValidationError("model feature_sd must be positive");
  validate_net(model.net);
  if (model.net.input_dim() != model.window)
    throw ValidationError("net input dim does not match the window");
  if (model.head == "kmn") {
    validate_center_set(model.centers);
    validate_kernel_spec(model.kernels);
    if (model.kernels.manifold != model.manifold ||
        model.centers.manifold != model.manifold)
      throw ValidationError("model manifold disagrees with centers/kernels");
    if (model.net.output_dim() !=
        model.centers.size() * model.kernels.kernel_count())
      throw ValidationError("net output dim must equal centers x kernels");
  } else {
    if (model.bin_edges.size() < 2)
      throw ValidationError("quantized model needs bin edges");
    for (std::size_t i = 1; i < model.bin_edges.size(); ++i)
      if (!(model.bin_edges[i - 1] < model.bin_edges[i]))
        throw ValidationError("bin edges must be strictly increasing");
    if (model.net.output_dim() !=
        static_cast<Index>(model.bin_edges.size()) - 1)
      throw ValidationError("net output dim must equal bin count");
  }
}

Vector model_window(const FilterModel& model, const TrialRecord& trial,
                    int t) {
  if (t < model.window || t >= trial.observations.size())
    throw ValidationError("time index " + std::to_string(t) +
                          " outside the valid range [window, N)");
  return (trial.observations.segment(t - model.window, model.window).array() -
          model.feature_mean) /
         model.feature_sd;
}

namespace {

Matrix kmn_weights_for_window(const FilterModel& model,
                              const Eigen::Ref<const Vector>& window) {
  const Vector out = forward(model.net, window);
  const Index j_count = model.kernels.kernel_count();
  Matrix weights(model.centers.size(), j_count);
  for (Index p = 0; p < weights.rows(); ++p)
    for (Index j = 0; j < j_count; ++j) weights(p, j) = out[p * j_count + j];
  return weights;
}

}  // namespace

MixtureDensity model_mixture(const FilterModel& model,
                             const Eigen::Ref<const Vector>& window) {
  if (model.head != "kmn")
    throw ValidationError("model_mixture needs the kmn head");
  MixtureDensity md;
  md.center_set = model.centers;
  md.kernel_spec = model.kernels;
  md.weights = kmn_weights_for_window(model, window);
  md.weights.array() += model.weight_eps;
  return md;
}

Vector model_log_density_slice(const FilterModel& model,
                               const Eigen::Ref<const Vector>& window,
                               const Eigen::Ref<const Vector>& xs) {
  if (model.head == "kmn")
    return kmn_log_density_grid(model_mixture(model, window), xs);
  const Vector logits = forward(model.net, window);
  Vector out(xs.size());
  for (Index i = 0; i < xs.size(); ++i)
    out[i] = quantized_log_density(logits, model.bin_edges, xs[i]);
  return out;
}

Vector model_sample(const FilterModel& model,
                    const Eigen::Ref<const Vector>& window, Index n,
                    Rng& rng) {
  Vector samples(n);
  if (model.head == "kmn") {
    const MixtureDensity md = model_mixture(model, window);
    DensitySampler sampler(md);
    for (Index i = 0; i < n; ++i) samples[i] = sampler.draw(rng);
    return samples;
  }
  // Quantized head: categorical over bins, then uniform inside the bin.
  const Vector logits = forward(model.net, window);
  const Scalar lse = log_sum_exp(logits);
  Vector cumulative(logits.size());
  Scalar acc = 0.0;
  for (Index j = 0; j < logits.size(); ++j) {
    acc += std::exp(logits[j] - lse);
    cumulative[j] = acc;
  }
  for (Index i = 0; i < n; ++i) {
    const Scalar u = rng.uniform() * acc;
    Index bin = 0;
    while (bin + 1 < logits.size() && cumulative[bin] <= u) ++bin;
    const Scalar lo = model.bin_edges[static_cast<std::size_t>(bin)];
    const Scalar hi = model.bin_edges[static_cast<std::size_t>(bin) + 1];
    samples[i] = lo + (hi - lo) * rng.uniform();
  }
  return samples;
}

std::pair<Scalar, Scalar> mixture_mean_sd(const MixtureDensity& md) {
  validate_mixture(md);
  if (md.center_set.manifold != Manifold::real_line)
    throw ValidationError("mixture moments are defined on the real line only");
  const Index j_count = md.kernel_spec.kernel_count();
  Scalar total = 0.0, mean_acc = 0.0, second_acc = 0.0;
  for (Index p = 0; p < md.weights.rows(); ++p)
    for (Index j = 0; j < j_count; ++j) {
      const Scalar w = md.weights(p, j);
      if (w == 0.0) continue;
      Scalar mu, var;
      if (md.kernel_spec.family == KernelFamily::gaussian) {
        mu = md.center_set.centers[static_cast<std::size_t>(p)];
        const Scalar sigma = md.kernel_spec.params[static_cast<std::size_t>(j)];
        var = sigma * sigma;
      } else {  // rectangular
        const Scalar lo = md.kernel_spec.params[static_cast<std::size_t>(j)];
        const Scalar hi = md.kernel_spec.params[static_cast<std::size_t>(j) + 1];
        mu = 0.5 * (lo + hi);
        var = (hi - lo) * (hi - lo) / 12.0;
      }
      total += w;
      mean_acc += w * mu;
      second_acc += w * (var + mu * mu);
    }
  const Scalar mean = mean_acc / total;
  const Scalar var = second_acc / total - mean * mean;
  return {mean, std::sqrt(std::max(var, 0.0))};
}

Scalar model_density_mode(const FilterModel& model,
                          const Eigen::Ref<const Vector>& window,
                          const Eigen::Ref<const Vector>& xs) {
  const Vector ld = model_log_density_slice(model, window, xs);
  Index best = 0;
  ld.maxCoeff(&best);
  return xs[best];
}

Vector evaluate_filter_nll(const FilterModel& model,
                           const std::vector<TrialRecord>& trials,
                           int start_t) {
  validate_model(model);
  if (trials.empty()) throw ValidationError("no trials to evaluate");
  if (start_t < 0) start_t = model.window;
  if (start_t < model.window)
    throw ValidationError("evaluation start precedes the model window");
  Vector per_trial(static_cast<Index>(trials.size()));
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const TrialRecord& trial = trials[i];
    if (trial.latent.size() <= start_t)
      throw ValidationError("trial " + std::to_string(trial.trial_id) +
                            " is shorter than the evaluation start");
    const Index n = trial.latent.size();
    const Index count = n - start_t;

    // Batched evaluation in chunks; the net forward dominates, so this is
    // the difference between seconds and minutes on the large phase nets.
    Scalar total = 0.0;
    const Index chunk = 1024;
    Matrix features;
    Vector targets;
    for (Index start = 0; start < count; start += chunk) {
      const Index b = std::min(chunk, count - start);
      features.resize(model.window, b);
      targets.resize(b);
      for (Index c = 0; c < b; ++c) {
        const Index t = start_t + start + c;
        features.col(c) =
            (trial.observations.segment(t - model.window, model.window)
                 .array() -
             model.feature_mean) /
            model.feature_sd;
        targets[c] = trial.latent[t];
      }
      if (model.head == "kmn") {
        const Matrix weights = forward_batch(model.net, features, nullptr);
        const Matrix lk =
            log_kernel_matrix(model.centers.centers, model.kernels, targets);
        const Vector ld = batch_log_density(weights, lk, model.weight_eps);
        total -= ld.sum();
      } else {
        const Matrix logits = forward_batch(model.net, features, nullptr);
        for (Index c = 0; c < b; ++c) {
          // A target outside the binned range has density zero; the trial's
          // NLL is honestly infinite rather than clamped.
          total -= quantized_log_density(logits.col(c), model.bin_edges,
                                         targets[c]);
        }
      }
    }
    per_trial[static_cast<Index>(i)] = total / static_cast<Scalar>(count);
  }
  return per_trial;
}

Vector evaluate_ekf_nll(const std::vector<TrialRecord>& trials, int window) {
  if (trials.empty()) throw ValidationError("no trials to evaluate");
  Vector per_trial(static_cast<Index>(trials.size()));
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const TrialRecord& trial = trials[i];
    if (trial.experiment != "oscillator")
      throw ValidationError("the EKF baseline is oscillator-only");
    if (trial.latent.size() <= window)
      throw ValidationError("trial " + std::to_string(trial.trial_id) +
                            " is shorter than the window");
    const auto beliefs = ekf_filter(trial.observations, trial.oscillator_params,
                                    stationary_belief(trial.oscillator_params));
    const Vector nll = ekf_nll(beliefs, trial.latent);
    per_trial[static_cast<Index>(i)] =
        nll.segment(window, nll.size() - window).mean();
  }
  return per_trial;
}

void model_heatmap(const FilterModel& model, const TrialRecord& trial,
                   const std::vector<int>& times,
                   const Eigen::Ref<const Vector>& xs, std::ostream& os) {
  validate_model(model);
  const Vector xs_copy = xs;
  emit_heatmap(times, xs,
               [&model, &trial, &xs_copy](int t) -> Vector {
                 const Vector window = model_window(model, trial, t);
                 return model_log_density_slice(model, window, xs_copy)
                     .array()
                     .exp();
               },
               os);
}

}  // namespace kmn
