#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "kmn/evalkit.hpp"
#include "kmn/mixture.hpp"
#include "kmn/ndnet.hpp"
#include "kmn/rng.hpp"
#include "kmn/types.hpp"

namespace kmn {

// Stochastic oscillator x'' = -omega0^2 x - beta x' + k2 x^2 + k3 x^3 + xi(t),
// integrated by Euler-Maruyama at step dt, observed as y = x + noise.
// burn_in seconds are simulated and discarded before recording starts, which
// lets trials begin in the stationary regime instead of at rest.
struct OscillatorParams {
  Scalar omega0 = 5.0;
  Scalar beta = 0.2;
  Scalar k2 = 15.0;
  Scalar k3 = -0.5;
  Scalar noise_scale = 0.8;
  Scalar dt = 0.01;
  Scalar duration = 4.0;
  Scalar obs_noise_sd = 1.0;
  Scalar burn_in = 0.0;
};

// Deterministic phase theta(t) = theta0 + angular_rate * t observed through
// a random degree-5 polynomial waveform in cos(theta): odd coefficients from
// t(taylor_df) truncated to (0, inf), even ones untruncated.
struct PhaseModelParams {
  Scalar angular_rate = 4.0 * kPi;
  Scalar obs_noise_sd = 2.0;
  Scalar taylor_df = 3.0;
  Scalar dt = 0.01;
  Scalar duration = 4.0;
};

struct TrialRecord {
  long trial_id = 0;
  Scalar dt = 0.01;
  Manifold manifold = Manifold::real_line;
  std::string experiment;  // "oscillator" or "phase"
  Vector latent;           // x_t, or theta_t wrapped to (-pi, pi]
  Vector observations;     // y_t, same length as latent
  OscillatorParams oscillator_params;  // meaningful when experiment matches
  PhaseModelParams phase_params;
};

void validate_trial(const TrialRecord& trial);

// One oscillator trial. The recorded series has round(duration/dt) samples,
// taken after the initial state (x0, v0) and the burn-in stretch. Non-finite
// states raise NumericError naming the step.
TrialRecord simulate_oscillator(const OscillatorParams& params, Rng& rng,
                                Scalar x0 = 0.0, Scalar v0 = 0.0);

TrialRecord simulate_phase_trial(const PhaseModelParams& params, Rng& rng);

// Student-t(df) draw conditioned on (lo, hi) by rejection; hi may be +inf.
Scalar sample_truncated_t(Scalar df, Scalar lo, Scalar hi, Rng& rng);

// Training pairs (target x_t, features y_{t-L..t-1}) over every trial and
// every t >= L, kept as indices into the trial list rather than materialized
// (5,000 trials x 128-wide windows would not fit in memory otherwise).
// Features are standardized by feature_mean/feature_sd at gather time;
// oldest observation first.
struct TrainingPairs {
  const std::vector<TrialRecord>* trials = nullptr;
  std::vector<std::pair<std::int32_t, std::int32_t>> index;  // (trial, t)
  int window = 0;
  Scalar feature_mean = 0.0;
  Scalar feature_sd = 1.0;
  long skipped_trials = 0;  // trials too short to yield any pair

  Index size() const { return static_cast<Index>(index.size()); }
  Scalar target(Index i) const;
  std::vector<Scalar> all_targets() const;

  // Gathers the chosen pairs into one feature column and target entry each.
  void gather(const std::vector<Index>& rows, Matrix& features,
              Vector& targets) const;
};

// Stats are computed over the observations of the usable trials. The
// two-argument form is for training data; pass the training stats explicitly
// when building validation pairs so both sides share the checkpointed
// standardization.
TrainingPairs make_training_pairs(const std::vector<TrialRecord>& trials,
                                  int window);
TrainingPairs make_training_pairs(const std::vector<TrialRecord>& trials,
                                  int window, Scalar feature_mean,
                                  Scalar feature_sd);

// ---- EKF baseline (oscillator only) ----

struct GaussianBelief {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();  // (x, dx/dt)
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
};

// Stationary moments of the linearized oscillator, the natural initial
// belief for trials that start burned in: var(v) = noise^2/(2 beta),
// var(x) = var(v)/omega0^2.
GaussianBelief stationary_belief(const OscillatorParams& params);

// One filtered belief per observation: Euler-linearized predict with
// F = I + dt [[0, 1], [-omega0^2 + 2 k2 x + 3 k3 x^2, -beta]] and
// Q = diag(0, noise_scale^2 dt), then the standard Gaussian update with
// H = [1, 0], R = obs_noise_sd^2. Covariances are symmetrized each step and
// eigenvalues below -1e-12 raise NumericError.
std::vector<GaussianBelief> ekf_filter(const Eigen::Ref<const Vector>& observations,
                                       const OscillatorParams& params,
                                       const GaussianBelief& init);

// Negative log of the filtered marginal Gaussian density of x at the true
// latent, one entry per step.
Vector ekf_nll(const std::vector<GaussianBelief>& beliefs,
               const Eigen::Ref<const Vector>& latent);

// ---- trained filter models ----

struct FilterModel {
  std::string model_name;  // used in comparison CSVs
  std::string head;        // "kmn" or "quantized"
  std::string experiment;  // "oscillator" or "phase"
  Manifold manifold = Manifold::real_line;
  int window = 0;
  Scalar feature_mean = 0.0;
  Scalar feature_sd = 1.0;
  Scalar weight_eps = 0.0;
  DenseNet net;
  CenterSet centers;              // kmn head
  KernelSpec kernels;             // kmn head
  std::vector<Scalar> bin_edges;  // quantized head
};

void validate_model(const FilterModel& model);

// Standardized feature column for trial time t (t >= window).
Vector model_window(const FilterModel& model, const TrialRecord& trial, int t);

// Log density of the conditional f_{x_t}(window) over the points xs.
Vector model_log_density_slice(const FilterModel& model,
                               const Eigen::Ref<const Vector>& window,
                               const Eigen::Ref<const Vector>& xs);

// The conditional density as an explicit mixture (kmn head only).
MixtureDensity model_mixture(const FilterModel& model,
                             const Eigen::Ref<const Vector>& window);

// Draws n points from the conditional density.
Vector model_sample(const FilterModel& model,
                    const Eigen::Ref<const Vector>& window, Index n, Rng& rng);

// Mean and standard deviation of a real-line mixture (exact moments of the
// weighted kernel sum).
std::pair<Scalar, Scalar> mixture_mean_sd(const MixtureDensity& md);

// Argmax of the conditional density over xs.
Scalar model_density_mode(const FilterModel& model,
                          const Eigen::Ref<const Vector>& window,
                          const Eigen::Ref<const Vector>& xs);

// Per-trial mean of -log f_{x_t}(window_t) over t in [start_t, N); start_t
// defaults to the model window. Passing the largest window of several models
// makes their per-trial means directly comparable.
Vector evaluate_filter_nll(const FilterModel& model,
                           const std::vector<TrialRecord>& trials,
                           int start_t = -1);

// Same time range as evaluate_filter_nll but for the EKF baseline, so the
// comparisons average over identical step sets.
Vector evaluate_ekf_nll(const std::vector<TrialRecord>& trials, int window);

// Heatmap CSV for one trial (see evalkit::emit_heatmap for the schema).
void model_heatmap(const FilterModel& model, const TrialRecord& trial,
                   const std::vector<int>& times,
                   const Eigen::Ref<const Vector>& xs, std::ostream& os);

// ---- training ----

struct TrainConfig {
  std::string head = "kmn";  // "kmn" or "quantized"
  KernelFamily family = KernelFamily::gaussian;
  std::vector<Scalar> kernel_params;  // empty -> default grid for the family
  Scalar delta = -1.0;  // < 0 -> one tenth of the smallest kernel bandwidth
  std::vector<Scalar> bin_edges;  // quantized head
  int window = 128;
  std::vector<int> hidden = {256, 256};
  Activation hidden_activation = Activation::relu;
  Activation outer_activation = Activation::rectified_quadratic;
  Scalar weight_eps = 1e-12;
  long iterations = 3000;
  int batch_size = 64;
  Scalar learning_rate = 1e-3;
  long eval_interval = 100;
  std::uint64_t seed = 0;
  std::string model_name;  // defaults to the head tag
};

struct TrainResult {
  FilterModel model;
  std::vector<CurvePoint> curve;
  bool diverged = false;       // aborted on NaN; model is the last good state
  std::string abort_reason;
  long skipped_trials = 0;
};

// Mini-batch optimization of the mixture (or quantized) negative log
// likelihood with Adam. Records train/validation loss every eval_interval
// iterations; on divergence returns the last recorded good model.
TrainResult train_filter(const TrainConfig& config,
                         const std::vector<TrialRecord>& train_trials,
                         const std::vector<TrialRecord>& valid_trials);

}  // namespace kmn
