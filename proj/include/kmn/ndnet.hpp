#pragma once

#include <string>
#include <vector>

#include "kmn/rng.hpp"
#include "kmn/types.hpp"

namespace kmn {

enum class Activation { linear, relu, rectified_quadratic, exponential, tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// max(0, x)^2. Smooth at zero and non-negative, which is what the mixture
// head needs from its outer layer.
inline Scalar rectified_quadratic(Scalar x) {
  const Scalar r = x > 0.0 ? x : 0.0;
  return r * r;
}

// Plain dense feed-forward network. weights[k] has shape
// layer_dims[k+1] x layer_dims[k]; activations[k] applies after layer k.
struct DenseNet {
  std::vector<int> layer_dims;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  std::vector<Activation> activations;

  Index input_dim() const { return layer_dims.front(); }
  Index output_dim() const { return layer_dims.back(); }
  Index layer_count() const { return static_cast<Index>(weights.size()); }
};

// Builds a net with the given shape, weights uniform in
// [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))], biases zero.
// Weight entries are drawn in row-major order so initialization is
// reproducible from the rng stream alone.
DenseNet make_dense_net(const std::vector<int>& layer_dims,
                        const std::vector<Activation>& activations, Rng& rng);

// Throws ValidationError if shapes or stored values are inconsistent.
void validate_net(const DenseNet& net);

// Forward pass for a single input vector.
Vector forward(const DenseNet& net, const Eigen::Ref<const Vector>& input);

// Intermediate values kept for the backward pass: pre[k] are the
// pre-activation values of layer k, post[k] the activated outputs, one
// column per batch sample.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;
  std::vector<Matrix> post;
};

// Batched forward pass, one sample per column. When cache is non-null the
// intermediates are stored for backward().
Matrix forward_batch(const DenseNet& net,
                     const Eigen::Ref<const Matrix>& inputs,
                     ForwardCache* cache = nullptr);

struct NetGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

NetGradients zero_gradients(const DenseNet& net);

// Reverse-mode gradients. output_grad holds dLoss/d(output) per column;
// the returned gradients are summed over the batch, so loss averaging is the
// caller's job (divide output_grad by the batch size).
NetGradients backward(const DenseNet& net, const ForwardCache& cache,
                      const Eigen::Ref<const Matrix>& output_grad);

// Single-sample convenience wrapper around the batched pass.
NetGradients backward(const DenseNet& net, const Eigen::Ref<const Vector>& input,
                      const Eigen::Ref<const Vector>& output_grad);

struct OptimizerState {
  enum class Kind { sgd, adam };
  Kind kind = Kind::adam;
  Scalar learning_rate = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
  long step_count = 0;
  // Adam moment accumulators, lazily sized to the net on the first step.
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_biases, v_biases;
};

OptimizerState make_sgd(Scalar learning_rate);
OptimizerState make_adam(Scalar learning_rate = 1e-3, Scalar beta1 = 0.9,
                         Scalar beta2 = 0.999, Scalar eps = 1e-8);

// Applies one SGD or bias-corrected Adam update in place and increments
// step_count. Non-finite gradients raise NumericError (training diverged).
void optimizer_step(OptimizerState& state, DenseNet& net,
                    const NetGradients& grads);

}  // namespace kmn
