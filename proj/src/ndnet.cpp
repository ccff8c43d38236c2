#include "kmn/ndnet.hpp"

#include <cmath>

namespace kmn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::rectified_quadratic: return "rectified_quadratic";
    case Activation::exponential: return "exponential";
    case Activation::tanh: return "tanh";
  }
  throw ValidationError("unknown activation value");
}

Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::linear;
  if (s == "relu") return Activation::relu;
  if (s == "rectified_quadratic") return Activation::rectified_quadratic;
  if (s == "exponential") return Activation::exponential;
  if (s == "tanh") return Activation::tanh;
  throw ValidationError("unknown activation: " + s);
}

namespace {

void apply_activation(Activation act, Matrix& m) {
  switch (act) {
    case Activation::linear:
      break;
    case Activation::relu:
      m = m.array().max(0.0);
      break;
    case Activation::rectified_quadratic:
      m = m.array().max(0.0).square();
      break;
    case Activation::exponential:
      m = m.array().exp();
      break;
    case Activation::tanh:
      m = m.array().tanh();
      break;
  }
}

// dActivation/dPre given both the pre-activation and activated values.
Matrix activation_derivative(Activation act, const Matrix& pre,
                             const Matrix& post) {
  switch (act) {
    case Activation::linear:
      return Matrix::Ones(pre.rows(), pre.cols());
    case Activation::relu:
      return (pre.array() > 0.0).cast<Scalar>();
    case Activation::rectified_quadratic:
      return 2.0 * pre.array().max(0.0);
    case Activation::exponential:
      return post;
    case Activation::tanh:
      return 1.0 - post.array().square();
  }
  throw ValidationError("unknown activation value");
}

}  // namespace

DenseNet make_dense_net(const std::vector<int>& layer_dims,
                        const std::vector<Activation>& activations, Rng& rng) {
  if (layer_dims.size() < 2)
    throw ValidationError("a net needs at least input and output dims");
  if (activations.size() + 1 != layer_dims.size())
    throw ValidationError("need one activation per layer");
  for (int d : layer_dims)
    if (d <= 0) throw ValidationError("layer dims must be positive");

  DenseNet net;
  net.layer_dims = layer_dims;
  net.activations = activations;
  for (std::size_t k = 0; k + 1 < layer_dims.size(); ++k) {
    const int fan_in = layer_dims[k];
    const int fan_out = layer_dims[k + 1];
    const Scalar bound = std::sqrt(6.0 / (fan_in + fan_out));
    Matrix w(fan_out, fan_in);
    for (Index r = 0; r < w.rows(); ++r)
      for (Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vector::Zero(fan_out));
  }
  return net;
}

void validate_net(const DenseNet& net) {
  if (net.layer_dims.size() < 2)
    throw ValidationError("a net needs at least input and output dims");
  const std::size_t layers = net.layer_dims.size() - 1;
  if (net.weights.size() != layers || net.biases.size() != layers ||
      net.activations.size() != layers)
    throw ValidationError("net layer bookkeeping is inconsistent");
  for (std::size_t k = 0; k < layers; ++k) {
    if (net.weights[k].rows() != net.layer_dims[k + 1] ||
        net.weights[k].cols() != net.layer_dims[k])
      throw ValidationError("weight matrix shape mismatch at layer " +
                            std::to_string(k));
    if (net.biases[k].size() != net.layer_dims[k + 1])
      throw ValidationError("bias shape mismatch at layer " +
                            std::to_string(k));
    if (!net.weights[k].allFinite() || !net.biases[k].allFinite())
      throw NumericError("non-finite parameter at layer " + std::to_string(k));
  }
}

Vector forward(const DenseNet& net, const Eigen::Ref<const Vector>& input) {
  return forward_batch(net, input, nullptr).col(0);
}

Matrix forward_batch(const DenseNet& net,
                     const Eigen::Ref<const Matrix>& inputs,
                     ForwardCache* cache) {
  if (inputs.rows() != net.input_dim())
    throw ValidationError("input has " + std::to_string(inputs.rows()) +
                          " rows, net expects " +
                          std::to_string(net.input_dim()));
  if (cache) {
    cache->input = inputs;
    cache->pre.clear();
    cache->post.clear();
  }
  Matrix current = inputs;
  for (Index k = 0; k < net.layer_count(); ++k) {
    Matrix pre = net.weights[static_cast<std::size_t>(k)] * current;
    pre.colwise() += net.biases[static_cast<std::size_t>(k)];
    Matrix post = pre;
    apply_activation(net.activations[static_cast<std::size_t>(k)], post);
    if (cache) {
      cache->pre.push_back(pre);
      cache->post.push_back(post);
    }
    current = std::move(post);
  }
  return current;
}

NetGradients zero_gradients(const DenseNet& net) {
  NetGradients g;
  for (std::size_t k = 0; k < net.weights.size(); ++k) {
    g.weights.push_back(Matrix::Zero(net.weights[k].rows(), net.weights[k].cols()));
    g.biases.push_back(Vector::Zero(net.biases[k].size()));
  }
  return g;
}

NetGradients backward(const DenseNet& net, const ForwardCache& cache,
                      const Eigen::Ref<const Matrix>& output_grad) {
  const std::size_t layers = net.weights.size();
  if (cache.pre.size() != layers || cache.post.size() != layers)
    throw ValidationError("forward cache does not match the net");
  if (output_grad.rows() != net.output_dim() ||
      output_grad.cols() != cache.input.cols())
    throw ValidationError("output_grad shape mismatch");

  NetGradients grads;
  grads.weights.resize(layers);
  grads.biases.resize(layers);

  // delta holds dLoss/d(activated output of layer k), one column per sample.
  Matrix delta = output_grad;
  for (std::size_t k = layers; k-- > 0;) {
    Matrix d = activation_derivative(net.activations[k], cache.pre[k],
                                     cache.post[k])
                   .cwiseProduct(delta);
    const Matrix& below = (k == 0) ? cache.input : cache.post[k - 1];
    grads.weights[k] = d * below.transpose();
    grads.biases[k] = d.rowwise().sum();
    if (k > 0) delta = net.weights[k].transpose() * d;
  }
  return grads;
}

NetGradients backward(const DenseNet& net,
                      const Eigen::Ref<const Vector>& input,
                      const Eigen::Ref<const Vector>& output_grad) {
  ForwardCache cache;
  forward_batch(net, input, &cache);
  return backward(net, cache, output_grad);
}

OptimizerState make_sgd(Scalar learning_rate) {
  OptimizerState s;
  s.kind = OptimizerState::Kind::sgd;
  s.learning_rate = learning_rate;
  return s;
}

OptimizerState make_adam(Scalar learning_rate, Scalar beta1, Scalar beta2,
                         Scalar eps) {
  OptimizerState s;
  s.kind = OptimizerState::Kind::adam;
  s.learning_rate = learning_rate;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0) ||
      !(eps > 0.0))
    throw ValidationError("adam hyperparameters out of range");
  return s;
}

void optimizer_step(OptimizerState& state, DenseNet& net,
                    const NetGradients& grads) {
  const std::size_t layers = net.weights.size();
  if (grads.weights.size() != layers || grads.biases.size() != layers)
    throw ValidationError("gradient layer count mismatch");
  for (std::size_t k = 0; k < layers; ++k) {
    if (grads.weights[k].rows() != net.weights[k].rows() ||
        grads.weights[k].cols() != net.weights[k].cols() ||
        grads.biases[k].size() != net.biases[k].size())
      throw ValidationError("gradient shape mismatch at layer " +
                            std::to_string(k));
    if (!grads.weights[k].allFinite() || !grads.biases[k].allFinite())
      throw NumericError("training diverged: non-finite gradient at layer " +
                         std::to_string(k));
  }

  if (state.kind == OptimizerState::Kind::sgd) {
    for (std::size_t k = 0; k < layers; ++k) {
      net.weights[k] -= state.learning_rate * grads.weights[k];
      net.biases[k] -= state.learning_rate * grads.biases[k];
    }
    ++state.step_count;
    return;
  }

  if (state.m_weights.empty()) {
    for (std::size_t k = 0; k < layers; ++k) {
      state.m_weights.push_back(
          Matrix::Zero(net.weights[k].rows(), net.weights[k].cols()));
      state.v_weights.push_back(
          Matrix::Zero(net.weights[k].rows(), net.weights[k].cols()));
      state.m_biases.push_back(Vector::Zero(net.biases[k].size()));
      state.v_biases.push_back(Vector::Zero(net.biases[k].size()));
    }
  }

  ++state.step_count;
  const Scalar t = static_cast<Scalar>(state.step_count);
  const Scalar correction1 = 1.0 - std::pow(state.beta1, t);
  const Scalar correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < layers; ++k) {
    state.m_weights[k] =
        state.beta1 * state.m_weights[k] + (1.0 - state.beta1) * grads.weights[k];
    state.v_weights[k] = state.beta2 * state.v_weights[k] +
                         (1.0 - state.beta2) * grads.weights[k].array().square().matrix();
    state.m_biases[k] =
        state.beta1 * state.m_biases[k] + (1.0 - state.beta1) * grads.biases[k];
    state.v_biases[k] = state.beta2 * state.v_biases[k] +
                        (1.0 - state.beta2) * grads.biases[k].array().square().matrix();

    net.weights[k].array() -=
        state.learning_rate * (state.m_weights[k].array() / correction1) /
        ((state.v_weights[k].array() / correction2).sqrt() + state.eps);
    net.biases[k].array() -=
        state.learning_rate * (state.m_biases[k].array() / correction1) /
        ((state.v_biases[k].array() / correction2).sqrt() + state.eps);
  }
}

}  // namespace kmn
