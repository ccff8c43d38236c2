#include "kmn/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kmn {

namespace {
constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

Scalar point_distance(Scalar a, Scalar b, Manifold m) {
  return m == Manifold::circle ? circ_dist(a, b) : std::abs(b - a);
}

// Flattens a P x J weight matrix into the row-major (p * J + j) vector the
// kernel matrix layout expects.
Vector flatten_weights(const Eigen::Ref<const Matrix>& weights) {
  Vector flat(weights.size());
  Index idx = 0;
  for (Index p = 0; p < weights.rows(); ++p)
    for (Index j = 0; j < weights.cols(); ++j) flat[idx++] = weights(p, j);
  return flat;
}

void check_outer_activation(const DenseNet& net) {
  const Activation outer = net.activations.back();
  if (outer != Activation::relu &&
      outer != Activation::rectified_quadratic &&
      outer != Activation::exponential)
    throw ValidationError(
        "mixture losses need a non-negative outer activation "
        "(relu, rectified_quadratic or exponential), got " +
        to_string(outer));
}

}  // namespace

Scalar log_sum_exp(const Eigen::Ref<const Vector>& v) {
  if (v.size() == 0) return kNegInf;
  const Scalar m = v.maxCoeff();
  if (m == kNegInf) return kNegInf;
  if (!std::isfinite(m)) throw NumericError("log_sum_exp saw a non-finite value");
  // exp(-inf - m) underflows to zero, so -inf entries drop out on their own.
  return m + std::log((v.array() - m).exp().sum());
}

void validate_center_set(const CenterSet& cs) {
  if (cs.centers.empty()) throw ValidationError("center set is empty");
  if (!(cs.delta >= 0.0)) throw ValidationError("delta must be >= 0");
  for (std::size_t i = 0; i < cs.centers.size(); ++i) {
    if (!std::isfinite(cs.centers[i]))
      throw ValidationError("non-finite center");
    if (i > 0) {
      if (cs.centers[i] < cs.centers[i - 1])
        throw ValidationError("centers must be sorted ascending");
      if (point_distance(cs.centers[i - 1], cs.centers[i], cs.manifold) <
          cs.delta)
        throw ValidationError("centers closer than delta");
    }
  }
  if (cs.manifold == Manifold::circle) {
    for (Scalar c : cs.centers)
      if (!(c > -kPi && c <= kPi))
        throw ValidationError("circle centers must lie in (-pi, pi]");
  }
}

CenterSet select_centers(const std::vector<Scalar>& values, Scalar delta,
                         Manifold manifold) {
  if (values.empty())
    throw ValidationError("select_centers needs at least one value");
  if (!(delta >= 0.0)) throw ValidationError("delta must be >= 0");

  std::vector<Scalar> pts = values;
  if (manifold == Manifold::circle)
    for (Scalar& p : pts) p = wrap_angle(p);
  for (Scalar p : pts)
    if (!std::isfinite(p)) throw ValidationError("non-finite input value");
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  CenterSet cs;
  cs.delta = delta;
  cs.manifold = manifold;
  cs.centers.push_back(pts.front());
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (point_distance(cs.centers.back(), pts[i], manifold) >= delta)
      cs.centers.push_back(pts[i]);
  if (manifold == Manifold::circle) {
    // The scan never compares the two ends across the wrap; enforce the
    // spacing there too.
    while (cs.centers.size() > 1 &&
           circ_dist(cs.centers.front(), cs.centers.back()) < delta)
      cs.centers.pop_back();
  }
  return cs;
}

void validate_mixture(const MixtureDensity& md) {
  validate_center_set(md.center_set);
  validate_kernel_spec(md.kernel_spec);
  if (md.kernel_spec.manifold != md.center_set.manifold)
    throw ValidationError("kernel and center manifolds disagree");
  if (md.weights.rows() != md.center_set.size() ||
      md.weights.cols() != md.kernel_spec.kernel_count())
    throw ValidationError("weight matrix shape does not match centers x kernels");
  if ((md.weights.array() < 0.0).any())
    throw ValidationError("mixture weights must be non-negative");
  if (!(md.weights.array() > 0.0).any())
    throw NumericError("degenerate density: all mixture weights are zero");
}

Scalar kmn_log_density(const Eigen::Ref<const Matrix>& weights,
                       const CenterSet& cs, const KernelSpec& ks, Scalar x) {
  Vector xs(1);
  xs[0] = x;
  const Matrix lk = log_kernel_matrix(cs.centers, ks, xs);
  const Vector flat = flatten_weights(weights);
  if ((flat.array() < 0.0).any())
    throw ValidationError("mixture weights must be non-negative");
  // log(0) = -inf marks absent components; fine as long as one survives.
  const Vector lw = flat.array().log();
  const Scalar log_total = log_sum_exp(lw);
  if (log_total == kNegInf)
    throw NumericError("degenerate density: all mixture weights are zero");
  return log_sum_exp(lw + lk.col(0)) - log_total;
}

Scalar kmn_density(const Eigen::Ref<const Matrix>& weights, const CenterSet& cs,
                   const KernelSpec& ks, Scalar x) {
  return std::exp(kmn_log_density(weights, cs, ks, x));
}

Scalar kmn_density(const MixtureDensity& md, Scalar x) {
  return std::exp(kmn_log_density(md.weights, md.center_set, md.kernel_spec, x));
}

Scalar kmn_log_density(const MixtureDensity& md, Scalar x) {
  return kmn_log_density(md.weights, md.center_set, md.kernel_spec, x);
}

Vector kmn_log_density_grid(const MixtureDensity& md,
                            const Eigen::Ref<const Vector>& xs) {
  validate_mixture(md);
  const Vector flat = flatten_weights(md.weights);
  const Vector lw = flat.array().log();
  const Scalar log_total = log_sum_exp(lw);

  Vector out(xs.size());
  // Chunked so a dense grid against a large mixture does not materialize a
  // huge kernel matrix all at once.
  const Index chunk = 512;
  for (Index start = 0; start < xs.size(); start += chunk) {
    const Index n = std::min(chunk, xs.size() - start);
    const Matrix lk =
        log_kernel_matrix(md.center_set.centers, md.kernel_spec,
                          xs.segment(start, n));
    for (Index b = 0; b < n; ++b)
      out[start + b] = log_sum_exp(lw + lk.col(b)) - log_total;
  }
  return out;
}

Vector batch_log_density(const Eigen::Ref<const Matrix>& weights,
                         const Eigen::Ref<const Matrix>& log_kernels,
                         Scalar weight_eps) {
  if (weights.rows() != log_kernels.rows() ||
      weights.cols() != log_kernels.cols())
    throw ValidationError("weights and log kernels must have equal shapes");
  Vector out(weights.cols());
  for (Index b = 0; b < weights.cols(); ++b) {
    const Vector lw = (weights.col(b).array() + weight_eps).log();
    const Scalar log_total = log_sum_exp(lw);
    if (log_total == kNegInf)
      throw NumericError("degenerate density: all mixture weights are zero "
                         "for sample " + std::to_string(b));
    const Scalar log_num = log_sum_exp(lw + log_kernels.col(b));
    if (log_num == kNegInf)
      throw NumericError("target outside mixture support for sample " +
                         std::to_string(b));
    out[b] = log_num - log_total;
  }
  return out;
}

namespace {

struct NllCore {
  Scalar loss;
  Matrix output_grad;  // dLoss/d(weights), already divided by batch size
};

// Shared numerical core of the mixture loss. Computes the per-sample log
// densities in log space and, when grads is requested, the derivative of the
// mean NLL with respect to each emitted weight:
//   dL_b/dw_pj = -(K_pj / A_b - 1 / B_b)
// with A_b the weighted kernel sum and B_b the weight sum (both including
// weight_eps).
NllCore kmn_nll_core(const Eigen::Ref<const Vector>& targets,
                     const Eigen::Ref<const Matrix>& weights,
                     const CenterSet& cs, const KernelSpec& ks,
                     Scalar weight_eps, bool want_grads) {
  const Index batch = targets.size();
  const Matrix lk = log_kernel_matrix(cs.centers, ks, targets);
  if (weights.rows() != lk.rows())
    throw ValidationError("net output size must equal centers x kernels");

  NllCore core;
  core.loss = 0.0;
  if (want_grads) core.output_grad.resize(weights.rows(), batch);
  for (Index b = 0; b < batch; ++b) {
    const Vector lw = (weights.col(b).array() + weight_eps).log();
    const Scalar log_total = log_sum_exp(lw);
    if (log_total == kNegInf)
      throw NumericError("degenerate density: all mixture weights are zero "
                         "for sample " + std::to_string(b));
    const Scalar log_num = log_sum_exp(lw + lk.col(b));
    if (log_num == kNegInf)
      throw NumericError("target outside mixture support for sample " +
                         std::to_string(b));
    core.loss += log_total - log_num;
    if (want_grads)
      core.output_grad.col(b) =
          -((lk.col(b).array() - log_num).exp() - std::exp(-log_total)) /
          static_cast<Scalar>(batch);
  }
  core.loss /= static_cast<Scalar>(batch);
  return core;
}

void check_batch_inputs(const Eigen::Ref<const Vector>& targets,
                        const Eigen::Ref<const Matrix>& features) {
  if (targets.size() == 0) throw ValidationError("empty batch");
  if (features.cols() != targets.size())
    throw ValidationError("feature columns must match target count");
}

}  // namespace

NllResult kmn_nll(const Eigen::Ref<const Vector>& targets,
                  const Eigen::Ref<const Matrix>& features, const DenseNet& net,
                  const CenterSet& cs, const KernelSpec& ks,
                  Scalar weight_eps) {
  check_batch_inputs(targets, features);
  check_outer_activation(net);
  ForwardCache cache;
  const Matrix weights = forward_batch(net, features, &cache);
  NllCore core = kmn_nll_core(targets, weights, cs, ks, weight_eps, true);
  NllResult result;
  result.loss = core.loss;
  result.grads = backward(net, cache, core.output_grad);
  return result;
}

Scalar kmn_nll_value(const Eigen::Ref<const Vector>& targets,
                     const Eigen::Ref<const Matrix>& features,
                     const DenseNet& net, const CenterSet& cs,
                     const KernelSpec& ks, Scalar weight_eps) {
  check_batch_inputs(targets, features);
  check_outer_activation(net);
  const Matrix weights = forward_batch(net, features, nullptr);
  return kmn_nll_core(targets, weights, cs, ks, weight_eps, false).loss;
}

Index quantized_bin_index(const std::vector<Scalar>& bin_edges, Scalar x) {
  if (bin_edges.size() < 2)
    throw ValidationError("need at least two bin edges");
  if (x < bin_edges.front() || x >= bin_edges.back()) return -1;
  const auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), x);
  return static_cast<Index>(it - bin_edges.begin()) - 1;
}

Scalar quantized_log_density(const Eigen::Ref<const Vector>& logits,
                             const std::vector<Scalar>& bin_edges, Scalar x) {
  if (static_cast<std::size_t>(logits.size()) + 1 != bin_edges.size())
    throw ValidationError("logit count must equal bin count");
  const Index bin = quantized_bin_index(bin_edges, x);
  if (bin < 0) return kNegInf;
  const Scalar width = bin_edges[static_cast<std::size_t>(bin) + 1] -
                       bin_edges[static_cast<std::size_t>(bin)];
  return logits[bin] - log_sum_exp(logits) - std::log(width);
}

Scalar quantized_softmax_density(const Eigen::Ref<const Vector>& logits,
                                 const std::vector<Scalar>& bin_edges,
                                 Scalar x) {
  const Scalar ld = quantized_log_density(logits, bin_edges, x);
  return ld == kNegInf ? 0.0 : std::exp(ld);
}

NllResult quantized_nll(const Eigen::Ref<const Vector>& targets,
                        const Eigen::Ref<const Matrix>& features,
                        const DenseNet& net,
                        const std::vector<Scalar>& bin_edges) {
  check_batch_inputs(targets, features);
  const Index batch = targets.size();
  ForwardCache cache;
  const Matrix logits = forward_batch(net, features, &cache);
  if (static_cast<std::size_t>(logits.rows()) + 1 != bin_edges.size())
    throw ValidationError("net output size must equal bin count");

  Scalar loss = 0.0;
  Matrix output_grad(logits.rows(), batch);
  for (Index b = 0; b < batch; ++b) {
    const Index bin = quantized_bin_index(bin_edges, targets[b]);
    if (bin < 0)
      throw NumericError("target outside quantized bin range for sample " +
                         std::to_string(b) + " (value " +
                         std::to_string(targets[b]) + ")");
    const Scalar width = bin_edges[static_cast<std::size_t>(bin) + 1] -
                         bin_edges[static_cast<std::size_t>(bin)];
    const Scalar lse = log_sum_exp(logits.col(b));
    loss += lse - logits(bin, b) + std::log(width);
    output_grad.col(b) =
        (logits.col(b).array() - lse).exp() / static_cast<Scalar>(batch);
    output_grad(bin, b) -= 1.0 / static_cast<Scalar>(batch);
  }
  NllResult result;
  result.loss = loss / static_cast<Scalar>(batch);
  result.grads = backward(net, cache, output_grad);
  return result;
}

Scalar quantized_nll_value(const Eigen::Ref<const Vector>& targets,
                           const Eigen::Ref<const Matrix>& features,
                           const DenseNet& net,
                           const std::vector<Scalar>& bin_edges) {
  check_batch_inputs(targets, features);
  const Matrix logits = forward_batch(net, features, nullptr);
  if (static_cast<std::size_t>(logits.rows()) + 1 != bin_edges.size())
    throw ValidationError("net output size must equal bin count");
  Scalar loss = 0.0;
  for (Index b = 0; b < targets.size(); ++b) {
    const Index bin = quantized_bin_index(bin_edges, targets[b]);
    if (bin < 0)
      throw NumericError("target outside quantized bin range for sample " +
                         std::to_string(b) + " (value " +
                         std::to_string(targets[b]) + ")");
    const Scalar width = bin_edges[static_cast<std::size_t>(bin) + 1] -
                         bin_edges[static_cast<std::size_t>(bin)];
    loss += log_sum_exp(logits.col(b)) - logits(bin, b) + std::log(width);
  }
  return loss / static_cast<Scalar>(targets.size());
}

MixtureDensity kde_estimate(const std::vector<Scalar>& samples,
                            const KernelSpec& spec,
                            const std::vector<Scalar>* sample_weights) {
  if (samples.empty()) throw ValidationError("kde_estimate needs samples");
  validate_kernel_spec(spec);
  if (sample_weights) {
    if (sample_weights->size() != samples.size())
      throw ValidationError("sample weight count mismatch");
    bool any_positive = false;
    for (Scalar w : *sample_weights) {
      if (!(w >= 0.0))
        throw ValidationError("sample weights must be non-negative");
      if (w > 0.0) any_positive = true;
    }
    if (!any_positive)
      throw ValidationError("sample weights must not be all zero");
  }

  // Sort samples but keep duplicates; kernel placement follows every sample.
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Scalar> pts = samples;
  if (spec.manifold == Manifold::circle)
    for (Scalar& p : pts) p = wrap_angle(p);
  std::sort(order.begin(), order.end(),
            [&pts](std::size_t a, std::size_t b) { return pts[a] < pts[b]; });

  MixtureDensity md;
  md.center_set.delta = 0.0;
  md.center_set.manifold = spec.manifold;
  md.kernel_spec = spec;
  const Index n = static_cast<Index>(samples.size());
  const Index j_count = spec.kernel_count();
  md.weights.resize(n, j_count);
  for (Index i = 0; i < n; ++i) {
    const std::size_t src = order[static_cast<std::size_t>(i)];
    md.center_set.centers.push_back(pts[src]);
    const Scalar w = sample_weights ? (*sample_weights)[src] : 1.0;
    md.weights.row(i).setConstant(w / static_cast<Scalar>(j_count));
  }
  validate_mixture(md);
  return md;
}

DensitySampler::DensitySampler(const MixtureDensity& md) : md_(&md) {
  validate_mixture(md);
  cumulative_.reserve(static_cast<std::size_t>(md.weights.size()));
  Scalar total = 0.0;
  for (Index p = 0; p < md.weights.rows(); ++p)
    for (Index j = 0; j < md.weights.cols(); ++j) {
      total += md.weights(p, j);
      cumulative_.push_back(total);
    }
}

Scalar DensitySampler::draw(Rng& rng) const {
  const Scalar total = cumulative_.back();
  const Scalar u = rng.uniform() * total;
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  Index flat = static_cast<Index>(it - cumulative_.begin());
  if (flat >= static_cast<Index>(cumulative_.size()))
    flat = static_cast<Index>(cumulative_.size()) - 1;
  const Index j_count = md_->kernel_spec.kernel_count();
  const Index p = flat / j_count;
  const Index j = flat % j_count;

  if (md_->kernel_spec.family == KernelFamily::rectangular) {
    // Component (p, j) is the absolute interval j; the paired center plays
    // no role in its density.
    const Scalar lo = md_->kernel_spec.params[static_cast<std::size_t>(j)];
    const Scalar hi = md_->kernel_spec.params[static_cast<std::size_t>(j) + 1];
    return kernel_sample(KernelFamily::rectangular, 0.5 * (lo + hi), hi - lo,
                         rng);
  }
  return kernel_sample(md_->kernel_spec.family,
                       md_->center_set.centers[static_cast<std::size_t>(p)],
                       md_->kernel_spec.params[static_cast<std::size_t>(j)],
                       rng);
}

Scalar density_sample(const MixtureDensity& md, Rng& rng) {
  DensitySampler sampler(md);
  return sampler.draw(rng);
}

}  // namespace kmn
