#pragma once

#include <vector>

#include "kmn/kernels.hpp"
#include "kmn/ndnet.hpp"
#include "kmn/rng.hpp"
#include "kmn/types.hpp"

namespace kmn {

// Center points retained after delta-subsampling, sorted ascending (on the
// circle: wrapped into (-pi, pi] first).
struct CenterSet {
  std::vector<Scalar> centers;
  Scalar delta = 0.0;
  Manifold manifold = Manifold::real_line;

  Index size() const { return static_cast<Index>(centers.size()); }
};

void validate_center_set(const CenterSet& cs);

// Sorts the values, collapses exact duplicates, then keeps each point whose
// distance to the previously kept point is at least delta (circular distance
// on the circle, where the first and last kept points are also checked
// against each other across the wrap).
CenterSet select_centers(const std::vector<Scalar>& values, Scalar delta,
                         Manifold manifold);

// An evaluable conditional density: non-negative weights over
// (center p, kernel j) pairs. weights(p, j) pairs center p with kernel j;
// flattened order is row-major (p * J + j), matching the network output
// layout used by the losses below.
struct MixtureDensity {
  CenterSet center_set;
  KernelSpec kernel_spec;
  Matrix weights;
};

void validate_mixture(const MixtureDensity& md);

// Normalized mixture evaluation, Sum_pj w_pj K_j(x, c_p) / Sum_pj w_pj.
// The log variant is computed with max-shifted log-sum-exp so large von
// Mises concentrations stay finite. All-zero weights raise NumericError.
Scalar kmn_density(const Eigen::Ref<const Matrix>& weights,
                   const CenterSet& cs, const KernelSpec& ks, Scalar x);
Scalar kmn_log_density(const Eigen::Ref<const Matrix>& weights,
                       const CenterSet& cs, const KernelSpec& ks, Scalar x);
Scalar kmn_density(const MixtureDensity& md, Scalar x);
Scalar kmn_log_density(const MixtureDensity& md, Scalar x);

// Batched grid evaluation (one log-density per grid point); used by the
// normalization checks and the CSV emitters, where point-at-a-time
// evaluation would be too slow.
Vector kmn_log_density_grid(const MixtureDensity& md,
                            const Eigen::Ref<const Vector>& xs);

// Per-column log density for precomputed weights and log-kernel values,
// both shaped (P*J) x B. weight_eps is added to every weight before
// normalization; columns whose weights are all zero raise NumericError
// naming the column.
Vector batch_log_density(const Eigen::Ref<const Matrix>& weights,
                         const Eigen::Ref<const Matrix>& log_kernels,
                         Scalar weight_eps);

struct NllResult {
  Scalar loss = 0.0;
  NetGradients grads;
};

// Mean negative log likelihood of the batch under the mixture whose weights
// the net emits for each feature column, plus its gradients with respect to
// every net parameter. Kernel values are constants here; the gradient flows
// only through the weights. The net's outer activation must be non-negative
// (relu, rectified_quadratic or exponential).
NllResult kmn_nll(const Eigen::Ref<const Vector>& targets,
                  const Eigen::Ref<const Matrix>& features,
                  const DenseNet& net, const CenterSet& cs,
                  const KernelSpec& ks, Scalar weight_eps);

// Loss-only variant (no backward pass), for validation curves.
Scalar kmn_nll_value(const Eigen::Ref<const Vector>& targets,
                     const Eigen::Ref<const Matrix>& features,
                     const DenseNet& net, const CenterSet& cs,
                     const KernelSpec& ks, Scalar weight_eps);

// Piecewise-constant density over bins: softmax(z)_bin(x) / width(bin(x)),
// zero outside the binned range.
struct QuantizedDensity {
  std::vector<Scalar> bin_edges;
  Vector logits;
};

Scalar quantized_softmax_density(const Eigen::Ref<const Vector>& logits,
                                 const std::vector<Scalar>& bin_edges,
                                 Scalar x);
Scalar quantized_log_density(const Eigen::Ref<const Vector>& logits,
                             const std::vector<Scalar>& bin_edges, Scalar x);

// Bin index for x, or -1 when x is outside [first, last).
Index quantized_bin_index(const std::vector<Scalar>& bin_edges, Scalar x);

// The quantized head's loss: softmax cross entropy against the target's bin
// plus log(bin width), which makes it the same negative log density the
// mixture loss reports for the equivalent rectangular-kernel mixture.
// Targets falling outside the binned range have density zero and raise
// NumericError naming the sample.
NllResult quantized_nll(const Eigen::Ref<const Vector>& targets,
                        const Eigen::Ref<const Matrix>& features,
                        const DenseNet& net,
                        const std::vector<Scalar>& bin_edges);

Scalar quantized_nll_value(const Eigen::Ref<const Vector>& targets,
                           const Eigen::Ref<const Matrix>& features,
                           const DenseNet& net,
                           const std::vector<Scalar>& bin_edges);

// Kernel (mixture) density estimation: one component per sample and kernel,
// uniform over kernels, sample weights uniform unless given. Duplicated
// samples keep their multiplicity.
MixtureDensity kde_estimate(const std::vector<Scalar>& samples,
                            const KernelSpec& spec,
                            const std::vector<Scalar>* sample_weights = nullptr);

// Draws component (p, j) with probability w_pj / Sum w, then samples from
// that kernel. DensitySampler amortizes the cumulative-weight table across
// many draws.
class DensitySampler {
 public:
  explicit DensitySampler(const MixtureDensity& md);
  Scalar draw(Rng& rng) const;

 private:
  const MixtureDensity* md_;
  std::vector<Scalar> cumulative_;
};

Scalar density_sample(const MixtureDensity& md, Rng& rng);

// Max-shifted log-sum-exp; ignores -inf entries, returns -inf when every
// entry is -inf.
Scalar log_sum_exp(const Eigen::Ref<const Vector>& v);

}  // namespace kmn
