#pragma once

#include <vector>

#include "kmn/rng.hpp"
#include "kmn/types.hpp"

namespace kmn {

enum class KernelFamily { gaussian, von_mises, rectangular };

std::string to_string(KernelFamily f);
KernelFamily kernel_family_from_string(const std::string& s);

// A kernel family plus its parameter grid. For gaussian, params are the
// bandwidths sigma_j; for von_mises, the concentrations kappa_j; for
// rectangular, params are the ordered bin edges (so J = params.size() - 1
// intervals). Rectangular intervals are absolute: the j-th kernel is the
// uniform density on [edge_j, edge_{j+1}) and ignores the mixture center it
// is paired with. That is exactly what makes the quantized softmax a special
// case of the kernel mixture.
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  std::vector<Scalar> params;
  Manifold manifold = Manifold::real_line;

  Index kernel_count() const {
    return family == KernelFamily::rectangular
               ? static_cast<Index>(params.size()) - 1
               : static_cast<Index>(params.size());
  }
};

// Throws ValidationError when the family/manifold pairing or the parameter
// grid is malformed.
void validate_kernel_spec(const KernelSpec& spec);

// (1/(sqrt(2 pi) sigma)) exp(-(x-center)^2 / (2 sigma^2))
Scalar gaussian_eval(Scalar x, Scalar center, Scalar sigma);
Scalar gaussian_log_eval(Scalar x, Scalar center, Scalar sigma);

// Modified Bessel function of order zero, by its ascending power series with
// term-ratio stopping. Overflows for x beyond roughly 709; use log_bessel_i0
// for large arguments.
Scalar bessel_i0(Scalar x);

// log I0(x): series for |x| <= 500, asymptotic expansion
// I0(x) ~ e^x / sqrt(2 pi x) (1 + 1/(8x) + 9/(128 x^2) + ...) above. The
// switch point keeps both branches well inside their comfortable ranges;
// relative error stays below 1e-12 across the concentration grid used here.
Scalar log_bessel_i0(Scalar x);

// exp(kappa cos(theta - center)) / (2 pi I0(kappa)), evaluated in log space
// so that concentrations up to ~(250/pi)^2 do not overflow.
Scalar von_mises_eval(Scalar theta, Scalar center, Scalar kappa);
Scalar von_mises_log_eval(Scalar theta, Scalar center, Scalar kappa);

// Uniform density on [lo, hi): 1/(hi-lo) inside, 0 outside.
Scalar rectangular_eval(Scalar x, Scalar lo, Scalar hi);

// One draw from the kernel density centered at `center`. For gaussian,
// param is sigma; for von_mises, kappa (result wrapped to (-pi, pi]); for
// rectangular, param is the interval width and the draw is uniform on
// [center - param/2, center + param/2).
Scalar kernel_sample(KernelFamily family, Scalar center, Scalar param,
                     Rng& rng);

// Log kernel matrix for a batch of evaluation points: row p*J + j holds
// log K_j(x_b, center_p) for each column b. This is the shape the mixture
// loss consumes; rectangular entries outside their interval come back as
// -infinity.
Matrix log_kernel_matrix(const std::vector<Scalar>& centers,
                         const KernelSpec& spec,
                         const Eigen::Ref<const Vector>& xs);

/// Parameter grids used by the filtering experiments: bandwidths 0.25 to 2.75
// in steps of 0.5, and concentrations kappa_j = (250/(j pi))^2 for
// j = 1..20 (equivalently scales 1/sqrt(kappa) from pi/250 to 2 pi/25 in
// steps of pi/250).
std::vector<Scalar> default_gaussian_grid();
std::vector<Scalar> default_von_mises_grid();

}  // namespace kmn
