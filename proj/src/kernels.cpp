#include "kmn/kernels.hpp"

#include <cmath>
#include <limits>

namespace kmn {

namespace {
constexpr Scalar kLogTwoPi = 1.8378770664093454836;  // log(2 pi)
constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();
}  // namespace

std::string to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::von_mises: return "von_mises";
    case KernelFamily::rectangular: return "rectangular";
  }
  throw ValidationError("unknown kernel family value");
}

KernelFamily kernel_family_from_string(const std::string& s) {
  if (s == "gaussian") return KernelFamily::gaussian;
  if (s == "von_mises") return KernelFamily::von_mises;
  if (s == "rectangular") return KernelFamily::rectangular;
  throw ValidationError("unknown kernel family: " + s);
}

void validate_kernel_spec(const KernelSpec& spec) {
  if (spec.params.empty())
    throw ValidationError("kernel spec has an empty parameter grid");
  switch (spec.family) {
    case KernelFamily::gaussian:
      if (spec.manifold != Manifold::real_line)
        throw ValidationError("gaussian kernels require the real line");
      for (Scalar s : spec.params)
        if (!(s > 0.0)) throw ValidationError("gaussian sigma must be > 0");
      break;
    case KernelFamily::von_mises:
      if (spec.manifold != Manifold::circle)
        throw ValidationError("von Mises kernels require the circle");
      for (Scalar k : spec.params)
        if (!(k > 0.0)) throw ValidationError("von Mises kappa must be > 0");
      break;
    case KernelFamily::rectangular:
      if (spec.manifold != Manifold::real_line)
        throw ValidationError("rectangular kernels require the real line");
      if (spec.params.size() < 2)
        throw ValidationError("rectangular kernels need at least two edges");
      for (std::size_t i = 1; i < spec.params.size(); ++i)
        if (!(spec.params[i - 1] < spec.params[i]))
          throw ValidationError("rectangular bin edges must be increasing");
      break;
  }
}

Scalar gaussian_eval(Scalar x, Scalar center, Scalar sigma) {
  return std::exp(gaussian_log_eval(x, center, sigma));
}

Scalar gaussian_log_eval(Scalar x, Scalar center, Scalar sigma) {
  if (!(sigma > 0.0)) throw ValidationError("gaussian sigma must be > 0");
  const Scalar z = (x - center) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * kLogTwoPi;
}

Scalar bessel_i0(Scalar x) {
  // I0(x) = sum_k ((x/2)^(2k) / (k!)^2). Terms satisfy
  // t_{k+1} = t_k * (x/2)^2 / (k+1)^2, so the running ratio gives a cheap
  // stopping rule.
  const Scalar q = 0.25 * x * x;
  Scalar term = 1.0;
  Scalar sum = 1.0;
  for (int k = 1; k < 1000; ++k) {
    term *= q / (static_cast<Scalar>(k) * static_cast<Scalar>(k));
    sum += term;
    if (term < sum * 1e-16) break;
  }
  return sum;
}

Scalar log_bessel_i0(Scalar x) {
  // The ascending series stays finite well past x = 500 (I0(500) ~ 1e215),
  // so the switch point is chosen where the asymptotic tail below is already
  // accurate to ~1e-14, keeping the two branches consistent.
  x = std::abs(x);
  if (x <= 500.0) return std::log(bessel_i0(x));
  // I0(x) ~ e^x / sqrt(2 pi x) * sum_k a_k / x^k with
  // a_k = prod_{j=1..k} (2j-1)^2 / (8^k k!).
  const Scalar inv = 1.0 / x;
  const Scalar correction =
      1.0 + inv * (0.125 +
                   inv * (9.0 / 128.0 +
                          inv * (225.0 / 3072.0 + inv * 11025.0 / 98304.0)));
  return x - 0.5 * std::log(kTwoPi * x) + std::log(correction);
}

Scalar von_mises_eval(Scalar theta, Scalar center, Scalar kappa) {
  return std::exp(von_mises_log_eval(theta, center, kappa));
}

Scalar von_mises_log_eval(Scalar theta, Scalar center, Scalar kappa) {
  if (!(kappa > 0.0)) throw ValidationError("von Mises kappa must be > 0");
  return kappa * std::cos(theta - center) - kLogTwoPi - log_bessel_i0(kappa);
}

Scalar rectangular_eval(Scalar x, Scalar lo, Scalar hi) {
  if (!(lo < hi)) throw ValidationError("rectangular interval needs lo < hi");
  return (x >= lo && x < hi) ? 1.0 / (hi - lo) : 0.0;
}

Scalar kernel_sample(KernelFamily family, Scalar center, Scalar param,
                     Rng& rng) {
  switch (family) {
    case KernelFamily::gaussian:
      if (!(param > 0.0)) throw ValidationError("gaussian sigma must be > 0");
      return center + param * rng.normal();
    case KernelFamily::von_mises:
      return wrap_angle(center + rng.von_mises(param));
    case KernelFamily::rectangular: {
      if (!(param > 0.0))
        throw ValidationError("rectangular width must be > 0");
      // uniform() is in [0, 1), so the draw stays inside [lo, hi).
      return center - 0.5 * param + param * rng.uniform();
    }
  }
  throw ValidationError("unknown kernel family value");
}

Matrix log_kernel_matrix(const std::vector<Scalar>& centers,
                         const KernelSpec& spec,
                         const Eigen::Ref<const Vector>& xs) {
  validate_kernel_spec(spec);
  const Index p_count = static_cast<Index>(centers.size());
  const Index j_count = spec.kernel_count();
  const Index b_count = xs.size();
  if (p_count == 0) throw ValidationError("log_kernel_matrix needs centers");
  Matrix out(p_count * j_count, b_count);

  switch (spec.family) {
    case KernelFamily::gaussian: {
      // Shared squared-difference table; each bandwidth only rescales it.
      Matrix d2(p_count, b_count);
      for (Index p = 0; p < p_count; ++p)
        d2.row(p) = (xs.array() - centers[static_cast<std::size_t>(p)])
                        .square()
                        .transpose();
      for (Index j = 0; j < j_count; ++j) {
        const Scalar sigma = spec.params[static_cast<std::size_t>(j)];
        const Scalar scale = -0.5 / (sigma * sigma);
        const Scalar norm = -std::log(sigma) - 0.5 * kLogTwoPi;
        for (Index p = 0; p < p_count; ++p)
          out.row(p * j_count + j) = scale * d2.row(p).array() + norm;
      }
      break;
    }
    case KernelFamily::von_mises: {
      // cos(x - c) is shared across the concentration grid.
      Matrix cosd(p_count, b_count);
      for (Index p = 0; p < p_count; ++p)
        cosd.row(p) = (xs.array() - centers[static_cast<std::size_t>(p)])
                          .cos()
                          .transpose();
      for (Index j = 0; j < j_count; ++j) {
        const Scalar kappa = spec.params[static_cast<std::size_t>(j)];
        const Scalar norm = -kLogTwoPi - log_bessel_i0(kappa);
        for (Index p = 0; p < p_count; ++p)
          out.row(p * j_count + j) = kappa * cosd.row(p).array() + norm;
      }
      break;
    }
    case KernelFamily::rectangular: {
      // Absolute intervals: the row for kernel j is the same for every
      // center p, -log(width) inside [edge_j, edge_{j+1}) and -inf outside.
      Vector row(b_count);
      for (Index j = 0; j < j_count; ++j) {
        const Scalar lo = spec.params[static_cast<std::size_t>(j)];
        const Scalar hi = spec.params[static_cast<std::size_t>(j) + 1];
        const Scalar inside = -std::log(hi - lo);
        for (Index b = 0; b < b_count; ++b)
          row[b] = (xs[b] >= lo && xs[b] < hi) ? inside : kNegInf;
        for (Index p = 0; p < p_count; ++p) out.row(p * j_count + j) = row;
      }
      break;
    }
  }
  return out;
}

std::vector<Scalar> default_gaussian_grid() {
  std::vector<Scalar> grid;
  for (int i = 0; i < 6; ++i) grid.push_back(0.25 + 0.5 * i);
  return grid;
}

std::vector<Scalar> default_von_mises_grid() {
  // Scales s_j = j pi / 250 for j = 1..20; concentrations kappa = 1/s^2.
  std::vector<Scalar> grid;
  for (int j = 1; j <= 20; ++j) {
    const Scalar s = static_cast<Scalar>(j) * kPi / 250.0;
    grid.push_back(1.0 / (s * s));
  }
  return grid;
}

}  // namespace kmn
