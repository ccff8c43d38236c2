#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "kmn/types.hpp"

namespace kmn {

// Density values tabulated on an ordered grid.
struct GridEval {
  Vector grid;
  Vector values;
  Manifold domain = Manifold::real_line;
};

GridEval make_grid_eval(Vector grid, Vector values,
                        Manifold domain = Manifold::real_line);

// Composite Simpson integral of f over [lo, hi]; n is the number of grid
// points and must be odd and >= 3.
Scalar integrate_density(const std::function<Scalar(Scalar)>& f, Scalar lo,
                         Scalar hi, Index n);

// Simpson weights applied to already-tabulated values on a uniform grid
// with spacing dx (values.size() odd and >= 3).
Scalar simpson_uniform(const Eigen::Ref<const Vector>& values, Scalar dx);

// Trapezoid estimate of the KL divergence integral p log(p/q) on a shared
// grid. q must be positive wherever p is; densities below 1e-300 are clamped
// inside the logs.
Scalar grid_kl(const GridEval& p, const GridEval& q);

// Uniformly spaced grid with n points, first point at lo, last at hi.
Vector linspace(Scalar lo, Scalar hi, Index n);

// Heatmap CSV: header "t,x,density", one row per (time, grid point). The
// slice callback returns the density values over xs for one time index; the
// caller owns the model-specific evaluation.
void emit_heatmap(const std::vector<int>& times,
                  const Eigen::Ref<const Vector>& xs,
                  const std::function<Vector(int)>& slice, std::ostream& os);

// Model comparison data behind the scatter plots: one row per (trial,
// model), then per-model mean rows (trial_id column "mean") and pairwise
// win-rate rows (trial_id "winrate", model "A>B"). Ties count half.
struct ComparisonSummary {
  std::vector<std::string> names;
  Vector means;
  Matrix win_rate;  // win_rate(a, b) = fraction of trials where a beats b
};

ComparisonSummary emit_comparison(
    const std::vector<std::string>& model_names,
    const std::vector<Vector>& per_trial_nll,
    const std::vector<long>& trial_ids, std::ostream& os);

// Training-curve CSV: header "iteration,split,loss".
struct CurvePoint {
  long iteration = 0;
  std::string split;
  Scalar loss = 0.0;
};

void write_curve_csv(const std::vector<CurvePoint>& curve, std::ostream& os);

// Full round-trip decimal formatting (17 significant digits), shared by
// every CSV writer so reruns stay byte-identical.
std::string format_g17(Scalar v);

}  // namespace kmn
