#include "kmn/evalkit.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace kmn {

GridEval make_grid_eval(Vector grid, Vector values, Manifold domain) {
  if (grid.size() != values.size())
    throw ValidationError("grid and values must have equal length");
  if (grid.size() < 2) throw ValidationError("grid needs at least two points");
  for (Index i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw ValidationError("grid must be strictly increasing");
  if ((values.array() < 0.0).any())
    throw ValidationError("density values must be non-negative");
  GridEval g;
  g.grid = std::move(grid);
  g.values = std::move(values);
  g.domain = domain;
  return g;
}

Scalar integrate_density(const std::function<Scalar(Scalar)>& f, Scalar lo,
                         Scalar hi, Index n) {
  if (!(lo < hi)) throw ValidationError("integration needs lo < hi");
  if (n < 3 || n % 2 == 0)
    throw ValidationError("Simpson rule needs an odd point count >= 3");
  const Scalar dx = (hi - lo) / static_cast<Scalar>(n - 1);
  Vector values(n);
  for (Index i = 0; i < n; ++i)
    values[i] = f(lo + dx * static_cast<Scalar>(i));
  return simpson_uniform(values, dx);
}

Scalar simpson_uniform(const Eigen::Ref<const Vector>& values, Scalar dx) {
  const Index n = values.size();
  if (n < 3 || n % 2 == 0)
    throw ValidationError("Simpson rule needs an odd point count >= 3");
  Scalar sum = values[0] + values[n - 1];
  for (Index i = 1; i < n - 1; ++i) sum += values[i] * (i % 2 == 0 ? 2.0 : 4.0);
  return sum * dx / 3.0;
}

Scalar grid_kl(const GridEval& p, const GridEval& q) {
  if (p.grid.size() != q.grid.size() ||
      (p.grid - q.grid).cwiseAbs().maxCoeff() != 0.0)
    throw ValidationError("grid_kl needs identical grids");
  const Index n = p.grid.size();
  Vector integrand(n);
  for (Index i = 0; i < n; ++i) {
    const Scalar pv = p.values[i];
    if (pv <= 0.0) {
      integrand[i] = 0.0;  // lim p->0 of p log(p/q)
      continue;
    }
    if (!(q.values[i] > 0.0))
      throw ValidationError("grid_kl support violation: q = 0 where p > 0");
    const Scalar pc = std::max(pv, 1e-300);
    const Scalar qc = std::max(q.values[i], 1e-300);
    integrand[i] = pv * (std::log(pc) - std::log(qc));
  }
  Scalar total = 0.0;
  for (Index i = 0; i + 1 < n; ++i)
    total += 0.5 * (integrand[i] + integrand[i + 1]) *
             (p.grid[i + 1] - p.grid[i]);
  return total;
}

Vector linspace(Scalar lo, Scalar hi, Index n) {
  if (n < 2) throw ValidationError("linspace needs at least two points");
  Vector v(n);
  const Scalar dx = (hi - lo) / static_cast<Scalar>(n - 1);
  for (Index i = 0; i < n; ++i) v[i] = lo + dx * static_cast<Scalar>(i);
  v[n - 1] = hi;
  return v;
}

std::string format_g17(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void emit_heatmap(const std::vector<int>& times,
                  const Eigen::Ref<const Vector>& xs,
                  const std::function<Vector(int)>& slice, std::ostream& os) {
  os << "t,x,density\n";
  for (int t : times) {
    const Vector values = slice(t);
    if (values.size() != xs.size())
      throw ValidationError("density slice length mismatch");
    for (Index i = 0; i < xs.size(); ++i)
      os << t << ',' << format_g17(xs[i]) << ',' << format_g17(values[i])
         << '\n';
  }
}

ComparisonSummary emit_comparison(
    const std::vector<std::string>& model_names,
    const std::vector<Vector>& per_trial_nll,
    const std::vector<long>& trial_ids, std::ostream& os) {
  const std::size_t models = model_names.size();
  if (per_trial_nll.size() != models)
    throw ValidationError("one NLL list per model required");
  if (models == 0) throw ValidationError("emit_comparison needs models");
  const Index trials = static_cast<Index>(trial_ids.size());
  for (const Vector& v : per_trial_nll)
    if (v.size() != trials)
      throw ValidationError("per-trial NLL lists are misaligned");

  os << "trial_id,model,mean_nll\n";
  for (Index t = 0; t < trials; ++t)
    for (std::size_t m = 0; m < models; ++m)
      os << trial_ids[static_cast<std::size_t>(t)] << ',' << model_names[m]
         << ',' << format_g17(per_trial_nll[m][t]) << '\n';

  ComparisonSummary summary;
  summary.names = model_names;
  summary.means.resize(static_cast<Index>(models));
  for (std::size_t m = 0; m < models; ++m) {
    summary.means[static_cast<Index>(m)] = per_trial_nll[m].mean();
    os << "mean," << model_names[m] << ','
       << format_g17(summary.means[static_cast<Index>(m)]) << '\n';
  }

  summary.win_rate = Matrix::Zero(static_cast<Index>(models),
                                  static_cast<Index>(models));
  for (std::size_t a = 0; a < models; ++a)
    for (std::size_t b = 0; b < models; ++b) {
      if (a == b) continue;
      Scalar wins = 0.0;
      for (Index t = 0; t < trials; ++t) {
        if (per_trial_nll[a][t] < per_trial_nll[b][t])
          wins += 1.0;
        else if (per_trial_nll[a][t] == per_trial_nll[b][t])
          wins += 0.5;
      }
      const Scalar rate = wins / static_cast<Scalar>(trials);
      summary.win_rate(static_cast<Index>(a), static_cast<Index>(b)) = rate;
      os << "winrate," << model_names[a] << '>' << model_names[b] << ','
         << format_g17(rate) << '\n';
    }
  return summary;
}

void write_curve_csv(const std::vector<CurvePoint>& curve, std::ostream& os) {
  os << "iteration,split,loss\n";
  for (const CurvePoint& p : curve)
    os << p.iteration << ',' << p.split << ',' << format_g17(p.loss) << '\n';
}

}  // namespace kmn
