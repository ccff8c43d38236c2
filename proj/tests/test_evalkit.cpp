#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "kmn/evalkit.hpp"
#include "kmn/kernels.hpp"

using namespace kmn;

TEST_SUITE("evalkit") {

TEST_CASE("simpson is exact for cubics") {
  // composite Simpson integrates polynomials of degree <= 3 exactly
  const double got = integrate_density(
      [](double x) { return x * x * x - 2 * x * x + 4; }, -1.0, 2.5, 5);
  // antiderivative x^4/4 - 2x^3/3 + 4x
  auto F = [](double x) { return x * x * x * x / 4 - 2 * x * x * x / 3 + 4 * x; };
  CHECK(got == doctest::Approx(F(2.5) - F(-1.0)).epsilon(1e-12));
}

TEST_CASE("simpson rejects even and undersized grids") {
  auto f = [](double) { return 1.0; };
  CHECK_THROWS_AS(integrate_density(f, 0.0, 1.0, 4), ValidationError);
  CHECK_THROWS_AS(integrate_density(f, 0.0, 1.0, 1), ValidationError);
  CHECK_THROWS_AS(integrate_density(f, 1.0, 0.0, 5), ValidationError);
}

TEST_CASE("standard gaussian mass") {
  const double mass = integrate_density(
      [](double x) { return gaussian_eval(x, 0.0, 1.0); }, -8.0, 8.0, 2001);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("simpson_uniform matches integrate_density on a table") {
  const Vector xs = linspace(0.0, 2.0, 101);
  Vector vals(xs.size());
  for (Index i = 0; i < xs.size(); ++i) vals[i] = std::exp(-xs[i]);
  const double a = simpson_uniform(vals, xs[1] - xs[0]);
  const double b = integrate_density([](double x) { return std::exp(-x); },
                                     0.0, 2.0, 101);
  CHECK(a == doctest::Approx(b).epsilon(1e-14));
}

TEST_CASE("grid_kl closed form for shifted unit gaussians") {
  // KL(N(0,1) || N(mu,1)) = mu^2 / 2
  const Vector grid = linspace(-8.0, 8.0, 4001);
  Vector p(grid.size()), q(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    p[i] = gaussian_eval(grid[i], 0.0, 1.0);
    q[i] = gaussian_eval(grid[i], 0.5, 1.0);
  }
  const double kl = grid_kl(make_grid_eval(grid, p), make_grid_eval(grid, q));
  CHECK(kl == doctest::Approx(0.125).epsilon(1e-3));
  CHECK(grid_kl(make_grid_eval(grid, p), make_grid_eval(grid, p)) ==
        doctest::Approx(0.0).epsilon(1).scale(1e-12));
}

TEST_CASE("grid_kl rejects support violations and mismatched grids") {
  const Vector grid = linspace(0.0, 1.0, 5);
  Vector p(5), q(5);
  p << 1, 1, 1, 1, 1;
  q << 1, 1, 0, 1, 1;  // zero where p > 0
  CHECK_THROWS_AS(grid_kl(make_grid_eval(grid, p), make_grid_eval(grid, q)),
                  ValidationError);
  const Vector other = linspace(0.0, 2.0, 5);
  CHECK_THROWS_AS(grid_kl(make_grid_eval(grid, p), make_grid_eval(other, p)),
                  ValidationError);
}

TEST_CASE("make_grid_eval validates ordering and sign") {
  Vector bad_grid(3), vals(3);
  bad_grid << 0.0, 2.0, 1.0;
  vals << 1.0, 1.0, 1.0;
  CHECK_THROWS_AS(make_grid_eval(bad_grid, vals), ValidationError);
  Vector grid(3), neg(3);
  grid << 0.0, 1.0, 2.0;
  neg << 1.0, -0.5, 1.0;
  CHECK_THROWS_AS(make_grid_eval(grid, neg), ValidationError);
}

TEST_CASE("linspace endpoints are exact") {
  const Vector v = linspace(-1.5, 4.5, 13);
  CHECK(v[0] == -1.5);
  CHECK(v[12] == 4.5);
  CHECK(v[6] == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("emit_heatmap writes the time-by-state cross product") {
  Vector xs(3);
  xs << 0.0, 0.5, 1.0;
  std::ostringstream os;
  emit_heatmap({4, 9}, xs,
               [&](int t) {
                 Vector v(3);
                 v << t, t + 0.5, t + 1.0;
                 return v;
               },
               os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "t,x,density");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 6);
  CHECK(os.str().find("4,0.5,4.5") != std::string::npos);
  CHECK(os.str().find("9,1,10") != std::string::npos);
}

TEST_CASE("emit_comparison means, win rates and row counts") {
  std::vector<std::string> names = {"a", "b"};
  Vector na(3), nb(3);
  na << 1.0, 2.0, 3.0;
  nb << 2.0, 2.0, 2.0;  // a wins trial 0, ties trial 1, loses trial 2
  std::ostringstream os;
  const ComparisonSummary s =
      emit_comparison(names, {na, nb}, {10, 11, 12}, os);
  CHECK(s.means[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(s.means[1] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(s.win_rate(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.win_rate(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "trial_id,model,mean_nll");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  // 3 trials x 2 models + 2 mean rows + 2 win-rate rows
  CHECK(rows == 10);
  CHECK(os.str().find("mean,a,2") != std::string::npos);
  CHECK(os.str().find("winrate,a>b,0.5") != std::string::npos);
}

TEST_CASE("emit_comparison with identical models gives win rate one half") {
  Vector n(4);
  n << 0.5, -1.0, 2.0, 0.0;
  std::ostringstream os;
  const ComparisonSummary s =
      emit_comparison({"x", "y"}, {n, n}, {0, 1, 2, 3}, os);
  CHECK(s.win_rate(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("emit_comparison rejects misaligned lists") {
  Vector a(2), b(3);
  a << 1, 2;
  b << 1, 2, 3;
  std::ostringstream os;
  CHECK_THROWS_AS(emit_comparison({"a", "b"}, {a, b}, {0, 1}, os),
                  ValidationError);
}

TEST_CASE("write_curve_csv schema") {
  std::vector<CurvePoint> curve = {
      {100, "train", 1.5}, {100, "valid", 1.75}, {200, "train", 1.25}};
  std::ostringstream os;
  write_curve_csv(curve, os);
  CHECK(os.str() ==
        "iteration,split,loss\n100,train,1.5\n100,valid,1.75\n200,train,1.25\n");
}

TEST_CASE("format_g17 round-trips doubles") {
  for (double v : {0.1, 1.0 / 3.0, -0.0, 1e300, 2.2250738585072014e-308,
                   123456789.123456789}) {
    CHECK(std::stod(format_g17(v)) == v);
  }
}

}  // TEST_SUITE
