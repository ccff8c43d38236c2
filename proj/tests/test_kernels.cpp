#include <doctest.h>

#include <cmath>
#include <vector>

#include "kmn/evalkit.hpp"
#include "kmn/kernels.hpp"
#include "kmn/rng.hpp"

using namespace kmn;

TEST_SUITE("kernels") {

TEST_CASE("gaussian_eval hits the standard normal values") {
  CHECK(gaussian_eval(0.0, 0.0, 1.0) ==
        doctest::Approx(0.3989422804014327).epsilon(1e-12));
  CHECK(gaussian_eval(1.0, 0.0, 1.0) ==
        doctest::Approx(0.24197072451914337).epsilon(1e-12));
  // symmetric in (x, center)
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
    CHECK(gaussian_eval(a, b, 0.7) == doctest::Approx(gaussian_eval(b, a, 0.7))
                                          .epsilon(1e-14));
  }
  CHECK(std::exp(gaussian_log_eval(2.0, 0.5, 1.3)) ==
        doctest::Approx(gaussian_eval(2.0, 0.5, 1.3)).epsilon(1e-13));
  CHECK_THROWS_AS(gaussian_eval(0.0, 0.0, 0.0), ValidationError);
}

TEST_CASE("bessel_i0 series against high-precision references") {
  // Reference digits computed from the ascending series at long-double
  // precision and cross-checked against standard tables.
  CHECK(bessel_i0(0.0) == 1.0);
  CHECK(bessel_i0(1.0) == doctest::Approx(1.2660658777520084).epsilon(1e-12));
  CHECK(bessel_i0(2.0) == doctest::Approx(2.2795853023360673).epsilon(1e-12));
  CHECK(bessel_i0(5.0) == doctest::Approx(27.239871823604442).epsilon(1e-12));
  CHECK(bessel_i0(-3.0) == doctest::Approx(bessel_i0(3.0)).epsilon(1e-15));
}

TEST_CASE("log_bessel_i0 agrees with the series on both sides of the switch") {
  for (double x : {0.5, 10.0, 100.0, 499.5, 500.0}) {
    CHECK(log_bessel_i0(x) ==
          doctest::Approx(std::log(bessel_i0(x))).epsilon(1e-12));
  }
  // The series stays finite up to x ~ 700, so it still serves as the
  // reference a stretch past the switch where only the asymptotic branch
  // runs inside log_bessel_i0.
  for (double x : {500.5, 510.0, 600.0, 700.0}) {
    CHECK(log_bessel_i0(x) ==
          doctest::Approx(std::log(bessel_i0(x))).epsilon(1e-12));
  }
  // Beyond the series range the leading behavior x - log(2 pi x)/2 must
  // dominate; the correction factor is tiny there.
  const double x = 6333.0;
  const double lead = x - 0.5 * std::log(kTwoPi * x);
  CHECK(log_bessel_i0(x) > lead);
  CHECK(log_bessel_i0(x) < lead + 1e-4);
}

TEST_CASE("von_mises_eval normalizes and peaks at the center") {
  CHECK(von_mises_eval(0.7, 0.7, 1.0) ==
        doctest::Approx(std::exp(1.0) / (kTwoPi * bessel_i0(1.0)))
            .epsilon(1e-12));
  // kappa -> 0 limit approaches the uniform circle density
  CHECK(von_mises_eval(1.2, -0.4, 1e-10) ==
        doctest::Approx(1.0 / kTwoPi).epsilon(1e-8));
  // periodicity
  CHECK(von_mises_eval(0.3 + kTwoPi, 1.0, 4.0) ==
        doctest::Approx(von_mises_eval(0.3, 1.0, 4.0)).epsilon(1e-12));
  CHECK_THROWS_AS(von_mises_eval(0.0, 0.0, 0.0), ValidationError);
  // the quadrature normalization check runs over the whole default grid,
  // including the sharpest kappa ~ 6333 where the log-space path matters
  for (double kappa : default_von_mises_grid()) {
    const double mass = integrate_density(
        [&](double t) { return von_mises_eval(t, 0.3, kappa); }, -kPi, kPi,
        20001);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("gaussian grid kernels integrate to one") {
  for (double sigma : default_gaussian_grid()) {
    const double mass = integrate_density(
        [&](double x) { return gaussian_eval(x, 1.5, sigma); },
        1.5 - 8 * sigma, 1.5 + 8 * sigma, 2001);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("rectangular_eval is the uniform density on its interval") {
  CHECK(rectangular_eval(0.1, 0.0, 0.25) == doctest::Approx(4.0));
  CHECK(rectangular_eval(0.0, 0.0, 0.25) == doctest::Approx(4.0));  // lo inclusive
  CHECK(rectangular_eval(0.25, 0.0, 0.25) == 0.0);                  // hi exclusive
  CHECK(rectangular_eval(-0.01, 0.0, 0.25) == 0.0);
  CHECK_THROWS_AS(rectangular_eval(0.0, 1.0, 1.0), ValidationError);
  // The density is half-open at the right edge, so a grid node landing
  // exactly on hi would read 0 and the quadrature would drop one panel's
  // worth of mass. Sampling by left limit gives the rule the constant bin
  // value it is exact for, without changing the density's convention.
  const double mass = integrate_density(
      [&](double x) {
        return rectangular_eval(std::nextafter(x, 0.0), 0.0, 0.25);
      },
      0.0, 0.25, 2001);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("default grids match the experiment parameterization") {
  const auto g = default_gaussian_grid();
  REQUIRE(g.size() == 6);
  for (int j = 0; j < 6; ++j)
    CHECK(g[j] == doctest::Approx(0.25 + 0.5 * j).epsilon(1e-15));
  const auto v = default_von_mises_grid();
  REQUIRE(v.size() == 20);
  for (int j = 1; j <= 20; ++j) {
    const double scale = j * kPi / 250.0;
    CHECK(v[j - 1] == doctest::Approx(1.0 / (scale * scale)).epsilon(1e-12));
  }
}

TEST_CASE("kernel_sample draws from the right distributions") {
  Rng rng(11);
  SUBCASE("gaussian mean within a CLT bound") {
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
      sum += kernel_sample(KernelFamily::gaussian, 2.0, 0.5, rng);
    CHECK(std::abs(sum / n - 2.0) < 4 * 0.5 / std::sqrt(double(n)));
  }
  SUBCASE("rectangular draws stay inside the interval") {
    for (int i = 0; i < 10000; ++i) {
      // (center, param) = (midpoint, width): interval [1.0, 1.5)
      double x = kernel_sample(KernelFamily::rectangular, 1.25, 0.5, rng);
      CHECK(x >= 1.0);
      CHECK(x < 1.5);
    }
  }
  SUBCASE("high-concentration von Mises stays near the center") {
    int close = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      double x = kernel_sample(KernelFamily::von_mises, 1.0, 1e4, rng);
      CHECK(x > -kPi);
      CHECK(x <= kPi);
      if (circ_dist(x, 1.0) < 0.1) ++close;
    }
    CHECK(close >= n * 99 / 100);
  }
}

TEST_CASE("log_kernel_matrix lays out rows as p*J + j") {
  std::vector<Scalar> centers = {-1.0, 0.5};
  KernelSpec spec;
  spec.family = KernelFamily::gaussian;
  spec.params = {0.3, 1.1};
  Vector xs(3);
  xs << -1.2, 0.0, 2.0;
  const Matrix lk = log_kernel_matrix(centers, spec, xs);
  REQUIRE(lk.rows() == 4);
  REQUIRE(lk.cols() == 3);
  for (int p = 0; p < 2; ++p)
    for (int j = 0; j < 2; ++j)
      for (int b = 0; b < 3; ++b)
        CHECK(lk(p * 2 + j, b) ==
              doctest::Approx(gaussian_log_eval(xs[b], centers[p],
                                                spec.params[j]))
                  .epsilon(1e-13));
}

TEST_CASE("rectangular log_kernel_matrix is -inf outside the bin") {
  std::vector<Scalar> centers = {0.125, 0.375};  // midpoints, ignored by eval
  KernelSpec spec;
  spec.family = KernelFamily::rectangular;
  spec.params = {0.0, 0.25, 0.5};
  Vector xs(2);
  xs << 0.1, 0.3;
  const Matrix lk = log_kernel_matrix(centers, spec, xs);
  REQUIRE(lk.rows() == 4);  // 2 centers x 2 intervals
  CHECK(lk(0, 0) == doctest::Approx(std::log(4.0)));   // x=0.1 in [0,0.25)
  CHECK(lk(1, 0) == -std::numeric_limits<double>::infinity());
  CHECK(lk(0, 1) == -std::numeric_limits<double>::infinity());
  CHECK(lk(1, 1) == doctest::Approx(std::log(4.0)));
  // center index does not matter for absolute intervals
  CHECK(lk(2, 0) == lk(0, 0));
  CHECK(lk(3, 1) == lk(1, 1));
}

TEST_CASE("validate_kernel_spec rejects bad specs") {
  KernelSpec spec;
  spec.family = KernelFamily::gaussian;
  spec.params = {0.5, -0.1};
  CHECK_THROWS_AS(validate_kernel_spec(spec), ValidationError);
  spec.params = {0.5};
  spec.manifold = Manifold::circle;  // gaussian kernels live on the line
  CHECK_THROWS_AS(validate_kernel_spec(spec), ValidationError);
  spec.family = KernelFamily::von_mises;
  CHECK_NOTHROW(validate_kernel_spec(spec));
  spec.manifold = Manifold::real_line;
  CHECK_THROWS_AS(validate_kernel_spec(spec), ValidationError);
  KernelSpec rect;
  rect.family = KernelFamily::rectangular;
  rect.params = {0.0, 0.5, 0.25};  // not increasing
  CHECK_THROWS_AS(validate_kernel_spec(rect), ValidationError);
}

}  // TEST_SUITE
