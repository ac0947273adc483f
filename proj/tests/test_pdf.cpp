#include <doctest.h>

#include <cmath>
#include <random>

#include "atfm/piecewise_pdf.hpp"
#include "atfm/polynomial.hpp"
#include "oracles.hpp"

using namespace atfm;
using doctest::Approx;

TEST_SUITE("polynomial") {
  TEST_CASE("taylor shift matches direct evaluation") {
    const poly::Coeffs p{1.0, -2.0, 0.5, 3.0};
    const auto q = poly::taylor_shift(p, 1.5);
    for (double s : {-1.0, 0.0, 0.3, 2.0}) CHECK(poly::eval(q, s) == Approx(poly::eval(p, s + 1.5)).epsilon(1e-13));
  }

  TEST_CASE("antiderivative and derivative invert each other") {
    const poly::Coeffs p{2.0, 0.0, -1.0, 4.0};
    const auto back = poly::derivative(poly::antiderivative(p));
    REQUIRE(back.size() == p.size());
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(back[i] == Approx(p[i]));
  }

  TEST_CASE("multiply then evaluate") {
    const poly::Coeffs a{1.0, 1.0}, b{-1.0, 1.0};
    const auto c = poly::multiply(a, b);
    CHECK(poly::eval(c, 3.0) == Approx(8.0));
  }

  TEST_CASE("moments of a constant") {
    const poly::Coeffs one{1.0};
    CHECK(poly::moment(one, 0, 2.0) == Approx(2.0));
    CHECK(poly::moment(one, 1, 2.0) == Approx(2.0));
    CHECK(poly::moment(one, 2, 3.0) == Approx(9.0));
  }
}

TEST_SUITE("piecewise_pdf") {
  TEST_CASE("uniform density, cdf and moments") {
    const auto u = uniform_pdf({-5.0, 10.0});
    CHECK(u.lower() == -5.0);
    CHECK(u.upper() == 10.0);
    CHECK(u.density(0.0) == Approx(1.0 / 15.0));
    CHECK(u.density(11.0) == 0.0);
    CHECK(u.cdf(2.5) == Approx(0.5));
    CHECK(u.expectation() == Approx(2.5));
    CHECK(u.variance() == Approx(225.0 / 12.0));
  }

  TEST_CASE("invalid inputs are rejected") {
    CHECK_THROWS_AS(uniform_pdf({1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(PiecewisePdf::from_pieces({0.0, 1.0}, {{2.0}}), std::invalid_argument);
    CHECK_THROWS_AS(PiecewisePdf::from_pieces({0.0, 1.0, 0.5}, {{1.0}, {1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(PiecewisePdf::from_pieces({0.0, 1.0, 2.0}, {{1.5}, {-0.5}}), std::domain_error);
  }

  TEST_CASE("small round-off in the mass is renormalised") {
    const auto f = PiecewisePdf::from_pieces({0.0, 1.0}, {{1.0 + 5e-7}});
    CHECK(f.cdf(1.0) == Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("triangle from two unit uniforms") {
    const auto t = convolve(uniform_pdf({0.0, 1.0}), uniform_pdf({0.0, 1.0}));
    CHECK(t.lower() == Approx(0.0));
    CHECK(t.upper() == Approx(2.0));
    CHECK(t.density(1.0) == Approx(1.0));
    CHECK(t.density(0.5) == Approx(0.5));
    CHECK(t.cdf(1.0) == Approx(0.5));
    CHECK(t.cdf(1.5) == Approx(0.875));
  }

  TEST_CASE("toy chain matches the inclusion-exclusion oracle") {
    const std::vector<oracle::Uniform> us{{-5, 10}, {10, 12}, {15, 20}, {12, 18}};
    auto f = uniform_pdf({-5, 10});
    for (std::size_t i = 1; i < us.size(); ++i) f = convolve(f, uniform_pdf({us[i].a, us[i].b}));
    CHECK(f.expectation() == Approx(46.0).epsilon(1e-12));
    CHECK(f.variance() == Approx(290.0 / 12.0).epsilon(1e-12));
    for (double t = 30.0; t <= 65.0; t += 0.7) CHECK(f.cdf(t) == Approx(oracle::uniform_sum_cdf(us, t)).epsilon(1e-10));
  }

  TEST_CASE("convolution agrees with a 10^4-cell numeric grid") {
    const double h = 40.0 / 1e4;
    const std::vector<oracle::Uniform> us{{-5, 10}, {10, 12}, {15, 20}};
    auto g = oracle::tabulate_uniform(us[0], h);
    auto f = uniform_pdf({us[0].a, us[0].b});
    for (std::size_t i = 1; i < us.size(); ++i) {
      g = oracle::grid_convolve(g, oracle::tabulate_uniform(us[i], h));
      f = convolve(f, uniform_pdf({us[i].a, us[i].b}));
    }
    for (double t = 21.0; t < 42.0; t += 1.3) CHECK(f.cdf(t) == Approx(g.cdf(t)).epsilon(2e-3));
    CHECK(f.expectation() == Approx(g.mean()).epsilon(1e-3));
  }

  TEST_CASE("point masses shift the other operand") {
    const auto u = uniform_pdf({1.0, 3.0});
    const auto s = convolve(point_mass(4.0), u);
    CHECK(s.lower() == Approx(5.0));
    CHECK(s.upper() == Approx(7.0));
    CHECK(s.expectation() == Approx(6.0));
    const auto d = convolve(point_mass(1.0), point_mass(2.5));
    REQUIRE(d.is_point_mass());
    CHECK(*d.point_location() == Approx(3.5));
    CHECK(d.cdf(3.5) == 1.0);
    CHECK(d.cdf_below(3.5) == 0.0);
    CHECK(d.variance() == 0.0);
  }

  TEST_CASE("shift moves support and mean") {
    const auto u = shift(uniform_pdf({10.0, 12.0}), 2.0);
    CHECK(u.lower() == Approx(12.0));
    CHECK(u.expectation() == Approx(13.0));
    CHECK(u.variance() == Approx(4.0 / 12.0));
  }

  TEST_CASE("piece cap raises DiscretizationRequired") {
    auto f = uniform_pdf({0.0, 1.0});
    const double widths[] = {1.1, 1.37, 0.93, 2.21, 1.77, 0.61};
    CHECK_THROWS_AS(
        [&] {
          for (double w : widths) f = convolve(f, uniform_pdf({0.0, w}), {8});
        }(),
        DiscretizationRequired);
  }

  TEST_CASE("discretize keeps mass and bounds cdf error") {
    auto f = convolve(uniform_pdf({0.0, 3.0}), uniform_pdf({0.0, 2.0}));
    const auto d = discretize(f, 0.25);
    CHECK(d.pdf.cdf(d.pdf.upper()) == Approx(1.0));
    CHECK(d.max_cdf_deviation < 0.05);
    for (double t = 0.0; t <= 5.0; t += 0.25) CHECK(std::abs(d.pdf.cdf(t) - f.cdf(t)) <= d.max_cdf_deviation + 1e-12);
  }

  TEST_CASE("simplify merges identical neighbours") {
    const auto f = PiecewisePdf::from_pieces({0.0, 1.0, 2.0}, {{0.5}, {0.5}});
    const auto s = simplify(f);
    CHECK(s.piece_count() == 1);
    CHECK(s.cdf(1.3) == Approx(f.cdf(1.3)));
  }

  TEST_CASE("cdf_many equals pointwise cdf") {
    const auto f = convolve(uniform_pdf({-5, 10}), uniform_pdf({10, 12}));
    std::vector<double> ts;
    for (double t = 0.0; t <= 30.0; t += 0.37) ts.push_back(t);
    const auto many = f.cdf_many(ts);
    for (std::size_t i = 0; i < ts.size(); ++i) CHECK(many[i] == Approx(f.cdf(ts[i])).epsilon(1e-13));
  }

  TEST_CASE("sampling passes a KS test at the 1% level") {
    const auto f = convolve(convolve(uniform_pdf({-5, 10}), uniform_pdf({10, 12})), uniform_pdf({15, 20}));
    RngState rng = RngState::derive(99, {1});
    std::vector<double> xs;
    for (int i = 0; i < 20000; ++i) xs.push_back(sample(f, rng));
    const std::vector<oracle::Uniform> us{{-5, 10}, {10, 12}, {15, 20}};
    const double d = oracle::ks_statistic(xs, [&](double t) { return oracle::uniform_sum_cdf(us, t); });
    CHECK(d < oracle::ks_critical_1pct(xs.size()));
  }

  TEST_CASE("sample consumes exactly one draw") {
    const auto f = uniform_pdf({0.0, 1.0});
    RngState rng(7);
    sample(f, rng);
    CHECK(rng.counter() == 1);
  }

  TEST_CASE("random chains stay normalised with additive moments") {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> lo(-10.0, 10.0), width(0.5, 8.0);
    std::uniform_int_distribution<int> len(1, 5);
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<oracle::Uniform> us;
      const int n = len(gen) + 1;
      for (int i = 0; i < n; ++i) {
        const double a = lo(gen);
        us.push_back({a, a + width(gen)});
      }
      auto f = uniform_pdf({us[0].a, us[0].b});
      for (int i = 1; i < n; ++i) f = convolve(f, uniform_pdf({us[i].a, us[i].b}));
      CHECK(f.cumulative().back() == Approx(1.0).epsilon(1e-9));
      CHECK(f.expectation() == Approx(oracle::uniform_sum_mean(us)).epsilon(1e-9));
      CHECK(f.variance() == Approx(oracle::uniform_sum_variance(us)).epsilon(1e-8));
    }
  }
}
