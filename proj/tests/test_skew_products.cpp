#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

#include "chw/errors.hpp"
#include "chw/rng.hpp"
#include "chw/skew_products.hpp"

using namespace chw;

namespace {

// Frozen with mpmath (30 digits): integral of ln(e^{1-2y} + 1/5) over [0,1].
constexpr double kFigure2L1 = 0.205640050350245349522;

double h(double x) { return 1.0 / (1.0 + std::exp(-x)); }

SkewSystem figure1() {
  SkewSystem s;
  s.m = 3;
  s.N = 1;
  s.xi = DisplacementSpec::affine(-1, 2);
  return s;
}

SkewSystem figure2() {
  SkewSystem s = figure1();
  s.r = PerturbationSpec::cubic(0.2);
  return s;
}

}  // namespace

TEST_CASE("conjugacy h and its inverse") {
  CHECK(conjugate_to_interval(0.0).value == 0.5);
  CHECK(conjugate_to_line(0.5).value == 0.0);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double t = -12.0 + 12.0 * k / 9999.0;  // log10 of the distance to an endpoint
    for (const double xhat : {std::pow(10.0, t), 1.0 - std::pow(10.0, t)}) {
      if (xhat < 1e-12 || xhat > 1.0 - 1e-12) continue;
      worst = std::max(worst, std::fabs(conjugate_to_interval(conjugate_to_line(xhat).value).value - xhat));
    }
  }
  CHECK(worst < 1e-12);
  CHECK(conjugate_to_interval(800.0).value == 1.0);
  CHECK(conjugate_to_interval(800.0).saturated);
  CHECK(conjugate_to_interval(-800.0).value == 0.0);
  CHECK(conjugate_to_interval(-800.0).saturated);
  CHECK(std::isinf(conjugate_to_line(0.0).value));
  CHECK(conjugate_to_line(0.0).value < 0);
  CHECK(conjugate_to_line(1.0).saturated);
  CHECK_THROWS_AS(conjugate_to_line(1.5), DomainError);
}

TEST_CASE("fiber_map_interval") {
  const auto none = PerturbationSpec::zero();
  for (const double x : {0.0, 0.1, 0.5, 0.9, 1.0}) CHECK(fiber_map_interval(0.0, x, none, 0.3) == x);
  CHECK(fiber_map_interval(1.0, 0.5, none, 1.0) == doctest::Approx(std::exp(1.0) / (1 + std::exp(1.0))).epsilon(1e-15));
  CHECK(fiber_map_interval(1.0, 0.5, none, 1.0) == doctest::Approx(0.731059).epsilon(1e-6));

  const auto cubic = PerturbationSpec::cubic(0.2);
  const auto xi = DisplacementSpec::affine(-1, 2);
  for (int j = 0; j <= 100; ++j) {
    const double y = j / 100.0;
    CHECK(fiber_map_interval(xi(y), 0.0, cubic, y) == 0.0);
    CHECK(fiber_map_interval(xi(y), 1.0, cubic, y) == 1.0);
  }
  CHECK_THROWS_AS(fiber_map_interval(-1.0, 1.0 / 3.0, PerturbationSpec::cubic(3.0), 0.0), ClassViolation);
  CHECK_THROWS_AS(fiber_map_interval(0.0, 1.5, none, 0.0), DomainError);
}

TEST_CASE("fiber_map_line") {
  const auto none = PerturbationSpec::zero();
  CHECK(fiber_map_line(0.0, 3.25, none, 0.1) == 3.25);
  CHECK(fiber_map_line(0.75, -2.0, none, 0.1) == -1.25);

  SUBCASE("commutes with the interval map through h") {
    const auto xi = DisplacementSpec::affine(-1, 2);
    for (const auto& r : {PerturbationSpec::cubic(0.2), PerturbationSpec::cubic(0.2, PerturbationSpec::Kind::CubicCos)}) {
      double worst = 0.0;
      for (int j = 0; j < 64; ++j) {
        const double y = (j + 0.5) / 64.0;
        for (int i = 0; i <= 600; ++i) {
          const double x = -30.0 + 0.1 * i;
          const double lhs = h(fiber_map_line(xi(y), x, r, y));
          const double rhs = fiber_map_interval(xi(y), h(x), r, y);
          worst = std::max(worst, std::fabs(lhs - rhs));
        }
      }
      CHECK(worst < 1e-9);
    }
  }
  SUBCASE("perturbation decays like e^x near -infinity") {
    const auto r = PerturbationSpec::cubic(0.2);
    double C = 0.0;
    for (int i = 0; i <= 250; ++i) {
      const double x = -30.0 + 0.1 * i;
      for (const double xi : {-1.0, 0.0, 1.0})
        C = std::max(C, std::fabs(fiber_map_line(xi, x, r, 0.5) - x - xi) / std::exp(x));
    }
    // the fitted constant stays bounded (about rho e^{|xi|})
    CHECK(C < 1.0);
    CHECK(C > 0.0);
  }
}

TEST_CASE("iterate_trajectory") {
  SUBCASE("zero displacement gives a constant series") {
    SkewSystem s;
    s.m = 2;
    s.N = 1;
    s.xi = DisplacementSpec::table({{Rational(0), Rational(0)}, {Rational(1), Rational(0)}});
    const auto path = sample_path(build_subshift(2, 1), 4, 200);
    const auto t = iterate_trajectory(s, path, 0.3, 150);
    REQUIRE(t.x_interval.size() == 151);
    for (const double v : t.x_interval) CHECK(v == 0.3);
  }
  SUBCASE("errors") {
    const auto path = sample_path(build_subshift(2, 1), 4, 10);
    CHECK_THROWS_AS(iterate_trajectory(figure1(), path, 0.5, 5), ValidationError);
    const auto short_path = sample_path(build_subshift(3, 1), 4, 10);
    CHECK_THROWS_AS(iterate_trajectory(figure1(), short_path, 0.5, 11), DomainError);
  }
  SUBCASE("Figure 1 system shows deep sojourns at both ends") {
    const auto sys = figure1();
    const std::size_t n = 100000;
    const auto path = sample_path(build_subshift(3, 1), 2, n + sys.window);
    const auto t = iterate_trajectory(sys, path, 0.5, n);
    REQUIRE_FALSE(t.truncated);
    const auto near0 = std::count_if(t.x_interval.begin(), t.x_interval.end(), [](double v) { return v < 1e-6; });
    const auto high = std::count_if(t.x_interval.begin(), t.x_interval.end(), [](double v) { return v > 0.9; });
    CHECK(near0 > 0);
    CHECK(high > 0);
  }
  SUBCASE("Figure 2 system is repelled from 1") {
    const auto sys = figure2();
    const std::size_t n = 100000;
    const auto path = sample_path(build_subshift(3, 1), 2, n + sys.window);
    const auto t = iterate_trajectory(sys, path, 0.5, n);
    REQUIRE_FALSE(t.truncated);
    std::size_t entries0 = 0, high = 0, low = 0;
    for (std::size_t k = 0; k < t.x_interval.size(); ++k) {
      const double v = t.x_interval[k];
      high += v > 0.9;
      low += v < 1e-6;
      if (k > 0 && v < 1e-6 && t.x_interval[k - 1] >= 1e-6) ++entries0;
    }
    CHECK(entries0 >= 2);
    CHECK(high < low);
  }
}

TEST_CASE("the two charts produce h-images of each other for the same path") {
  SkewSystem interval = figure2();
  SkewSystem line = interval;
  line.chart = Chart::Line;
  const std::size_t n = 20000;
  const auto path = sample_path(build_subshift(3, 1), 77, n + interval.window);
  const auto a = iterate_trajectory(interval, path, 0.4, n);
  const auto b = iterate_trajectory(line, path, conjugate_to_line(0.4).value, n);
  REQUIRE(a.x_interval.size() == b.x_interval.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < a.x_interval.size(); ++k) {
    CHECK(b.x_interval[k] == conjugate_to_interval(b.x_line[k]).value);
    worst = std::max(worst, std::fabs(a.x_interval[k] - b.x_interval[k]));
  }
  // not bitwise: the interval chart rounds differently until it switches charts
  CHECK(worst < 1e-6);
}

TEST_CASE("DrivingWindow reproduces window_midpoint bitwise") {
  const auto spec = build_subshift(3, 2);
  const std::size_t W = 17;
  DrivingWindow window(spec, 1234, W);
  const auto path = sample_path(spec, 1234, 500 + W);
  for (std::size_t k = 0; k < 500; ++k) {
    CHECK(window.current() == path.symbols[k]);
    CHECK(window.y() == window_midpoint(std::span(path.symbols.data() + k, W), 3, 2));
    window.advance();
  }
}

TEST_CASE("lyapunov_exponents") {
  const auto l1 = lyapunov_exponents(figure1(), 20000, 1);
  CHECK(std::fabs(l1.L0) < 1e-10);
  CHECK(std::fabs(l1.L1) < 1e-10);
  CHECK(std::fabs(l1.L0_monte_carlo) < 4 * l1.L0_std_error + 1e-12);

  const auto l2 = lyapunov_exponents(figure2(), 20000, 1);
  CHECK(std::fabs(l2.L0) < 1e-10);
  CHECK(l2.L1 > 0.0);
  CHECK(std::fabs(l2.L1 - kFigure2L1) < 1e-10);
  CHECK(l2.L1_quadrature_error < 1e-10);
  CHECK(std::fabs(l2.L1_monte_carlo - kFigure2L1) < 4 * l2.L1_std_error);
}

TEST_CASE("validate_class_membership") {
  SUBCASE("Figure 1 system passes with zero budget") {
    const auto report = validate_class_membership(figure1(), 1.0, 0.0);
    CHECK(report.passed());
    CHECK(report.find("perturbation_budget")->worst == 0.0);
  }
  SUBCASE("cubic budget") {
    const auto sys = figure2();
    const auto pass = validate_class_membership(sys, 1.0, 0.2);
    CHECK(pass.passed());
    // max |r| = 4/135 at x = 2/3, max |dr/dx| = rho at x = 1
    CHECK(pass.find("perturbation_budget")->worst == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(pass.find("vanishing_order")->worst <= 0.2 + 1e-12);
    CHECK_FALSE(validate_class_membership(sys, 1.0, 4.0 / 135.0).passed());
    CHECK_FALSE(validate_class_membership(sys, 0.1, 0.25).passed());
  }
  SUBCASE("large cubic fails monotonicity") {
    SkewSystem sys = figure1();
    sys.r = PerturbationSpec::cubic(10.0);
    const auto report = validate_class_membership(sys, 100.0, 100.0);
    CHECK_FALSE(report.passed());
    CHECK_FALSE(report.find("monotone")->passed);
  }
  SUBCASE("nonzero mean fails") {
    SkewSystem sys = figure1();
    sys.xi = DisplacementSpec::affine(Rational(-9, 10), 2);
    CHECK_FALSE(validate_class_membership(sys, 1.0, 0.0).find("mean_zero")->passed);
  }
}

TEST_CASE("discretize_displacement examples") {
  const auto zero = discretize_displacement(DisplacementSpec::zero(), 2, 3);
  for (const double v : zero.values) CHECK(v == 0.0);

  const auto xi = DisplacementSpec::affine(-1, 2);
  const auto d1 = discretize_displacement(xi, 2, 1);
  REQUIRE(d1.exact);
  CHECK(*d1.exact == std::vector<Rational>{Rational(-1, 2), Rational(1, 2)});
  const auto d2 = discretize_displacement(xi, 2, 2);
  CHECK(*d2.exact == std::vector<Rational>{Rational(-3, 4), Rational(-1, 4), Rational(1, 4), Rational(3, 4)});
}

TEST_CASE("discretization is centered and within its error bound") {
  const std::vector<DisplacementSpec> specs = {
      DisplacementSpec::affine(-1, 2), DisplacementSpec::named("sin2pi"),
      DisplacementSpec::named("shifted_cubic"), DisplacementSpec::named("tanh"),
      DisplacementSpec::table({{Rational(0), Rational(-2)}, {Rational(1, 4), Rational(0)},
                               {Rational(1), Rational(2, 3)}})};
  for (const auto& [m, Nmax] : std::vector<std::pair<int, int>>{{2, 12}, {3, 12}}) {
    for (int N = 1; N <= Nmax; ++N) {
      const auto d = discretize_displacement(DisplacementSpec::affine(Rational(-1, 3), Rational(2, 3)), m, N);
      double sum = 0.0;
      for (const double v : d.values) sum += v;
      CHECK(std::fabs(sum / static_cast<double>(d.values.size())) < 1e-15);
    }
  }
  for (const auto& spec : specs) {
    for (const int N : {2, 5, 8}) {
      const auto d = discretize_displacement(spec, 2, N);
      const double K = static_cast<double>(d.values.size());
      double mean = 0.0;
      for (const double v : d.values) mean += v / K;
      CHECK(std::fabs(mean) < 1e-14);
      const double bound = spec.sup_derivative() / K;
      CHECK(std::fabs(d.shift) <= bound + 1e-15);
      // dense sampling inside each cell
      double worst = 0.0;
      for (std::size_t i = 0; i < d.values.size(); ++i)
        for (int s = 0; s <= 8; ++s) {
          const double y = (static_cast<double>(i) + s / 8.0) / K;
          worst = std::max(worst, std::fabs(spec(y) - d.values[i]));
        }
      CHECK(worst <= bound + std::fabs(d.shift) + 1e-12);
      CHECK(worst <= d.sup_deviation + 1e-12);
    }
  }
}

TEST_CASE("displacement and system JSON") {
  const auto sys = figure2();
  const auto back = SkewSystem::from_json(sys.to_json());
  CHECK(back.m == 3);
  CHECK(back.r.rho() == 0.2);
  CHECK(back.xi(0.25) == sys.xi(0.25));
  CHECK(DisplacementSpec::from_json({{"kind", "sign"}})(0.5) == 1.0);
  CHECK(DisplacementSpec::from_json({{"kind", "sign"}})(0.25) == -1.0);
  CHECK(DisplacementSpec::from_json({{"kind", "named"}, {"params", {{"name", "cos2pi"}}}})(0.0) == 1.0);
  CHECK_THROWS_AS(DisplacementSpec::from_json({{"kind", "named"}, {"params", {{"name", "exp"}}}}), ValidationError);
  CHECK_THROWS_AS(SkewSystem::from_json({{"m", 2}}), UsageError);
}
