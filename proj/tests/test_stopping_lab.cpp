#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

#include "chw/errors.hpp"
#include "chw/stopping_lab.hpp"

using namespace chw;
using oracle::frac;

namespace {

SubshiftPtr full_shift() { return build_subshift(2, 1); }

WalkSpec srw(double alpha = 0.0, double x0 = 0.0) { return WalkSpec::xi_walk(full_shift(), {1.0, -1.0}, alpha, x0); }

// Increments of the xi walk on the full shift: symbol 1 -> +1, symbol 2 -> -1.
std::vector<Rational> srw_increments(const SubshiftSpec& chain) {
  std::vector<Rational> inc(chain.matrix().entry_count());
  for (Symbol i = 1; i <= static_cast<Symbol>(chain.K()); ++i) {
    const auto row = chain.row(i);
    for (std::size_t e = 0; e < row.size(); ++e)
      inc[chain.matrix().row_offset(i) + e] = row[e].to == 1 ? Rational(1) : Rational(-1);
  }
  return inc;
}

// Chain whose rows all move up with probability q.
SubshiftSpec biased_chain(const Rational& q) {
  return SubshiftSpec::from_matrix({{q, 1 - q}, {q, 1 - q}});
}

// P(max_{k <= n} S_k < b) for the simple symmetric walk, by the reflection principle.
double srw_stay_below(int b, int n) {
  auto pmf = [n](int s) {  // P(S_n = s)
    if ((n + s) % 2 != 0 || std::abs(s) > n) return 0.0;
    const int up = (n + s) / 2;
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(up + 1.0) - std::lgamma(n - up + 1.0) - n * std::log(2.0));
  };
  double tail = 0.0;  // P(S_n > b)
  for (int s = b + 1; s <= n; ++s) tail += pmf(s);
  return 1.0 - (2.0 * tail + pmf(b));
}

bool within(double value, double expected, double se, double sigmas = 4.0) {
  return std::fabs(value - expected) <= sigmas * se + 1e-12;
}

}  // namespace

TEST_CASE("gambler's ruin oracle against classical formulas") {
  const auto chain = full_shift();
  const auto inc = srw_increments(*chain);
  const auto r = gambler_ruin_oracle(Rational(-5), Rational(10), Rational(0), *chain, inc, Rational(0));
  CHECK(r.p_left == frac(2, 3));
  CHECK(r.expected_time == 50);
  CHECK(r.expected_time_left == frac(125, 3));
  CHECK(r.expected_time_left.get_d() == doctest::Approx(oracle::srw_expected_time_left(-5, 10, 0)));

  const auto one = gambler_ruin_oracle(Rational(-1), Rational(1), Rational(0), *chain, inc, Rational(0));
  CHECK(one.expected_time == 1);
  CHECK(one.p_left == frac(1, 2));

  for (const int x : {-3, 0, 4}) {
    const auto rx = gambler_ruin_oracle(Rational(-4), Rational(6), Rational(x), *chain, inc, Rational(0));
    CHECK(rx.p_left.get_d() == doctest::Approx(oracle::srw_p_left(-4, 6, x)));
    CHECK(rx.expected_time.get_d() == doctest::Approx(oracle::srw_expected_time(-4, 6, x)));
  }

  const auto f = gambler_ruin_oracle_float(Rational(-5), Rational(10), Rational(0), *chain, inc, Rational(0));
  CHECK(std::fabs(f.p_left - 2.0 / 3.0) < 1e-12);
  CHECK(std::fabs(f.expected_time - 50.0) < 1e-10);
}

TEST_CASE("oracle for biased walks") {
  for (const auto& q : {frac(11, 20), frac(3, 5), frac(2, 5)}) {
    const auto chain = biased_chain(q);
    const auto inc = srw_increments(chain);
    const int a = -6, b = 4, x = 0;
    const auto r = gambler_ruin_oracle(Rational(a), Rational(b), Rational(x), chain, inc, Rational(0));
    const double qd = q.get_d();
    const double pl = oracle::biased_p_left(a, b, x, qd);
    CHECK(r.p_left.get_d() == doctest::Approx(pl).epsilon(1e-12));
    // optional stopping: drift * E[T] = E[v_T] - x
    const double mu = 2.0 * qd - 1.0;
    CHECK(r.expected_time.get_d() == doctest::Approx(((1 - pl) * (b - x) + pl * (a - x)) / mu).epsilon(1e-12));
  }
  SUBCASE("alpha E[T_B] is roughly constant for small drifts") {
    double lo = 1e300, hi = 0;
    for (const auto& alpha : {frac(1, 20), frac(1, 10), frac(1, 5)}) {
      const auto chain = biased_chain((1 + alpha) / 2);
      const auto r = gambler_ruin_oracle(Rational(-60), Rational(5), Rational(0), chain, srw_increments(chain), Rational(0));
      const double v = alpha.get_d() * r.expected_time.get_d();
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    CHECK(hi / lo < 1.5);
  }
  CHECK_THROWS_AS(gambler_ruin_oracle(Rational(-5), Rational(5), Rational(0), *full_shift(),
                                      {Rational(1), Rational(-1), Rational(1), Rational(-1)}, Rational(1, 1000000)),
                  UnsupportedError);
}

TEST_CASE("Monte Carlo agrees with the oracle") {
  SUBCASE("symmetric walk") {
    const auto s = estimate_escape_compact(srw(), -5, 10, 20000, 100000, 3);
    CHECK(s.censored == 0);
    CHECK(s.exits_left + s.exits_right == 20000);
    CHECK(within(s.p_left.value, 2.0 / 3.0, s.p_left.std_error));
    CHECK(within(s.mean_time.value, 50.0, s.mean_time.std_error));
    CHECK(within(s.mean_time_left.value, 125.0 / 3.0, s.mean_time_left.std_error));
    CHECK(within(s.doob_residual.value, 0.0, s.doob_residual.std_error));
    CHECK(s.p_left.lower <= s.p_left.value);
    CHECK(s.p_left.value <= s.p_left.upper);

    const auto sym = estimate_escape_compact(srw(), -10, 10, 20000, 100000, 4);
    CHECK(within(sym.p_left.value, 0.5, sym.p_left.std_error));
  }
  SUBCASE("two-state chain with a deterministic row") {
    const auto chain = std::make_shared<const SubshiftSpec>(
        SubshiftSpec::from_matrix({{frac(1, 2), frac(1, 2)}, {Rational(1), Rational(0)}}));
    const auto pd = solve_poisson_general_exact(chain, {Rational(-1), Rational(2)});
    const auto walk = WalkSpec::zeta_walk(pd, 0.0);
    const auto oracle = gambler_ruin_oracle(Rational(-4), Rational(3), Rational(0), *chain, pd.exact->zeta, Rational(0));
    const auto s = estimate_escape_compact(walk, -4, 3, 20000, 100000, 9);
    CHECK(within(s.p_left.value, oracle.p_left.get_d(), s.p_left.std_error));
    CHECK(within(s.mean_time.value, oracle.expected_time.get_d(), s.mean_time.std_error));
    CHECK(within(s.doob_residual.value, 0.0, s.doob_residual.std_error));
  }
  SUBCASE("drifted walk Doob identity") {
    const auto s = estimate_escape_compact(srw(0.25), -10, 6, 10000, 100000, 5);
    CHECK(within(s.doob_residual.value, 0.0, s.doob_residual.std_error));
  }
}

TEST_CASE("coupled seeds make exit counts monotone in the interval") {
  std::uint64_t previous_left = 0;
  for (const double B : {3.0, 6.0, 9.0, 12.0}) {
    const auto s = estimate_escape_compact(srw(), -6, B, 4000, 1000000, 77);
    REQUIRE(s.censored == 0);
    // a path that hits A before B also hits A before any larger B
    CHECK(s.exits_left >= previous_left);
    previous_left = s.exits_left;
  }
  std::uint64_t previous = 4000;
  for (const double A : {-3.0, -6.0, -9.0}) {
    const auto s = estimate_escape_compact(srw(), A, 6, 4000, 1000000, 78);
    CHECK(s.exits_left <= previous);
    previous = s.exits_left;
  }
}

TEST_CASE("escape estimator arguments and censoring") {
  CHECK_THROWS_AS(estimate_escape_compact(srw(0.0, 3.0), -5, 2, 10, 10, 1), DomainError);
  CHECK_THROWS(estimate_escape_compact(srw(), -5, 5, 10, 0, 1));
  const auto s = estimate_escape_compact(srw(), -50, 50, 200, 10, 1);
  CHECK(s.censored == 200);
  CHECK(s.censoring_flag);
}

TEST_CASE("seed determinism and thread independence") {
  const auto a = estimate_escape_compact(srw(0.1), -5, 8, 3000, 10000, 123, 1);
  const auto b = estimate_escape_compact(srw(0.1), -5, 8, 3000, 10000, 123, 3);
  CHECK(a.to_json().dump() == b.to_json().dump());
  const auto c = estimate_escape_compact(srw(0.1), -5, 8, 3000, 10000, 124, 1);
  CHECK(a.to_json().dump() != c.to_json().dump());
  const auto h1 = estimate_escape_halfline(srw(), 3, 500, {100, 1000}, 8, 1);
  const auto h2 = estimate_escape_halfline(srw(), 3, 500, {100, 1000}, 8, 2);
  CHECK(h1.to_json().dump() == h2.to_json().dump());
}

TEST_CASE("half-line escape") {
  SUBCASE("positive drift stabilizes") {
    const auto h = estimate_escape_halfline(srw(0.1), 5, 4000, {1000, 10000, 100000}, 21);
    REQUIRE(h.rows.size() == 3);
    CHECK(h.rows[2].escaped.value == 1.0);
    // E[T_B] = (B + overshoot) / alpha, overshoot below one step
    CHECK(h.rows[2].restricted_mean.value > 50.0 - 4 * h.rows[2].restricted_mean.std_error);
    CHECK(h.rows[2].restricted_mean.value < 62.0);
    CHECK(std::fabs(h.rows[2].restricted_mean.value - h.rows[1].restricted_mean.value) < 1.0);
  }
  SUBCASE("zero drift keeps growing") {
    const auto h = estimate_escape_halfline(srw(), 5, 4000, {1000, 10000, 100000}, 22);
    for (std::size_t k = 1; k < h.rows.size(); ++k) {
      CHECK(h.rows[k].escaped.value >= h.rows[k - 1].escaped.value);
      CHECK(h.rows[k].restricted_mean.value > 2.0 * h.rows[k - 1].restricted_mean.value);
      CHECK(h.rows[k].mean_escapees.value > h.rows[k - 1].mean_escapees.value);
    }
    // reflection principle for the surviving fraction
    for (const auto& row : h.rows) {
      const double stay = srw_stay_below(5, static_cast<int>(row.horizon));
      CHECK(within(1.0 - row.escaped.value, stay, std::sqrt(stay * (1 - stay) / 4000.0)));
    }
  }
  SUBCASE("immediate escape") {
    const auto h = estimate_escape_halfline(srw(0.0, 4.5), 5, 1000, {1, 2}, 2);
    CHECK(h.rows[0].escaped.value == doctest::Approx(0.5).epsilon(0.2));
    CHECK_THROWS_AS(estimate_escape_halfline(srw(), 5, 10, {10, 5}, 2), DomainError);
  }
}

TEST_CASE("stay probability") {
  const auto dominated = estimate_stay_probability(srw(-1.0), 1, 1000, 1000, 3);
  CHECK(dominated.p_stay.value == 1.0);
  CHECK(dominated.stable);

  const auto zero = estimate_stay_probability(srw(0.0), 5, 4000, 10000, 4);
  const double oracle = srw_stay_below(5, 10000);
  CHECK(within(zero.p_stay.value, oracle, std::sqrt(oracle * (1 - oracle) / 4000.0)));
  CHECK(zero.p_stay_doubled.value <= zero.p_stay.value);

  const auto neg = estimate_stay_probability(srw(-0.1), 5, 4000, 20000, 5);
  CHECK(neg.stable);
  CHECK(neg.p_stay.value > 0.2);
  CHECK(neg.p_stay.value < 1.0);
  CHECK_THROWS_AS(estimate_stay_probability(srw(0.1), 5, 10, 10, 1), DomainError);
}

TEST_CASE("exponential tilt rates") {
  const auto srw_pd = solve_poisson_canonical({1.0, -1.0}, 2, 1);
  for (const double alpha : {0.1, 0.02}) {
    // root of cosh(r) e^{r alpha} = 1 on (-inf, 0), by scalar bisection
    double lo = -10.0, hi = -1e-12;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (std::cosh(mid) * std::exp(mid * alpha) > 1.0 ? lo : hi) = mid;
    }
    const auto t = exponential_tilt_rates(srw_pd, alpha);
    CHECK(std::fabs(t.r_sub - lo) < 1e-10);
    CHECK(std::fabs(t.r_super - lo) < 1e-10);
    CHECK(std::fabs(t.r_sub + 2 * alpha) < alpha * alpha);
    for (const double c : t.certificate_sub) CHECK(c >= 1.0 - 1e-12);
    for (const double c : t.certificate_super) CHECK(c <= 1.0 + 1e-12);
  }
  const auto flat = exponential_tilt_rates(srw_pd, 0.0);
  CHECK(flat.r_sub == 0.0);
  CHECK(flat.r_super == 0.0);

  const auto two_state = solve_poisson_general(std::make_shared<const SubshiftSpec>(SubshiftSpec::from_matrix(
                                            {{frac(1, 2), frac(1, 2)}, {Rational(1), Rational(0)}})),
                                        {-1.0, 2.0});
  CHECK_THROWS_AS(exponential_tilt_rates(two_state, 0.1), DomainError);

  const auto d6 = discretize_displacement(DisplacementSpec::affine(-1, 2), 2, 6);
  const auto pd6 = solve_poisson_canonical(d6.values, 2, 6);
  const double alpha = 0.05;
  const auto t6 = exponential_tilt_rates(pd6, alpha);
  CHECK(t6.taylor_regime);
  for (const double r : {t6.r_sub, t6.r_super}) {
    CHECK(r >= -2 * alpha / pd6.bounds.Vminus * 1.2);
    CHECK(r <= -2 * alpha / pd6.bounds.Vplus * 0.8);
  }
}

TEST_CASE("drift scaling experiment on the symmetric walk") {
  const auto pd = solve_poisson_canonical({1.0, -1.0}, 2, 1);
  ScalingOptions opts;
  opts.alphas = {0.05, 0.1, 0.2};
  opts.A = -20;
  opts.B = 5;
  opts.zero_drift_A = {-10, -20};
  opts.trials = 2000;
  opts.horizon = 100000;
  opts.seed = 6;
  const auto table = drift_scaling_experiment(pd, opts);
  REQUIRE(table.drift_rows.size() == 3);
  REQUIRE(table.zero_drift_rows.size() == 2);
  CHECK(table.ratio_alpha_time_B < 2.0);
  CHECK(table.ratio_p_A_times_A < 1.5);
  for (const auto& row : table.zero_drift_rows)
    CHECK(row.p_A_times_A == doctest::Approx(5.0 * -row.A / (5.0 - row.A)).epsilon(0.15));
}

TEST_CASE("recurrence witnesses") {
  SUBCASE("fixed right cell for xi = -1 + 2y") {
    const auto d = discretize_displacement(DisplacementSpec::affine(-1, 2), 2, 3);
    CHECK(d.values[7] == 0.875);
    const auto w = recurrence_witness_search(*build_subshift(2, 3), d.values, 3.0, 20);
    CHECK(w.found_up);
    CHECK(w.found_down);
    CHECK(w.sum_up > 3.0);
    CHECK(w.sum_down < -3.0);
    REQUIRE(w.fixed_up);
    CHECK(*w.fixed_up == 8);
    CHECK(w.fixed_up_length == 4);  // smallest n with 7n/8 > 3
    REQUIRE(w.fixed_down);
    CHECK(*w.fixed_down == 1);
  }
  SUBCASE("zero displacement never escapes") {
    const auto w = recurrence_witness_search(*build_subshift(2, 2), std::vector<double>(4, 0.0), 0.5, 30);
    CHECK_FALSE(w.found_up);
    CHECK_FALSE(w.found_down);
    CHECK_FALSE(w.fixed_up);
  }
  SUBCASE("sign displacement on the full shift") {
    const auto d = discretize_displacement(DisplacementSpec::sign(), 2, 1);
    CHECK(d.values == std::vector<double>{-1.0, 1.0});
    const auto w = recurrence_witness_search(*full_shift(), d.values, 3.0, 10);
    REQUIRE(w.fixed_down);
    CHECK(*w.fixed_down == 1);
    CHECK(w.fixed_down_length == 4);
    REQUIRE(w.fixed_up);
    CHECK(*w.fixed_up == 2);
    CHECK(w.fixed_up_length == 4);
  }
}

TEST_CASE("chaotic walks escape compact intervals") {
  SkewSystem sys;
  sys.m = 3;
  sys.N = 1;
  sys.xi = DisplacementSpec::affine(-1, 2);
  sys.chart = Chart::Line;
  const auto walk = WalkSpec::chaotic(sys, 0.0);
  const auto s = estimate_escape_compact(walk, -3, 3, 500, 100000, 12);
  CHECK(s.censored == 0);
  CHECK(within(s.p_left.value, 0.5, s.p_left.std_error));
}
