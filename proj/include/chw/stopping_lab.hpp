#pragma once

// Escape times of Markov random walks v_{n+1} = v_n + inc(omega_{n-1}, omega_n) + alpha
// and of chaotic walks (the line-chart fiber coordinate), by Monte Carlo with
// an exact banded absorption solver as oracle.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "chw/poisson_solver.hpp"
#include "chw/rational.hpp"
#include "chw/skew_products.hpp"
#include "chw/stats.hpp"
#include "chw/symbolic_dynamics.hpp"

namespace chw {

struct WalkSpec {
  SubshiftPtr chain;
  // Per-transition increments aligned with chain->matrix() entries.
  std::vector<double> increments;
  std::optional<std::vector<Rational>> increments_exact;
  double alpha = 0.0;
  double x0 = 0.0;
  std::optional<Symbol> previous;  // omega_{-1}; stationary when empty
  std::optional<double> G;         // Delta oscillation, for interval-size guards
  std::optional<SkewSystem> system;

  // v_{n+1} = v_n + zeta(omega_{n-1}, omega_n) + alpha.
  static WalkSpec zeta_walk(const PoissonData& pd, double alpha, double x0 = 0.0);
  // w_{n+1} = w_n + xi(omega_n) + alpha.
  static WalkSpec xi_walk(SubshiftPtr chain, const std::vector<double>& xi, double alpha,
                          double x0 = 0.0);
  // Line-chart fiber coordinate of a skew product; the path is drawn per trial.
  static WalkSpec chaotic(const SkewSystem& sys, double x0);

  bool is_chaotic() const { return system.has_value(); }
  double max_step() const;  // max |inc + alpha|; inf for chaotic walks
};

// One trajectory of a walk, seeded independently per trial.
class WalkStepper {
 public:
  WalkStepper(const WalkSpec& walk, std::uint64_t seed);
  double position() const { return position_; }
  void step();

 private:
  const WalkSpec* walk_;
  Rng rng_;
  Symbol prev_ = 0;
  double position_ = 0.0;
  std::optional<DrivingWindow> window_;
};

struct EscapeStats {
  std::uint64_t trials = 0;
  std::uint64_t horizon = 0;
  std::uint64_t exits_left = 0, exits_right = 0, censored = 0;
  Estimate p_left;           // Wilson, among trials that exited
  Estimate mean_time;        // among trials that exited
  Estimate mean_time_left;   // given a left exit
  Estimate doob_residual;    // E[v_T - v_0 - alpha T], exited trials
  bool censoring_flag = false;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

// Exit when v <= A (left) or v >= B (right). Needs A < x0 < B.
EscapeStats estimate_escape_compact(const WalkSpec& walk, double A, double B, std::size_t trials,
                                    std::size_t horizon, std::uint64_t seed, unsigned threads = 0);

template <class S>
struct OracleResult {
  S p_left{};
  S expected_time{};
  S expected_time_left{};  // E[T | left exit]
  std::size_t states = 0;
};

// Exact absorption probabilities and times on (position lattice) x (symbol).
// Increments (plus alpha) must be rational with a lattice of at most
// kOracleMaxStates transient states; UnsupportedError otherwise.
constexpr std::size_t kOracleMaxStates = 200000;
OracleResult<Rational> gambler_ruin_oracle(const Rational& A, const Rational& B, const Rational& x0,
                                           const SubshiftSpec& chain,
                                           const std::vector<Rational>& increments,
                                           const Rational& alpha,
                                           std::optional<Symbol> previous = {});
OracleResult<double> gambler_ruin_oracle_float(const Rational& A, const Rational& B,
                                               const Rational& x0, const SubshiftSpec& chain,
                                               const std::vector<Rational>& increments,
                                               const Rational& alpha,
                                               std::optional<Symbol> previous = {});

struct HalflineRow {
  std::uint64_t horizon = 0;
  Estimate escaped;           // fraction with T_B <= horizon
  Estimate mean_escapees;     // mean T_B among those
  Estimate restricted_mean;   // E[min(T_B, horizon)]
};

struct HalflineStats {
  std::uint64_t trials = 0;
  std::vector<HalflineRow> rows;
  nlohmann::json to_json() const;
};

// T_B = first n with v_n >= B. Horizons must be increasing.
HalflineStats estimate_escape_halfline(const WalkSpec& walk, double B, std::size_t trials,
                                       const std::vector<std::uint64_t>& horizons,
                                       std::uint64_t seed, unsigned threads = 0);

struct StayEstimate {
  Estimate p_stay;          // never reaching B within the horizon
  Estimate p_stay_doubled;  // same trials run to twice the horizon
  bool stable = true;       // |difference| below the CI width
  std::vector<std::string> warnings;
};

StayEstimate estimate_stay_probability(const WalkSpec& walk, double B, std::size_t trials,
                                       std::size_t horizon, std::uint64_t seed,
                                       unsigned threads = 0);

struct TiltRates {
  double r_sub = 0.0;    // e^{r v_n} is a submartingale for r <= r_sub
  double r_super = 0.0;  // and a supermartingale for r_super <= r <= 0
  std::vector<double> row_roots;
  std::vector<double> certificate_sub;    // row MGF values at r_sub (all >= 1)
  std::vector<double> certificate_super;  // row MGF values at r_super (all <= 1)
  double predicted_sub = 0.0;    // -2 alpha / Vminus
  double predicted_super = 0.0;  // -2 alpha / Vplus
  bool taylor_regime = true;     // |alpha| < Vminus / (2 D)
};

// Roots of phi_i(r) = sum_j pi_ij exp(r (zeta(i,j) + alpha)) = 1 per row, by
// bisection on [-10/D, 0] (mirrored for alpha < 0), 200 iterations.
TiltRates exponential_tilt_rates(const PoissonData& pd, double alpha);

struct ScalingRow {
  double alpha = 0.0;
  double A = 0.0;
  double p_A = 0.0;
  double mean_time = 0.0;
  double mean_time_left = 0.0;
  double mean_time_B = 0.0;
  double normalized_p_A = 0.0;      // p_A e^{-(2/V+) alpha A} / alpha
  double alpha_mean_time_B = 0.0;   // alpha E[T_B]
  double p_A_times_A = 0.0;         // zero drift rows: p_A |A|
  double time_left_over_A2 = 0.0;   // zero drift rows: E[T | left] / A^2
  std::uint64_t censored = 0;
};

struct ScalingTable {
  std::vector<ScalingRow> drift_rows;
  std::vector<ScalingRow> zero_drift_rows;
  double ratio_alpha_time_B = 0.0;   // max/min over drift rows
  double ratio_normalized_p_A = 0.0;
  double ratio_p_A_times_A = 0.0;    // max/min over zero drift rows
  double ratio_time_left_over_A2 = 0.0;
  nlohmann::json to_json() const;
};

struct ScalingOptions {
  std::vector<double> alphas;
  double A = -40.0;
  double B = 5.0;
  std::vector<double> zero_drift_A;
  std::size_t trials = 10000;
  std::size_t horizon = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

ScalingTable drift_scaling_experiment(const PoissonData& pd, const ScalingOptions& opts);

struct Witness {
  bool found_up = false, found_down = false;
  std::vector<Symbol> word_up, word_down;
  double sum_up = 0.0, sum_down = 0.0;
  // Fixed-point cells i -> i of the needed sign and the repetition count.
  std::optional<Symbol> fixed_up, fixed_down;
  std::size_t fixed_up_length = 0, fixed_down_length = 0;
  nlohmann::json to_json() const;
};

// Shortest admissible words whose cumulative xi exceeds L (resp. falls below -L).
Witness recurrence_witness_search(const SubshiftSpec& chain, const std::vector<double>& xi, double L,
                                  std::size_t max_len);

}  // namespace chw
