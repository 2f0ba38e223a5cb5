#pragma once

// Poisson equation (Pi - I) Delta = Pi xi - (p xi) 1 for a Markov chain, the
// centered increments zeta(i,j) = xi(j) - Delta(j) + Delta(i), and the bound
// quadruple {D, V-, V+, G} that feeds the stopping-time estimates.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"

#include "chw/rational.hpp"
#include "chw/skew_products.hpp"
#include "chw/symbolic_dynamics.hpp"

namespace chw {

template <class S>
struct Bounds {
  S D{};       // max |zeta| over admissible pairs
  S Vminus{};  // min_i sum_j pi_ij zeta(i,j)^2
  S Vplus{};   // max_i of the same
  S G{};       // max Delta - min Delta
};

struct ExactPoisson {
  std::vector<Rational> xi, delta, zeta;
  Bounds<Rational> bounds;
};

struct PoissonData {
  SubshiftPtr chain;
  std::vector<double> xi;
  std::vector<double> delta;
  // Aligned with chain->matrix(): zeta[row_offset(i) + k] belongs to row(i)[k].
  std::vector<double> zeta;
  Bounds<double> bounds;

  double residual = 0.0;       // |Pi Delta - Delta - Pi xi + (p xi) 1|_inf
  double normalization = 0.0;  // |p Delta|
  double centering = 0.0;      // max_i |sum_j pi_ij zeta(i,j)|
  double rcond = 0.0;          // reciprocal condition estimate; NaN when not formed
  std::optional<ExactPoisson> exact;

  double zeta_at(Symbol i, Symbol j) const;
};

constexpr std::size_t kExactGeneralLimit = 256;
constexpr std::size_t kExactCanonicalLimit = 4096;
constexpr double kPoissonResidualTolerance = 1e-10;

// Dense or sparse LU on the bordered system; residual above tolerance throws.
PoissonData solve_poisson_general(SubshiftPtr chain, const std::vector<double>& xi);
// Rational elimination, K <= kExactGeneralLimit.
PoissonData solve_poisson_general_exact(SubshiftPtr chain, const std::vector<Rational>& xi);

// Delta = -(Pi + ... + Pi^{N-1}) xi on the canonical chain from block sums, O(K N).
// |mean xi| > 1e-12 (nonzero mean, exactly) is a DomainError.
PoissonData solve_poisson_canonical(const std::vector<double>& xi, int m, int N);
PoissonData solve_poisson_canonical_exact(const std::vector<Rational>& xi, int m, int N);

// Delta_N(i) = xi_N(i) + |xi_N(i)| (#2 - #1) over the binary digit tuple of i.
std::vector<long> srw_delta_closed_form(int N);
// xi_N = +1 on the left half, -1 on the right half (m = 2).
std::vector<long> srw_displacement(int N);

// Fills zeta, centering and bounds from chain, xi and delta.
void compute_zeta(PoissonData& data);
Bounds<double> compute_bounds(const PoissonData& data);

// (Pi_N^M)_{ij}: 1/m^M when j - 1 lies in [m^M (i-1), m^M (i-1) + m^M) mod K.
Rational canonical_power_entry(int m, int N, int M, Symbol i, Symbol j);

struct GrowthRow {
  int N = 0;
  double delta_sup = 0.0;
  Bounds<double> bounds;
  double max_row_spread = 0.0;
  double min_row_spread = 0.0;
  double min_gap = 0.0;  // min_i Delta(2i) - Delta(2i-1)
  double residual = 0.0;
};

struct GrowthTable {
  std::vector<GrowthRow> rows;
  double slope = 0.0;  // least squares |Delta_N|_inf ~ slope N + intercept
  double intercept = 0.0;
  double fit_residual = 0.0;  // root mean square
  nlohmann::json to_json() const;
};

GrowthTable growth_diagnostics(const DisplacementSpec& xi, int m, int N_first, int N_last);

struct MartingaleCheck {
  double worst_z = 0.0;
  Symbol worst_state = 0;
  std::vector<double> z;  // per conditioning state omega_{n-1}; a deterministic state gives 0 or +-inf
  std::uint64_t increments = 0;
};

// Groups u_{n+1} - u_n = zeta(omega_{n-1}, omega_n) by omega_{n-1} over `trials`
// stationary paths of `horizon` steps and reports the worst |z|-score of the mean.
MartingaleCheck martingale_check(const PoissonData& data, std::size_t trials, std::size_t horizon,
                                 std::uint64_t seed, unsigned threads = 0);

nlohmann::json bounds_to_json(const PoissonData& data);

}  // namespace chw
