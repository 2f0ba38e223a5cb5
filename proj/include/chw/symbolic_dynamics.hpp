#pragma once

// Subshifts of finite type coming from Markov partitions of E_m(y) = m*y mod 1,
// their Markov measures, and coding maps between [0,1) and sequence space.
//
// Symbols are 1-based. At refinement level N a symbol s in {1..m^N} names the
// cell [(s-1)/m^N, s/m^N), i.e. the base-m digit block d_0..d_{N-1} of s-1
// with d_0 most significant.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "chw/rational.hpp"
#include "chw/rng.hpp"

namespace chw {

using Symbol = std::int32_t;

struct Transition {
  Symbol to = 0;
  Rational prob;
  double value = 0.0;
};

// Row-stochastic matrix in compressed sparse row form; only positive entries
// are stored. Entries are kept exactly, each row must sum to exactly 1.
class StochasticMatrix {
 public:
  StochasticMatrix() = default;
  // rows[i][j] is the probability of i+1 -> j+1. Throws ValidationError.
  explicit StochasticMatrix(const std::vector<std::vector<Rational>>& rows);

  // Canonical Pi_N = A_N / m.
  static StochasticMatrix canonical(int m, int N);

  std::size_t size() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::span<const Transition> row(Symbol i) const;
  // Cumulative row probabilities in double, aligned with row(i).
  std::span<const double> cumulative(Symbol i) const;
  bool uniform_rows() const { return uniform_rows_; }

  const Transition* find(Symbol i, Symbol j) const;
  bool admissible(Symbol i, Symbol j) const { return find(i, j) != nullptr; }

  // Offset of row i's first entry in the flat entry array; tables of
  // per-transition values (increments, zeta) share this layout.
  std::size_t row_offset(Symbol i) const { return offsets_[static_cast<std::size_t>(i - 1)]; }
  std::size_t entry_count() const { return entries_.size(); }

  std::vector<std::vector<Rational>> dense_exact() const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Transition> entries_;
  std::vector<double> cumulative_;
  bool uniform_rows_ = false;
};

// Primitivity test (strong connectivity plus aperiodicity). Returns an empty
// string when primitive, otherwise a diagnostic.
std::string primitivity_diagnostic(const StochasticMatrix& pi);

// Left Perron vector of a primitive stochastic matrix, float mode.
// Residual |p^T Pi - p^T|_inf <= 1e-12 is checked before returning.
std::vector<double> stationary_distribution(const StochasticMatrix& pi);
// Exact stationary vector by rational elimination (K <= kExactStationaryLimit).
std::vector<Rational> stationary_distribution_exact(const StochasticMatrix& pi);

inline constexpr std::size_t kExactStationaryLimit = 128;
inline constexpr std::size_t kMaxSymbols = std::size_t{1} << 26;

class SubshiftSpec {
 public:
  // build_subshift: the canonical subshift of level N for E_m.
  static SubshiftSpec canonical(int m, int N);
  // Arbitrary primitive chain; m and N are reported as 0.
  static SubshiftSpec from_matrix(const std::vector<std::vector<Rational>>& rows);

  int m() const { return m_; }
  int N() const { return N_; }
  std::size_t K() const { return matrix_.size(); }
  bool is_canonical() const { return canonical_; }

  const StochasticMatrix& matrix() const { return matrix_; }
  std::span<const Transition> row(Symbol i) const { return matrix_.row(i); }
  bool admissible(Symbol i, Symbol j) const { return matrix_.admissible(i, j); }
  double transition(Symbol i, Symbol j) const;
  Rational transition_exact(Symbol i, Symbol j) const;

  const std::vector<double>& stationary() const { return stationary_; }
  bool has_exact_stationary() const { return stationary_exact_.has_value(); }
  // Throws UnsupportedError when the chain is too large for exact elimination.
  const std::vector<Rational>& stationary_exact() const;

  // Draws a symbol from the stationary law.
  Symbol draw_stationary(Rng& rng) const;
  // Draws a successor of `from`.
  Symbol draw_successor(Symbol from, Rng& rng) const;
  // Same draw, returned as the position within row(from).
  std::size_t draw_successor_index(Symbol from, Rng& rng) const;

 private:
  int m_ = 0;
  int N_ = 0;
  bool canonical_ = false;
  StochasticMatrix matrix_;
  std::vector<double> stationary_;
  std::vector<double> stationary_cumulative_;
  std::optional<std::vector<Rational>> stationary_exact_;
};

using SubshiftPtr = std::shared_ptr<const SubshiftSpec>;

SubshiftPtr build_subshift(int m, int N);

nlohmann::json to_json(const SubshiftSpec& spec);
SubshiftPtr subshift_from_json(const nlohmann::json& j);

// Integer power m^N with overflow and size checks (SizeError).
std::size_t symbol_count(int m, int N);

struct SymbolPath {
  SubshiftPtr spec;
  std::vector<Symbol> symbols;

  std::size_t size() const { return symbols.size(); }
  bool admissible() const;
};

// Lazy seeded generator of a Markov path. Identical (spec, seed, start)
// produce identical sequences.
class PathSampler {
 public:
  // Without `previous`, omega_0 is stationary; with it, omega_0 ~ Pi(previous, .).
  PathSampler(SubshiftPtr spec, std::uint64_t seed, std::optional<Symbol> previous = {});

  Symbol next();
  const SubshiftSpec& spec() const { return *spec_; }

 private:
  SubshiftPtr spec_;
  Rng rng_;
  std::optional<Symbol> current_;
};

SymbolPath sample_path(SubshiftPtr spec, std::uint64_t seed, std::size_t length,
                       std::optional<Symbol> previous = {});

// Digit block of a canonical symbol, most significant first.
std::vector<int> symbol_digits(Symbol s, int m, int N);
Symbol symbol_from_digits(std::span<const int> digits, int m);
// Cell containing y under half-open cells; y = 1 maps to the last cell.
Symbol cell_of(double y, int m, int N);

// I_N: omega_i = cell of E_m^i(y). Exact rational iteration. y in [0,1).
SymbolPath encode_point(const Rational& y, int m, int N, std::size_t length);
// Same for a double, taken as the exact dyadic rational it represents.
SymbolPath encode_point(double y, int m, int N, std::size_t length);

struct DecodedInterval {
  Rational lower;
  Rational upper;
  double midpoint = 0.0;
  double width() const { return to_double(upper - lower); }
};

// Closure of the intersection of E_m^{-i}(P_{omega_i}), i < L. Its width is
// m^{-(N+L-1)}. Throws ValidationError on inadmissible input.
DecodedInterval decode_sequence(std::span<const Symbol> omega, int m, int N);
// Unchecked double midpoint of the same interval (trajectory driving).
double window_midpoint(std::span<const Symbol> omega, int m, int N);

// Theta_{N0,N1}: recode a canonical path to level N1. For N1 > N0 output
// symbol i is the block (omega_i..omega_{i+N1-N0}); for N1 < N0 it is the
// leading N1 digits of omega_i.
SymbolPath recode(const SymbolPath& omega, int N1);

struct CylinderWord {
  std::size_t offset = 0;
  std::vector<Symbol> letters;
  bool admissible = false;

  // Throws ValidationError on an empty word or symbols outside 1..K.
  CylinderWord(const SubshiftSpec& spec, std::vector<Symbol> letters, std::size_t offset = 0);
};

// p_{w_0} * prod pi_{w_i w_{i+1}}; zero for inadmissible words.
double cylinder_measure(const SubshiftSpec& spec, const CylinderWord& word);
Rational cylinder_measure_exact(const SubshiftSpec& spec, const CylinderWord& word);

// Whitespace-separated symbols, one path per line.
std::string format_paths(std::span<const SymbolPath> paths);
std::vector<std::vector<Symbol>> parse_paths(const std::string& text);

}  // namespace chw
