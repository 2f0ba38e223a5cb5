#include "chw/symbolic_dynamics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

#include "chw/errors.hpp"
#include "chw/json_util.hpp"
#include "linalg.hpp"

namespace chw {

// ---------------------------------------------------------------------------
// StochasticMatrix

StochasticMatrix::StochasticMatrix(const std::vector<std::vector<Rational>>& rows) {
  const std::size_t k = rows.size();
  if (k == 0) throw ValidationError("stochastic matrix has no rows");
  offsets_.reserve(k + 1);
  offsets_.push_back(0);
  for (std::size_t i = 0; i < k; ++i) {
    if (rows[i].size() != k)
      throw ValidationError("stochastic matrix row " + std::to_string(i + 1) + " has " +
                            std::to_string(rows[i].size()) + " entries, expected " +
                            std::to_string(k));
    Rational total = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const Rational& q = rows[i][j];
      if (sgn(q) < 0)
        throw ValidationError("negative probability in row " + std::to_string(i + 1));
      if (sgn(q) == 0) continue;
      total += q;
      entries_.push_back({static_cast<Symbol>(j + 1), q, q.get_d()});
    }
    if (total != 1)
      throw ValidationError("row " + std::to_string(i + 1) + " sums to " + total.get_str() +
                            ", not 1");
    offsets_.push_back(entries_.size());
  }
  cumulative_.resize(entries_.size());
  for (std::size_t i = 0; i < k; ++i) {
    double acc = 0.0;
    for (std::size_t e = offsets_[i]; e < offsets_[i + 1]; ++e) {
      acc += entries_[e].value;
      cumulative_[e] = acc;
    }
    cumulative_[offsets_[i + 1] - 1] = 1.0;
  }
}

StochasticMatrix StochasticMatrix::canonical(int m, int N) {
  const std::size_t k = symbol_count(m, N);
  StochasticMatrix out;
  out.offsets_.resize(k + 1);
  out.entries_.reserve(k * static_cast<std::size_t>(m));
  out.cumulative_.reserve(k * static_cast<std::size_t>(m));
  const Rational prob(1, m);
  const double value = 1.0 / m;
  const auto mm = static_cast<std::size_t>(m);
  for (std::size_t i = 0; i < k; ++i) {
    out.offsets_[i] = out.entries_.size();
    // successors of symbol i+1 are m*i+1 .. m*i+m (mod K)
    const std::size_t base = (mm * i) % k;
    for (std::size_t t = 0; t < mm; ++t) {
      out.entries_.push_back({static_cast<Symbol>(base + t + 1), prob, value});
      out.cumulative_.push_back(t + 1 == mm ? 1.0 : static_cast<double>(t + 1) * value);
    }
  }
  out.offsets_[k] = out.entries_.size();
  out.uniform_rows_ = true;
  return out;
}

std::span<const Transition> StochasticMatrix::row(Symbol i) const {
  const auto r = static_cast<std::size_t>(i - 1);
  return {entries_.data() + offsets_[r], offsets_[r + 1] - offsets_[r]};
}

std::span<const double> StochasticMatrix::cumulative(Symbol i) const {
  const auto r = static_cast<std::size_t>(i - 1);
  return {cumulative_.data() + offsets_[r], offsets_[r + 1] - offsets_[r]};
}

const Transition* StochasticMatrix::find(Symbol i, Symbol j) const {
  if (i < 1 || static_cast<std::size_t>(i) > size()) return nullptr;
  const auto r = row(i);
  const auto it = std::lower_bound(r.begin(), r.end(), j,
                                   [](const Transition& t, Symbol s) { return t.to < s; });
  return (it != r.end() && it->to == j) ? &*it : nullptr;
}

std::vector<std::vector<Rational>> StochasticMatrix::dense_exact() const {
  const std::size_t k = size();
  std::vector<std::vector<Rational>> out(k, std::vector<Rational>(k, 0));
  for (std::size_t i = 0; i < k; ++i)
    for (const auto& t : row(static_cast<Symbol>(i + 1)))
      out[i][static_cast<std::size_t>(t.to - 1)] = t.prob;
  return out;
}

// ---------------------------------------------------------------------------
// Stationary distribution

std::string primitivity_diagnostic(const StochasticMatrix& pi) {
  const std::size_t k = pi.size();
  std::vector<std::vector<std::size_t>> reverse(k);
  for (std::size_t i = 0; i < k; ++i)
    for (const auto& t : pi.row(static_cast<Symbol>(i + 1)))
      reverse[static_cast<std::size_t>(t.to - 1)].push_back(i);

  std::vector<long> level(k, -1);
  std::queue<std::size_t> frontier;
  level[0] = 0;
  frontier.push(0);
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    for (const auto& t : pi.row(static_cast<Symbol>(u + 1))) {
      const auto v = static_cast<std::size_t>(t.to - 1);
      if (level[v] < 0) {
        level[v] = level[u] + 1;
        frontier.push(v);
      }
    }
  }
  for (std::size_t i = 0; i < k; ++i)
    if (level[i] < 0)
      return "reducible: symbol " + std::to_string(i + 1) + " is not reachable from symbol 1";

  std::vector<char> seen(k, 0);
  seen[0] = 1;
  frontier.push(0);
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    for (const std::size_t v : reverse[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        frontier.push(v);
      }
    }
  }
  if (reached != k) {
    for (std::size_t i = 0; i < k; ++i)
      if (!seen[i])
        return "reducible: symbol 1 is not reachable from symbol " + std::to_string(i + 1);
  }

  long period = 0;
  for (std::size_t u = 0; u < k; ++u)
    for (const auto& t : pi.row(static_cast<Symbol>(u + 1))) {
      const long d = level[u] + 1 - level[static_cast<std::size_t>(t.to - 1)];
      period = std::gcd(period, d < 0 ? -d : d);
    }
  if (period != 1) return "irreducible but periodic with period " + std::to_string(period);
  return {};
}

namespace {

void require_primitive(const StochasticMatrix& pi) {
  if (const auto why = primitivity_diagnostic(pi); !why.empty())
    throw ConvergenceError("stationary distribution undefined: chain is " + why);
}

double stationary_residual(const StochasticMatrix& pi, const std::vector<double>& p) {
  const std::size_t k = pi.size();
  std::vector<double> next(k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (const auto& t : pi.row(static_cast<Symbol>(i + 1)))
      next[static_cast<std::size_t>(t.to - 1)] += p[i] * t.value;
  double worst = 0.0;
  for (std::size_t i = 0; i < k; ++i) worst = std::max(worst, std::fabs(next[i] - p[i]));
  return worst;
}

}  // namespace

std::vector<double> stationary_distribution(const StochasticMatrix& pi) {
  require_primitive(pi);
  const std::size_t k = pi.size();
  std::vector<double> p(k, 1.0 / static_cast<double>(k));
  if (k <= 2048) {
    // p^T (I - Pi + 1 1^T) = 1^T has the stationary vector as unique solution.
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k),
                                                  static_cast<Eigen::Index>(k));
    a.array() += 1.0;
    for (std::size_t i = 0; i < k; ++i)
      for (const auto& t : pi.row(static_cast<Symbol>(i + 1)))
        a(static_cast<Eigen::Index>(i), t.to - 1) -= t.value;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(k));
    const Eigen::VectorXd sol = a.transpose().partialPivLu().solve(ones);
    for (std::size_t i = 0; i < k; ++i) p[i] = sol(static_cast<Eigen::Index>(i));
  } else {
    std::vector<double> next(k);
    for (int iter = 0; iter < 100000; ++iter) {
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t i = 0; i < k; ++i)
        for (const auto& t : pi.row(static_cast<Symbol>(i + 1)))
          next[static_cast<std::size_t>(t.to - 1)] += p[i] * t.value;
      double change = 0.0;
      for (std::size_t i = 0; i < k; ++i) change = std::max(change, std::fabs(next[i] - p[i]));
      p.swap(next);
      if (change < 1e-15) break;
    }
  }
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= total;
  const double residual = stationary_residual(pi, p);
  if (residual > 1e-12 || *std::min_element(p.begin(), p.end()) <= 0.0)
    throw ConvergenceError("stationary distribution did not converge (residual " +
                           std::to_string(residual) + ")");
  return p;
}

std::vector<Rational> stationary_distribution_exact(const StochasticMatrix& pi) {
  require_primitive(pi);
  const std::size_t k = pi.size();
  if (k > kExactStationaryLimit)
    throw UnsupportedError("exact stationary distribution limited to K <= " +
                           std::to_string(kExactStationaryLimit));
  detail::DenseMatrix<Rational> a(k, std::vector<Rational>(k, 1));
  for (std::size_t i = 0; i < k; ++i) a[i][i] += 1;
  for (std::size_t i = 0; i < k; ++i)
    for (const auto& t : pi.row(static_cast<Symbol>(i + 1)))
      a[static_cast<std::size_t>(t.to - 1)][i] -= t.prob;  // transposed
  return detail::gauss_solve(std::move(a), std::vector<Rational>(k, Rational(1)));
}

// ---------------------------------------------------------------------------
// SubshiftSpec

std::size_t symbol_count(int m, int N) {
  if (m < 2) throw DomainError("base multiplier m must be >= 2, got " + std::to_string(m));
  if (N < 1) throw DomainError("refinement level N must be >= 1, got " + std::to_string(N));
  std::size_t k = 1;
  for (int i = 0; i < N; ++i) {
    if (k > kMaxSymbols / static_cast<std::size_t>(m))
      throw SizeError("m^N = " + std::to_string(m) + "^" + std::to_string(N) +
                      " exceeds the supported symbol count " + std::to_string(kMaxSymbols));
    k *= static_cast<std::size_t>(m);
  }
  return k;
}

SubshiftSpec SubshiftSpec::canonical(int m, int N) {
  SubshiftSpec spec;
  spec.m_ = m;
  spec.N_ = N;
  spec.canonical_ = true;
  spec.matrix_ = StochasticMatrix::canonical(m, N);
  const std::size_t k = spec.matrix_.size();
  // Pi_N = A_N/m is doubly stochastic, so the uniform vector is stationary.
  spec.stationary_.assign(k, 1.0 / static_cast<double>(k));
  spec.stationary_exact_ = std::vector<Rational>(k, Rational(1, static_cast<unsigned long>(k)));
  spec.stationary_cumulative_.clear();
  return spec;
}

SubshiftSpec SubshiftSpec::from_matrix(const std::vector<std::vector<Rational>>& rows) {
  SubshiftSpec spec;
  spec.matrix_ = StochasticMatrix(rows);
  if (spec.matrix_.size() <= kExactStationaryLimit) {
    spec.stationary_exact_ = stationary_distribution_exact(spec.matrix_);
    spec.stationary_.resize(spec.stationary_exact_->size());
    for (std::size_t i = 0; i < spec.stationary_.size(); ++i)
      spec.stationary_[i] = (*spec.stationary_exact_)[i].get_d();
  } else {
    spec.stationary_ = stationary_distribution(spec.matrix_);
  }
  spec.stationary_cumulative_.resize(spec.stationary_.size());
  std::partial_sum(spec.stationary_.begin(), spec.stationary_.end(),
                   spec.stationary_cumulative_.begin());
  spec.stationary_cumulative_.back() = 1.0;
  return spec;
}

double SubshiftSpec::transition(Symbol i, Symbol j) const {
  const auto* t = matrix_.find(i, j);
  return t ? t->value : 0.0;
}

Rational SubshiftSpec::transition_exact(Symbol i, Symbol j) const {
  const auto* t = matrix_.find(i, j);
  return t ? t->prob : Rational(0);
}

const std::vector<Rational>& SubshiftSpec::stationary_exact() const {
  if (!stationary_exact_)
    throw UnsupportedError("exact stationary distribution unavailable for K = " +
                           std::to_string(K()));
  return *stationary_exact_;
}

namespace {

std::size_t draw_from_cumulative(std::span<const double> cumulative, double u) {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                               cumulative.size() - 1);
}

}  // namespace

Symbol SubshiftSpec::draw_stationary(Rng& rng) const {
  if (canonical_) return static_cast<Symbol>(rng.below(K()) + 1);
  return static_cast<Symbol>(draw_from_cumulative(stationary_cumulative_, rng.uniform()) + 1);
}

std::size_t SubshiftSpec::draw_successor_index(Symbol from, Rng& rng) const {
  if (matrix_.uniform_rows()) return rng.below(matrix_.row(from).size());
  return draw_from_cumulative(matrix_.cumulative(from), rng.uniform());
}

Symbol SubshiftSpec::draw_successor(Symbol from, Rng& rng) const {
  return matrix_.row(from)[draw_successor_index(from, rng)].to;
}

SubshiftPtr build_subshift(int m, int N) {
  return std::make_shared<const SubshiftSpec>(SubshiftSpec::canonical(m, N));
}

nlohmann::json to_json(const SubshiftSpec& spec) {
  if (spec.is_canonical()) return {{"m", spec.m()}, {"N", spec.N()}, {"mode", "canonical"}};
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : spec.matrix().dense_exact()) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& q : r) row.push_back(q.get_str());
    rows.push_back(std::move(row));
  }
  return {{"mode", {{"matrix", std::move(rows)}}}};
}


SubshiftPtr subshift_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("subshift spec must be a JSON object");
  const auto mode = j.find("mode");
  if (mode == j.end() || (mode->is_string() && mode->get<std::string>() == "canonical")) {
    if (!j.contains("m") || !j.contains("N"))
      throw ValidationError("canonical subshift requires keys m and N");
    return build_subshift(j.at("m").get<int>(), j.at("N").get<int>());
  }
  if (mode->is_object() && mode->contains("matrix")) {
    std::vector<std::vector<Rational>> rows;
    for (const auto& r : mode->at("matrix")) {
      std::vector<Rational> row;
      for (const auto& v : r) row.push_back(rational_from_json(v));
      rows.push_back(std::move(row));
    }
    return std::make_shared<const SubshiftSpec>(SubshiftSpec::from_matrix(rows));
  }
  throw ValidationError("subshift mode must be \"canonical\" or {\"matrix\": rows}");
}

// ---------------------------------------------------------------------------
// Paths and sampling

bool SymbolPath::admissible() const {
  if (!spec) return false;
  const auto k = static_cast<Symbol>(spec->K());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (symbols[i] < 1 || symbols[i] > k) return false;
    if (i + 1 < symbols.size() && !spec->admissible(symbols[i], symbols[i + 1])) return false;
  }
  return true;
}

PathSampler::PathSampler(SubshiftPtr spec, std::uint64_t seed, std::optional<Symbol> previous)
    : spec_(std::move(spec)), rng_(seed), current_(previous) {
  if (previous && (*previous < 1 || static_cast<std::size_t>(*previous) > spec_->K()))
    throw DomainError("initial symbol out of range");
}

Symbol PathSampler::next() {
  const Symbol s = current_ ? spec_->draw_successor(*current_, rng_) : spec_->draw_stationary(rng_);
  current_ = s;
  return s;
}

SymbolPath sample_path(SubshiftPtr spec, std::uint64_t seed, std::size_t length,
                       std::optional<Symbol> previous) {
  if (length == 0) throw DomainError("sample_path requires length >= 1");
  PathSampler sampler(spec, seed, previous);
  SymbolPath path{std::move(spec), {}};
  path.symbols.reserve(length);
  for (std::size_t i = 0; i < length; ++i) path.symbols.push_back(sampler.next());
  return path;
}

// ---------------------------------------------------------------------------
// Coding maps

std::vector<int> symbol_digits(Symbol s, int m, int N) {
  std::vector<int> digits(static_cast<std::size_t>(N));
  long v = s - 1;
  for (int t = N - 1; t >= 0; --t) {
    digits[static_cast<std::size_t>(t)] = static_cast<int>(v % m);
    v /= m;
  }
  return digits;
}

Symbol symbol_from_digits(std::span<const int> digits, int m) {
  long v = 0;
  for (const int d : digits) v = v * m + d;
  return static_cast<Symbol>(v + 1);
}

Symbol cell_of(double y, int m, int N) {
  const std::size_t k = symbol_count(m, N);
  if (y >= 1.0) return static_cast<Symbol>(k);
  if (y < 0.0) throw DomainError("cell_of: y outside [0,1]");
  const auto cell = static_cast<std::size_t>(std::floor(y * static_cast<double>(k)));
  return static_cast<Symbol>(std::min(cell, k - 1) + 1);
}

SymbolPath encode_point(const Rational& y, int m, int N, std::size_t length) {
  if (sgn(y) < 0 || y >= 1) throw DomainError("encode_point: y = " + y.get_str() + " outside [0,1)");
  const std::size_t k = symbol_count(m, N);
  SymbolPath path{build_subshift(m, N), {}};
  path.symbols.reserve(length);
  Rational current = y;
  mpz_class cell;
  for (std::size_t i = 0; i < length; ++i) {
    const Rational scaled = current * static_cast<unsigned long>(k);
    mpz_fdiv_q(cell.get_mpz_t(), scaled.get_num_mpz_t(), scaled.get_den_mpz_t());
    path.symbols.push_back(static_cast<Symbol>(cell.get_si() + 1));
    Rational next = current * m;
    mpz_class whole;
    mpz_fdiv_q(whole.get_mpz_t(), next.get_num_mpz_t(), next.get_den_mpz_t());
    next -= Rational(whole);
    current = next;
  }
  return path;
}

SymbolPath encode_point(double y, int m, int N, std::size_t length) {
  if (!(y >= 0.0 && y < 1.0)) throw DomainError("encode_point: y outside [0,1)");
  return encode_point(rational_from_double(y), m, N, length);
}

namespace {

void check_canonical_word(std::span<const Symbol> omega, int m, int N) {
  if (omega.empty()) throw ValidationError("empty symbol sequence");
  const auto k = static_cast<long>(symbol_count(m, N));
  for (std::size_t i = 0; i < omega.size(); ++i) {
    if (omega[i] < 1 || omega[i] > k)
      throw ValidationError("symbol " + std::to_string(omega[i]) + " at position " +
                            std::to_string(i) + " outside 1.." + std::to_string(k));
    if (i + 1 < omega.size()) {
      const long base = (static_cast<long>(m) * (omega[i] - 1)) % k;
      const long next = omega[i + 1] - 1;
      if (next < base || next >= base + m)
        throw ValidationError("inadmissible transition " + std::to_string(omega[i]) + " -> " +
                              std::to_string(omega[i + 1]) + " at position " + std::to_string(i));
    }
  }
}

}  // namespace

DecodedInterval decode_sequence(std::span<const Symbol> omega, int m, int N) {
  check_canonical_word(omega, m, N);
  // digits d_0..d_{N+L-2}: the block of omega_0, then the last digit of each later symbol
  mpz_class numerator = omega[0] - 1;
  for (std::size_t i = 1; i < omega.size(); ++i) numerator = numerator * m + ((omega[i] - 1) % m);
  mpz_class scale;
  mpz_ui_pow_ui(scale.get_mpz_t(), static_cast<unsigned long>(m),
                static_cast<unsigned long>(N) + omega.size() - 1);
  DecodedInterval out;
  out.lower = Rational(numerator, scale);
  out.upper = Rational(numerator + 1, scale);
  out.lower.canonicalize();
  out.upper.canonicalize();
  Rational mid(2 * numerator + 1, 2 * scale);
  mid.canonicalize();
  out.midpoint = mid.get_d();
  return out;
}

double window_midpoint(std::span<const Symbol> omega, int m, int N) {
  double v = 0.5;
  for (std::size_t i = omega.size(); i-- > 1;) v = (((omega[i] - 1) % m) + v) / m;
  return (static_cast<double>(omega[0] - 1) + v) / std::pow(static_cast<double>(m), N);
}

SymbolPath recode(const SymbolPath& omega, int N1) {
  if (!omega.spec || !omega.spec->is_canonical())
    throw UnsupportedError("recode requires a path over a canonical subshift");
  const int m = omega.spec->m();
  const int N0 = omega.spec->N();
  symbol_count(m, N1);
  if (N1 == N0) return omega;
  SymbolPath out{build_subshift(m, N1), {}};
  if (N1 > N0) {
    const auto extra = static_cast<std::size_t>(N1 - N0);
    if (omega.size() < extra + 1)
      throw DomainError("recode: path of length " + std::to_string(omega.size()) +
                        " too short to form level-" + std::to_string(N1) + " blocks");
    out.symbols.reserve(omega.size() - extra);
    for (std::size_t i = 0; i + extra < omega.size(); ++i) {
      long v = omega.symbols[i] - 1;
      for (std::size_t t = 1; t <= extra; ++t) v = v * m + ((omega.symbols[i + t] - 1) % m);
      out.symbols.push_back(static_cast<Symbol>(v + 1));
    }
  } else {
    long divisor = 1;
    for (int t = 0; t < N0 - N1; ++t) divisor *= m;
    out.symbols.reserve(omega.size());
    for (const Symbol s : omega.symbols) out.symbols.push_back(static_cast<Symbol>((s - 1) / divisor + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cylinders

CylinderWord::CylinderWord(const SubshiftSpec& spec, std::vector<Symbol> word, std::size_t start)
    : offset(start), letters(std::move(word)) {
  if (letters.empty()) throw ValidationError("cylinder word must be nonempty");
  const auto k = static_cast<Symbol>(spec.K());
  for (const Symbol s : letters)
    if (s < 1 || s > k) throw ValidationError("cylinder letter " + std::to_string(s) + " out of range");
  admissible = true;
  for (std::size_t i = 0; i + 1 < letters.size(); ++i)
    if (!spec.admissible(letters[i], letters[i + 1])) admissible = false;
}

double cylinder_measure(const SubshiftSpec& spec, const CylinderWord& word) {
  if (!word.admissible) return 0.0;
  double measure = spec.stationary()[static_cast<std::size_t>(word.letters.front() - 1)];
  for (std::size_t i = 0; i + 1 < word.letters.size(); ++i)
    measure *= spec.transition(word.letters[i], word.letters[i + 1]);
  return measure;
}

Rational cylinder_measure_exact(const SubshiftSpec& spec, const CylinderWord& word) {
  if (!word.admissible) return 0;
  Rational measure = spec.stationary_exact()[static_cast<std::size_t>(word.letters.front() - 1)];
  for (std::size_t i = 0; i + 1 < word.letters.size(); ++i)
    measure *= spec.transition_exact(word.letters[i], word.letters[i + 1]);
  return measure;
}

std::string format_paths(std::span<const SymbolPath> paths) {
  std::ostringstream out;
  for (const auto& p : paths) {
    for (std::size_t i = 0; i < p.symbols.size(); ++i) out << (i ? " " : "") << p.symbols[i];
    out << '\n';
  }
  return out.str();
}

std::vector<std::vector<Symbol>> parse_paths(const std::string& text) {
  std::vector<std::vector<Symbol>> out;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream fields(line);
    std::vector<Symbol> symbols;
    long v = 0;
    while (fields >> v) symbols.push_back(static_cast<Symbol>(v));
    if (!fields.eof()) throw ValidationError("malformed symbol path line: '" + line + "'");
    if (!symbols.empty()) out.push_back(std::move(symbols));
  }
  return out;
}

}  // namespace chw
