#include "chw/poisson_solver.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "chw/errors.hpp"
#include "chw/parallel.hpp"
#include "linalg.hpp"

namespace chw {

namespace {

constexpr std::size_t kDenseGeneralLimit = 1024;

template <class S>
const std::vector<S>& stationary_of(const SubshiftSpec& chain);

template <>
const std::vector<double>& stationary_of<double>(const SubshiftSpec& chain) {
  return chain.stationary();
}

template <>
const std::vector<Rational>& stationary_of<Rational>(const SubshiftSpec& chain) {
  return chain.stationary_exact();
}

template <class S>
S prob_of(const Transition& t) {
  if constexpr (std::is_same_v<S, double>)
    return t.value;
  else
    return t.prob;
}

template <class S>
std::vector<S> apply_matrix(const SubshiftSpec& chain, const std::vector<S>& v) {
  std::vector<S> out(chain.K(), S(0));
  for (std::size_t i = 0; i < chain.K(); ++i)
    for (const auto& t : chain.row(static_cast<Symbol>(i + 1)))
      out[i] += prob_of<S>(t) * v[static_cast<std::size_t>(t.to - 1)];
  return out;
}

template <class S>
S dot(const std::vector<S>& a, const std::vector<S>& b) {
  S total(0);
  for (std::size_t i = 0; i < a.size(); ++i) total += a[i] * b[i];
  return total;
}

// -(Pi xi - (p xi) 1)
template <class S>
std::vector<S> poisson_rhs(const SubshiftSpec& chain, const std::vector<S>& xi) {
  const S mean = dot(stationary_of<S>(chain), xi);
  std::vector<S> rhs = apply_matrix(chain, xi);
  for (auto& v : rhs) v = mean - v;
  return rhs;
}

template <class S>
S poisson_residual(const SubshiftSpec& chain, const std::vector<S>& xi, const std::vector<S>& delta) {
  const std::vector<S> pd = apply_matrix(chain, delta);
  const std::vector<S> rhs = poisson_rhs(chain, xi);
  S worst(0);
  // (Pi - I) Delta - (Pi xi - (p xi) 1) = pd - delta + rhs
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const S r = abs_value(S(pd[i] - delta[i] + rhs[i]));
    if (r > worst) worst = r;
  }
  return worst;
}

template <class S>
void normalize(const SubshiftSpec& chain, std::vector<S>& delta) {
  const S shift = dot(stationary_of<S>(chain), delta);
  for (auto& v : delta) v -= shift;
}

void check_inputs(const SubshiftSpec& chain, std::size_t n) {
  if (n != chain.K())
    throw ValidationError("displacement has length " + std::to_string(n) + ", chain has " +
                          std::to_string(chain.K()) + " symbols");
}

void finish_float(PoissonData& data) {
  data.residual = poisson_residual(*data.chain, data.xi, data.delta);
  data.normalization = std::fabs(dot(data.chain->stationary(), data.delta));
  if (!(data.residual <= kPoissonResidualTolerance))
    throw ConvergenceError("Poisson residual " + std::to_string(data.residual) +
                           " exceeds tolerance");
  compute_zeta(data);
}

void finish_exact(PoissonData& data, std::vector<Rational> xi, std::vector<Rational> delta) {
  data.xi.resize(xi.size());
  data.delta.resize(delta.size());
  for (std::size_t i = 0; i < xi.size(); ++i) {
    data.xi[i] = xi[i].get_d();
    data.delta[i] = delta[i].get_d();
  }
  const Rational residual = poisson_residual(*data.chain, xi, delta);
  if (sgn(residual) != 0)
    throw ConvergenceError("exact Poisson residual is nonzero: " + residual.get_str());
  data.exact = ExactPoisson{std::move(xi), std::move(delta), {}, {}};
  data.residual = 0.0;
  data.normalization = 0.0;
  compute_zeta(data);
  data.residual = poisson_residual(*data.chain, data.xi, data.delta);
  data.normalization = std::fabs(dot(data.chain->stationary(), data.delta));
}

// Delta = -sum_{M=1}^{N-1} Pi^M xi where (Pi^M xi)(i) is the mean of xi over the
// aligned block of m^M indices selected by (i-1) mod m^{N-M}.
template <class S>
std::vector<S> geometric_sum(const std::vector<S>& xi, int m, int N) {
  const std::size_t k = xi.size();
  std::vector<S> delta(k, S(0));
  std::vector<S> blocks = xi;
  S scale(1);
  for (int M = 1; M < N; ++M) {
    std::vector<S> coarser(blocks.size() / static_cast<std::size_t>(m), S(0));
    for (std::size_t b = 0; b < coarser.size(); ++b)
      for (int t = 0; t < m; ++t) coarser[b] += blocks[b * static_cast<std::size_t>(m) + static_cast<std::size_t>(t)];
    blocks.swap(coarser);
    scale *= m;
    for (std::size_t i = 0; i < k; ++i) delta[i] -= blocks[i % blocks.size()] / scale;
  }
  return delta;
}

}  // namespace

double PoissonData::zeta_at(Symbol i, Symbol j) const {
  const auto row = chain->row(i);
  for (std::size_t k = 0; k < row.size(); ++k)
    if (row[k].to == j) return zeta[chain->matrix().row_offset(i) + k];
  throw DomainError("zeta requested on an inadmissible pair");
}

PoissonData solve_poisson_general(SubshiftPtr chain, const std::vector<double>& xi) {
  check_inputs(*chain, xi.size());
  const std::size_t k = chain->K();
  const auto n = static_cast<Eigen::Index>(k);
  const std::vector<double>& p = chain->stationary();
  const std::vector<double> rhs = poisson_rhs(*chain, xi);
  Eigen::VectorXd b(n);
  for (std::size_t i = 0; i < k; ++i) b(static_cast<Eigen::Index>(i)) = rhs[i];

  PoissonData data;
  data.chain = chain;
  data.xi = xi;
  data.delta.resize(k);
  Eigen::VectorXd sol;
  if (k <= kDenseGeneralLimit) {
    // (I - Pi + 1 p^T) is invertible, and its solution already has p Delta = 0.
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += p[j];
      for (const auto& t : chain->row(static_cast<Symbol>(i + 1)))
        a(static_cast<Eigen::Index>(i), t.to - 1) -= t.value;
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    data.rcond = lu.rcond();
    sol = lu.solve(b);
  } else {
    // Any K-1 rows of I - Pi are independent (p > 0), so replace the last one by p^T.
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(chain->matrix().entry_count() + 2 * k);
    for (std::size_t i = 0; i + 1 < k; ++i) {
      entries.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
      for (const auto& t : chain->row(static_cast<Symbol>(i + 1)))
        entries.emplace_back(static_cast<int>(i), t.to - 1, -t.value);
    }
    for (std::size_t j = 0; j < k; ++j) entries.emplace_back(static_cast<int>(k - 1), static_cast<int>(j), p[j]);
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(entries.begin(), entries.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw ConvergenceError("sparse LU failed: " + lu.lastErrorMessage());
    b(n - 1) = 0.0;
    sol = lu.solve(b);
    data.rcond = std::numeric_limits<double>::quiet_NaN();
  }
  for (std::size_t i = 0; i < k; ++i) data.delta[i] = sol(static_cast<Eigen::Index>(i));
  normalize(*chain, data.delta);
  finish_float(data);
  return data;
}

PoissonData solve_poisson_general_exact(SubshiftPtr chain, const std::vector<Rational>& xi) {
  check_inputs(*chain, xi.size());
  const std::size_t k = chain->K();
  if (k > kExactGeneralLimit)
    throw UnsupportedError("exact general Poisson solve limited to K <= " +
                           std::to_string(kExactGeneralLimit));
  const std::vector<Rational>& p = chain->stationary_exact();
  detail::DenseMatrix<Rational> a(k, std::vector<Rational>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) a[i][j] = p[j];
    a[i][i] += 1;
    for (const auto& t : chain->row(static_cast<Symbol>(i + 1)))
      a[i][static_cast<std::size_t>(t.to - 1)] -= t.prob;
  }
  std::vector<Rational> delta = detail::gauss_solve(std::move(a), poisson_rhs(*chain, xi));
  normalize(*chain, delta);
  PoissonData data;
  data.chain = chain;
  data.rcond = std::numeric_limits<double>::quiet_NaN();
  finish_exact(data, xi, std::move(delta));
  return data;
}

PoissonData solve_poisson_canonical(const std::vector<double>& xi, int m, int N) {
  auto chain = build_subshift(m, N);
  check_inputs(*chain, xi.size());
  CompensatedSum total;
  for (const double v : xi) total.add(v);
  const double mean = total.value() / static_cast<double>(xi.size());
  if (std::fabs(mean) > 1e-12)
    throw DomainError("canonical Poisson solve needs centered xi; mean is " + std::to_string(mean));
  PoissonData data;
  data.chain = chain;
  data.xi = xi;
  data.delta = geometric_sum(xi, m, N);
  data.rcond = std::numeric_limits<double>::quiet_NaN();
  finish_float(data);
  return data;
}

PoissonData solve_poisson_canonical_exact(const std::vector<Rational>& xi, int m, int N) {
  auto chain = build_subshift(m, N);
  check_inputs(*chain, xi.size());
  if (chain->K() > kExactCanonicalLimit)
    throw UnsupportedError("exact canonical Poisson solve limited to K <= " +
                           std::to_string(kExactCanonicalLimit));
  Rational total = 0;
  for (const auto& v : xi) total += v;
  if (sgn(total) != 0)
    throw DomainError("canonical Poisson solve needs centered xi; sum is " + total.get_str());
  PoissonData data;
  data.chain = chain;
  data.rcond = std::numeric_limits<double>::quiet_NaN();
  finish_exact(data, xi, geometric_sum(xi, m, N));
  return data;
}

std::vector<long> srw_delta_closed_form(int N) {
  const std::size_t k = symbol_count(2, N);
  std::vector<long> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    const long xi = i < k / 2 ? 1 : -1;
    const long ones = std::popcount(i);
    out[i] = xi + (ones - (N - ones));
  }
  return out;
}

std::vector<long> srw_displacement(int N) {
  const std::size_t k = symbol_count(2, N);
  std::vector<long> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = i < k / 2 ? 1 : -1;
  return out;
}

void compute_zeta(PoissonData& data) {
  const SubshiftSpec& chain = *data.chain;
  const std::size_t k = chain.K();
  data.zeta.assign(chain.matrix().entry_count(), 0.0);
  data.centering = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const auto s = static_cast<Symbol>(i + 1);
    const std::size_t base = chain.matrix().row_offset(s);
    const auto row = chain.row(s);
    CompensatedSum mean;
    for (std::size_t e = 0; e < row.size(); ++e) {
      const auto j = static_cast<std::size_t>(row[e].to - 1);
      data.zeta[base + e] = data.xi[j] - data.delta[j] + data.delta[i];
      mean.add(row[e].value * data.zeta[base + e]);
    }
    data.centering = std::max(data.centering, std::fabs(mean.value()));
  }
  if (data.exact) {
    ExactPoisson& ex = *data.exact;
    ex.zeta.assign(chain.matrix().entry_count(), Rational(0));
    bool first = true;
    Rational lo = 0, hi = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const auto s = static_cast<Symbol>(i + 1);
      const std::size_t base = chain.matrix().row_offset(s);
      const auto row = chain.row(s);
      Rational second = 0, centered = 0;
      for (std::size_t e = 0; e < row.size(); ++e) {
        const auto j = static_cast<std::size_t>(row[e].to - 1);
        Rational& z = ex.zeta[base + e];
        z = ex.xi[j] - ex.delta[j] + ex.delta[i];
        centered += row[e].prob * z;
        second += row[e].prob * z * z;
        if (abs(z) > ex.bounds.D) ex.bounds.D = abs(z);
      }
      if (sgn(centered) != 0)
        throw ConvergenceError("exact zeta row " + std::to_string(i + 1) + " is not centered");
      if (first || second < ex.bounds.Vminus) ex.bounds.Vminus = second;
      if (first || second > ex.bounds.Vplus) ex.bounds.Vplus = second;
      if (first || ex.delta[i] < lo) lo = ex.delta[i];
      if (first || ex.delta[i] > hi) hi = ex.delta[i];
      first = false;
    }
    ex.bounds.G = hi - lo;
    for (std::size_t e = 0; e < ex.zeta.size(); ++e) data.zeta[e] = ex.zeta[e].get_d();
  }
  data.bounds = compute_bounds(data);
}

Bounds<double> compute_bounds(const PoissonData& data) {
  const SubshiftSpec& chain = *data.chain;
  Bounds<double> b;
  b.Vminus = std::numeric_limits<double>::infinity();
  b.Vplus = 0.0;
  for (std::size_t i = 0; i < chain.K(); ++i) {
    const auto s = static_cast<Symbol>(i + 1);
    const std::size_t base = chain.matrix().row_offset(s);
    const auto row = chain.row(s);
    CompensatedSum second;
    for (std::size_t e = 0; e < row.size(); ++e) {
      const double z = data.zeta[base + e];
      b.D = std::max(b.D, std::fabs(z));
      second.add(row[e].value * z * z);
    }
    b.Vminus = std::min(b.Vminus, second.value());
    b.Vplus = std::max(b.Vplus, second.value());
  }
  const auto [lo, hi] = std::minmax_element(data.delta.begin(), data.delta.end());
  b.G = *hi - *lo;
  return b;
}

Rational canonical_power_entry(int m, int N, int M, Symbol i, Symbol j) {
  const std::size_t k = symbol_count(m, N);
  if (M < 0) throw DomainError("matrix power must be non-negative");
  if (i < 1 || j < 1 || static_cast<std::size_t>(i) > k || static_cast<std::size_t>(j) > k)
    throw DomainError("matrix index out of range");
  if (M == 0) return i == j ? 1 : 0;
  if (M >= N) return Rational(1, static_cast<unsigned long>(k));
  const std::size_t width = symbol_count(m, M);
  const std::size_t start = (width * static_cast<std::size_t>(i - 1)) % k;
  const auto col = static_cast<std::size_t>(j - 1);
  return (col >= start && col < start + width) ? Rational(1, static_cast<unsigned long>(width))
                                               : Rational(0);
}

nlohmann::json GrowthTable::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : rows)
    list.push_back({{"N", r.N},
                    {"delta_sup", r.delta_sup},
                    {"D", r.bounds.D},
                    {"Vminus", r.bounds.Vminus},
                    {"Vplus", r.bounds.Vplus},
                    {"G", r.bounds.G},
                    {"max_row_spread", r.max_row_spread},
                    {"min_row_spread", r.min_row_spread},
                    {"min_gap", r.min_gap},
                    {"residual", r.residual}});
  return {{"rows", list}, {"slope", slope}, {"intercept", intercept}, {"fit_residual", fit_residual}};
}

GrowthTable growth_diagnostics(const DisplacementSpec& xi, int m, int N_first, int N_last) {
  if (N_first < 1 || N_last < N_first) throw DomainError("invalid refinement range");
  GrowthTable table;
  for (int N = N_first; N <= N_last; ++N) {
    const DiscreteDisplacement disc = discretize_displacement(xi, m, N);
    const PoissonData pd = solve_poisson_canonical(disc.values, m, N);
    GrowthRow row;
    row.N = N;
    row.bounds = pd.bounds;
    row.residual = pd.residual;
    for (const double d : pd.delta) row.delta_sup = std::max(row.delta_sup, std::fabs(d));
    row.min_row_spread = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pd.chain->K(); ++i) {
      const auto s = static_cast<Symbol>(i + 1);
      const std::size_t base = pd.chain->matrix().row_offset(s);
      const std::size_t len = pd.chain->row(s).size();
      const auto [lo, hi] = std::minmax_element(pd.zeta.begin() + static_cast<long>(base),
                                                pd.zeta.begin() + static_cast<long>(base + len));
      row.max_row_spread = std::max(row.max_row_spread, *hi - *lo);
      row.min_row_spread = std::min(row.min_row_spread, *hi - *lo);
    }
    row.min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < pd.delta.size(); i += 2)
      row.min_gap = std::min(row.min_gap, pd.delta[i + 1] - pd.delta[i]);
    table.rows.push_back(row);
  }
  const auto n = static_cast<double>(table.rows.size());
  if (table.rows.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& r : table.rows) {
      sx += r.N;
      sy += r.delta_sup;
      sxx += static_cast<double>(r.N) * r.N;
      sxy += r.N * r.delta_sup;
    }
    table.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    table.intercept = (sy - table.slope * sx) / n;
    double ss = 0;
    for (const auto& r : table.rows) {
      const double e = r.delta_sup - (table.slope * r.N + table.intercept);
      ss += e * e;
    }
    table.fit_residual = std::sqrt(ss / n);
  }
  return table;
}

MartingaleCheck martingale_check(const PoissonData& data, std::size_t trials, std::size_t horizon,
                                 std::uint64_t seed, unsigned threads) {
  const SubshiftSpec& chain = *data.chain;
  const std::size_t k = chain.K();
  constexpr std::size_t kChunks = 64;
  const std::size_t chunks = std::min(kChunks, std::max<std::size_t>(trials, 1));
  struct Acc {
    std::vector<CompensatedSum> sum, sum_sq;
    std::uint64_t count = 0;
  };
  std::vector<Acc> acc(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    Acc& a = acc[c];
    a.sum.resize(k);
    a.sum_sq.resize(k);
    for (std::size_t t = c; t < trials; t += chunks) {
      Rng rng(derive_seed(seed, t));
      Symbol prev = chain.draw_stationary(rng);
      for (std::size_t n = 0; n < horizon; ++n) {
        const std::size_t e = chain.draw_successor_index(prev, rng);
        const double z = data.zeta[chain.matrix().row_offset(prev) + e];
        const auto s = static_cast<std::size_t>(prev - 1);
        a.sum[s].add(z);
        a.sum_sq[s].add(z * z);
        ++a.count;
        prev = chain.row(prev)[e].to;
      }
    }
  });
  MartingaleCheck out;
  out.z.assign(k, 0.0);
  for (std::size_t s = 0; s < k; ++s) {
    CompensatedSum sum, sq;
    for (const auto& a : acc) {
      sum.add(a.sum[s].value());
      sq.add(a.sum_sq[s].value());
    }
    const auto row = chain.row(static_cast<Symbol>(s + 1));
    if (row.size() == 1) {
      // the increment is a constant; any nonzero value breaks the martingale property
      const double z = data.zeta[chain.matrix().row_offset(static_cast<Symbol>(s + 1))];
      if (std::fabs(z) > 1e-12) out.z[s] = std::copysign(INFINITY, z);
    } else if (sq.value() > 1e-300) {
      out.z[s] = sum.value() / std::sqrt(sq.value());
    }
    if (std::fabs(out.z[s]) > std::fabs(out.worst_z)) {
      out.worst_z = out.z[s];
      out.worst_state = static_cast<Symbol>(s + 1);
    }
  }
  for (const auto& a : acc) out.increments += a.count;
  out.worst_z = std::fabs(out.worst_z);
  return out;
}

nlohmann::json bounds_to_json(const PoissonData& data) {
  nlohmann::json j = {{"K", data.chain->K()},
                      {"D", data.bounds.D},
                      {"Vminus", data.bounds.Vminus},
                      {"Vplus", data.bounds.Vplus},
                      {"G", data.bounds.G},
                      {"residual", data.residual},
                      {"normalization", data.normalization},
                      {"centering", data.centering}};
  if (std::isnan(data.rcond))
    j["rcond"] = nullptr;
  else
    j["rcond"] = data.rcond;
  if (data.exact)
    j["exact"] = {{"D", data.exact->bounds.D.get_str()},
                  {"Vminus", data.exact->bounds.Vminus.get_str()},
                  {"Vplus", data.exact->bounds.Vplus.get_str()},
                  {"G", data.exact->bounds.G.get_str()}};
  return j;
}

}  // namespace chw
