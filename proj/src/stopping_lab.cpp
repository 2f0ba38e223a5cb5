#include "chw/stopping_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "chw/errors.hpp"
#include "chw/parallel.hpp"
#include "linalg.hpp"

namespace chw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json estimate_json(const Estimate& e) {
  return {{"value", e.value}, {"lower", e.lower}, {"upper", e.upper}, {"std_error", e.std_error}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Walks

WalkSpec WalkSpec::zeta_walk(const PoissonData& pd, double alpha, double x0) {
  WalkSpec w;
  w.chain = pd.chain;
  w.increments = pd.zeta;
  if (pd.exact) w.increments_exact = pd.exact->zeta;
  w.alpha = alpha;
  w.x0 = x0;
  w.G = pd.bounds.G;
  return w;
}

WalkSpec WalkSpec::xi_walk(SubshiftPtr chain, const std::vector<double>& xi, double alpha, double x0) {
  if (xi.size() != chain->K()) throw ValidationError("xi length does not match the chain");
  WalkSpec w;
  w.chain = chain;
  w.increments.resize(chain->matrix().entry_count());
  for (std::size_t i = 0; i < chain->K(); ++i) {
    const auto s = static_cast<Symbol>(i + 1);
    const auto row = chain->row(s);
    for (std::size_t e = 0; e < row.size(); ++e)
      w.increments[chain->matrix().row_offset(s) + e] = xi[static_cast<std::size_t>(row[e].to - 1)];
  }
  w.alpha = alpha;
  w.x0 = x0;
  return w;
}

WalkSpec WalkSpec::chaotic(const SkewSystem& sys, double x0) {
  WalkSpec w;
  w.chain = build_subshift(sys.m, sys.N);
  w.system = sys;
  w.x0 = x0;
  return w;
}

double WalkSpec::max_step() const {
  if (is_chaotic()) return kInf;
  double best = 0.0;
  for (const double v : increments) best = std::max(best, std::fabs(v + alpha));
  return best;
}

WalkStepper::WalkStepper(const WalkSpec& walk, std::uint64_t seed)
    : walk_(&walk), rng_(seed), position_(walk.x0) {
  if (walk.is_chaotic()) {
    window_.emplace(walk.chain, seed, walk.system->window);
    return;
  }
  prev_ = walk.previous ? *walk.previous : walk.chain->draw_stationary(rng_);
}

void WalkStepper::step() {
  if (window_) {
    const double y = window_->y();
    position_ = fiber_map_line(walk_->system->xi(y), position_, walk_->system->r, y);
    window_->advance();
    return;
  }
  const SubshiftSpec& chain = *walk_->chain;
  const std::size_t e = chain.draw_successor_index(prev_, rng_);
  position_ += walk_->increments[chain.matrix().row_offset(prev_) + e] + walk_->alpha;
  prev_ = chain.row(prev_)[e].to;
}

// ---------------------------------------------------------------------------
// Compact intervals

nlohmann::json EscapeStats::to_json() const {
  return {{"trials", trials},
          {"horizon", horizon},
          {"exits_left", exits_left},
          {"exits_right", exits_right},
          {"censored", censored},
          {"p_left", estimate_json(p_left)},
          {"mean_time", estimate_json(mean_time)},
          {"mean_time_left", estimate_json(mean_time_left)},
          {"doob_residual", estimate_json(doob_residual)},
          {"censoring_flag", censoring_flag},
          {"warnings", warnings}};
}

EscapeStats estimate_escape_compact(const WalkSpec& walk, double A, double B, std::size_t trials,
                                    std::size_t horizon, std::uint64_t seed, unsigned threads) {
  if (!(A < walk.x0 && walk.x0 < B)) throw DomainError("compact escape needs A < x0 < B");
  if (horizon < 1) throw DomainError("horizon must be >= 1");
  if (trials < 1) throw DomainError("trials must be >= 1");
  struct Outcome {
    int side = 0;  // -1 left, +1 right, 0 censored
    std::uint64_t time = 0;
    double final = 0.0;
  };
  std::vector<Outcome> out(trials);
  parallel_for(trials, threads, [&](std::size_t t) {
    WalkStepper walker(walk, derive_seed(seed, t));
    Outcome o;
    for (std::size_t n = 1; n <= horizon; ++n) {
      walker.step();
      const double v = walker.position();
      if (v <= A || v >= B) {
        o.side = v <= A ? -1 : 1;
        o.time = n;
        break;
      }
    }
    if (o.side == 0) o.time = horizon;
    o.final = walker.position();
    out[t] = o;
  });

  EscapeStats s;
  s.trials = trials;
  s.horizon = horizon;
  MomentAccumulator time, time_left, doob;
  for (const auto& o : out) {
    if (o.side == 0) {
      ++s.censored;
      continue;
    }
    (o.side < 0 ? s.exits_left : s.exits_right) += 1;
    time.add(static_cast<double>(o.time));
    if (o.side < 0) time_left.add(static_cast<double>(o.time));
    doob.add(o.final - walk.x0 - walk.alpha * static_cast<double>(o.time));
  }
  s.p_left = wilson_interval(s.exits_left, s.exits_left + s.exits_right);
  s.mean_time = time.estimate();
  s.mean_time_left = time_left.estimate();
  s.doob_residual = doob.estimate();
  s.censoring_flag = s.censored > 0;
  if (2 * s.censored > trials) s.warnings.push_back("horizon exhausted on more than half of the trials");
  if (walk.G && (std::fabs(A - walk.x0) <= *walk.G || std::fabs(B - walk.x0) <= *walk.G))
    s.warnings.push_back("interval half-widths do not exceed G = " + std::to_string(*walk.G));
  return s;
}

// ---------------------------------------------------------------------------
// Exact oracle

namespace {

mpz_class lcm_of(const mpz_class& a, const mpz_class& b) {
  mpz_class out;
  mpz_lcm(out.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return out;
}

mpz_class floor_of(const Rational& q) {
  mpz_class out;
  mpz_fdiv_q(out.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return out;
}

mpz_class ceil_of(const Rational& q) {
  mpz_class out;
  mpz_cdiv_q(out.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return out;
}

using detail::is_zero;

// In-place banded LU without pivoting; the absorption matrix I - P is a
// nonsingular M-matrix, so every pivot is positive.
template <class S>
class BandedLU {
 public:
  BandedLU(std::size_t n, std::size_t bw) : n_(n), bw_(bw), w_(2 * bw + 1), a_(n * w_, S(0)) {}

  S& at(std::size_t r, std::size_t c) { return a_[r * w_ + (c + bw_ - r)]; }

  void factor() {
    for (std::size_t c = 0; c < n_; ++c) {
      const S pivot = at(c, c);
      if (is_zero(pivot)) throw ConvergenceError("absorption system is singular (walk can stall)");
      const std::size_t last = std::min(n_ - 1, c + bw_);
      for (std::size_t r = c + 1; r <= last; ++r) {
        S& lower = at(r, c);
        if (is_zero(lower)) continue;
        lower /= pivot;
        const S f = lower;
        for (std::size_t k = c + 1; k <= last; ++k) {
          const S& u = at(c, k);
          if (!is_zero(u)) at(r, k) -= f * u;
        }
      }
    }
  }

  std::vector<S> solve(std::vector<S> b) {
    for (std::size_t r = 0; r < n_; ++r) {
      const std::size_t first = r > bw_ ? r - bw_ : 0;
      for (std::size_t c = first; c < r; ++c)
        if (!is_zero(at(r, c))) b[r] -= at(r, c) * b[c];
    }
    for (std::size_t r = n_; r-- > 0;) {
      const std::size_t last = std::min(n_ - 1, r + bw_);
      for (std::size_t c = r + 1; c <= last; ++c)
        if (!is_zero(at(r, c))) b[r] -= at(r, c) * b[c];
      b[r] /= at(r, r);
    }
    return b;
  }

 private:
  std::size_t n_, bw_, w_;
  std::vector<S> a_;
};

template <class S>
OracleResult<S> absorption_oracle(const Rational& A, const Rational& B, const Rational& x0,
                                  const SubshiftSpec& chain, const std::vector<Rational>& increments,
                                  const Rational& alpha, std::optional<Symbol> previous) {
  if (!(A < x0 && x0 < B)) throw DomainError("oracle needs A < x0 < B");
  if (increments.size() != chain.matrix().entry_count())
    throw ValidationError("increment table does not match the chain's transitions");
  mpz_class q = 1;
  for (const auto& v : increments) q = lcm_of(q, Rational(v + alpha).get_den());
  q = lcm_of(lcm_of(q, x0.get_den()), lcm_of(A.get_den(), B.get_den()));
  const mpz_class umin = floor_of(Rational(A * q)) + 1;
  const mpz_class umax = ceil_of(Rational(B * q)) - 1;
  const std::size_t k = chain.K();
  const mpz_class slots = umax - umin + 1;
  std::vector<long> jump(increments.size());
  mpz_class max_jump = 0;
  for (std::size_t e = 0; e < increments.size(); ++e) {
    const Rational scaled = (increments[e] + alpha) * q;
    const mpz_class j = scaled.get_num();  // denominator is 1 by construction of q
    if (abs(j) > max_jump) max_jump = abs(j);
    if (!j.fits_slong_p()) throw UnsupportedError("increment lattice too fine for the oracle");
    jump[e] = j.get_si();
  }
  if (!slots.fits_ulong_p() || slots * k > kOracleMaxStates)
    throw UnsupportedError("oracle lattice needs more than " + std::to_string(kOracleMaxStates) +
                           " states; increments must have small denominators");
  const std::size_t n = slots.get_ui() * k;
  const std::size_t bw = (max_jump.get_ui() + 1) * k;
  const long lo = umin.get_si();
  const long hi = umax.get_si();
  auto index = [&](long u, Symbol s) {
    return static_cast<std::size_t>(u - lo) * k + static_cast<std::size_t>(s - 1);
  };

  BandedLU<S> lu(n, std::min(bw, n));
  std::vector<S> b_left(n, S(0)), ones(n, S(1));
  for (long u = lo; u <= hi; ++u) {
    for (std::size_t i = 0; i < k; ++i) {
      const auto s = static_cast<Symbol>(i + 1);
      const std::size_t r = index(u, s);
      lu.at(r, r) += S(1);
      const auto row = chain.row(s);
      const std::size_t base = chain.matrix().row_offset(s);
      for (std::size_t e = 0; e < row.size(); ++e) {
        const long v = u + jump[base + e];
        const S p = scalar_from<S>(row[e].prob);
        if (v < lo)
          b_left[r] += p;
        else if (v <= hi)
          lu.at(r, index(v, row[e].to)) -= p;
      }
    }
  }
  lu.factor();
  const std::vector<S> h = lu.solve(b_left);
  const std::vector<S> t = lu.solve(ones);
  const std::vector<S> g = lu.solve(h);  // (I - P) g = h gives E[T 1_left]

  const long u0 = Rational(x0 * q).get_num().get_si();
  OracleResult<S> res;
  res.states = n;
  S joint(0);
  auto accumulate = [&](Symbol s, const S& w) {
    res.p_left += w * h[index(u0, s)];
    res.expected_time += w * t[index(u0, s)];
    joint += w * g[index(u0, s)];
  };
  if (previous) {
    accumulate(*previous, S(1));
  } else if constexpr (std::is_same_v<S, Rational>) {
    const auto& p = chain.stationary_exact();
    for (std::size_t i = 0; i < k; ++i) accumulate(static_cast<Symbol>(i + 1), p[i]);
  } else {
    const auto& p = chain.stationary();
    for (std::size_t i = 0; i < k; ++i) accumulate(static_cast<Symbol>(i + 1), p[i]);
  }
  if (!is_zero(res.p_left)) res.expected_time_left = joint / res.p_left;
  return res;
}

}  // namespace

OracleResult<Rational> gambler_ruin_oracle(const Rational& A, const Rational& B, const Rational& x0,
                                           const SubshiftSpec& chain,
                                           const std::vector<Rational>& increments,
                                           const Rational& alpha, std::optional<Symbol> previous) {
  return absorption_oracle<Rational>(A, B, x0, chain, increments, alpha, previous);
}

OracleResult<double> gambler_ruin_oracle_float(const Rational& A, const Rational& B,
                                               const Rational& x0, const SubshiftSpec& chain,
                                               const std::vector<Rational>& increments,
                                               const Rational& alpha,
                                               std::optional<Symbol> previous) {
  return absorption_oracle<double>(A, B, x0, chain, increments, alpha, previous);
}

// ---------------------------------------------------------------------------
// Half-lines

namespace {

// First n in [1, limit] with v_n >= B, or limit + 1.
std::vector<std::uint64_t> first_passage_times(const WalkSpec& walk, double B, std::size_t trials,
                                               std::uint64_t limit, std::uint64_t seed,
                                               unsigned threads) {
  std::vector<std::uint64_t> times(trials, limit + 1);
  parallel_for(trials, threads, [&](std::size_t t) {
    WalkStepper walker(walk, derive_seed(seed, t));
    for (std::uint64_t n = 1; n <= limit; ++n) {
      walker.step();
      if (walker.position() >= B) {
        times[t] = n;
        return;
      }
    }
  });
  return times;
}

}  // namespace

nlohmann::json HalflineStats::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : rows)
    list.push_back({{"horizon", r.horizon},
                    {"escaped", estimate_json(r.escaped)},
                    {"mean_escapees", estimate_json(r.mean_escapees)},
                    {"restricted_mean", estimate_json(r.restricted_mean)}});
  return {{"trials", trials}, {"rows", list}};
}

HalflineStats estimate_escape_halfline(const WalkSpec& walk, double B, std::size_t trials,
                                       const std::vector<std::uint64_t>& horizons,
                                       std::uint64_t seed, unsigned threads) {
  if (walk.x0 > B) throw DomainError("half-line escape needs x0 <= B");
  if (horizons.empty() || !std::is_sorted(horizons.begin(), horizons.end()) || horizons.front() < 1)
    throw DomainError("horizons must be a nonempty increasing list of positive integers");
  if (trials < 1) throw DomainError("trials must be >= 1");
  const std::vector<std::uint64_t> times =
      first_passage_times(walk, B, trials, horizons.back(), seed, threads);
  HalflineStats stats;
  stats.trials = trials;
  for (const std::uint64_t h : horizons) {
    HalflineRow row;
    row.horizon = h;
    std::uint64_t escaped = 0;
    MomentAccumulator among, restricted;
    for (const std::uint64_t t : times) {
      if (t <= h) {
        ++escaped;
        among.add(static_cast<double>(t));
      }
      restricted.add(static_cast<double>(std::min(t, h)));
    }
    row.escaped = wilson_interval(escaped, trials);
    row.mean_escapees = among.estimate();
    row.restricted_mean = restricted.estimate();
    stats.rows.push_back(row);
  }
  return stats;
}

StayEstimate estimate_stay_probability(const WalkSpec& walk, double B, std::size_t trials,
                                       std::size_t horizon, std::uint64_t seed, unsigned threads) {
  if (!walk.is_chaotic() && walk.alpha > 0.0) throw DomainError("stay probability needs alpha <= 0");
  if (walk.x0 >= B) throw DomainError("stay probability needs x0 < B");
  if (horizon < 1 || trials < 1) throw DomainError("horizon and trials must be >= 1");
  const std::vector<std::uint64_t> times =
      first_passage_times(walk, B, trials, 2 * static_cast<std::uint64_t>(horizon), seed, threads);
  std::uint64_t stay = 0, stay_doubled = 0;
  for (const std::uint64_t t : times) {
    stay += t > horizon;
    stay_doubled += t > 2 * static_cast<std::uint64_t>(horizon);
  }
  StayEstimate est;
  est.p_stay = wilson_interval(stay, trials);
  est.p_stay_doubled = wilson_interval(stay_doubled, trials);
  est.stable = std::fabs(est.p_stay.value - est.p_stay_doubled.value) <
               est.p_stay_doubled.upper - est.p_stay_doubled.lower;
  if (!est.stable) est.warnings.push_back("estimate moves by more than its CI width under horizon doubling");
  return est;
}

// ---------------------------------------------------------------------------
// Exponential tilts

namespace {

double row_mgf(const SubshiftSpec& chain, const std::vector<double>& zeta, Symbol s, double r,
               double alpha) {
  const auto row = chain.row(s);
  const std::size_t base = chain.matrix().row_offset(s);
  CompensatedSum sum;
  for (std::size_t e = 0; e < row.size(); ++e) sum.add(row[e].value * std::exp(r * (zeta[base + e] + alpha)));
  return sum.value();
}

}  // namespace

TiltRates exponential_tilt_rates(const PoissonData& pd, double alpha) {
  const SubshiftSpec& chain = *pd.chain;
  const Bounds<double>& b = pd.bounds;
  // rounding leaves a deterministic row at ~1e-32 instead of 0
  if (b.Vminus <= 1e-24 * std::max(1.0, b.D * b.D))
    throw DomainError("tilt rates undefined: some row of zeta is deterministic (Vminus = 0)");
  TiltRates out;
  out.taylor_regime = std::fabs(alpha) < b.Vminus / (2.0 * b.D);
  out.predicted_sub = -2.0 * alpha / b.Vminus;
  out.predicted_super = -2.0 * alpha / b.Vplus;
  const std::size_t k = chain.K();
  out.row_roots.assign(k, 0.0);
  if (alpha != 0.0) {
    // For alpha > 0 each phi_i is convex with phi_i(0) = 1, phi_i'(0) = alpha,
    // so its other root lies in [-10/D, 0); alpha < 0 mirrors this.
    const double far = (alpha > 0 ? -10.0 : 10.0) / b.D;
    for (std::size_t i = 0; i < k; ++i) {
      const auto s = static_cast<Symbol>(i + 1);
      if (row_mgf(chain, pd.zeta, s, far, alpha) <= 1.0)
        throw ConvergenceError("tilt root of row " + std::to_string(i + 1) +
                               " not bracketed by 10/D");
      double outer = far, inner = 0.0;  // phi(outer) > 1 >= phi(inner)
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (outer + inner);
        if (mid == outer || mid == inner) break;
        (row_mgf(chain, pd.zeta, s, mid, alpha) > 1.0 ? outer : inner) = mid;
      }
      out.row_roots[i] = 0.5 * (outer + inner);
    }
  }
  const auto [lo, hi] = std::minmax_element(out.row_roots.begin(), out.row_roots.end());
  out.r_sub = alpha >= 0 ? *lo : *hi;
  out.r_super = alpha >= 0 ? *hi : *lo;
  out.certificate_sub.resize(k);
  out.certificate_super.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto s = static_cast<Symbol>(i + 1);
    out.certificate_sub[i] = row_mgf(chain, pd.zeta, s, out.r_sub, alpha);
    out.certificate_super[i] = row_mgf(chain, pd.zeta, s, out.r_super, alpha);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Drift scaling

namespace {

double ratio(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo > 0 ? *hi / *lo : kInf;
}

}  // namespace

nlohmann::json ScalingTable::to_json() const {
  auto rows_json = [](const std::vector<ScalingRow>& rows) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : rows)
      list.push_back({{"alpha", r.alpha},
                      {"A", r.A},
                      {"p_A", r.p_A},
                      {"mean_time", r.mean_time},
                      {"mean_time_left", r.mean_time_left},
                      {"mean_time_B", r.mean_time_B},
                      {"normalized_p_A", r.normalized_p_A},
                      {"alpha_mean_time_B", r.alpha_mean_time_B},
                      {"p_A_times_A", r.p_A_times_A},
                      {"time_left_over_A2", r.time_left_over_A2},
                      {"censored", r.censored}});
    return list;
  };
  return {{"drift_rows", rows_json(drift_rows)},
          {"zero_drift_rows", rows_json(zero_drift_rows)},
          {"ratio_alpha_time_B", ratio_alpha_time_B},
          {"ratio_normalized_p_A", ratio_normalized_p_A},
          {"ratio_p_A_times_A", ratio_p_A_times_A},
          {"ratio_time_left_over_A2", ratio_time_left_over_A2}};
}

ScalingTable drift_scaling_experiment(const PoissonData& pd, const ScalingOptions& opts) {
  ScalingTable table;
  std::uint64_t stream = 0;
  std::vector<double> alpha_time, normalized;
  for (const double alpha : opts.alphas) {
    if (!(alpha > 0.0)) throw DomainError("drift rows need alpha > 0");
    const WalkSpec walk = WalkSpec::zeta_walk(pd, alpha);
    ScalingRow row;
    row.alpha = alpha;
    row.A = opts.A;
    const EscapeStats compact = estimate_escape_compact(walk, opts.A, opts.B, opts.trials, opts.horizon,
                                                        derive_seed(opts.seed, stream++), opts.threads);
    const HalflineStats half = estimate_escape_halfline(walk, opts.B, opts.trials, {opts.horizon},
                                                        derive_seed(opts.seed, stream++), opts.threads);
    row.p_A = compact.p_left.value;
    row.mean_time = compact.mean_time.value;
    row.mean_time_left = compact.mean_time_left.value;
    row.mean_time_B = half.rows.back().mean_escapees.value;
    row.censored = compact.censored + (opts.trials - static_cast<std::uint64_t>(
                                                         std::llround(half.rows.back().escaped.value *
                                                                      static_cast<double>(opts.trials))));
    row.normalized_p_A = row.p_A * std::exp(-(2.0 / pd.bounds.Vplus) * alpha * opts.A) / alpha;
    row.alpha_mean_time_B = alpha * row.mean_time_B;
    alpha_time.push_back(row.alpha_mean_time_B);
    normalized.push_back(row.normalized_p_A);
    table.drift_rows.push_back(row);
  }
  std::vector<double> pa, tl;
  for (const double A : opts.zero_drift_A) {
    const WalkSpec walk = WalkSpec::zeta_walk(pd, 0.0);
    const EscapeStats compact = estimate_escape_compact(walk, A, opts.B, opts.trials, opts.horizon,
                                                        derive_seed(opts.seed, stream++), opts.threads);
    ScalingRow row;
    row.A = A;
    row.p_A = compact.p_left.value;
    row.mean_time = compact.mean_time.value;
    row.mean_time_left = compact.mean_time_left.value;
    row.censored = compact.censored;
    row.p_A_times_A = row.p_A * std::fabs(A);
    row.time_left_over_A2 = row.mean_time_left / (A * A);
    pa.push_back(row.p_A_times_A);
    tl.push_back(row.time_left_over_A2);
    table.zero_drift_rows.push_back(row);
  }
  table.ratio_alpha_time_B = ratio(alpha_time);
  table.ratio_normalized_p_A = ratio(normalized);
  table.ratio_p_A_times_A = ratio(pa);
  table.ratio_time_left_over_A2 = ratio(tl);
  return table;
}

// ---------------------------------------------------------------------------
// Recurrence witnesses

nlohmann::json Witness::to_json() const {
  nlohmann::json j = {{"found_up", found_up},     {"found_down", found_down},
                      {"word_up", word_up},       {"word_down", word_down},
                      {"sum_up", sum_up},         {"sum_down", sum_down},
                      {"fixed_up_length", fixed_up_length},
                      {"fixed_down_length", fixed_down_length}};
  j["fixed_up"] = fixed_up ? nlohmann::json(*fixed_up) : nlohmann::json(nullptr);
  j["fixed_down"] = fixed_down ? nlohmann::json(*fixed_down) : nlohmann::json(nullptr);
  return j;
}

Witness recurrence_witness_search(const SubshiftSpec& chain, const std::vector<double>& xi, double L,
                                  std::size_t max_len) {
  const std::size_t k = chain.K();
  if (xi.size() != k) throw ValidationError("xi length does not match the chain");
  if (!(L >= 0.0)) throw DomainError("witness level L must be >= 0");
  if (k * max_len > 50'000'000) throw SizeError("witness search table too large (K * max_len)");
  Witness w;

  // fixed-point shortcut: a self-loop cell repeated floor(L / xi) + 1 times
  for (std::size_t i = 0; i < k; ++i) {
    const auto s = static_cast<Symbol>(i + 1);
    if (!chain.admissible(s, s) || xi[i] == 0.0) continue;
    const auto len = static_cast<std::size_t>(std::floor(L / std::fabs(xi[i]))) + 1;
    if (xi[i] > 0 && (!w.fixed_up || len < w.fixed_up_length)) {
      w.fixed_up = s;
      w.fixed_up_length = len;
    }
    if (xi[i] < 0 && (!w.fixed_down || len < w.fixed_down_length)) {
      w.fixed_down = s;
      w.fixed_down_length = len;
    }
  }

  // best cumulative sums over admissible words of each length, by end symbol
  std::vector<double> hi(xi), lo(xi), next_hi(k), next_lo(k);
  std::vector<std::vector<Symbol>> parent_hi, parent_lo;
  auto trace = [&](const std::vector<std::vector<Symbol>>& parents, Symbol end) {
    std::vector<Symbol> word{end};
    for (std::size_t len = parents.size(); len-- > 0;) word.push_back(parents[len][static_cast<std::size_t>(word.back() - 1)]);
    std::reverse(word.begin(), word.end());
    return word;
  };
  auto check = [&] {
    if (!w.found_up) {
      const auto it = std::max_element(hi.begin(), hi.end());
      if (*it > L) {
        w.found_up = true;
        w.sum_up = *it;
        w.word_up = trace(parent_hi, static_cast<Symbol>(it - hi.begin() + 1));
      }
    }
    if (!w.found_down) {
      const auto it = std::min_element(lo.begin(), lo.end());
      if (*it < -L) {
        w.found_down = true;
        w.sum_down = *it;
        w.word_down = trace(parent_lo, static_cast<Symbol>(it - lo.begin() + 1));
      }
    }
  };
  if (max_len >= 1) check();
  for (std::size_t len = 2; len <= max_len && !(w.found_up && w.found_down); ++len) {
    std::fill(next_hi.begin(), next_hi.end(), -kInf);
    std::fill(next_lo.begin(), next_lo.end(), kInf);
    std::vector<Symbol> ph(k, 0), pl(k, 0);
    for (std::size_t i = 0; i < k; ++i) {
      for (const auto& t : chain.row(static_cast<Symbol>(i + 1))) {
        const auto j = static_cast<std::size_t>(t.to - 1);
        if (hi[i] + xi[j] > next_hi[j]) {
          next_hi[j] = hi[i] + xi[j];
          ph[j] = static_cast<Symbol>(i + 1);
        }
        if (lo[i] + xi[j] < next_lo[j]) {
          next_lo[j] = lo[i] + xi[j];
          pl[j] = static_cast<Symbol>(i + 1);
        }
      }
    }
    hi.swap(next_hi);
    lo.swap(next_lo);
    parent_hi.push_back(std::move(ph));
    parent_lo.push_back(std::move(pl));
    check();
  }
  return w;
}

}  // namespace chw
