#include "chw/intermittency_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "chw/errors.hpp"
#include "chw/parallel.hpp"
#include "chw/stats.hpp"

namespace chw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double line_threshold(double xhat) {
  if (xhat <= 0.0) return -kInf;
  if (xhat >= 1.0) return kInf;
  return conjugate_to_line(xhat).value;
}

}  // namespace

std::vector<std::uint64_t> log_checkpoints(std::uint64_t n) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t c = 100; c <= n; c *= 10) {
    out.push_back(c);
    if (c > n / 10) break;
  }
  if (out.empty() || out.back() != n) out.push_back(n);
  return out;
}

OccupationCurve birkhoff_occupation(const SkewSystem& sys, const FiberInterval& U, double x0,
                                    std::uint64_t n, std::size_t samples, std::uint64_t seed,
                                    unsigned threads) {
  if (!(U.lower > 0.0 && U.lower < U.upper && U.upper <= 1.0))
    throw DomainError("occupation interval must satisfy 0 < lower < upper <= 1");
  if (n < 1 || samples < 1) throw DomainError("need n >= 1 and samples >= 1");
  const double lo = line_threshold(U.lower);
  const double hi = line_threshold(U.upper);
  const std::vector<std::uint64_t> checkpoints = log_checkpoints(n);
  const std::size_t nc = checkpoints.size();
  auto chain = build_subshift(sys.m, sys.N);

  OccupationCurve curve;
  curve.fractions.assign(samples, std::vector<double>(nc));
  curve.laminar0 = curve.fractions;
  curve.laminar1 = curve.fractions;
  curve.transitions = curve.fractions;
  std::vector<char> saturated(samples, 0);
  parallel_for(samples, threads, [&](std::size_t s) {
    DrivingWindow window(chain, derive_seed(seed, s), sys.window);
    FiberIntegrator fiber(sys, x0);
    std::uint64_t inside = 0, below = 0, above = 0, entries = 0;
    bool was_inside = false;
    std::size_t c = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
      const double x = fiber.line();
      if (std::isinf(x)) saturated[s] = 1;
      const bool in = x >= lo && x <= hi;
      inside += in;
      below += x < lo;
      above += x > hi;
      if (in && !was_inside && i > 0) ++entries;
      was_inside = in;
      if (i + 1 == checkpoints[c]) {
        const auto denom = static_cast<double>(i + 1);
        curve.fractions[s][c] = static_cast<double>(inside) / denom;
        curve.laminar0[s][c] = static_cast<double>(below) / denom;
        curve.laminar1[s][c] = static_cast<double>(above) / denom;
        curve.transitions[s][c] = static_cast<double>(entries);
        ++c;
      }
      fiber.step(window.y());
      window.advance();
    }
  });
  curve.saturated.assign(saturated.begin(), saturated.end());
  for (std::size_t c = 0; c < nc; ++c) {
    std::vector<double> f(samples), l0(samples), l1(samples), tr(samples);
    for (std::size_t s = 0; s < samples; ++s) {
      f[s] = curve.fractions[s][c];
      l0[s] = curve.laminar0[s][c];
      l1[s] = curve.laminar1[s][c];
      tr[s] = curve.transitions[s][c];
    }
    OccupationPoint p;
    p.n = checkpoints[c];
    p.median = quantile(f, 0.5);
    p.q25 = quantile(f, 0.25);
    p.q75 = quantile(f, 0.75);
    p.laminar0_median = quantile(l0, 0.5);
    p.laminar1_median = quantile(l1, 0.5);
    p.transitions_median = quantile(tr, 0.5);
    curve.points.push_back(p);
  }
  return curve;
}

const char* episode_kind_name(EpisodeKind kind) {
  switch (kind) {
    case EpisodeKind::Laminar0:
      return "laminar0";
    case EpisodeKind::Laminar1:
      return "laminar1";
    case EpisodeKind::Burst:
      return "burst";
  }
  return "burst";
}

std::size_t EpisodeTrace::count(EpisodeKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(episodes.begin(), episodes.end(), [&](const Episode& e) { return e.kind == kind; }));
}

std::size_t EpisodeTrace::max_length(EpisodeKind kind) const {
  std::size_t best = 0;
  for (const auto& e : episodes)
    if (e.kind == kind) best = std::max(best, e.length);
  return best;
}

namespace {

double median_of(const std::vector<Episode>& episodes, bool (*keep)(EpisodeKind, EpisodeKind),
                 EpisodeKind kind) {
  std::vector<double> lengths;
  for (const auto& e : episodes)
    if (keep(e.kind, kind)) lengths.push_back(static_cast<double>(e.length));
  return quantile(std::move(lengths), 0.5);
}

bool same_kind(EpisodeKind a, EpisodeKind b) { return a == b; }
bool laminar(EpisodeKind a, EpisodeKind) { return a != EpisodeKind::Burst; }

}  // namespace

double EpisodeTrace::median_length(EpisodeKind kind) const {
  return median_of(episodes, same_kind, kind);
}

std::size_t EpisodeTrace::max_laminar_length() const {
  return std::max(max_length(EpisodeKind::Laminar0), max_length(EpisodeKind::Laminar1));
}

double EpisodeTrace::median_laminar_length() const {
  return median_of(episodes, laminar, EpisodeKind::Burst);
}

EpisodeTrace episode_segmentation(const std::vector<double>& line_series, double L) {
  if (!(L >= 0.0)) throw DomainError("episode threshold L must be >= 0");
  EpisodeTrace trace;
  trace.lower = -L;
  trace.upper = L;
  auto classify = [&](double x) {
    return x < -L ? EpisodeKind::Laminar0 : x > L ? EpisodeKind::Laminar1 : EpisodeKind::Burst;
  };
  for (std::size_t i = 0; i < line_series.size(); ++i) {
    const EpisodeKind kind = classify(line_series[i]);
    if (trace.episodes.empty() || trace.episodes.back().kind != kind) {
      if (!trace.episodes.empty() && trace.episodes.back().kind != EpisodeKind::Burst &&
          kind == EpisodeKind::Burst)
        ++trace.laminar_to_burst;
      trace.episodes.push_back({kind, i, 0});
    }
    ++trace.episodes.back().length;
  }
  for (const auto& e : trace.episodes) {
    auto& hist = e.kind == EpisodeKind::Laminar0   ? trace.histogram_laminar0
                 : e.kind == EpisodeKind::Laminar1 ? trace.histogram_laminar1
                                                   : trace.histogram_burst;
    ++hist[e.length];
  }
  return trace;
}

EpisodeTrace simulate_episodes(const SkewSystem& sys, double x0, std::uint64_t n, double L,
                               std::uint64_t seed) {
  DrivingWindow window(build_subshift(sys.m, sys.N), seed, sys.window);
  FiberIntegrator fiber(sys, x0);
  std::vector<double> series;
  series.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    series.push_back(fiber.line());
    fiber.step(window.y());
    window.advance();
  }
  return episode_segmentation(series, L);
}

HalflineStats escape_time_census(const SkewSystem& sys, double p, double x_start, std::size_t trials,
                                 const std::vector<std::uint64_t>& horizons, std::uint64_t seed,
                                 unsigned threads) {
  if (!(0.0 < x_start && x_start < p && p < 1.0))
    throw DomainError("escape census needs 0 < x_start < p < 1");
  SkewSystem line = sys;
  line.chart = Chart::Line;
  const WalkSpec walk = WalkSpec::chaotic(line, conjugate_to_line(x_start).value);
  return estimate_escape_halfline(walk, conjugate_to_line(p).value, trials, horizons, seed, threads);
}

}  // namespace chw
