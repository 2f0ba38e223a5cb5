#pragma once

// Observable signatures of on-off intermittency on simulated trajectories:
// occupation fractions of a compact fiber interval, laminar/burst episodes,
// and censored escape-time statistics. Everything is measured in the line
// chart so that arbitrarily deep laminar phases stay representable.

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "json.hpp"

#include "chw/skew_products.hpp"
#include "chw/stopping_lab.hpp"

namespace chw {

// Fiber interval [lower, upper] in interval coordinates; upper may be 1.
struct FiberInterval {
  double lower = 0.01;
  double upper = 0.99;
};

struct OccupationPoint {
  std::uint64_t n = 0;
  double median = 0.0, q25 = 0.0, q75 = 0.0;
  double laminar0_median = 0.0, laminar1_median = 0.0;
  double transitions_median = 0.0;  // laminar -> U entries among the first n steps
};

struct OccupationCurve {
  std::vector<OccupationPoint> points;
  // fractions[s][c], laminar0[s][c], laminar1[s][c], transitions[s][c]
  // per sample s and checkpoint c
  std::vector<std::vector<double>> fractions, laminar0, laminar1, transitions;
  std::vector<bool> saturated;  // per sample: the line chart left the double range
};

// Checkpoints 10^2, 10^3, ... up to n (n itself appended when not a power of ten).
std::vector<std::uint64_t> log_checkpoints(std::uint64_t n);

OccupationCurve birkhoff_occupation(const SkewSystem& sys, const FiberInterval& U, double x0,
                                    std::uint64_t n, std::size_t samples, std::uint64_t seed,
                                    unsigned threads = 0);

enum class EpisodeKind { Laminar0, Laminar1, Burst };

const char* episode_kind_name(EpisodeKind kind);

struct Episode {
  EpisodeKind kind = EpisodeKind::Burst;
  std::size_t start = 0;
  std::size_t length = 0;
};

struct EpisodeTrace {
  double lower = 0.0, upper = 0.0;  // line-chart thresholds -L, +L
  std::vector<Episode> episodes;
  std::map<std::size_t, std::uint64_t> histogram_laminar0, histogram_laminar1, histogram_burst;
  std::uint64_t laminar_to_burst = 0;

  std::size_t count(EpisodeKind kind) const;
  std::size_t max_length(EpisodeKind kind) const;
  double median_length(EpisodeKind kind) const;
  std::size_t max_laminar_length() const;
  double median_laminar_length() const;
};

// Laminar-at-0 when x < -L, laminar-at-1 when x > L, burst otherwise.
EpisodeTrace episode_segmentation(const std::vector<double>& line_series, double L);

// Simulates one trajectory from x0 (in the system's chart) and segments its line-chart values.
EpisodeTrace simulate_episodes(const SkewSystem& sys, double x0, std::uint64_t n, double L,
                               std::uint64_t seed);

// T = first n with xhat_n > p, from xhat_0 = x_start; rows per horizon.
HalflineStats escape_time_census(const SkewSystem& sys, double p, double x_start, std::size_t trials,
                                 const std::vector<std::uint64_t>& horizons, std::uint64_t seed,
                                 unsigned threads = 0);

}  // namespace chw
