#pragma once

// Skew products (y, x) -> (E_m y, g_y(x)) over the expanding base, in the
// interval chart x in [0,1] and the line chart x in R, linked by the logistic
// conjugacy h(x) = e^x / (1 + e^x).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "chw/rational.hpp"
#include "chw/symbolic_dynamics.hpp"

namespace chw {

enum class Monotone { Increasing, Decreasing, Unknown };

// Displacement xi: [0,1] -> R. Closed family so configs stay serializable.
class DisplacementSpec {
 public:
  enum class Kind { Affine, Sign, Table, Named };

  static DisplacementSpec affine(Rational a, Rational b);
  // sign(y - 1/2) with the value +1 on [1/2, 1].
  static DisplacementSpec sign();
  // Piecewise-linear through (y_k, v_k); y_0 = 0 < ... < y_n = 1.
  static DisplacementSpec table(std::vector<std::pair<Rational, Rational>> nodes);
  // Whitelist: sin2pi, cos2pi, shifted_cubic ((2y-1)^3), tanh (tanh(2y-1)).
  static DisplacementSpec named(const std::string& name, double amplitude = 1.0);
  static DisplacementSpec zero() { return affine(0, 0); }

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double operator()(double y) const;
  // Exact value at a rational point; empty for named expressions.
  std::optional<Rational> exact(const Rational& y) const;

  double mean() const;
  double sup_derivative() const;  // +inf for the discontinuous sign kind
  Monotone monotone() const;

  nlohmann::json to_json() const;
  static DisplacementSpec from_json(const nlohmann::json& j);

 private:
  Kind kind_ = Kind::Affine;
  std::string name_;
  Rational a_ = 0, b_ = 0;
  double a_d_ = 0.0, b_d_ = 0.0;
  double amplitude_ = 0.0;
  std::vector<std::pair<Rational, Rational>> nodes_;
  std::vector<double> node_y_, node_v_;
};

// Perturbation r(y, x) = rho * c(y) * x^2 (x - 1); c = 1 (cubic) or
// (1 + cos 2 pi y) / 2 (cubic_cos). Vanishes to second order at x = 0.
class PerturbationSpec {
 public:
  enum class Kind { Zero, Cubic, CubicCos };

  static PerturbationSpec zero() { return {}; }
  static PerturbationSpec cubic(double rho, Kind kind = Kind::Cubic);

  Kind kind() const { return kind_; }
  double rho() const { return rho_; }
  bool vanishes() const { return kind_ == Kind::Zero || rho_ == 0.0; }

  double coefficient(double y) const;  // rho * c(y)
  double value(double y, double x) const;
  double dx(double y, double x) const;
  double dy(double y, double x) const;

  nlohmann::json to_json() const;
  static PerturbationSpec from_json(const nlohmann::json& j);

 private:
  Kind kind_ = Kind::Zero;
  double rho_ = 0.0;
};

enum class Chart { Interval, Line };

struct SkewSystem {
  int m = 2;
  int N = 1;
  DisplacementSpec xi = DisplacementSpec::zero();
  PerturbationSpec r;
  Chart chart = Chart::Interval;
  std::size_t window = 50;  // symbols used to resolve the base point

  nlohmann::json to_json() const;
  static SkewSystem from_json(const nlohmann::json& j);
};

struct ChartValue {
  double value = 0.0;
  bool saturated = false;
};

// h and h^{-1}. |x| > 745 saturates to exactly 0 or 1; h^{-1} at 0 or 1
// returns -inf or +inf. Both set the flag.
ChartValue conjugate_to_interval(double x);
ChartValue conjugate_to_line(double xhat);

// ghat(x) = e^xi x / (1 + (e^xi - 1) x) + r(y, x). Overshoot of [0,1] beyond
// 1e-15 is a ValidationError; a negative local derivative is a ClassViolation.
double fiber_map_interval(double xi_value, double x, const PerturbationSpec& r, double y);
// g = h^{-1} ghat h evaluated without leaving the line chart; exact x + xi for r = 0.
double fiber_map_line(double xi_value, double x, const PerturbationSpec& r, double y);

// Integrates one fiber coordinate. In the interval chart it switches to the
// line chart while xhat < 1e-8 or xhat > 1 - 1e-8.
class FiberIntegrator {
 public:
  static constexpr double kSwitch = 1e-8;

  FiberIntegrator(const SkewSystem& sys, double x0);

  void step(double y);
  double line() const;
  double interval() const;
  bool finite() const;

 private:
  const SkewSystem* sys_;
  bool in_line_ = false;
  double line_ = 0.0;
  double xhat_ = 0.0;
};

// Ring of the last `window` symbols of a lazily sampled path; y() is the
// midpoint of the cylinder they determine.
class DrivingWindow {
 public:
  DrivingWindow(SubshiftPtr spec, std::uint64_t seed, std::size_t window);

  double y() const;
  Symbol current() const { return ring_[head_]; }
  void advance();

 private:
  PathSampler sampler_;
  int m_, N_;
  double cells_;
  std::vector<Symbol> ring_;
  std::vector<double> digits_;  // last base-m digit of each ring entry
  std::size_t head_ = 0;
};

struct Trajectory {
  std::vector<double> x_interval;
  std::vector<double> x_line;
  bool truncated = false;
  std::string diagnostic;
};

// x0 is taken in the system's chart. Needs path.size() >= n; the driving
// window shrinks near the end of a finite path.
Trajectory iterate_trajectory(const SkewSystem& sys, const SymbolPath& path, double x0,
                              std::size_t n);

struct LyapunovEstimate {
  double L0 = 0.0, L1 = 0.0;
  double L0_quadrature_error = 0.0, L1_quadrature_error = 0.0;
  double L0_monte_carlo = 0.0, L1_monte_carlo = 0.0;
  double L0_std_error = 0.0, L1_std_error = 0.0;
};

// Lebesgue averages of ln ghat_y'(0) and ln ghat_y'(1): composite midpoint
// rule on 2^16 nodes (error by Richardson halving), plus a Monte Carlo
// estimate on `samples` uniform base points.
LyapunovEstimate lyapunov_exponents(const SkewSystem& sys, std::size_t samples,
                                    std::uint64_t seed);

struct ConditionCheck {
  std::string name;
  bool passed = true;
  double worst = 0.0;  // largest violation measure seen (or largest value)
  double at_y = 0.0, at_x = 0.0;
  std::string detail;
};

struct ClassReport {
  std::vector<ConditionCheck> checks;
  bool passed() const;
  const ConditionCheck* find(const std::string& name) const;
  nlohmann::json to_json() const;
};

ClassReport validate_class_membership(const SkewSystem& sys, double C, double r0,
                                      std::size_t grid = 256);

struct DiscreteDisplacement {
  std::vector<double> values;
  double shift = 0.0;          // subtracted mean
  double sup_deviation = 0.0;  // sup|xi'| m^{-N} / 2 + |shift| (inf for sign)
  std::optional<std::vector<Rational>> exact;
};

// xi_N(i) = xi(midpoint of cell i) minus the uniform mean, so sum p_i xi_N(i) = 0.
DiscreteDisplacement discretize_displacement(const DisplacementSpec& xi, int m, int N);

}  // namespace chw
