#include "chw/skew_products.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "chw/errors.hpp"
#include "chw/json_util.hpp"
#include "chw/parallel.hpp"
#include "chw/stats.hpp"

namespace chw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;

const char* const kNamed[] = {"sin2pi", "cos2pi", "shifted_cubic", "tanh"};

bool is_named(const std::string& s) {
  return std::find(std::begin(kNamed), std::end(kNamed), s) != std::end(kNamed);
}

// log h(x), accurate in both tails.
double log_h(double x) { return x < 0.0 ? x - std::log1p(std::exp(x)) : -std::log1p(std::exp(-x)); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double xhat) { return std::log(xhat) - std::log1p(-xhat); }

// Moebius part of the fiber map; exact at 0 and 1.
double moebius(double e, double x) { return e * x / ((1.0 - x) + e * x); }

double moebius_dx(double e, double x) {
  const double d = (1.0 - x) + e * x;
  return e / (d * d);
}

}  // namespace

// ---------------------------------------------------------------------------
// DisplacementSpec

DisplacementSpec DisplacementSpec::affine(Rational a, Rational b) {
  DisplacementSpec d;
  d.kind_ = Kind::Affine;
  d.name_ = "affine";
  d.a_ = std::move(a);
  d.b_ = std::move(b);
  d.a_d_ = d.a_.get_d();
  d.b_d_ = d.b_.get_d();
  return d;
}

DisplacementSpec DisplacementSpec::sign() {
  DisplacementSpec d;
  d.kind_ = Kind::Sign;
  d.name_ = "sign";
  return d;
}

DisplacementSpec DisplacementSpec::table(std::vector<std::pair<Rational, Rational>> nodes) {
  if (nodes.size() < 2) throw ValidationError("displacement table needs at least two nodes");
  if (sgn(nodes.front().first) != 0 || nodes.back().first != 1)
    throw ValidationError("displacement table must span y = 0 to y = 1");
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
    if (!(nodes[i].first < nodes[i + 1].first))
      throw ValidationError("displacement table nodes must be strictly increasing in y");
  DisplacementSpec d;
  d.kind_ = Kind::Table;
  d.name_ = "table";
  d.nodes_ = std::move(nodes);
  for (const auto& [y, v] : d.nodes_) {
    d.node_y_.push_back(y.get_d());
    d.node_v_.push_back(v.get_d());
  }
  return d;
}

DisplacementSpec DisplacementSpec::named(const std::string& name, double amplitude) {
  if (!is_named(name)) throw ValidationError("unknown displacement expression '" + name + "'");
  if (!std::isfinite(amplitude)) throw ValidationError("displacement amplitude must be finite");
  DisplacementSpec d;
  d.kind_ = Kind::Named;
  d.name_ = name;
  d.amplitude_ = amplitude;
  return d;
}

double DisplacementSpec::operator()(double y) const {
  switch (kind_) {
    case Kind::Affine:
      return a_d_ + b_d_ * y;
    case Kind::Sign:
      return y < 0.5 ? -1.0 : 1.0;
    case Kind::Table: {
      const auto it = std::upper_bound(node_y_.begin(), node_y_.end(), y);
      std::size_t k = static_cast<std::size_t>(it - node_y_.begin());
      k = std::clamp<std::size_t>(k, 1, node_y_.size() - 1);
      const double t = (y - node_y_[k - 1]) / (node_y_[k] - node_y_[k - 1]);
      return node_v_[k - 1] + t * (node_v_[k] - node_v_[k - 1]);
    }
    case Kind::Named:
      if (name_ == "sin2pi") return amplitude_ * std::sin(kTwoPi * y);
      if (name_ == "cos2pi") return amplitude_ * std::cos(kTwoPi * y);
      if (name_ == "shifted_cubic") {
        const double u = 2.0 * y - 1.0;
        return amplitude_ * u * u * u;
      }
      return amplitude_ * std::tanh(2.0 * y - 1.0);
  }
  return 0.0;
}

std::optional<Rational> DisplacementSpec::exact(const Rational& y) const {
  switch (kind_) {
    case Kind::Affine:
      return Rational(a_ + b_ * y);
    case Kind::Sign:
      return Rational(y < Rational(1, 2) ? -1 : 1);
    case Kind::Table: {
      std::size_t k = 1;
      while (k + 1 < nodes_.size() && !(y < nodes_[k].first)) ++k;
      const auto& [y0, v0] = nodes_[k - 1];
      const auto& [y1, v1] = nodes_[k];
      return Rational(v0 + (y - y0) / (y1 - y0) * (v1 - v0));
    }
    case Kind::Named:
      return std::nullopt;
  }
  return std::nullopt;
}

double DisplacementSpec::mean() const {
  switch (kind_) {
    case Kind::Affine:
      return Rational(a_ + b_ / 2).get_d();
    case Kind::Sign:
      return 0.0;
    case Kind::Table: {
      Rational total = 0;
      for (std::size_t k = 0; k + 1 < nodes_.size(); ++k)
        total += (nodes_[k + 1].first - nodes_[k].first) *
                 (nodes_[k].second + nodes_[k + 1].second) / 2;
      return total.get_d();
    }
    case Kind::Named:
      return 0.0;  // every whitelisted expression is odd about 1/2 or periodic
  }
  return 0.0;
}

double DisplacementSpec::sup_derivative() const {
  switch (kind_) {
    case Kind::Affine:
      return std::fabs(b_d_);
    case Kind::Sign:
      return kInf;
    case Kind::Table: {
      double best = 0.0;
      for (std::size_t k = 0; k + 1 < nodes_.size(); ++k)
        best = std::max(best, std::fabs(Rational((nodes_[k + 1].second - nodes_[k].second) /
                                                  (nodes_[k + 1].first - nodes_[k].first))
                                             .get_d()));
      return best;
    }
    case Kind::Named:
      if (name_ == "shifted_cubic") return 6.0 * std::fabs(amplitude_);
      if (name_ == "tanh") return 2.0 * std::fabs(amplitude_);
      return kTwoPi * std::fabs(amplitude_);
  }
  return 0.0;
}

Monotone DisplacementSpec::monotone() const {
  auto by_sign = [](int s) {
    return s > 0 ? Monotone::Increasing : s < 0 ? Monotone::Decreasing : Monotone::Unknown;
  };
  switch (kind_) {
    case Kind::Affine:
      return by_sign(sgn(b_));
    case Kind::Sign:
      return Monotone::Increasing;
    case Kind::Table: {
      bool up = true, down = true;
      for (std::size_t k = 0; k + 1 < nodes_.size(); ++k) {
        up = up && nodes_[k].second < nodes_[k + 1].second;
        down = down && nodes_[k].second > nodes_[k + 1].second;
      }
      return up ? Monotone::Increasing : down ? Monotone::Decreasing : Monotone::Unknown;
    }
    case Kind::Named:
      if (name_ == "shifted_cubic" || name_ == "tanh")
        return by_sign(amplitude_ > 0 ? 1 : amplitude_ < 0 ? -1 : 0);
      return Monotone::Unknown;
  }
  return Monotone::Unknown;
}

nlohmann::json DisplacementSpec::to_json() const {
  switch (kind_) {
    case Kind::Affine:
      return {{"kind", "affine"}, {"params", {{"a", a_.get_str()}, {"b", b_.get_str()}}}};
    case Kind::Sign:
      return {{"kind", "sign"}, {"params", nlohmann::json::object()}};
    case Kind::Table: {
      nlohmann::json nodes = nlohmann::json::array();
      for (const auto& [y, v] : nodes_) nodes.push_back({y.get_str(), v.get_str()});
      return {{"kind", "table"}, {"params", {{"nodes", nodes}}}};
    }
    case Kind::Named:
      return {{"kind", name_}, {"params", {{"amplitude", amplitude_}}}};
  }
  return {};
}

DisplacementSpec DisplacementSpec::from_json(const nlohmann::json& j) {
  const std::string kind = require_key(j, "kind", "xi").get<std::string>();
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  if (kind == "affine")
    return affine(rational_from_json(require_key(params, "a", "xi.params")),
                  rational_from_json(require_key(params, "b", "xi.params")));
  if (kind == "zero") return zero();
  if (kind == "sign") return sign();
  if (kind == "table") {
    std::vector<std::pair<Rational, Rational>> nodes;
    for (const auto& node : require_key(params, "nodes", "xi.params")) {
      if (!node.is_array() || node.size() != 2)
        throw ValidationError("xi.params.nodes entries must be [y, value] pairs");
      nodes.emplace_back(rational_from_json(node[0]), rational_from_json(node[1]));
    }
    return table(std::move(nodes));
  }
  const double amplitude = params.contains("amplitude") ? double_from_json(params["amplitude"]) : 1.0;
  if (kind == "named") return named(require_key(params, "name", "xi.params").get<std::string>(), amplitude);
  return named(kind, amplitude);
}

// ---------------------------------------------------------------------------
// PerturbationSpec

PerturbationSpec PerturbationSpec::cubic(double rho, Kind kind) {
  if (!std::isfinite(rho)) throw ValidationError("perturbation rho must be finite");
  PerturbationSpec p;
  p.kind_ = kind;
  p.rho_ = kind == Kind::Zero ? 0.0 : rho;
  return p;
}

double PerturbationSpec::coefficient(double y) const {
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::Cubic:
      return rho_;
    case Kind::CubicCos:
      return rho_ * 0.5 * (1.0 + std::cos(kTwoPi * y));
  }
  return 0.0;
}

double PerturbationSpec::value(double y, double x) const {
  return kind_ == Kind::Zero ? 0.0 : coefficient(y) * x * x * (x - 1.0);
}

double PerturbationSpec::dx(double y, double x) const {
  return kind_ == Kind::Zero ? 0.0 : coefficient(y) * x * (3.0 * x - 2.0);
}

double PerturbationSpec::dy(double y, double x) const {
  if (kind_ != Kind::CubicCos) return 0.0;
  return -rho_ * std::numbers::pi * std::sin(kTwoPi * y) * x * x * (x - 1.0);
}

nlohmann::json PerturbationSpec::to_json() const {
  switch (kind_) {
    case Kind::Zero:
      return {{"kind", "zero"}};
    case Kind::Cubic:
      return {{"kind", "cubic"}, {"rho", rho_}};
    case Kind::CubicCos:
      return {{"kind", "cubic_cos"}, {"rho", rho_}};
  }
  return {};
}

PerturbationSpec PerturbationSpec::from_json(const nlohmann::json& j) {
  const std::string kind = require_key(j, "kind", "r").get<std::string>();
  if (kind == "zero") return zero();
  const double rho = double_from_json(require_key(j, "rho", "r"));
  if (kind == "cubic") return cubic(rho, Kind::Cubic);
  if (kind == "cubic_cos") return cubic(rho, Kind::CubicCos);
  throw ValidationError("unknown perturbation kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// SkewSystem

nlohmann::json SkewSystem::to_json() const {
  return {{"m", m},
          {"N", N},
          {"xi", xi.to_json()},
          {"r", r.to_json()},
          {"chart", chart == Chart::Interval ? "interval" : "line"},
          {"window", window}};
}

SkewSystem SkewSystem::from_json(const nlohmann::json& j) {
  SkewSystem sys;
  sys.m = require_key(j, "m", "system").get<int>();
  sys.N = j.value("N", 1);
  symbol_count(sys.m, sys.N);
  sys.xi = DisplacementSpec::from_json(require_key(j, "xi", "system"));
  sys.r = j.contains("r") ? PerturbationSpec::from_json(j["r"]) : PerturbationSpec::zero();
  const std::string chart = j.value("chart", std::string("interval"));
  if (chart == "interval")
    sys.chart = Chart::Interval;
  else if (chart == "line")
    sys.chart = Chart::Line;
  else
    throw ValidationError("chart must be \"interval\" or \"line\"");
  sys.window = j.value("window", std::size_t{50});
  if (sys.window == 0) throw ValidationError("window must be >= 1");
  return sys;
}

// ---------------------------------------------------------------------------
// Charts and fiber maps

ChartValue conjugate_to_interval(double x) {
  if (x > 745.0) return {1.0, true};
  if (x < -745.0) return {0.0, true};
  return {logistic(x), false};
}

ChartValue conjugate_to_line(double xhat) {
  if (!(xhat >= 0.0 && xhat <= 1.0)) throw DomainError("conjugate_to_line: argument outside [0,1]");
  if (xhat == 0.0) return {-kInf, true};
  if (xhat == 1.0) return {kInf, true};
  return {logit(xhat), false};
}

double fiber_map_interval(double xi_value, double x, const PerturbationSpec& r, double y) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("fiber_map_interval: x outside [0,1]");
  const double e = std::exp(xi_value);
  const double slope = moebius_dx(e, x) + r.dx(y, x);
  if (slope < 0.0)
    throw ClassViolation("fiber map decreasing at x = " + std::to_string(x) +
                         ", y = " + std::to_string(y));
  double v = moebius(e, x) + r.value(y, x);
  if (v < 0.0 || v > 1.0) {
    const double over = v < 0.0 ? -v : v - 1.0;
    if (over >= 1e-15)
      throw ValidationError("fiber map leaves [0,1] by " + std::to_string(over) +
                            "; perturbation too large");
    v = std::clamp(v, 0.0, 1.0);
  }
  return v;
}

double fiber_map_line(double xi_value, double x, const PerturbationSpec& r, double y) {
  const double s = x + xi_value;
  if (r.vanishes() || !std::isfinite(x)) return s;
  const double c = r.coefficient(y);
  if (c == 0.0) return s;
  // ghat = u + r with u = h(s) and r = -c xhat^2 (1 - xhat); take logit(u + r)
  // as s + log1p(r/u) - log1p(-r/(1-u)) with both ratios formed in log space.
  const double log_bump = 2.0 * log_h(x) + log_h(-x);
  const double a = c * std::exp(log_bump - log_h(s));   // -r/u
  const double b = c * std::exp(log_bump - log_h(-s));  // -r/(1-u)
  if (a >= 1.0 || b <= -1.0)
    throw ValidationError("fiber map leaves the line chart; perturbation too large");
  return s + std::log1p(-a) - std::log1p(b);
}

// ---------------------------------------------------------------------------
// Integration

FiberIntegrator::FiberIntegrator(const SkewSystem& sys, double x0) : sys_(&sys) {
  if (sys.chart == Chart::Line) {
    in_line_ = true;
    line_ = x0;
    return;
  }
  if (!(x0 >= 0.0 && x0 <= 1.0)) throw DomainError("initial fiber point outside [0,1]");
  if (x0 < kSwitch || x0 > 1.0 - kSwitch) {
    in_line_ = true;
    line_ = conjugate_to_line(x0).value;
  } else {
    xhat_ = x0;
  }
}

void FiberIntegrator::step(double y) {
  const double xi = sys_->xi(y);
  if (in_line_) {
    line_ = fiber_map_line(xi, line_, sys_->r, y);
    if (sys_->chart == Chart::Interval && std::isfinite(line_)) {
      const double xhat = logistic(line_);
      if (xhat >= kSwitch && xhat <= 1.0 - kSwitch) {
        in_line_ = false;
        xhat_ = xhat;
      }
    }
    return;
  }
  xhat_ = fiber_map_interval(xi, xhat_, sys_->r, y);
  if (xhat_ < kSwitch || xhat_ > 1.0 - kSwitch) {
    in_line_ = true;
    line_ = conjugate_to_line(xhat_).value;
  }
}

double FiberIntegrator::line() const {
  return in_line_ ? line_ : conjugate_to_line(xhat_).value;
}

double FiberIntegrator::interval() const {
  return in_line_ ? conjugate_to_interval(line_).value : xhat_;
}

bool FiberIntegrator::finite() const { return in_line_ ? !std::isnan(line_) : !std::isnan(xhat_); }

DrivingWindow::DrivingWindow(SubshiftPtr spec, std::uint64_t seed, std::size_t window)
    : sampler_(spec, seed), m_(spec->m()), N_(spec->N()) {
  if (!spec->is_canonical()) throw UnsupportedError("driving window needs a canonical subshift");
  if (window == 0) throw DomainError("driving window must hold at least one symbol");
  cells_ = std::pow(static_cast<double>(m_), N_);
  ring_.resize(window);
  digits_.resize(window);
  for (std::size_t i = 0; i < window; ++i) {
    ring_[i] = sampler_.next();
    digits_[i] = static_cast<double>((ring_[i] - 1) % m_);
  }
}

// Same Horner evaluation as window_midpoint, walking the ring newest first.
double DrivingWindow::y() const {
  const double m = m_;
  double v = 0.5;
  for (std::size_t i = head_; i-- > 0;) v = (digits_[i] + v) / m;
  for (std::size_t i = ring_.size(); i-- > head_ + 1;) v = (digits_[i] + v) / m;
  return (static_cast<double>(ring_[head_] - 1) + v) / cells_;
}

void DrivingWindow::advance() {
  ring_[head_] = sampler_.next();
  digits_[head_] = static_cast<double>((ring_[head_] - 1) % m_);
  if (++head_ == ring_.size()) head_ = 0;
}

Trajectory iterate_trajectory(const SkewSystem& sys, const SymbolPath& path, double x0,
                              std::size_t n) {
  if (!path.spec || !path.spec->is_canonical())
    throw UnsupportedError("trajectory driving needs a path over a canonical subshift");
  if (path.spec->m() != sys.m || path.spec->N() != sys.N)
    throw ValidationError("path subshift does not match the system's (m, N)");
  if (path.size() < n)
    throw DomainError("path of length " + std::to_string(path.size()) + " cannot drive " +
                      std::to_string(n) + " steps");
  FiberIntegrator fiber(sys, x0);
  Trajectory out;
  out.x_interval.reserve(n + 1);
  out.x_line.reserve(n + 1);
  out.x_interval.push_back(fiber.interval());
  out.x_line.push_back(fiber.line());
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t end = std::min(path.size(), k + sys.window);
    const double y =
        window_midpoint(std::span(path.symbols.data() + k, end - k), sys.m, sys.N);
    const bool was_finite = std::isfinite(fiber.line());
    fiber.step(y);
    if (!fiber.finite() || (was_finite && !std::isfinite(fiber.line()))) {
      out.truncated = true;
      out.diagnostic = "non-finite fiber value at step " + std::to_string(k + 1);
      break;
    }
    out.x_interval.push_back(fiber.interval());
    out.x_line.push_back(fiber.line());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lyapunov exponents

namespace {

double log_derivative_at(const SkewSystem& sys, double y, bool at_one) {
  const double xi = sys.xi(y);
  const double dr = sys.r.dx(y, at_one ? 1.0 : 0.0);
  if (dr == 0.0) return at_one ? -xi : xi;
  const double d = (at_one ? std::exp(-xi) : std::exp(xi)) + dr;
  if (!(d > 0.0))
    throw ClassViolation(std::string("non-positive fiber derivative at x = ") +
                         (at_one ? "1" : "0") + ", y = " + std::to_string(y));
  return std::log(d);
}

double midpoint_rule(const SkewSystem& sys, bool at_one, std::size_t nodes) {
  CompensatedSum sum;
  for (std::size_t k = 0; k < nodes; ++k)
    sum.add(log_derivative_at(sys, (static_cast<double>(k) + 0.5) / static_cast<double>(nodes), at_one));
  return sum.value() / static_cast<double>(nodes);
}

}  // namespace

LyapunovEstimate lyapunov_exponents(const SkewSystem& sys, std::size_t samples,
                                    std::uint64_t seed) {
  constexpr std::size_t kNodes = std::size_t{1} << 16;
  LyapunovEstimate est;
  const double q0 = midpoint_rule(sys, false, kNodes);
  const double q0_half = midpoint_rule(sys, false, kNodes / 2);
  const double q1 = midpoint_rule(sys, true, kNodes);
  const double q1_half = midpoint_rule(sys, true, kNodes / 2);
  est.L0 = q0;
  est.L1 = q1;
  est.L0_quadrature_error = std::fabs(q0 - q0_half) / 3.0;
  est.L1_quadrature_error = std::fabs(q1 - q1_half) / 3.0;
  if (samples > 0) {
    Rng rng(seed);
    MomentAccumulator a0, a1;
    for (std::size_t i = 0; i < samples; ++i) {
      const double y = rng.uniform();
      a0.add(log_derivative_at(sys, y, false));
      a1.add(log_derivative_at(sys, y, true));
    }
    est.L0_monte_carlo = a0.mean();
    est.L1_monte_carlo = a1.mean();
    est.L0_std_error = a0.std_error();
    est.L1_std_error = a1.std_error();
  }
  return est;
}

// ---------------------------------------------------------------------------
// Class membership

bool ClassReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const ConditionCheck* ClassReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

nlohmann::json ClassReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : checks)
    list.push_back({{"name", c.name},
                    {"passed", c.passed},
                    {"worst", c.worst},
                    {"at_y", c.at_y},
                    {"at_x", c.at_x},
                    {"detail", c.detail}});
  return {{"passed", passed()}, {"checks", list}};
}

ClassReport validate_class_membership(const SkewSystem& sys, double C, double r0,
                                      std::size_t grid) {
  if (grid < 2) throw DomainError("validation grid must have at least 2 points");
  ClassReport report;
  const auto n = static_cast<double>(grid);
  auto y_at = [&](std::size_t j) { return (static_cast<double>(j) + 0.5) / n; };
  auto x_at = [&](std::size_t i) { return static_cast<double>(i) / n; };

  ConditionCheck mean;
  mean.name = "mean_zero";
  mean.worst = std::fabs(sys.xi.mean());
  mean.passed = mean.worst <= 1e-12;
  mean.detail = "|integral of xi| = " + std::to_string(mean.worst);
  report.checks.push_back(mean);

  ConditionCheck ends;
  ends.name = "endpoints";
  ConditionCheck mono;
  mono.name = "monotone";
  mono.worst = kInf;  // smallest forward difference seen
  ConditionCheck order;
  order.name = "vanishing_order";
  ConditionCheck budget;
  budget.name = "perturbation_budget";
  for (std::size_t j = 0; j < grid; ++j) {
    const double y = y_at(j);
    const double e = std::exp(sys.xi(y));
    auto ghat = [&](double x) { return moebius(e, x) + sys.r.value(y, x); };
    const double at0 = std::fabs(ghat(0.0));
    const double at1 = std::fabs(ghat(1.0) - 1.0);
    if (std::max(at0, at1) > ends.worst) {
      ends.worst = std::max(at0, at1);
      ends.at_y = y;
      ends.at_x = at0 >= at1 ? 0.0 : 1.0;
    }
    double prev = ghat(0.0);
    for (std::size_t i = 0; i <= grid; ++i) {
      const double x = x_at(i);
      if (i > 0) {
        const double cur = ghat(x);
        if (cur - prev < mono.worst) {
          mono.worst = cur - prev;
          mono.at_y = y;
          mono.at_x = x;
        }
        prev = cur;
      }
      const double r = std::fabs(sys.r.value(y, x));
      double ratio = 0.0;
      if (x > 0.0) ratio = std::max(ratio, r / (x * x));
      if (x < 1.0) ratio = std::max(ratio, r / (1.0 - x));
      if (ratio > order.worst) {
        order.worst = ratio;
        order.at_y = y;
        order.at_x = x;
      }
      const double b = std::max({r, std::fabs(sys.r.dx(y, x)), std::fabs(sys.r.dy(y, x))});
      if (b > budget.worst) {
        budget.worst = b;
        budget.at_y = y;
        budget.at_x = x;
      }
    }
  }
  ends.passed = ends.worst == 0.0;
  ends.detail = "max |ghat(0)|, |ghat(1) - 1| over the y grid";
  mono.passed = mono.worst > 0.0;
  mono.detail = "smallest forward difference of x -> ghat_y(x) on the grid";
  order.passed = order.worst <= C;
  order.detail = "max of |r|/x^2 and |r|/(1-x); needs <= C = " + std::to_string(C);
  budget.passed = budget.worst <= r0;
  budget.detail = "max of |r|, |dr/dx|, |dr/dy|; needs <= r0 = " + std::to_string(r0);
  report.checks.push_back(ends);
  report.checks.push_back(mono);
  report.checks.push_back(order);
  report.checks.push_back(budget);

  if (const Monotone flag = sys.xi.monotone(); flag != Monotone::Unknown) {
    ConditionCheck xi_mono;
    xi_mono.name = "xi_monotone_flag";
    const double sign = flag == Monotone::Increasing ? 1.0 : -1.0;
    xi_mono.worst = kInf;
    for (std::size_t j = 0; j + 1 < grid; ++j) {
      const double d = sign * (sys.xi(y_at(j + 1)) - sys.xi(y_at(j)));
      if (d < xi_mono.worst) {
        xi_mono.worst = d;
        xi_mono.at_y = y_at(j);
      }
    }
    // sign() is constant on each half, so only a strict reversal counts
    xi_mono.passed = sys.xi.kind() == DisplacementSpec::Kind::Sign ? xi_mono.worst >= 0.0
                                                                    : xi_mono.worst > 0.0;
    xi_mono.detail = "sampled differences of xi against its declared monotonicity";
    report.checks.push_back(xi_mono);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Discretization

DiscreteDisplacement discretize_displacement(const DisplacementSpec& xi, int m, int N) {
  const std::size_t k = symbol_count(m, N);
  DiscreteDisplacement out;
  out.values.resize(k);
  const bool exact_possible = xi.kind() != DisplacementSpec::Kind::Named && k <= 4096;
  if (exact_possible) {
    std::vector<Rational> exact(k);
    Rational total = 0;
    for (std::size_t i = 0; i < k; ++i) {
      exact[i] = *xi.exact(Rational(static_cast<long>(2 * i + 1), static_cast<unsigned long>(2 * k)));
      total += exact[i];
    }
    const Rational shift = total / static_cast<unsigned long>(k);
    for (std::size_t i = 0; i < k; ++i) {
      exact[i] -= shift;
      out.values[i] = exact[i].get_d();
    }
    out.shift = shift.get_d();
    out.exact = std::move(exact);
  } else {
    CompensatedSum total;
    for (std::size_t i = 0; i < k; ++i) {
      out.values[i] = xi((static_cast<double>(i) + 0.5) / static_cast<double>(k));
      total.add(out.values[i]);
    }
    out.shift = total.value() / static_cast<double>(k);
    for (auto& v : out.values) v -= out.shift;
  }
  out.sup_deviation = xi.sup_derivative() / (2.0 * static_cast<double>(k)) + std::fabs(out.shift);
  return out;
}

}  // namespace chw
