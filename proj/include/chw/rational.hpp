#pragma once

#include <gmpxx.h>

#include <cmath>
#include <string>
#include <string_view>

namespace chw {

using Rational = mpq_class;

// Parses "p/q", integers and plain decimals ("0.375", "-1.5e-2") exactly.
Rational parse_rational(std::string_view text);

// Exact value of a binary double.
inline Rational rational_from_double(double v) { return Rational(v); }

inline double to_double(const Rational& q) { return q.get_d(); }
inline double to_double(double v) { return v; }

inline std::string to_string(const Rational& q) { return q.get_str(); }

// Uniform access for code templated on the scalar field (double or Rational).
template <class Scalar>
Scalar scalar_from(const Rational& q);

template <>
inline double scalar_from<double>(const Rational& q) {
  return q.get_d();
}

template <>
inline Rational scalar_from<Rational>(const Rational& q) {
  return q;
}

inline double abs_value(double v) { return std::fabs(v); }
inline Rational abs_value(const Rational& q) { return abs(q); }

}  // namespace chw
