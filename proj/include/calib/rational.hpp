#pragma once

#include <gmpxx.h>

#include <string>
#include <string_view>

namespace calib {

/// Exact rational scalar used for form coefficients and polynomial terms.
using Rational = mpq_class;

/// Reduced "p/q" text, or "p" when the denominator is 1.
std::string to_string(const Rational& q);

/// Parses "p", "-p", "p/q". Throws std::invalid_argument on malformed input
/// or a zero denominator. The result is canonicalized.
Rational parse_rational(std::string_view text);

inline double to_double(const Rational& q) { return q.get_d(); }

}  // namespace calib
