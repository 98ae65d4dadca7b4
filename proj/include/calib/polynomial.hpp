#pragma once

// Sparse multivariate polynomials with exact rational coefficients.
// Variables are addressed by 0-based index into a fixed variable space; names
// are supplied only for printing and parsing.

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "calib/errors.hpp"
#include "calib/rational.hpp"

namespace calib {

/// Product of variables with positive exponents, sorted by variable index.
class Monomial {
 public:
  Monomial() = default;
  static Monomial variable(int index, int exponent = 1);

  const std::vector<std::pair<int, int>>& factors() const { return factors_; }
  int degree() const;
  int exponent(int var) const;
  bool is_one() const { return factors_.empty(); }

  friend Monomial operator*(const Monomial& a, const Monomial& b);
  friend bool operator==(const Monomial&, const Monomial&) = default;

 private:
  std::vector<std::pair<int, int>> factors_;
};

/// Graded lexicographic order, largest first (x1 > x2 > ... within a degree).
struct GrlexDescending {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

class Polynomial {
 public:
  using Terms = std::map<Monomial, Rational, GrlexDescending>;

  explicit Polynomial(int nvars = 0) : nvars_(nvars) {}
  static Polynomial constant(int nvars, const Rational& c);
  static Polynomial variable(int nvars, int index);

  int variable_count() const { return nvars_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  /// Total degree; -1 for the zero polynomial.
  int degree() const;
  /// Total degree counting only variables with index < limit.
  int degree_below(int limit) const;

  void add_term(const Monomial& m, const Rational& c);

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(const Rational& c);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator-(Polynomial a) { return a *= Rational(-1); }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(Polynomial a, const Rational& c) { return a *= c; }
  friend Polynomial operator*(const Rational& c, Polynomial a) { return a *= c; }
  friend bool operator==(const Polynomial&, const Polynomial&) = default;

  double eval(std::span<const double> point) const;
  Rational eval(std::span<const Rational> point) const;

  Polynomial derivative(int var) const;
  /// Replaces variable `var` by `value` everywhere.
  Polynomial substitute(int var, const Polynomial& value) const;
  /// Re-embeds into a larger variable space (indices are kept).
  Polynomial widen(int nvars) const;

 private:
  void check(const Polynomial& o) const;

  int nvars_;
  Terms terms_;
};

Polynomial pow(const Polynomial& p, int e);

/// Hook for the generic form contraction.
inline Polynomial scale(const Polynomial& p, const Rational& q) { return p * q; }

/// Canonical text: terms in graded-lex order, reduced fractions, e.g.
/// "alpha1*x2^2 - 3/2*x1*x4 + 1". The zero polynomial prints as "0".
std::string to_string(const Polynomial& p, std::span<const std::string> names);

/// Inverse of to_string for the same name table; also accepts arbitrary
/// spacing and unsorted or repeated terms. Throws std::invalid_argument.
Polynomial parse_polynomial(std::string_view text, std::span<const std::string> names);

/// x1..xn
std::vector<std::string> coordinate_names(int n);

}  // namespace calib
