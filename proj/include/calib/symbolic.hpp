#pragma once

// Symmetry reduction: contracting the tangent fields of a group orbit into a
// calibration form gives the polynomial right-hand side of the reduced ODE.
//
// Variable layout for every field in this module: indices 0..n-1 are the
// ambient coordinates x1..xn, followed by the action's formal parameters.
// Complex coordinates are split as z_j = x_{2j} + i x_{2j+1} after a leading
// real coordinate on R + C^3 (R^7), and as z_j = x_{2j-1} + i x_{2j} on C^4
// (R^8).

#include <string>
#include <vector>

#include "calib/forms.hpp"
#include "calib/polynomial.hpp"

namespace calib {

/// n polynomial components over a shared variable space.
struct PolyVectorField {
  int n = 0;
  std::vector<Polynomial> components;

  PolyVectorField() = default;
  PolyVectorField(int dim, int nvars);
  int variable_count() const { return components.empty() ? 0 : components.front().variable_count(); }
  std::vector<double> eval(std::span<const double> point) const;
  friend bool operator==(const PolyVectorField&, const PolyVectorField&) = default;
};

/// Weighted wedge of generators; the weight may depend on parameters.
struct ChiTerm {
  Polynomial weight;
  std::vector<int> generators;
};

/// Linear group action on R^n described by its orbit tangent fields.
struct ActionSpec {
  std::string name;
  int n = 0;
  std::vector<std::string> parameters;
  std::vector<PolyVectorField> generators;
  /// Orbit multivector. Empty means the wedge of all generators in order.
  std::vector<ChiTerm> chi;
  /// Parameter identities (parameter index, value) imposed before comparing.
  std::vector<std::pair<int, Polynomial>> relations;

  int variable_count() const { return n + static_cast<int>(parameters.size()); }
  std::vector<std::string> variable_names() const;
  Polynomial param(const std::string& name) const;
  Polynomial coord(int one_based) const;
};

/// Contracts the orbit multivector into `form` and raises the last index with
/// the Euclidean metric: y^d = form(g_1, ..., g_{k-1}, e_d).
PolyVectorField derive_rhs(const ActionSpec& action, const AlternatingForm& form);

/// sum_i (dq/dx_i) * field_i over the ambient coordinates.
Polynomial lie_derivative(const Polynomial& q, const PolyVectorField& field);

/// Applies the parameter relations to every component (or to one polynomial).
PolyVectorField reduce(const PolyVectorField& f, const std::vector<std::pair<int, Polynomial>>& relations);
Polynomial reduce(const Polynomial& p, const std::vector<std::pair<int, Polynomial>>& relations);

struct DiffEntry {
  int component = 0;  // 1-based
  Monomial monomial;
  Rational expected;
  Rational derived;
};

struct DiffReport {
  std::vector<DiffEntry> entries;
  bool empty() const { return entries.empty(); }
  std::string to_text(std::span<const std::string> names) const;
};

/// Exact comparison of two fields after canonicalization.
DiffReport check_against(const PolyVectorField& spec_rhs, const PolyVectorField& derived,
                         const std::vector<std::pair<int, Polynomial>>& relations = {});

/// Complex-valued polynomial re + i*im, used to write fields in the complex
/// coordinates of C^3 or C^4.
struct ComplexPoly {
  Polynomial re;
  Polynomial im;

  explicit ComplexPoly(int nvars) : re(nvars), im(nvars) {}
  ComplexPoly(Polynomial r, Polynomial i) : re(std::move(r)), im(std::move(i)) {}

  friend ComplexPoly operator+(const ComplexPoly& a, const ComplexPoly& b) { return {a.re + b.re, a.im + b.im}; }
  friend ComplexPoly operator-(const ComplexPoly& a, const ComplexPoly& b) { return {a.re - b.re, a.im - b.im}; }
  friend ComplexPoly operator-(const ComplexPoly& a) { return {-a.re, -a.im}; }
  friend ComplexPoly operator*(const ComplexPoly& a, const ComplexPoly& b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
  }
  friend ComplexPoly operator*(const Polynomial& s, const ComplexPoly& a) { return {s * a.re, s * a.im}; }
  friend ComplexPoly operator*(const Rational& s, const ComplexPoly& a) { return {a.re * s, a.im * s}; }
};

ComplexPoly conj(const ComplexPoly& a);
ComplexPoly times_i(const ComplexPoly& a);
/// |a|^2
Polynomial norm2(const ComplexPoly& a);

/// Builtin actions of the five reduced systems.
ActionSpec assoc_u1_cone_action();      // R+ x U(1) on R + C^3, weights alpha1..3
ActionSpec assoc_r_u1sq_action();       // 2-dim subgroup of R x U(1)^2 cut out by (lambda, mu, nu)
ActionSpec coassoc_u1sq_cone_action();  // R+ x U(1)^2 on R + C^3
ActionSpec cayley_su2_action();         // diagonal SU(2) on C^4
ActionSpec cayley_u1sq_cone_action();   // R+ x U(1)^2 in U(1)^4 cut out by a1..a4

/// Builtin action by system name; throws std::invalid_argument if unknown.
ActionSpec builtin_action(const std::string& system);
/// Form each builtin system is reduced against.
AlternatingForm builtin_form(const std::string& system);

}  // namespace calib
