#include <doctest.h>

#include <random>

#include "calib/symbolic.hpp"
#include "calib/systems.hpp"

using namespace calib;

namespace {

Polynomial parse(const std::string& s, const ActionSpec& a) {
  const auto names = a.variable_names();
  return parse_polynomial(s, names);
}

// Floating contraction of numerically evaluated generators, independent of
// the polynomial machinery in derive_rhs.
std::vector<double> numeric_rhs(const ActionSpec& a, const AlternatingForm& form, std::span<const double> point) {
  std::vector<std::vector<double>> g;
  for (const auto& f : a.generators) g.push_back(f.eval(point));
  std::vector<ChiTerm> chi = a.chi;
  if (chi.empty()) {
    ChiTerm all{Polynomial::constant(a.variable_count(), 1), {}};
    for (int i = 0; i < static_cast<int>(g.size()); ++i) all.generators.push_back(i);
    chi.push_back(all);
  }
  std::vector<double> y(a.n, 0.0);
  for (const auto& term : chi) {
    const double w = term.weight.eval(point);
    for (int d = 0; d < a.n; ++d) {
      std::vector<std::vector<double>> vs;
      for (int i : term.generators) vs.push_back(g[i]);
      std::vector<double> e(a.n, 0.0);
      e[d] = 1;
      vs.push_back(e);
      y[d] += w * evaluate(form, OrientedFrame(a.n, vs));
    }
  }
  return y;
}

}  // namespace

TEST_CASE("polynomial ring basics") {
  const auto names = coordinate_names(7);
  const auto p = parse_polynomial("x2^2 + x3^2", names);
  const std::vector<double> e2 = {0, 1, 0, 0, 0, 0, 0};
  CHECK(p.eval(e2) == 1);
  const auto x1 = Polynomial::variable(7, 0);
  CHECK(x1 * x1 == parse_polynomial("x1^2", names));
  CHECK((p + (-p)).is_zero());
  CHECK(to_string(Polynomial(7), names) == "0");
  CHECK(to_string(parse_polynomial("x3 + 3/6*x1*x4 - x1^2", names), names) == "-x1^2 + 1/2*x1*x4 + x3");
  CHECK_THROWS_AS(x1 + Polynomial::variable(8, 0), DimensionMismatch);
  CHECK_THROWS_AS(parse_polynomial("x1 + y", names), std::invalid_argument);
  CHECK_THROWS_AS(parse_polynomial("x1 + 1/0", names), std::invalid_argument);
}

TEST_CASE("polynomial print/parse round trip on random polynomials") {
  const auto a = assoc_u1_cone_action();
  const auto names = a.variable_names();
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> var(0, a.variable_count() - 1), num(-20, 20), den(1, 9), deg(0, 3), len(0, 8);
  for (int trial = 0; trial < 300; ++trial) {
    Polynomial p(a.variable_count());
    for (int t = len(rng); t > 0; --t) {
      Monomial m;
      for (int d = deg(rng); d > 0; --d) m = m * Monomial::variable(var(rng));
      Rational q(num(rng), den(rng));
      q.canonicalize();
      p.add_term(m, q);
    }
    const auto text = to_string(p, names);
    REQUIRE(parse_polynomial(text, names) == p);
    CHECK(to_string(parse_polynomial(text, names), names) == text);
  }
}

TEST_CASE("derive: U(1) cone action against phi0") {
  const auto a = assoc_u1_cone_action();
  const auto y = derive_rhs(a, g2_form());
  CHECK(y.components[0] == parse("alpha1*x2^2 + alpha1*x3^2 + alpha2*x4^2 + alpha2*x5^2 + alpha3*x6^2 + alpha3*x7^2", a));
}

TEST_CASE("derive: SU(2) action against Phi0, z1 component") {
  const auto a = cayley_su2_action();
  const auto y = derive_rhs(a, spin7_form());
  const int nv = a.variable_count();
  auto z = [&](int j) { return ComplexPoly(Polynomial::variable(nv, 2 * j - 2), Polynomial::variable(nv, 2 * j - 1)); };
  const Polynomial n1 = norm2(z(1)), n2 = norm2(z(2)), n3 = norm2(z(3)), n4 = norm2(z(4));
  const ComplexPoly expected =
      (n1 + n2 + n3 - n4) * z(1) + Rational(2) * ((conj(z(1) * z(4) - z(2) * z(3)) + z(2) * z(3)) * conj(z(4)));
  CHECK(y.components[0] == expected.re);
  CHECK(y.components[1] == expected.im);
}

TEST_CASE("derive: zero generators give the zero field") {
  auto a = coassoc_u1sq_cone_action();
  for (auto& g : a.generators)
    for (auto& c : g.components) c = Polynomial(a.variable_count());
  for (const auto& c : derive_rhs(a, g2_star_form()).components) CHECK(c.is_zero());
}

TEST_CASE("derive: arity and linearity are enforced") {
  auto a = coassoc_u1sq_cone_action();
  CHECK_THROWS_AS(derive_rhs(a, g2_form()), ArityMismatch);
  a.generators[1].components[0] = Polynomial::variable(a.variable_count(), 0) * Polynomial::variable(a.variable_count(), 1);
  CHECK_THROWS_AS(derive_rhs(a, g2_star_form()), std::invalid_argument);
}

TEST_CASE("every builtin system matches its hand-coded right-hand side") {
  for (const auto& name : system_names()) {
    CAPTURE(name);
    const auto a = builtin_action(name);
    const auto diff = check_against(hand_coded_rhs(name), derive_rhs(a, builtin_form(name)), a.relations);
    CHECK(diff.empty());
    if (!diff.empty()) MESSAGE(diff.to_text(a.variable_names()));
  }
}

TEST_CASE("check_against reports a flipped sign as one entry") {
  const auto a = assoc_u1_cone_action();
  auto spec = hand_coded_rhs("assoc-u1-cone");
  const auto derived = derive_rhs(a, g2_form());
  // flip the sign of one monomial of dx2/dt
  const auto [m, c] = *spec.components[1].terms().begin();
  spec.components[1].add_term(m, -2 * c);
  const auto diff = check_against(spec, derived);
  REQUIRE(diff.entries.size() == 1);
  CHECK(diff.entries[0].component == 2);
  CHECK(diff.entries[0].monomial == m);
  CHECK(diff.entries[0].expected == -c);
  CHECK(diff.entries[0].derived == c);
  CHECK(diff.to_text(a.variable_names()).find("component 2") != std::string::npos);
}

TEST_CASE("derived degree: 2 for associative actions, 3 otherwise; cones are homogeneous") {
  for (const auto& name : system_names()) {
    const auto a = builtin_action(name);
    const auto y = derive_rhs(a, builtin_form(name));
    const int expected = builtin_form(name).degree() - 1;
    int deg = -1;
    for (const auto& c : y.components) deg = std::max(deg, c.degree_below(a.n));
    CHECK(deg == expected);
    // the translation generator of assoc-r-u1sq breaks homogeneity
    if (name == "assoc-r-u1sq") continue;
    for (const auto& c : y.components)
      for (const auto& [m, coeff] : c.terms()) {
        int d = 0;
        for (auto [v, e] : m.factors())
          if (v < a.n) d += e;
        CHECK(d == expected);
      }
  }
}

TEST_CASE("derive is alternating in the generators") {
  for (const auto& name : {"coassoc-u1sq-cone", "cayley-su2", "assoc-u1-cone"}) {
    const auto a = builtin_action(name);
    REQUIRE(a.chi.empty());
    auto b = a;
    std::swap(b.generators[0], b.generators[1]);
    const auto ya = derive_rhs(a, builtin_form(name)), yb = derive_rhs(b, builtin_form(name));
    for (int i = 0; i < a.n; ++i) CHECK(yb.components[i] == -ya.components[i]);
  }
}

TEST_CASE("exact field agrees with floating contraction at random points") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (const auto& name : system_names()) {
    const auto a = builtin_action(name);
    const auto form = builtin_form(name);
    const auto y = derive_rhs(a, form);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> p(a.variable_count());
      for (auto& v : p) v = g(rng);
      const auto exact = y.eval(p), numeric = numeric_rhs(a, form, p);
      for (int d = 0; d < a.n; ++d) CHECK(std::abs(exact[d] - numeric[d]) <= 1e-12 * std::max(1.0, std::abs(exact[d])));
    }
  }
}

TEST_CASE("lie derivative") {
  const auto a = assoc_u1_cone_action();
  // d/dt x1 along the reduced flow is its first component
  const auto rhs = hand_coded_rhs("assoc-u1-cone");
  CHECK(lie_derivative(Polynomial::variable(a.variable_count(), 0), rhs) == rhs.components[0]);
}
