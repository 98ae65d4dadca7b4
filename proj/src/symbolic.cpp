#include "calib/symbolic.hpp"

#include <algorithm>
#include <array>
#include <sstream>
#include <stdexcept>

namespace calib {

PolyVectorField::PolyVectorField(int dim, int nvars) : n(dim), components(dim, Polynomial(nvars)) {}

std::vector<double> PolyVectorField::eval(std::span<const double> point) const {
  std::vector<double> out;
  out.reserve(components.size());
  for (const auto& c : components) out.push_back(c.eval(point));
  return out;
}

std::vector<std::string> ActionSpec::variable_names() const {
  auto names = coordinate_names(n);
  names.insert(names.end(), parameters.begin(), parameters.end());
  return names;
}

Polynomial ActionSpec::param(const std::string& name) const {
  auto it = std::find(parameters.begin(), parameters.end(), name);
  if (it == parameters.end()) throw std::invalid_argument("unknown parameter '" + name + "' in action " + this->name);
  return Polynomial::variable(variable_count(), n + static_cast<int>(it - parameters.begin()));
}

Polynomial ActionSpec::coord(int one_based) const { return Polynomial::variable(variable_count(), one_based - 1); }

namespace {

void require_linear(const ActionSpec& action) {
  for (const auto& g : action.generators) {
    if (g.n != action.n) throw DimensionMismatch("generator dimension differs from the action's ambient dimension");
    for (const auto& c : g.components) {
      if (c.variable_count() != action.variable_count()) throw DimensionMismatch("generator variable space mismatch");
      if (c.degree_below(action.n) > 1) throw std::invalid_argument("nonlinear generator in action " + action.name);
    }
  }
}

}  // namespace

PolyVectorField derive_rhs(const ActionSpec& action, const AlternatingForm& form) {
  if (form.dimension() != action.n) throw DimensionMismatch("form and action live in different dimensions");
  require_linear(action);
  const int nv = action.variable_count();
  const int arity = form.degree() - 1;

  std::vector<ChiTerm> chi = action.chi;
  if (chi.empty()) {
    ChiTerm all{Polynomial::constant(nv, 1), {}};
    for (int i = 0; i < static_cast<int>(action.generators.size()); ++i) all.generators.push_back(i);
    chi.push_back(std::move(all));
  }

  PolyVectorField out(action.n, nv);
  const Polynomial zero(nv);
  for (const auto& term : chi) {
    if (static_cast<int>(term.generators.size()) != arity)
      throw ArityMismatch("orbit multivector of degree " + std::to_string(term.generators.size()) + " against a " +
                          std::to_string(form.degree()) + "-form");
    std::vector<std::vector<Polynomial>> slots;
    for (int g : term.generators) slots.push_back(action.generators.at(g).components);
    slots.emplace_back(action.n, zero);
    for (int d = 0; d < action.n; ++d) {
      slots.back()[d] = Polynomial::constant(nv, 1);
      out.components[d] += term.weight * evaluate_generic<Polynomial>(form, slots, zero);
      slots.back()[d] = zero;
    }
  }
  return out;
}

Polynomial lie_derivative(const Polynomial& q, const PolyVectorField& field) {
  Polynomial out(q.variable_count());
  for (int i = 0; i < field.n; ++i) out += q.derivative(i) * field.components[i];
  return out;
}

Polynomial reduce(const Polynomial& p, const std::vector<std::pair<int, Polynomial>>& relations) {
  Polynomial out = p;
  for (const auto& [var, value] : relations) out = out.substitute(var, value);
  return out;
}

PolyVectorField reduce(const PolyVectorField& f, const std::vector<std::pair<int, Polynomial>>& relations) {
  PolyVectorField out = f;
  for (auto& c : out.components) c = reduce(c, relations);
  return out;
}

std::string DiffReport::to_text(std::span<const std::string> names) const {
  if (entries.empty()) return "no differences\n";
  std::ostringstream os;
  for (const auto& e : entries) {
    Polynomial m(static_cast<int>(names.size()));
    m.add_term(e.monomial, 1);
    os << "component " << e.component << ": " << to_string(m, names) << "  expected " << to_string(e.expected)
       << "  derived " << to_string(e.derived) << "\n";
  }
  return os.str();
}

DiffReport check_against(const PolyVectorField& spec_rhs, const PolyVectorField& derived,
                         const std::vector<std::pair<int, Polynomial>>& relations) {
  if (spec_rhs.n != derived.n) throw DimensionMismatch("fields of different dimension");
  const auto a = reduce(spec_rhs, relations);
  const auto b = reduce(derived, relations);
  DiffReport report;
  for (int d = 0; d < a.n; ++d) {
    const auto& pa = a.components[d].terms();
    const auto& pb = b.components[d].terms();
    // Walk the union of monomials in canonical order.
    std::vector<Monomial> keys;
    for (const auto& [m, c] : pa) keys.push_back(m);
    for (const auto& [m, c] : pb)
      if (!pa.count(m)) keys.push_back(m);
    std::sort(keys.begin(), keys.end(), GrlexDescending{});
    for (const auto& m : keys) {
      const Rational ca = pa.count(m) ? pa.at(m) : Rational(0);
      const Rational cb = pb.count(m) ? pb.at(m) : Rational(0);
      if (ca != cb) report.entries.push_back({d + 1, m, ca, cb});
    }
  }
  return report;
}

ComplexPoly conj(const ComplexPoly& a) { return {a.re, -a.im}; }
ComplexPoly times_i(const ComplexPoly& a) { return {-a.im, a.re}; }
Polynomial norm2(const ComplexPoly& a) { return a.re * a.re + a.im * a.im; }

namespace {

// Complex coordinate z_j (1-based j) as (re, im) polynomials.
ComplexPoly z_of(const ActionSpec& a, int j) {
  const int offset = a.n == 7 ? 2 * j : 2 * j - 1;  // 1-based index of Re z_j
  return {a.coord(offset), a.coord(offset + 1)};
}

// Real field from an optional x1 component and complex components dz_j.
PolyVectorField field_of(const ActionSpec& a, const Polynomial* x1, const std::vector<ComplexPoly>& dz) {
  PolyVectorField f(a.n, a.variable_count());
  int slot = 0;
  if (a.n == 7) f.components[slot++] = x1 ? *x1 : Polynomial(a.variable_count());
  for (const auto& c : dz) {
    f.components[slot++] = c.re;
    f.components[slot++] = c.im;
  }
  return f;
}

PolyVectorField position_field(const ActionSpec& a) {
  PolyVectorField f(a.n, a.variable_count());
  for (int i = 0; i < a.n; ++i) f.components[i] = a.coord(i + 1);
  return f;
}

int levi_civita(std::array<int, 4> p) {
  int sign = 1;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      if (p[i] == p[j]) return 0;
      if (p[i] > p[j]) sign = -sign;
    }
  return sign;
}

}  // namespace

ActionSpec assoc_u1_cone_action() {
  ActionSpec a;
  a.name = "assoc-u1-cone";
  a.n = 7;
  a.parameters = {"alpha1", "alpha2", "alpha3"};
  std::vector<ComplexPoly> rot;
  for (int j = 1; j <= 3; ++j) rot.push_back(a.param("alpha" + std::to_string(j)) * times_i(z_of(a, j)));
  a.generators = {position_field(a), field_of(a, nullptr, rot)};
  return a;
}

ActionSpec assoc_r_u1sq_action() {
  ActionSpec a;
  a.name = "assoc-r-u1sq";
  a.n = 7;
  a.parameters = {"lambda", "mu", "nu"};
  const int nv = a.variable_count();
  const ComplexPoly zero(nv);
  const Polynomial one = Polynomial::constant(nv, 1);
  const auto z1 = z_of(a, 1), z2 = z_of(a, 2), z3 = z_of(a, 3);
  const auto translate = field_of(a, &one, {zero, zero, zero});
  const auto r1 = field_of(a, nullptr, {times_i(z1), zero, -times_i(z3)});
  const auto r2 = field_of(a, nullptr, {zero, times_i(z2), -times_i(z3)});
  a.generators = {translate, r1, r2};
  // Plane {lambda c + mu phi1 + nu phi2 = 0} in (translate, r1, r2) coordinates.
  a.chi = {{a.param("lambda"), {1, 2}}, {a.param("mu"), {2, 0}}, {a.param("nu"), {0, 1}}};
  return a;
}

ActionSpec coassoc_u1sq_cone_action() {
  ActionSpec a;
  a.name = "coassoc-u1sq-cone";
  a.n = 7;
  const int nv = a.variable_count();
  const ComplexPoly zero(nv);
  const auto z1 = z_of(a, 1), z2 = z_of(a, 2), z3 = z_of(a, 3);
  a.generators = {position_field(a), field_of(a, nullptr, {times_i(z1), zero, -times_i(z3)}),
                  field_of(a, nullptr, {zero, times_i(z2), -times_i(z3)})};
  return a;
}

ActionSpec cayley_su2_action() {
  ActionSpec a;
  a.name = "cayley-su2";
  a.n = 8;
  const auto z1 = z_of(a, 1), z2 = z_of(a, 2), z3 = z_of(a, 3), z4 = z_of(a, 4);
  a.generators = {
      field_of(a, nullptr, {times_i(z1), -times_i(z2), times_i(z3), -times_i(z4)}),
      field_of(a, nullptr, {z2, -z1, z4, -z3}),
      field_of(a, nullptr, {times_i(z2), times_i(z1), times_i(z4), times_i(z3)}),
  };
  return a;
}

ActionSpec cayley_u1sq_cone_action() {
  ActionSpec a;
  a.name = "cayley-u1sq-cone";
  a.n = 8;
  a.parameters = {"a1", "a2", "a3", "a4"};
  const int nv = a.variable_count();
  const ComplexPoly zero(nv);
  a.generators = {position_field(a)};
  for (int j = 1; j <= 4; ++j) {
    std::vector<ComplexPoly> dz(4, zero);
    dz[j - 1] = times_i(z_of(a, j));
    a.generators.push_back(field_of(a, nullptr, dz));
  }
  // The Lie algebra of the U(1)^2 is the plane orthogonal to (1,1,1,1) and
  // (a1..a4); its bivector is the Hodge dual of their wedge, scaled by -1/2
  // so the reduced flow carries the weight a_j on the cubic term.
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      Polynomial w(nv);
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) {
          const int eps = levi_civita({i, j, k, l});
          if (eps != 0) w += a.param("a" + std::to_string(l + 1)) * Rational(eps);
        }
      if (!w.is_zero()) a.chi.push_back({w * Rational(-1, 4), {0, i + 1, j + 1}});
    }
  a.relations = {{8 + 3, -(a.param("a1") + a.param("a2") + a.param("a3"))}};
  return a;
}

ActionSpec builtin_action(const std::string& system) {
  if (system == "assoc-u1-cone") return assoc_u1_cone_action();
  if (system == "assoc-r-u1sq") return assoc_r_u1sq_action();
  if (system == "coassoc-u1sq-cone") return coassoc_u1sq_cone_action();
  if (system == "cayley-su2") return cayley_su2_action();
  if (system == "cayley-u1sq-cone") return cayley_u1sq_cone_action();
  throw std::invalid_argument("unknown system '" + system + "'");
}

AlternatingForm builtin_form(const std::string& system) {
  if (system == "assoc-u1-cone" || system == "assoc-r-u1sq") return g2_form();
  if (system == "coassoc-u1sq-cone") return g2_star_form();
  if (system == "cayley-su2" || system == "cayley-u1sq-cone") return spin7_form();
  throw std::invalid_argument("unknown system '" + system + "'");
}

}  // namespace calib
