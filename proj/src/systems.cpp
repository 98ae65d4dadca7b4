#include "calib/systems.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>

#include "calib/errors.hpp"

namespace calib {

namespace {

constexpr double kPi = std::numbers::pi;

int state_dim(const std::string& name) { return name.rfind("cayley", 0) == 0 ? 8 : 7; }

// z_j (1-based) of a numeric state.
cplx zc(std::span<const double> y, int j) {
  const int o = y.size() == 7 ? 2 * j - 1 : 2 * j - 2;
  return {y[o], y[o + 1]};
}

void put(std::span<double> dy, int j, cplx v) {
  const int o = dy.size() == 7 ? 2 * j - 1 : 2 * j - 2;
  dy[o] = v.real();
  dy[o + 1] = v.imag();
}

double norm2(std::span<const double> y) {
  double s = 0;
  for (double v : y) s += v * v;
  return s;
}

ComplexPoly zp(const ActionSpec& a, int j) {
  const int o = a.n == 7 ? 2 * j : 2 * j - 1;
  return {a.coord(o), a.coord(o + 1)};
}

PolyVectorField assemble(const ActionSpec& a, const Polynomial* x1, const std::vector<ComplexPoly>& dz) {
  PolyVectorField f(a.n, a.variable_count());
  int slot = 0;
  if (a.n == 7) f.components[slot++] = *x1;
  for (const auto& c : dz) {
    f.components[slot++] = c.re;
    f.components[slot++] = c.im;
  }
  return f;
}

Polynomial sphere_norm(const ActionSpec& a) {
  Polynomial s(a.variable_count());
  for (int i = 1; i <= a.n; ++i) s += a.coord(i) * a.coord(i);
  return s;
}

// --- hand-coded right-hand sides (symbolic) ------------------------------

PolyVectorField assoc_cone_rhs(const ActionSpec& a) {
  const auto x1 = a.coord(1);
  const auto z1 = zp(a, 1), z2 = zp(a, 2), z3 = zp(a, 3);
  const auto al1 = a.param("alpha1"), al2 = a.param("alpha2"), al3 = a.param("alpha3");
  const auto b1 = al2 - al3, b2 = al3 - al1, b3 = al1 - al2;
  const Polynomial dx1 = al1 * norm2(z1) + al2 * norm2(z2) + al3 * norm2(z3);
  return assemble(a, &dx1,
                  {-(al1 * x1) * z1 + b1 * times_i(conj(z2 * z3)), -(al2 * x1) * z2 + b2 * times_i(conj(z3 * z1)),
                   -(al3 * x1) * z3 + b3 * times_i(conj(z1 * z2))});
}

PolyVectorField assoc_r_u1sq_rhs(const ActionSpec& a) {
  const auto z1 = zp(a, 1), z2 = zp(a, 2), z3 = zp(a, 3);
  const auto la = a.param("lambda"), mu = a.param("mu"), nu = a.param("nu");
  const Polynomial dx1(a.variable_count());
  return assemble(a, &dx1,
                  {-(nu * z1) - la * conj(z2 * z3), mu * z2 - la * conj(z3 * z1), (nu - mu) * z3 - la * conj(z1 * z2)});
}

PolyVectorField coassoc_rhs(const ActionSpec& a) {
  const auto x1 = a.coord(1);
  const auto z1 = zp(a, 1), z2 = zp(a, 2), z3 = zp(a, 3);
  const Polynomial dx1 = (z1 * z2 * z3).im * Rational(-3);
  return assemble(a, &dx1,
                  {(norm2(z2) - norm2(z3)) * z1 + x1 * times_i(conj(z2 * z3)),
                   (norm2(z3) - norm2(z1)) * z2 + x1 * times_i(conj(z3 * z1)),
                   (norm2(z1) - norm2(z2)) * z3 + x1 * times_i(conj(z1 * z2))});
}

PolyVectorField cayley_su2_rhs(const ActionSpec& a) {
  const auto z1 = zp(a, 1), z2 = zp(a, 2), z3 = zp(a, 3), z4 = zp(a, 4);
  const auto n1 = norm2(z1), n2 = norm2(z2), n3 = norm2(z3), n4 = norm2(z4);
  const auto w = conj(z1 * z4 - z2 * z3);
  const Rational two(2);
  return assemble(a, nullptr,
                  {(n1 + n2 + n3 - n4) * z1 + two * ((w + z2 * z3) * conj(z4)),
                   (n4 + n1 + n2 - n3) * z2 - two * ((w - z1 * z4) * conj(z3)),
                   (n3 + n4 + n1 - n2) * z3 - two * ((w - z1 * z4) * conj(z2)),
                   (n2 + n3 + n4 - n1) * z4 + two * ((w + z2 * z3) * conj(z1))});
}

// Quadratic bracket multiplying z_j in the U(1)^2 Cayley cone system.
Polynomial cayley_bracket(const std::array<Polynomial, 4>& p, const std::array<Polynomial, 4>& n, int j) {
  switch (j) {
    case 1: return (p[3] - p[2]) * n[1] + (p[1] - p[3]) * n[2] + (p[2] - p[1]) * n[3];
    case 2: return (p[3] - p[0]) * n[2] + (p[0] - p[2]) * n[3] + (p[2] - p[3]) * n[0];
    case 3: return (p[1] - p[0]) * n[3] + (p[3] - p[1]) * n[0] + (p[0] - p[3]) * n[1];
    default: return (p[1] - p[2]) * n[0] + (p[2] - p[0]) * n[1] + (p[0] - p[1]) * n[2];
  }
}

// The quadratic term carries -1/4; that ratio to the cubic term is what
// contraction with the Spin(7) form gives.
PolyVectorField cayley_cone_rhs(const ActionSpec& a) {
  std::array<ComplexPoly, 4> z{zp(a, 1), zp(a, 2), zp(a, 3), zp(a, 4)};
  std::array<Polynomial, 4> p{a.param("a1"), a.param("a2"), a.param("a3"), a.param("a4")};
  std::array<Polynomial, 4> n{norm2(z[0]), norm2(z[1]), norm2(z[2]), norm2(z[3])};
  std::vector<ComplexPoly> dz;
  for (int j = 0; j < 4; ++j) {
    ComplexPoly others = z[(j + 1) % 4] * z[(j + 2) % 4] * z[(j + 3) % 4];
    dz.push_back(p[j] * conj(others) + (cayley_bracket(p, n, j + 1) * Rational(-1, 4)) * z[j]);
  }
  return assemble(a, nullptr, dz);
}

// --- numeric right-hand sides -------------------------------------------

using Rhs = std::function<void(std::span<const double>, std::span<double>)>;

Rhs numeric_assoc_cone(double a1, double a2, double a3) {
  const double b1 = a2 - a3, b2 = a3 - a1, b3 = a1 - a2;
  const cplx I(0, 1);
  return [=](std::span<const double> y, std::span<double> dy) {
    const double x1 = y[0];
    const cplx z1 = zc(y, 1), z2 = zc(y, 2), z3 = zc(y, 3);
    dy[0] = a1 * std::norm(z1) + a2 * std::norm(z2) + a3 * std::norm(z3);
    put(dy, 1, -a1 * x1 * z1 + I * b1 * std::conj(z2 * z3));
    put(dy, 2, -a2 * x1 * z2 + I * b2 * std::conj(z3 * z1));
    put(dy, 3, -a3 * x1 * z3 + I * b3 * std::conj(z1 * z2));
  };
}

Rhs numeric_assoc_r_u1sq(double la, double mu, double nu) {
  return [=](std::span<const double> y, std::span<double> dy) {
    const cplx z1 = zc(y, 1), z2 = zc(y, 2), z3 = zc(y, 3);
    dy[0] = 0;
    put(dy, 1, -nu * z1 - la * std::conj(z2 * z3));
    put(dy, 2, mu * z2 - la * std::conj(z3 * z1));
    put(dy, 3, (nu - mu) * z3 - la * std::conj(z1 * z2));
  };
}

void numeric_coassoc(std::span<const double> y, std::span<double> dy) {
  const cplx I(0, 1);
  const double x1 = y[0];
  const cplx z1 = zc(y, 1), z2 = zc(y, 2), z3 = zc(y, 3);
  const double n1 = std::norm(z1), n2 = std::norm(z2), n3 = std::norm(z3);
  dy[0] = -3 * (z1 * z2 * z3).imag();
  put(dy, 1, z1 * (n2 - n3) + I * x1 * std::conj(z2 * z3));
  put(dy, 2, z2 * (n3 - n1) + I * x1 * std::conj(z3 * z1));
  put(dy, 3, z3 * (n1 - n2) + I * x1 * std::conj(z1 * z2));
}

void numeric_cayley_su2(std::span<const double> y, std::span<double> dy) {
  const cplx z1 = zc(y, 1), z2 = zc(y, 2), z3 = zc(y, 3), z4 = zc(y, 4);
  const double n1 = std::norm(z1), n2 = std::norm(z2), n3 = std::norm(z3), n4 = std::norm(z4);
  const cplx w = std::conj(z1 * z4 - z2 * z3);
  put(dy, 1, z1 * (n1 + n2 + n3 - n4) + 2.0 * (w + z2 * z3) * std::conj(z4));
  put(dy, 2, z2 * (n4 + n1 + n2 - n3) - 2.0 * (w - z1 * z4) * std::conj(z3));
  put(dy, 3, z3 * (n3 + n4 + n1 - n2) - 2.0 * (w - z1 * z4) * std::conj(z2));
  put(dy, 4, z4 * (n2 + n3 + n4 - n1) + 2.0 * (w + z2 * z3) * std::conj(z1));
}

Rhs numeric_cayley_cone(std::array<double, 4> a) {
  return [=](std::span<const double> y, std::span<double> dy) {
    std::array<cplx, 4> z{zc(y, 1), zc(y, 2), zc(y, 3), zc(y, 4)};
    std::array<double, 4> n{};
    for (int j = 0; j < 4; ++j) n[j] = std::norm(z[j]);
    const std::array<double, 4> br{
        (a[3] - a[2]) * n[1] + (a[1] - a[3]) * n[2] + (a[2] - a[1]) * n[3],
        (a[3] - a[0]) * n[2] + (a[0] - a[2]) * n[3] + (a[2] - a[3]) * n[0],
        (a[1] - a[0]) * n[3] + (a[3] - a[1]) * n[0] + (a[0] - a[3]) * n[1],
        (a[1] - a[2]) * n[0] + (a[2] - a[0]) * n[1] + (a[0] - a[1]) * n[2],
    };
    for (int j = 0; j < 4; ++j) {
      const cplx others = z[(j + 1) % 4] * z[(j + 2) % 4] * z[(j + 3) % 4];
      put(dy, j + 1, a[j] * std::conj(others) - 0.25 * br[j] * z[j]);
    }
  };
}

// --- parameter validation --------------------------------------------------

Rational take(const std::map<std::string, Rational>& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) throw InvalidParameters("missing parameter '" + key + "'");
  return it->second;
}

long as_integer(const Rational& q, const std::string& key) {
  if (q.get_den() != 1 || !q.get_num().fits_slong_p())
    throw InvalidParameters("parameter '" + key + "' must be an integer, got " + to_string(q));
  return q.get_num().get_si();
}

void require_coprime_sum_zero(const std::vector<long>& v, const std::string& what) {
  long g = 0, sum = 0;
  for (long x : v) {
    g = std::gcd(g, x);
    sum += x;
  }
  if (sum != 0) throw InvalidParameters(what + " must sum to 0");
  if (g != 1) throw InvalidParameters(what + " must be coprime (gcd " + std::to_string(g) + ")");
}

// Runs derive_rhs once per system name and refuses construction on mismatch.
void require_derivation_matches(const std::string& name) {
  static std::mutex mu;
  static std::map<std::string, std::string> checked;  // name -> diff text
  std::lock_guard lock(mu);
  auto it = checked.find(name);
  if (it == checked.end()) {
    const ActionSpec action = builtin_action(name);
    const auto diff = check_against(hand_coded_rhs(name), derive_rhs(action, builtin_form(name)), action.relations);
    const auto names = action.variable_names();
    it = checked.emplace(name, diff.empty() ? std::string() : diff.to_text(names)).first;
  }
  if (!it->second.empty())
    throw std::logic_error("hand-coded system " + name + " disagrees with its derivation:\n" + it->second);
}

int param_index(const ActionSpec& a, const std::string& p) {
  return a.n + static_cast<int>(std::find(a.parameters.begin(), a.parameters.end(), p) - a.parameters.begin());
}

ConservedQuantity quantity(std::string name, ConservedQuantity::Kind kind,
                           std::function<double(std::span<const double>)> f, std::optional<Polynomial> cert) {
  return {std::move(name), kind, std::move(f), std::move(cert)};
}

using K = ConservedQuantity::Kind;

}  // namespace

cplx z_of(std::span<const double> y, int j) { return zc(y, j); }
void set_z(std::span<double> y, int j, cplx v) { put(y, j, v); }

PolyVectorField hand_coded_rhs(const std::string& name) {
  const ActionSpec a = builtin_action(name);
  if (name == "assoc-u1-cone") return assoc_cone_rhs(a);
  if (name == "assoc-r-u1sq") return assoc_r_u1sq_rhs(a);
  if (name == "coassoc-u1sq-cone") return coassoc_rhs(a);
  if (name == "cayley-su2") return cayley_su2_rhs(a);
  return cayley_cone_rhs(a);
}

State SystemSpec::derivative(std::span<const double> y) const {
  if (static_cast<int>(y.size()) != n) throw DimensionMismatch("state has the wrong length for " + name);
  State dy(n);
  rhs(y, dy);
  return dy;
}

double SystemSpec::parameter(const std::string& p) const {
  for (std::size_t i = 0; i < parameter_names.size(); ++i)
    if (parameter_names[i] == p) return parameters[i].get_d();
  throw std::invalid_argument("system " + name + " has no parameter '" + p + "'");
}

std::vector<double> SystemSpec::variable_point(std::span<const double> y) const {
  std::vector<double> v(y.begin(), y.end());
  for (const auto& q : parameters) v.push_back(q.get_d());
  return v;
}

SystemSpec make_system(const std::string& name, const std::map<std::string, Rational>& params) {
  const auto& names = system_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw InvalidParameters("unknown system '" + name + "'");
  const ActionSpec action = builtin_action(name);
  for (const auto& [key, value] : params)
    if (std::find(action.parameters.begin(), action.parameters.end(), key) == action.parameters.end())
      throw InvalidParameters("system " + name + " takes no parameter '" + key + "'");

  SystemSpec s;
  s.name = name;
  s.n = state_dim(name);
  s.parameter_names = action.parameters;
  for (const auto& p : action.parameters) s.parameters.push_back(take(params, p));
  s.relations = action.relations;

  const auto z = [&](int j) { return zp(action, j); };
  const auto norm_q = [](std::span<const double> y) { return norm2(y); };
  const auto unit_norm = Constraint{"norm^2", norm_q, 1.0};

  if (name == "assoc-u1-cone") {
    std::vector<long> al;
    for (int j = 0; j < 3; ++j) al.push_back(as_integer(s.parameters[j], s.parameter_names[j]));
    require_coprime_sum_zero(al, "alpha");
    s.cone = true;
    s.gauge_u1 = al[1] == al[2];
    s.rhs = numeric_assoc_cone(al[0], al[1], al[2]);
    s.relations = {{param_index(action, "alpha1"), -(action.param("alpha2") + action.param("alpha3"))}};
    s.constraints = {unit_norm};
    s.conserved = {
        quantity("norm^2", K::Constant, norm_q, sphere_norm(action)),
        quantity("Re(z1z2z3)", K::Constant, [](auto y) { return (zc(y, 1) * zc(y, 2) * zc(y, 3)).real(); },
                 (z(1) * z(2) * z(3)).re),
    };
    if (s.gauge_u1) {
      s.relations.push_back({param_index(action, "alpha2"), action.param("alpha3")});
      const auto n23 = norm2(z(2)) + norm2(z(3));
      s.conserved.push_back(quantity("Im z1", K::Gauge, [](auto y) { return y[2]; }, std::nullopt));
      s.conserved.push_back(quantity(
          "B", K::Constant,
          [](auto y) { return std::abs(zc(y, 1)) * (y[0] * y[0] + std::norm(zc(y, 1)) - 1.0); },
          norm2(z(1)) * n23 * n23));
      s.conserved.push_back(quantity(
          "C", K::Constant, [](auto y) { return (zc(y, 1) * (zc(y, 2) * zc(y, 2) - zc(y, 3) * zc(y, 3))).real(); },
          (z(1) * (z(2) * z(2) - z(3) * z(3))).re));
      s.conserved.push_back(quantity(
          "D", K::Constant, [](auto y) { return (zc(y, 1) * (zc(y, 2) * zc(y, 2) + zc(y, 3) * zc(y, 3))).imag(); },
          (z(1) * (z(2) * z(2) + z(3) * z(3))).im));
    }
  } else if (name == "assoc-r-u1sq") {
    if (s.parameters[0] == 0 && s.parameters[1] == 0 && s.parameters[2] == 0)
      throw InvalidParameters("lambda, mu, nu must not all be zero");
    s.rhs = numeric_assoc_r_u1sq(s.parameters[0].get_d(), s.parameters[1].get_d(), s.parameters[2].get_d());
    s.conserved = {
        quantity("x1", K::Constant, [](auto y) { return y[0]; }, action.coord(1)),
        quantity("Im(z1z2z3)", K::Constant, [](auto y) { return (zc(y, 1) * zc(y, 2) * zc(y, 3)).imag(); },
                 (z(1) * z(2) * z(3)).im),
    };
  } else if (name == "coassoc-u1sq-cone") {
    s.cone = true;
    s.rhs = numeric_coassoc;
    const auto re_p = [](std::span<const double> y) { return (zc(y, 1) * zc(y, 2) * zc(y, 3)).real(); };
    s.constraints = {unit_norm, {"Re(z1z2z3)", re_p, 0.0}};
    s.conserved = {
        quantity("norm^2", K::Constant, norm_q, sphere_norm(action)),
        quantity("Re(z1z2z3)", K::Constant, re_p, (z(1) * z(2) * z(3)).re),
    };
  } else if (name == "cayley-su2") {
    s.rhs = numeric_cayley_su2;
    const auto q1 = norm2(z(1)) - norm2(z(2)) + norm2(z(3)) - norm2(z(4));
    const auto q2 = z(1) * conj(z(2)) + z(3) * conj(z(4));
    const auto q3 = z(1) * z(4) - z(2) * z(3);
    const auto q4 = z(1) * conj(z(3)) + z(2) * conj(z(4));
    const auto Q = q1 * q1 + Rational(4) * norm2(q2);
    const auto w = q3.im;
    const auto cz = [](std::span<const double> y) {
      return std::array<cplx, 4>{zc(y, 1), zc(y, 2), zc(y, 3), zc(y, 4)};
    };
    s.conserved = {
        quantity("|z1|^2-|z2|^2+|z3|^2-|z4|^2", K::MultipleOfU,
                 [=](auto y) {
                   auto v = cz(y);
                   return std::norm(v[0]) - std::norm(v[1]) + std::norm(v[2]) - std::norm(v[3]);
                 },
                 q1),
        quantity("Re(z1 conj z2 + z3 conj z4)", K::MultipleOfU,
                 [=](auto y) {
                   auto v = cz(y);
                   return (v[0] * std::conj(v[1]) + v[2] * std::conj(v[3])).real();
                 },
                 q2.re),
        quantity("Im(z1 conj z2 + z3 conj z4)", K::MultipleOfU,
                 [=](auto y) {
                   auto v = cz(y);
                   return (v[0] * std::conj(v[1]) + v[2] * std::conj(v[3])).imag();
                 },
                 q2.im),
        quantity("Re(z1z4-z2z3)", K::MultipleOfU,
                 [=](auto y) {
                   auto v = cz(y);
                   return (v[0] * v[3] - v[1] * v[2]).real();
                 },
                 q3.re),
        quantity("Re(z1 conj z3 + z2 conj z4)", K::MultipleOfU,
                 [=](auto y) {
                   auto v = cz(y);
                   return (v[0] * std::conj(v[2]) + v[1] * std::conj(v[3])).real();
                 },
                 q4.re),
        quantity("Im(z1 conj z3 + z2 conj z4)", K::MultipleOfU,
                 [=](auto y) {
                   auto v = cz(y);
                   return (v[0] * std::conj(v[2]) + v[1] * std::conj(v[3])).imag();
                 },
                 q4.im),
        quantity("Im(z1z4-z2z3)", K::MultipleOfUInverse,
                 [=](auto y) {
                   auto v = cz(y);
                   return (v[0] * v[3] - v[1] * v[2]).imag();
                 },
                 w),
        quantity("A", K::Constant, [](auto y) { return cayley_level_constants(y).A; }, Q * w * w),
        quantity("B", K::Constant, [](auto y) { return cayley_level_constants(y).B; }, q3.re * w),
        quantity("C", K::Constant, [](auto y) { return cayley_level_constants(y).C; }, q4.re * w),
        quantity("D", K::Constant, [](auto y) { return cayley_level_constants(y).D; }, q4.im * w),
    };
  } else {
    std::vector<long> av;
    for (int j = 0; j < 4; ++j) av.push_back(as_integer(s.parameters[j], s.parameter_names[j]));
    require_coprime_sum_zero(av, "a");
    if (!std::is_sorted(av.begin(), av.end())) throw InvalidParameters("a must satisfy a1 <= a2 <= a3 <= a4");
    s.cone = true;
    s.rhs = numeric_cayley_cone({double(av[0]), double(av[1]), double(av[2]), double(av[3])});
    s.constraints = {unit_norm};
    s.conserved = {
        quantity("norm^2", K::Constant, norm_q, sphere_norm(action)),
        quantity("Im(z1z2z3z4)", K::Constant,
                 [](auto y) { return (zc(y, 1) * zc(y, 2) * zc(y, 3) * zc(y, 4)).imag(); },
                 (z(1) * z(2) * z(3) * z(4)).im),
    };
  }

  require_derivation_matches(name);
  s.symbolic_rhs = hand_coded_rhs(name);
  return s;
}

InitialStateReport prepare_initial_state(const SystemSpec& system, State state, bool gauge_fix) {
  if (static_cast<int>(state.size()) != system.n)
    throw DimensionMismatch("initial state needs " + std::to_string(system.n) + " components, got " +
                            std::to_string(state.size()));
  for (double v : state)
    if (!std::isfinite(v)) throw InvalidParameters("initial state is not finite");
  InitialStateReport r;
  r.original_norm = std::sqrt(norm2(state));
  if (system.cone && r.original_norm > 0 && std::abs(r.original_norm - 1.0) > 0) {
    for (double& v : state) v /= r.original_norm;
    r.projected = true;
  }
  if (gauge_fix && system.gauge_u1) {
    const cplx z1 = zc(state, 1);
    if (std::abs(z1) > 0 && z1.imag() != 0) {
      // z_j -> e^{i alpha_j s} z_j with alpha1 s = -arg z1.
      const double s = -std::arg(z1) / system.parameter("alpha1");
      for (int j = 1; j <= 3; ++j) {
        const cplx v = zc(state, j) * std::polar(1.0, system.parameter("alpha" + std::to_string(j)) * s);
        put(state, j, v);
      }
      state[2] = 0.0;
      r.gauge_fixed = true;
    }
  }
  r.state = std::move(state);
  return r;
}

double constraint_violation(const SystemSpec& system, std::span<const double> y) {
  double worst = 0;
  for (const auto& c : system.constraints) worst = std::max(worst, std::abs(c.evaluate(y) - c.required));
  return worst;
}

// --- assoc-u1-cone specials --------------------------------------------

ARangeResult a_range_extremum() {
  ARangeResult out;
  out.analytic = 1.0 / (3.0 * std::sqrt(3.0));
  // Maximize f = r1^2 r2^2 r3^2 on the unit 2-sphere by projected gradient
  // ascent with renormalization.
  std::array<double, 3> r{0.8, 0.5, 0.3};
  auto normalize = [](std::array<double, 3>& v) {
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    for (double& x : v) x /= n;
  };
  normalize(r);
  const double step = 2.0;
  for (out.iterations = 0; out.iterations < 100000; ++out.iterations) {
    const double f = r[0] * r[0] * r[1] * r[1] * r[2] * r[2];
    std::array<double, 3> g{2 * f / r[0], 2 * f / r[1], 2 * f / r[2]};
    const double radial = g[0] * r[0] + g[1] * r[1] + g[2] * r[2];
    double tn = 0;
    for (int i = 0; i < 3; ++i) {
      g[i] -= radial * r[i];
      tn += g[i] * g[i];
    }
    if (std::sqrt(tn) < 1e-16) break;
    for (int i = 0; i < 3; ++i) r[i] += step * g[i];
    normalize(r);
  }
  out.radii = r;
  out.numeric = r[0] * r[1] * r[2];
  out.state = {0.0, r[0], 0.0, r[1], 0.0, r[2], 0.0};
  return out;
}

State special_solution_max_A(const std::array<double, 3>& beta, const std::array<double, 3>& gamma, double t) {
  const double sb = beta[0] + beta[1] + beta[2];
  const double sg = gamma[0] + gamma[1] + gamma[2];
  const double scale_b = 1.0 + std::abs(beta[0]) + std::abs(beta[1]) + std::abs(beta[2]);
  const double scale_g = 1.0 + std::abs(gamma[0]) + std::abs(gamma[1]) + std::abs(gamma[2]);
  if (std::abs(sb) > 1e-12 * scale_b) throw ConstraintViolation("beta must sum to 0");
  if (std::abs(sg) > 1e-12 * scale_g) throw ConstraintViolation("gamma must sum to 0");
  const double r = 1.0 / std::sqrt(3.0);
  State y(7, 0.0);
  for (int j = 0; j < 3; ++j) put(y, j + 1, std::polar(r, beta[j] * t / std::sqrt(3.0) + gamma[j]));
  return y;
}

std::array<double, 3> betas(const SystemSpec& s) {
  const double a1 = s.parameter("alpha1"), a2 = s.parameter("alpha2"), a3 = s.parameter("alpha3");
  return {a2 - a3, a3 - a1, a1 - a2};
}

PolarView polar_view(const SystemSpec& s, std::span<const double> y) {
  const State dy = s.derivative(y);
  PolarView p;
  p.x1 = y[0];
  for (int j = 0; j < 3; ++j) {
    const cplx z = zc(y, j + 1), dz = zc(dy, j + 1);
    p.r[j] = std::abs(z);
    p.theta[j] = std::arg(z);
    const cplx w = std::conj(z) * dz;
    p.dr[j] = w.real() / p.r[j];
    p.dtheta[j] = w.imag() / (p.r[j] * p.r[j]);
  }
  p.theta_sum = p.theta[0] + p.theta[1] + p.theta[2];
  p.A = (zc(y, 1) * zc(y, 2) * zc(y, 3)).real();
  return p;
}

// --- assoc-r-u1sq closed forms ---------------------------------------------

Parametrization closed_form_trivial(const std::string& name, const TrivialCaseConstants& k) {
  Parametrization p;
  p.family = "assoc-r-u1sq/" + name;
  p.k = 3;
  p.n = 7;
  if (name == "lambda-zero") {
    if (!std::isfinite(k.mu) || !std::isfinite(k.nu)) throw InvalidParameters("mu, nu must be finite");
    if (k.mu == 0 && k.nu == 0) throw InvalidParameters("lambda-zero case needs mu or nu nonzero");
    for (const auto& a : k.amplitudes)
      if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) throw InvalidParameters("amplitudes must be finite");
    const double mu = k.mu, nu = k.nu;
    const auto amp = k.amplitudes;
    // Parameters (c, p, t): translation, phases (phi1, phi2) = p (nu, -mu), flow time.
    p.point = [=](std::span<const double> q) {
      const double c = q[0], ph1 = q[1] * nu, ph2 = -q[1] * mu, t = q[2];
      State y(7);
      y[0] = c;
      put(y, 1, amp[0] * std::exp(cplx(-nu * t, ph1)));
      put(y, 2, amp[1] * std::exp(cplx(mu * t, ph2)));
      put(y, 3, amp[2] * std::exp(cplx((nu - mu) * t, -(ph1 + ph2))));
      return y;
    };
    p.domain = {{-1, 1}, {0, 2 * kPi}, {-1, 1}};
    return p;
  }
  if (name == "mu-nu-zero") {
    for (double v : {k.x, k.A, k.B, k.C})
      if (!std::isfinite(v)) throw InvalidParameters("constants must be finite");
    const double x = k.x, A = k.A, B = k.B, C = k.C;
    const auto product2 = [=](double rho) { return (B + rho) * (C + rho) * rho; };
    // Smallest admissible |z3|^2: all moduli real and |z1 z2 z3| >= |A|.
    double lo = std::max({0.0, -B, -C});
    double hi = lo + 1.0;
    while (product2(hi) < A * A) hi = lo + 2 * (hi - lo);
    if (product2(lo) < A * A) {
      for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (product2(mid) < A * A ? lo : hi) = mid;
      }
      lo = hi;
    }
    p.point = [=](std::span<const double> q) {
      const double rho = q[0];
      const double m = product2(rho);
      if (!(rho >= 0 && B + rho >= 0 && C + rho >= 0) || std::sqrt(std::max(m, 0.0)) < std::abs(A))
        throw InvalidParameters("|z3|^2 = " + std::to_string(rho) + " is outside the level set");
      const double theta = std::asin(A / std::sqrt(m));
      State y(7);
      y[0] = x;
      put(y, 1, std::polar(std::sqrt(B + rho), q[1]));
      put(y, 2, std::polar(std::sqrt(C + rho), q[2]));
      put(y, 3, std::polar(std::sqrt(rho), theta - q[1] - q[2]));
      return y;
    };
    p.domain = {{lo + 0.1, lo + 1.1}, {0, 2 * kPi}, {0, 2 * kPi}};
    return p;
  }
  throw InvalidParameters("unknown closed form '" + name + "' (expected lambda-zero or mu-nu-zero)");
}

// --- cayley-su2 level sets ----------------------------------------------------

namespace {

struct Su2Invariants {
  double q1;
  cplx q2, q3, q4;
};

Su2Invariants su2_invariants(std::span<const double> y) {
  if (y.size() != 8) throw DimensionMismatch("cayley-su2 states live in R^8");
  const cplx z1 = zc(y, 1), z2 = zc(y, 2), z3 = zc(y, 3), z4 = zc(y, 4);
  return {std::norm(z1) - std::norm(z2) + std::norm(z3) - std::norm(z4), z1 * std::conj(z2) + z3 * std::conj(z4),
          z1 * z4 - z2 * z3, z1 * std::conj(z3) + z2 * std::conj(z4)};
}

}  // namespace

std::pair<double, double> cayley_q_both(std::span<const double> y) {
  const auto v = su2_invariants(y);
  const cplx z1 = zc(y, 1), z2 = zc(y, 2), z3 = zc(y, 3), z4 = zc(y, 4);
  const double first = v.q1 * v.q1 + 4 * std::norm(v.q2);
  const double a = std::norm(z1) + std::norm(z2), b = std::norm(z3) + std::norm(z4);
  const double second = a * a + b * b + 2 * std::norm(v.q4) - 2 * std::norm(v.q3);
  return {first, second};
}

CayleyLevelSet cayley_level_constants(std::span<const double> y) {
  const auto v = su2_invariants(y);
  const double w = v.q3.imag();
  const double Q = cayley_q_both(y).first;
  return {Q * w * w, v.q3.real() * w, v.q4.real() * w, v.q4.imag() * w};
}

// --- ruled construction ------------------------------------------------------

HarmonicPair harmonic_pair(const std::string& name, double scale, double c1, double c2) {
  HarmonicPair h;
  h.name = name;
  if (name == "zero") {
    h.u = [](double, double) { return 0.0; };
    h.v = [](double, double) { return 0.0; };
    h.zero = true;
  } else if (name == "constant") {
    h.u = [=](double, double) { return scale * c1; };
    h.v = [=](double, double) { return scale * c2; };
    h.zero = scale * c1 == 0 && scale * c2 == 0;
  } else if (name == "linear") {
    h.u = [=](double s, double) { return scale * s; };
    h.v = [=](double, double t) { return scale * t; };
    h.zero = scale == 0;
  } else if (name == "exp") {
    h.u = [=](double s, double t) { return scale * std::exp(s) * std::cos(t); };
    h.v = [=](double s, double t) { return scale * std::exp(s) * std::sin(t); };
    h.zero = scale == 0;
  } else if (name == "cos-cosh") {
    h.u = [=](double s, double t) { return scale * std::cos(s) * std::cosh(t); };
    h.v = [=](double s, double t) { return -scale * std::sin(s) * std::sinh(t); };
    h.zero = scale == 0;
  } else {
    throw InvalidParameters("unknown harmonic pair '" + name + "'");
  }
  return h;
}

HarmonicPair harmonic_pair_from(std::function<double(double, double)> u, std::function<double(double, double)> v) {
  return {"custom", std::move(u), std::move(v), false};
}

double cauchy_riemann_residual(const HarmonicPair& h, std::span<const std::pair<double, double>> points, double step) {
  double worst = 0;
  for (const auto& [s, t] : points) {
    const double us = (h.u(s + step, t) - h.u(s - step, t)) / (2 * step);
    const double ut = (h.u(s, t + step) - h.u(s, t - step)) / (2 * step);
    const double vs = (h.v(s + step, t) - h.v(s - step, t)) / (2 * step);
    const double vt = (h.v(s, t + step) - h.v(s, t - step)) / (2 * step);
    worst = std::max({worst, std::abs(us - vt), std::abs(ut + vs)});
  }
  return worst;
}

RuledParams make_ruled_params(SystemSpec system, CurveEvaluator base, HarmonicPair pair, double period) {
  if (system.name != "assoc-u1-cone" || system.parameter("alpha1") != 2 || system.parameter("alpha2") != -1 ||
      system.parameter("alpha3") != -1)
    throw InvalidParameters("ruled construction needs an assoc-u1-cone base with alpha = (2, -1, -1)");
  if (!base) throw InvalidParameters("ruled construction needs a base curve");
  if (!pair.u || !pair.v) throw InvalidParameters("harmonic pair is missing an evaluator");
  std::vector<std::pair<double, double>> pts;
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j) pts.emplace_back(0.5 * i, 0.5 * j);
  const double res = cauchy_riemann_residual(pair, pts);
  if (res > 1e-6) throw InvalidParameters("u, v fail the Cauchy-Riemann equations (residual " + std::to_string(res) + ")");
  return {std::move(system), std::move(base), std::move(pair), period};
}

State ruled_direction(const RuledParams& p, double s, double t) {
  const State y = p.base(t);
  State out(7);
  out[0] = y[0];
  put(out, 1, std::polar(1.0, 2 * s) * zc(y, 1));
  put(out, 2, std::polar(1.0, -s) * zc(y, 2));
  put(out, 3, std::polar(1.0, -s) * zc(y, 3));
  return out;
}

State ruled_point(const RuledParams& p, double r, double s, double t) {
  const State y = p.base(t);
  const double u = p.pair.u(s, t), v = p.pair.v(s, t);
  const double x1 = y[0];
  const cplx z1 = zc(y, 1), z2 = zc(y, 2), z3 = zc(y, 3);
  const cplx I(0, 1);
  State out(7);
  out[0] = r * x1 + v * (2 * std::norm(z1) - std::norm(z2) - std::norm(z3));
  put(out, 1, std::polar(1.0, 2 * s) * (r + 2.0 * I * u - 2 * v * x1) * z1);
  put(out, 2, std::polar(1.0, -s) * ((r - I * u + v * x1) * z2 - 3.0 * I * v * std::conj(z3 * z1)));
  put(out, 3, std::polar(1.0, -s) * ((r - I * u + v * x1) * z3 + 3.0 * I * v * std::conj(z1 * z2)));
  return out;
}

}  // namespace calib
