#include <doctest.h>

#include <cmath>
#include <numbers>

#include "calib/integrate.hpp"

using namespace calib;

namespace {

using Params = std::map<std::string, Rational>;
Params alpha(long a1, long a2, long a3) { return {{"alpha1", a1}, {"alpha2", a2}, {"alpha3", a3}}; }

IntegratorConfig rk4(double h, double t1) {
  IntegratorConfig c;
  c.method = Method::Rk4Fixed;
  c.step = h;
  c.t1 = t1;
  return c;
}

IntegratorConfig adaptive(double tol, double t1) {
  IntegratorConfig c;
  c.method = Method::Rk45Adaptive;
  c.abs_tol = c.rel_tol = tol;
  c.t1 = t1;
  return c;
}

double drift_of(const Trajectory& tr, const std::string& name) {
  for (const auto& d : tr.drift)
    if (d.name == name) return d.max_drift;
  FAIL("no drift record " << name);
  return 0;
}

// Re(z1z2z3) = 0 by rotating z3.
State coassoc_state() {
  State y = {0.2, 0.5, 0.1, 0.4, -0.3, 0.6, 0.2};
  const cplx w = z_of(y, 1) * z_of(y, 2) * z_of(y, 3);
  set_z(y, 3, z_of(y, 3) * std::polar(1.0, std::numbers::pi / 2 - std::arg(w)));
  return y;
}

}  // namespace

TEST_CASE("config validation") {
  IntegratorConfig c;
  CHECK_NOTHROW(c.validate());
  c.step = 0;
  CHECK_THROWS_AS(c.validate(), InvalidParameters);
  c = IntegratorConfig{};
  c.t1 = c.t0;
  CHECK_THROWS_AS(c.validate(), InvalidParameters);
  c = IntegratorConfig{};
  c.rel_tol = -1;
  CHECK_THROWS_AS(c.validate(), InvalidParameters);
  c = IntegratorConfig{};
  c.t1 = INFINITY;
  CHECK_THROWS_AS(c.validate(), InvalidParameters);
  CHECK(method_from_string("rk4-fixed") == Method::Rk4Fixed);
  CHECK(to_string(Method::Rk45Adaptive) == "rk45-adaptive");
  CHECK_THROWS_AS(method_from_string("euler"), InvalidParameters);
}

TEST_CASE("special solution: RK4 drift and pointwise error") {
  const auto s = make_system("assoc-u1-cone", alpha(1, 2, -3));
  const auto beta = betas(s);
  const std::array<double, 3> gamma = {0.2, -0.5, 0.3};
  const auto tr = integrate(s, special_solution_max_A(beta, gamma, 0), rk4(1e-3, 10));
  CHECK(drift_of(tr, "norm^2") <= 1e-9);
  CHECK(drift_of(tr, "Re(z1z2z3)") <= 1e-9);
  double err = 0;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const auto exact = special_solution_max_A(beta, gamma, tr.times[i]);
    for (int j = 0; j < 7; ++j) err = std::max(err, std::abs(tr.states[i][j] - exact[j]));
  }
  CHECK(err <= 1e-8);
  CHECK(tr.times.size() == 10001);
  CHECK(tr.t_end() == doctest::Approx(10).epsilon(1e-15));
}

TEST_CASE("coassociative constraint is preserved") {
  const auto s = make_system("coassoc-u1sq-cone");
  const auto init = prepare_initial_state(s, coassoc_state(), false);
  const auto tr = integrate(s, init.state, rk4(1e-3, 10));
  for (const auto& q : tr.quantity_values) CHECK(std::abs(q[1]) <= 1e-9);
  const auto tr2 = integrate(s, init.state, adaptive(1e-10, 10));
  CHECK(drift_of(tr2, "Re(z1z2z3)") <= 1e-9);
}

TEST_CASE("zero state is stationary") {
  const auto s = make_system("cayley-su2");
  const auto tr = integrate(s, State(8, 0.0), rk4(1e-2, 1));
  for (const auto& y : tr.states)
    for (double v : y) CHECK(v == 0);
}

TEST_CASE("integration errors") {
  const auto cone = make_system("coassoc-u1sq-cone");
  State bad = {0.2, 0.5, 0.0, 0.4, 0.0, 0.6, 0.0};  // Re(z1z2z3) != 0
  bad = prepare_initial_state(cone, bad, false).state;
  CHECK_THROWS_AS(integrate(cone, bad, rk4(1e-3, 1)), ConstraintViolation);
  CHECK_THROWS_AS(integrate(cone, State{2, 0, 0, 0, 0, 0, 0}, rk4(1e-3, 1)), ConstraintViolation);
  CHECK_THROWS_AS(integrate(cone, State(8, 0.0), rk4(1e-3, 1)), DimensionMismatch);

  // lambda != 0 blows up in finite time
  const auto flow = make_system("assoc-r-u1sq", {{"lambda", 1}, {"mu", 2}, {"nu", -1}});
  const State y = {0.1, 0.5, 0.2, 0.3, -0.4, 0.6, 0.2};
  try {
    integrate(flow, y, rk4(1e-3, 10));
    FAIL("expected a nonfinite state");
  } catch (const IncompleteIntegration& e) {
    CHECK(std::string(e.what()).find("nonfinite") != std::string::npos);
    CHECK(e.partial().times.size() > 10);
    CHECK(e.partial().t_end() < 10);
  }

  auto few = adaptive(1e-10, 10);
  few.max_steps = 5;
  try {
    integrate(make_system("cayley-u1sq-cone", {{"a1", -3}, {"a2", 1}, {"a3", 1}, {"a4", 1}}),
              State{0.5, 0.5, 0.5, 0.5, 0, 0, 0, 0}, few);
    FAIL("expected step exhaustion");
  } catch (const IncompleteIntegration& e) {
    CHECK(e.partial().times.size() <= 6);
  }
}

TEST_CASE("dense output is cubic Hermite accurate") {
  const auto s = make_system("assoc-u1-cone", alpha(1, 1, -2));
  const auto beta = betas(s);
  const auto tr = integrate(s, special_solution_max_A(beta, {0, 0, 0}, 0), rk4(1e-2, 3));
  double err = 0;
  for (double t = 0.003; t < 3; t += 0.0137) {
    const auto y = tr.state_at(t), exact = special_solution_max_A(beta, {0, 0, 0}, t);
    for (int j = 0; j < 7; ++j) err = std::max(err, std::abs(y[j] - exact[j]));
  }
  CHECK(err <= 1e-8);
  CHECK_THROWS(tr.state_at(3.5));
  const auto f = tr.dense();
  CHECK(f(1.0) == tr.state_at(1.0));
}

TEST_CASE("RK4 drift scales at fourth order") {
  const auto s = make_system("cayley-u1sq-cone", {{"a1", -3}, {"a2", 1}, {"a3", 1}, {"a4", 1}});
  const auto y = prepare_initial_state(s, {0.3, 0.1, 0.2, -0.4, 0.5, 0.2, 0.1, 0.3}, false).state;
  const double d1 = drift_of(integrate(s, y, rk4(0.04, 10)), "Im(z1z2z3z4)");
  const double d2 = drift_of(integrate(s, y, rk4(0.02, 10)), "Im(z1z2z3z4)");
  CHECK(d1 / d2 > 10);
  CHECK(d1 / d2 < 40);
}

TEST_CASE("renormalize keeps cone states on the sphere") {
  const auto s = make_system("assoc-u1-cone", alpha(2, -1, -1));
  const auto y = prepare_initial_state(s, {0.3, 1.0, 0.4, 0.2, -0.7, 0.5, 0.1}, true).state;
  auto cfg = rk4(0.01, 10);
  cfg.renormalize = true;
  const auto tr = integrate(s, y, cfg);
  for (const auto& st : tr.states) {
    double n = 0;
    for (double v : st) n += v * v;
    CHECK(std::abs(n - 1) <= 1e-14);
  }
  cfg = adaptive(1e-8, 10);
  cfg.renormalize = true;
  CHECK(drift_of(integrate(s, y, cfg), "norm^2") <= 1e-14);
}

TEST_CASE("adaptive integration of the cone systems over [0, 100]") {
  const std::vector<std::pair<std::string, State>> cases = {
      {"assoc-u1-cone", {0.3, 1.0, 0.4, 0.2, -0.7, 0.5, 0.1}},
      {"coassoc-u1sq-cone", coassoc_state()},
      {"cayley-u1sq-cone", {0.3, 0.1, 0.2, -0.4, 0.5, 0.2, 0.1, 0.3}},
  };
  for (const auto& [name, y0] : cases) {
    Params p;
    if (name == "assoc-u1-cone") p = alpha(2, -1, -1);
    if (name == "cayley-u1sq-cone") p = {{"a1", -3}, {"a2", 1}, {"a3", 1}, {"a4", 1}};
    const auto s = make_system(name, p);
    auto cfg = adaptive(1e-10, 100);
    cfg.max_steps = 200000;
    const auto tr = integrate(s, prepare_initial_state(s, y0, true).state, cfg);
    CHECK(tr.t_end() == doctest::Approx(100));
    CHECK(tr.max_drift() <= 1e-7);
  }
}

TEST_CASE("period of the special solution is 2 pi sqrt 3 / gcd(beta)") {
  for (const auto& [a, g] : std::vector<std::pair<Params, double>>{{alpha(1, 1, -2), 3}, {alpha(1, 2, -3), 1}}) {
    const auto s = make_system("assoc-u1-cone", a);
    const double expected = 2 * std::numbers::pi * std::sqrt(3.0) / g;
    const auto tr = integrate(s, special_solution_max_A(betas(s), {0.1, 0.2, -0.3}, 0), adaptive(1e-12, 2.5 * expected));
    const auto p = detect_period(tr, 1e-6, 0.1);
    REQUIRE(p.found);
    CHECK(p.period == doctest::Approx(expected).epsilon(1e-8));
    CHECK(p.closure_error <= 1e-6);
    CHECK(p.loop_error <= 3e-6);
    CHECK(loop_error(tr, p.period) <= 3e-6);
  }
}

TEST_CASE("no period when lambda != 0") {
  const auto s = make_system("assoc-r-u1sq", {{"lambda", 1}, {"mu", 2}, {"nu", -1}});
  const State y = {0.1, 0.2, 0.1, 0.1, -0.2, 0.2, 0.1};
  const auto tr = integrate(s, y, adaptive(1e-10, 1.5));
  CHECK_FALSE(detect_period(tr, 1e-6, 0.01).found);
}

TEST_CASE("generic alpha2 = alpha3 orbits: the (x1, z1) motion closes") {
  const auto s = make_system("assoc-u1-cone", alpha(2, -1, -1));
  const auto y0 = prepare_initial_state(s, {0.3, 1.0, 0.4, 0.2, -0.7, 0.5, 0.1}, true).state;
  const auto tr = integrate(s, y0, adaptive(1e-12, 40));
  // project to the (x1, Re z1) plane, where the motion is a closed curve
  Trajectory reduced = tr;
  reduced.dimension = 2;
  for (auto* seq : {&reduced.states, &reduced.derivatives})
    for (auto& st : *seq) st = {st[0], st[1]};
  const auto p = detect_period(reduced, 1e-6, 0.5);
  REQUIRE(p.found);
  CHECK(p.loop_error <= 3e-6);
}

TEST_CASE("sweep") {
  const auto s = make_system("assoc-u1-cone", alpha(2, -1, -1));
  SweepConfig cfg;
  cfg.integrator = adaptive(1e-10, 5);
  CHECK(sweep(s, {}, cfg, 4).rows.empty());

  auto grid = random_unit_states(7, 12, 3);
  CHECK(grid == random_unit_states(7, 12, 3));
  CHECK(grid != random_unit_states(7, 12, 4));
  grid.push_back(State(5, 0.1));  // wrong length: recorded, not fatal
  const auto a = sweep(s, grid, cfg, 1), b = sweep(s, grid, cfg, 4);
  REQUIRE(a.rows.size() == 13);
  CHECK(a.rows.back().error != "");
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].index == i);
    CHECK(a.rows[i].initial == b.rows[i].initial);
    CHECK(a.rows[i].constants == b.rows[i].constants);
    CHECK(a.rows[i].max_drift == b.rows[i].max_drift);
    CHECK(a.rows[i].period == b.rows[i].period);
    CHECK(a.rows[i].error == b.rows[i].error);
  }
  for (std::size_t i = 0; i + 1 < a.rows.size(); ++i) {
    CHECK(a.rows[i].error.empty());
    CHECK(a.rows[i].constants[1] >= 0);  // A >= 0
    CHECK(a.rows[i].initial[2] == 0);    // gauge-fixed
  }
}
