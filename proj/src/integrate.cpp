#include "calib/integrate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

namespace calib {

Method method_from_string(const std::string& s) {
  if (s == "rk4-fixed") return Method::Rk4Fixed;
  if (s == "rk45-adaptive") return Method::Rk45Adaptive;
  throw InvalidParameters("unknown integration method '" + s + "' (expected rk4-fixed or rk45-adaptive)");
}

std::string to_string(Method m) { return m == Method::Rk4Fixed ? "rk4-fixed" : "rk45-adaptive"; }

void IntegratorConfig::validate() const {
  if (!(step > 0) || !std::isfinite(step)) throw InvalidParameters("step must be positive");
  if (method == Method::Rk45Adaptive && (!(abs_tol > 0) || !(rel_tol > 0)))
    throw InvalidParameters("tolerances must be positive");
  if (!std::isfinite(t0) || !std::isfinite(t1) || !(t1 > t0)) throw InvalidParameters("t_span must be finite with t1 > t0");
  if (max_steps <= 0) throw InvalidParameters("max_steps must be positive");
  if (!(max_step > 0)) throw InvalidParameters("max_step must be positive");
}

// --- dense output --------------------------------------------------------

std::size_t Trajectory::segment(double t) const {
  if (times.size() < 2) return 0;
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t i = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
  return std::min(i, times.size() - 2);
}

State Trajectory::state_at(double t) const {
  if (times.empty()) throw std::logic_error("empty trajectory");
  const double slack = 1e-12 * std::max({1.0, std::abs(times.front()), std::abs(times.back())});
  if (t < times.front() - slack || t > times.back() + slack)
    throw std::out_of_range("t outside the integrated span");
  if (times.size() == 1) return states.front();
  const std::size_t i = segment(t);
  const double h = times[i + 1] - times[i];
  const double s = (t - times[i]) / h;
  const double h00 = (2 * s - 3) * s * s + 1, h10 = ((s - 2) * s + 1) * s, h01 = (3 - 2 * s) * s * s,
               h11 = (s - 1) * s * s;
  State y(dimension);
  for (int d = 0; d < dimension; ++d)
    y[d] = h00 * states[i][d] + h10 * h * derivatives[i][d] + h01 * states[i + 1][d] + h11 * h * derivatives[i + 1][d];
  return y;
}

State Trajectory::derivative_at(double t) const {
  if (times.empty()) throw std::logic_error("empty trajectory");
  if (times.size() == 1) return derivatives.front();
  const std::size_t i = segment(t);
  const double h = times[i + 1] - times[i];
  const double s = (t - times[i]) / h;
  const double d00 = 6 * s * (s - 1) / h, d10 = (3 * s - 4) * s + 1, d01 = -d00, d11 = (3 * s - 2) * s;
  State y(dimension);
  for (int d = 0; d < dimension; ++d)
    y[d] = d00 * states[i][d] + d10 * derivatives[i][d] + d01 * states[i + 1][d] + d11 * derivatives[i + 1][d];
  return y;
}

double Trajectory::max_drift() const {
  double m = 0;
  for (const auto& d : drift) m = std::max(m, d.max_drift);
  return m;
}

CurveEvaluator Trajectory::dense() const {
  auto self = std::make_shared<const Trajectory>(*this);
  return [self](double t) { return self->state_at(t); };
}

// --- integrators ---------------------------------------------------------

namespace {

using Vec = std::vector<double>;

void axpy(Vec& out, const Vec& y, double h, std::initializer_list<std::pair<double, const Vec*>> terms) {
  for (std::size_t d = 0; d < y.size(); ++d) {
    double acc = 0;
    for (const auto& [c, k] : terms) acc += c * (*k)[d];
    out[d] = y[d] + h * acc;
  }
}

bool finite(const Vec& y) {
  return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

void project_sphere(Vec& y) {
  double n = 0;
  for (double v : y) n += v * v;
  n = std::sqrt(n);
  if (n > 0)
    for (double& v : y) v /= n;
}

class Recorder {
 public:
  Recorder(const SystemSpec& s, Trajectory& traj) : system_(s), traj_(traj) {
    traj_.dimension = s.n;
    for (const auto& q : s.conserved) traj_.quantity_names.push_back(q.name);
  }

  void push(double t, const Vec& y, const Vec& f) {
    traj_.times.push_back(t);
    traj_.states.push_back(y);
    traj_.derivatives.push_back(f);
    std::vector<double> row;
    for (const auto& q : system_.conserved) row.push_back(q.evaluate(y));
    if (traj_.quantity_values.empty()) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        const auto kind = system_.conserved[i].kind;
        const bool tracked = kind == ConservedQuantity::Kind::Constant ||
                             (kind == ConservedQuantity::Kind::Gauge && std::abs(row[i]) <= 1e-12);
        if (tracked) {
          tracked_.push_back(i);
          traj_.drift.push_back({system_.conserved[i].name, 0.0});
        }
      }
    } else {
      for (std::size_t k = 0; k < tracked_.size(); ++k) {
        const std::size_t i = tracked_[k];
        traj_.drift[k].max_drift = std::max(traj_.drift[k].max_drift, std::abs(row[i] - traj_.quantity_values[0][i]));
      }
    }
    traj_.quantity_values.push_back(std::move(row));
  }

 private:
  const SystemSpec& system_;
  Trajectory& traj_;
  std::vector<std::size_t> tracked_;
};

[[noreturn]] void fail(const std::string& why, Trajectory&& traj) {
  throw IncompleteIntegration(why, std::make_shared<const Trajectory>(std::move(traj)));
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;

}  // namespace

Trajectory integrate(const SystemSpec& system, const State& state0, const IntegratorConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(state0.size()) != system.n)
    throw DimensionMismatch("initial state needs " + std::to_string(system.n) + " components");
  if (!finite(state0)) throw InvalidParameters("initial state is not finite");
  for (const auto& c : system.constraints) {
    const double v = c.evaluate(state0);
    if (std::abs(v - c.required) > 1e-10) {
      std::ostringstream os;
      os.precision(17);
      os << "constraint " << c.name << " = " << v << " at t=0, required " << c.required;
      throw ConstraintViolation(os.str());
    }
  }

  Trajectory traj;
  Recorder rec(system, traj);
  const int n = system.n;
  const bool project = cfg.renormalize && system.cone;
  auto f = [&](const Vec& y, Vec& out) { system.rhs(y, out); };

  Vec y = state0, k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n);
  f(y, k1);
  rec.push(cfg.t0, y, k1);

  if (cfg.method == Method::Rk4Fixed) {
    const double span = cfg.t1 - cfg.t0;
    const long steps = std::max<long>(1, static_cast<long>(std::ceil(span / cfg.step - 1e-9)));
    if (steps > cfg.max_steps) fail("step budget exhausted before t=" + std::to_string(cfg.t1), std::move(traj));
    double t = cfg.t0;
    for (long i = 1; i <= steps; ++i) {
      const double tn = i == steps ? cfg.t1 : cfg.t0 + static_cast<double>(i) * cfg.step;
      const double h = tn - t;
      axpy(tmp, y, h / 2, {{1.0, &k1}});
      f(tmp, k2);
      axpy(tmp, y, h / 2, {{1.0, &k2}});
      f(tmp, k3);
      axpy(tmp, y, h, {{1.0, &k3}});
      f(tmp, k4);
      axpy(ynew, y, h / 6, {{1.0, &k1}, {2.0, &k2}, {2.0, &k3}, {1.0, &k4}});
      if (project) project_sphere(ynew);
      if (!finite(ynew)) fail("nonfinite state at t=" + std::to_string(tn), std::move(traj));
      y.swap(ynew);
      t = tn;
      f(y, k1);
      rec.push(t, y, k1);
    }
    return traj;
  }

  // Adaptive Dormand-Prince with PI step control.
  double t = cfg.t0;
  double h = std::min({cfg.step, cfg.max_step, cfg.t1 - cfg.t0});
  double err_prev = 1.0;
  long steps = 0;
  while (t < cfg.t1) {
    if (++steps > cfg.max_steps) fail("step budget exhausted at t=" + std::to_string(t), std::move(traj));
    const bool last = t + h >= cfg.t1;
    if (last) h = cfg.t1 - t;
    axpy(tmp, y, h, {{a21, &k1}});
    f(tmp, k2);
    axpy(tmp, y, h, {{a31, &k1}, {a32, &k2}});
    f(tmp, k3);
    axpy(tmp, y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}});
    f(tmp, k4);
    axpy(tmp, y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}});
    f(tmp, k5);
    axpy(tmp, y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
    f(tmp, k6);
    axpy(ynew, y, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
    f(ynew, k7);

    double err = 0;
    for (int d = 0; d < n; ++d) {
      const double e = h * (e1 * k1[d] + e3 * k3[d] + e4 * k4[d] + e5 * k5[d] + e6 * k6[d] + e7 * k7[d]);
      const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[d]), std::abs(ynew[d]));
      err += (e / sc) * (e / sc);
    }
    err = std::sqrt(err / n);
    if (!std::isfinite(err)) {
      if (!finite(ynew) && h < 1e-12 * std::max(1.0, std::abs(t)))
        fail("nonfinite state at t=" + std::to_string(t), std::move(traj));
      h *= 0.2;
      ++traj.rejected_steps;
      continue;
    }
    if (err <= 1.0) {
      t = last ? cfg.t1 : t + h;
      y.swap(ynew);
      if (project) {
        project_sphere(y);
        f(y, k1);
      } else {
        k1.swap(k7);
      }
      if (!finite(y)) fail("nonfinite state at t=" + std::to_string(t), std::move(traj));
      rec.push(t, y, k1);
      const double fac = err == 0 ? 5.0 : 0.9 * std::pow(err, -0.7 / 5) * std::pow(err_prev, 0.4 / 5);
      h *= std::clamp(fac, 0.2, 5.0);
      err_prev = std::max(err, 1e-4);
    } else {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      ++traj.rejected_steps;
    }
    h = std::min(h, cfg.max_step);
    if (h < 1e-14 * std::max(1.0, std::abs(t))) fail("step size underflow at t=" + std::to_string(t), std::move(traj));
  }
  return traj;
}

// --- periodicity -------------------------------------------------------------

namespace {

double dist(const State& a, const State& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double dist_slope(const Trajectory& traj, const State& y0, double t) {
  const State y = traj.state_at(t), dy = traj.derivative_at(t);
  double g = 0;
  for (std::size_t i = 0; i < y.size(); ++i) g += (y[i] - y0[i]) * dy[i];
  return g;
}

}  // namespace

double loop_error(const Trajectory& traj, double period, int samples) {
  const double room = traj.t_end() - period - traj.t_begin();
  if (!(room >= 0) || samples < 1) return std::numeric_limits<double>::quiet_NaN();
  double worst = 0;
  for (int k = 0; k < samples; ++k) {
    const double t = traj.t_begin() + (samples == 1 ? 0.0 : room * k / (samples - 1));
    worst = std::max(worst, dist(traj.state_at(t), traj.state_at(t + period)));
  }
  return worst;
}

PeriodicityResult detect_period(const Trajectory& traj, double closure_tol, double min_period) {
  PeriodicityResult out;
  const auto& ts = traj.times;
  if (ts.size() < 3) return out;
  const State& y0 = traj.states.front();
  const double t0 = ts.front();
  std::vector<double> d(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) d[i] = dist(traj.states[i], y0);

  for (std::size_t i = 1; i + 1 < ts.size(); ++i) {
    if (ts[i] - t0 < min_period) continue;
    if (!(d[i] <= d[i - 1] && d[i] <= d[i + 1])) continue;
    // Between steps the distance can dip by at most |y'| times the step.
    double speed = 0;
    for (double v : traj.derivatives[i]) speed += v * v;
    const double reach = std::sqrt(speed) * std::max(ts[i + 1] - ts[i], ts[i] - ts[i - 1]);
    if (d[i] > closure_tol + reach) continue;

    double a = ts[i - 1], b = ts[i + 1];
    double ga = dist_slope(traj, y0, a), gb = dist_slope(traj, y0, b);
    int it = 0;
    if (ga <= 0 && gb >= 0) {
      while (b - a > 1e-14 * std::max(1.0, std::abs(b)) && it < 200) {
        const double m = 0.5 * (a + b);
        (dist_slope(traj, y0, m) < 0 ? a : b) = m;
        ++it;
      }
    } else {
      // No sign change: golden-section search on the distance itself.
      const double g = (std::sqrt(5.0) - 1) / 2;
      double x1 = b - g * (b - a), x2 = a + g * (b - a);
      double f1 = dist(traj.state_at(x1), y0), f2 = dist(traj.state_at(x2), y0);
      while (b - a > 1e-12 * std::max(1.0, std::abs(b)) && it < 200) {
        if (f1 < f2) {
          b = x2, x2 = x1, f2 = f1, x1 = b - g * (b - a), f1 = dist(traj.state_at(x1), y0);
        } else {
          a = x1, x1 = x2, f1 = f2, x2 = a + g * (b - a), f2 = dist(traj.state_at(x2), y0);
        }
        ++it;
      }
    }
    const double T = 0.5 * (a + b);
    const double closure = dist(traj.state_at(T), y0);
    out.iterations += it;
    if (closure <= closure_tol && T - t0 >= min_period) {
      out.found = true;
      out.period = T - t0;
      out.closure_error = closure;
      out.loop_error = loop_error(traj, out.period);
      return out;
    }
  }
  return out;
}

// --- sweeps ------------------------------------------------------------------

SweepTable sweep(const SystemSpec& system, const std::vector<State>& grid, const SweepConfig& cfg, unsigned parallelism) {
  SweepTable table;
  std::vector<std::size_t> constant_idx;
  for (std::size_t i = 0; i < system.conserved.size(); ++i)
    if (system.conserved[i].kind == ConservedQuantity::Kind::Constant) {
      constant_idx.push_back(i);
      table.constant_names.push_back(system.conserved[i].name);
    }
  table.rows.resize(grid.size());
  const double min_period = cfg.min_period > 0 ? cfg.min_period : 10 * cfg.integrator.step;

  auto run = [&](std::size_t i) {
    SweepRow& row = table.rows[i];
    row.index = i;
    row.initial = grid[i];
    try {
      State y = grid[i];
      // y(t) -> -y(-t) maps A to -A, so the assoc cone sweep keeps A >= 0.
      if (system.name == "assoc-u1-cone" && (z_of(y, 1) * z_of(y, 2) * z_of(y, 3)).real() < 0)
        for (double& v : y) v = -v;
      const auto prep = prepare_initial_state(system, y, cfg.gauge_fix);
      row.initial = prep.state;
      for (auto k : constant_idx) row.constants.push_back(system.conserved[k].evaluate(prep.state));
      const Trajectory traj = integrate(system, prep.state, cfg.integrator);
      row.max_drift = traj.max_drift();
      if (cfg.detect) {
        const auto p = detect_period(traj, cfg.closure_tol, min_period);
        row.period_found = p.found;
        row.period = p.period;
        row.closure_error = p.closure_error;
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(parallelism, static_cast<unsigned>(grid.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) run(i);
    return table;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < grid.size(); i = next++) run(i);
    });
  for (auto& th : pool) th.join();
  return table;
}

std::vector<State> random_unit_states(int n, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<State> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    State y(n);
    double s = 0;
    do {
      s = 0;
      for (double& v : y) {
        v = normal(rng);
        s += v * v;
      }
    } while (s < 1e-12);
    for (double& v : y) v /= std::sqrt(s);
    out.push_back(std::move(y));
  }
  return out;
}

}  // namespace calib
