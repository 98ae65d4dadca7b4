#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "calib/errors.hpp"
#include "calib/systems.hpp"

namespace calib {

enum class Method { Rk4Fixed, Rk45Adaptive };

Method method_from_string(const std::string& s);
std::string to_string(Method m);

struct IntegratorConfig {
  Method method = Method::Rk45Adaptive;
  double step = 1e-3;  // fixed step, or initial step for the adaptive pair
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  double t0 = 0;
  double t1 = 10;
  long max_steps = 10'000'000;
  double max_step = std::numeric_limits<double>::infinity();
  bool renormalize = false;

  /// Throws InvalidParameters on nonpositive steps/tolerances or a bad span.
  void validate() const;
};

struct DriftRecord {
  std::string name;
  double max_drift = 0;
};

class Trajectory {
 public:
  int dimension = 0;
  std::vector<double> times;
  std::vector<State> states;
  std::vector<State> derivatives;
  /// Names and per-step values of all conserved quantities (columns of the CSV).
  std::vector<std::string> quantity_names;
  std::vector<std::vector<double>> quantity_values;
  /// max |q(t) - q(0)| for kind=constant quantities (and gauge ones held at 0).
  std::vector<DriftRecord> drift;
  long rejected_steps = 0;

  double t_begin() const { return times.front(); }
  double t_end() const { return times.back(); }
  /// Cubic Hermite interpolation between accepted steps.
  State state_at(double t) const;
  State derivative_at(double t) const;
  double max_drift() const;
  CurveEvaluator dense() const;

 private:
  std::size_t segment(double t) const;
};

/// Integration stopped early; carries what was computed.
class IncompleteIntegration : public IntegrationFailure {
 public:
  IncompleteIntegration(const std::string& what, std::shared_ptr<const Trajectory> partial)
      : IntegrationFailure(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return *partial_; }

 private:
  std::shared_ptr<const Trajectory> partial_;
};

/// Pre: state0 satisfies the system constraints within 1e-10 (throws
/// ConstraintViolation otherwise). Throws IncompleteIntegration on step
/// exhaustion or a nonfinite state.
Trajectory integrate(const SystemSpec& system, const State& state0, const IntegratorConfig& config);

struct PeriodicityResult {
  bool found = false;
  double period = 0;
  double closure_error = 0;
  int iterations = 0;
  /// Max over sampled t of |state(t + T) - state(t)|; NaN if not checked.
  double loop_error = std::numeric_limits<double>::quiet_NaN();
};

/// First T >= min_period with |state(T) - state(0)| <= closure_tol. Local
/// minima of the distance are located on the accepted steps and refined by
/// bisection on the derivative of the squared distance.
PeriodicityResult detect_period(const Trajectory& traj, double closure_tol, double min_period);

/// Max |state(t + T) - state(t)| over `samples` evenly spread t.
double loop_error(const Trajectory& traj, double period, int samples = 10);

struct SweepConfig {
  IntegratorConfig integrator;
  bool gauge_fix = true;
  bool detect = true;
  double closure_tol = 1e-6;
  double min_period = 0;  // 0 means 10x the initial step
};

struct SweepRow {
  std::size_t index = 0;
  State initial;
  std::vector<double> constants;  // kind=constant quantities at t=0, in system order
  bool period_found = false;
  double period = 0;
  double closure_error = 0;
  double max_drift = 0;
  std::string error;
};

struct SweepTable {
  std::vector<std::string> constant_names;
  std::vector<SweepRow> rows;
};

/// Integrates every grid point; rows come back in grid order whatever the
/// parallelism. Failures are recorded in the row. assoc-u1-cone states with
/// Re(z1z2z3) < 0 are negated first, so every row has A >= 0.
SweepTable sweep(const SystemSpec& system, const std::vector<State>& grid, const SweepConfig& config,
                 unsigned parallelism);

/// Uniform random unit states for a sweep, deterministic in the seed.
std::vector<State> random_unit_states(int n, std::size_t count, std::uint64_t seed);

}  // namespace calib
