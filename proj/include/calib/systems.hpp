#pragma once

// The five symmetry-reduced ODE systems:
//   assoc-u1-cone      R+ x U(1)-invariant associative cones in R^7
//   assoc-r-u1sq       associative 3-folds invariant under a 2-dim subgroup of R x U(1)^2
//   coassoc-u1sq-cone  U(1)^2-invariant coassociative cones in R^7
//   cayley-su2         SU(2)-invariant Cayley 4-folds in R^8
//   cayley-u1sq-cone   U(1)^2-invariant Cayley cones in R^8
//
// State layout: R^7 = (x1, Re z1, Im z1, Re z2, Im z2, Re z3, Im z3) and
// R^8 = (Re z1, Im z1, ..., Re z4, Im z4).

#include <array>
#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "calib/parametrization.hpp"
#include "calib/symbolic.hpp"

namespace calib {

using cplx = std::complex<double>;

/// z_j (1-based) of a state in R^7 or R^8, and its setter.
cplx z_of(std::span<const double> y, int j);
void set_z(std::span<double> y, int j, cplx v);

inline const std::vector<std::string>& system_names() {
  static const std::vector<std::string> names = {"assoc-u1-cone", "assoc-r-u1sq", "coassoc-u1sq-cone", "cayley-su2",
                                                 "cayley-u1sq-cone"};
  return names;
}

struct ConservedQuantity {
  enum class Kind {
    Constant,            // value is constant along solutions
    MultipleOfU,         // obeys du/dt = 2 |z|^2 u
    MultipleOfUInverse,  // obeys du/dt = -2 |z|^2 u
    Gauge,               // zero once the residual symmetry is fixed, stays zero
  };
  std::string name;
  Kind kind = Kind::Constant;
  std::function<double(std::span<const double>)> evaluate;
  /// Polynomial over the action's variable space whose conservation law
  /// (d/dt q = 0, or the multiplier equation) certifies this quantity. It can
  /// differ from `evaluate` by a monotone function on the unit sphere.
  std::optional<Polynomial> certificate;
};

struct Constraint {
  std::string name;
  std::function<double(std::span<const double>)> evaluate;
  double required = 0;
};

struct SystemSpec {
  std::string name;
  int n = 0;
  std::vector<std::string> parameter_names;
  std::vector<Rational> parameters;
  /// Reduced flow dy/dt = rhs(y).
  std::function<void(std::span<const double>, std::span<double>)> rhs;
  /// Hand-coded right-hand side with symbolic parameters.
  PolyVectorField symbolic_rhs;
  std::vector<ConservedQuantity> conserved;
  std::vector<Constraint> constraints;
  /// Parameter identities of this system's parameter class, applied in order
  /// before symbolic conservation checks (e.g. alpha1 = -alpha2 - alpha3).
  std::vector<std::pair<int, Polynomial>> relations;
  /// Dilation-invariant family; states are normalized to the unit sphere.
  bool cone = false;
  /// assoc-u1-cone with alpha2 == alpha3: residual U(1) gauge Im z1 = 0 applies.
  bool gauge_u1 = false;

  State derivative(std::span<const double> y) const;
  double parameter(const std::string& name) const;
  /// State followed by numeric parameter values, for symbolic evaluation.
  std::vector<double> variable_point(std::span<const double> y) const;
};

/// Validates parameters, builds the system and checks its hand-coded
/// right-hand side against derive_rhs. Throws InvalidParameters.
SystemSpec make_system(const std::string& name, const std::map<std::string, Rational>& parameters = {});

/// Hand-coded symbolic right-hand side over builtin_action(name)'s variables.
PolyVectorField hand_coded_rhs(const std::string& name);

struct InitialStateReport {
  State state;
  bool projected = false;
  bool gauge_fixed = false;
  double original_norm = 0;
};

/// Projects cone states to the unit sphere and, if requested and applicable,
/// rotates by the residual U(1) so that Im z1 = 0 and Re z1 >= 0.
InitialStateReport prepare_initial_state(const SystemSpec& system, State state, bool gauge_fix);

/// Largest violation among the system constraints.
double constraint_violation(const SystemSpec& system, std::span<const double> y);

// --- assoc-u1-cone special structure -----------------------------------

struct ARangeResult {
  double analytic = 0;    // 1/(3 sqrt 3)
  double numeric = 0;     // constrained maximization of r1 r2 r3
  std::array<double, 3> radii{};  // numerical maximizer
  State state;            // x1 = 0, z_j = r_j (theta = 0)
  int iterations = 0;
};

ARangeResult a_range_extremum();

/// x1 = 0, z_j = exp(i (beta_j t / sqrt 3 + gamma_j)) / sqrt 3.
State special_solution_max_A(const std::array<double, 3>& beta, const std::array<double, 3>& gamma, double t);

/// beta_j = alpha_{j+1} - alpha_{j+2} (indices mod 3).
std::array<double, 3> betas(const SystemSpec& assoc_cone);

struct PolarView {
  double x1 = 0;
  std::array<double, 3> r{}, theta{}, dr{}, dtheta{};
  double theta_sum = 0;
  double A = 0;
};

/// Polar coordinates z_j = r_j e^{i theta_j} and their rates under the
/// Cartesian flow; singular where some r_j = 0.
PolarView polar_view(const SystemSpec& assoc_cone, std::span<const double> y);

// --- assoc-r-u1sq closed forms ------------------------------------------

struct TrivialCaseConstants {
  // lambda-zero
  double mu = 0, nu = 0;
  std::array<cplx, 3> amplitudes{};
  // mu-nu-zero
  double x = 0, A = 0, B = 0, C = 0;
};

/// "lambda-zero": parameters (c, p, t), phases (phi1, phi2) = p (nu, -mu).
/// "mu-nu-zero": parameters (rho, phi1, phi2) with |z3|^2 = rho.
/// Throws InvalidParameters for inadmissible constants.
Parametrization closed_form_trivial(const std::string& name, const TrivialCaseConstants& k);

// --- cayley-su2 level sets ------------------------------------------------

struct CayleyLevelSet {
  double A = 0, B = 0, C = 0, D = 0;
};

CayleyLevelSet cayley_level_constants(std::span<const double> y);
/// Q from its moment-map expression and from its invariant expression.
std::pair<double, double> cayley_q_both(std::span<const double> y);

// --- ruled associative 3-folds ------------------------------------------

/// Harmonic conjugate pair (u, v) of functions of (s, t).
struct HarmonicPair {
  std::string name;
  std::function<double(double, double)> u;
  std::function<double(double, double)> v;
  bool zero = false;
};

/// Builtin catalog: "zero", "constant", "linear", "exp", "cos-cosh".
/// `scale` multiplies both functions; `c1`, `c2` are used by "constant".
HarmonicPair harmonic_pair(const std::string& name, double scale = 1.0, double c1 = 0.0, double c2 = 0.0);
HarmonicPair harmonic_pair_from(std::function<double(double, double)> u, std::function<double(double, double)> v);

/// max |u_s - v_t| + |u_t + v_s| over the sample points (central differences).
double cauchy_riemann_residual(const HarmonicPair& pair, std::span<const std::pair<double, double>> points,
                               double h = 1e-4);

struct RuledParams {
  SystemSpec system;  // assoc-u1-cone with alpha = (2, -1, -1)
  CurveEvaluator base;
  HarmonicPair pair;
  double period = 0;  // of the base curve, when known
};

/// Checks the weight type and the Cauchy-Riemann equations; throws
/// InvalidParameters otherwise.
RuledParams make_ruled_params(SystemSpec system, CurveEvaluator base, HarmonicPair pair, double period = 0);

/// Cone direction phi(s, t) = (x1, e^{2is} z1, e^{-is} z2, e^{-is} z3).
State ruled_direction(const RuledParams& params, double s, double t);
State ruled_point(const RuledParams& params, double r, double s, double t);

}  // namespace calib
