#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "calib/forms.hpp"
#include "calib/integrate.hpp"
#include "calib/parametrization.hpp"
#include "calib/systems.hpp"

namespace calib {

enum class FrameSource { Analytic, FiniteDifference };

struct FrameSample {
  std::vector<double> params;
  State point;
  OrientedFrame frame;
  FrameSource source = FrameSource::FiniteDifference;
};

struct FrameSet {
  std::vector<FrameSample> samples;
  /// Parameter values whose frame was degenerate; those samples are skipped.
  std::vector<std::vector<double>> degenerate;
};

/// Frame at one parameter value, or nullopt if degenerate. Analytic frames
/// are used when requested and available.
std::optional<FrameSample> frame_at(const Parametrization& p, std::span<const double> params, double fd_step,
                                    FrameSource source);

/// `count` parameter values drawn uniformly from p.domain (deterministic in
/// the seed). Central differences use `fd_step`.
FrameSet tangent_frames(const Parametrization& p, int count, std::uint64_t seed, double fd_step = 1e-5,
                        FrameSource source = FrameSource::FiniteDifference);

/// Normalized Gram determinant below which a frame counts as degenerate.
constexpr double kDegenerateFrame = 1e-12;

struct SampleFailure {
  std::vector<double> params;
  double value = 0;
};

struct CalibrationReport {
  std::string family;
  std::size_t samples = 0;
  std::size_t skipped = 0;
  double max_deviation = 0;  // max |ratio - 1| after the orientation choice
  bool orientation_flipped = false;
  std::vector<SampleFailure> failures;
  bool pass = false;
};

/// One global orientation flip is allowed (chosen by the median ratio sign).
CalibrationReport check_calibrated(const AlternatingForm& form, const FrameSet& frames, double tol,
                                   const std::string& family = "");

struct CoassociativeReport {
  std::string family;
  std::size_t samples = 0;
  std::size_t skipped = 0;
  double max_restriction = 0;  // max |phi0| on orthonormalized 3-subframes
  double max_deviation = 0;    // max |*phi0 ratio - 1|
  bool orientation_flipped = false;
  bool vanishing_pass = false;
  bool calibrated_pass = false;
  std::vector<SampleFailure> failures;
  bool pass = false;
};

CoassociativeReport check_coassociative(const FrameSet& frames, double tol, const std::string& family = "");

// --- parametrized families ------------------------------------------------

/// The submanifold swept out by the group orbit of an integrated trajectory,
/// for each of the five systems. Parameter order: (r, s, t) for assoc-u1-cone,
/// (p, q, t) for assoc-r-u1sq, (r, phi1, phi2, t) for coassoc-u1sq-cone,
/// (p1, p2, p3, t) for cayley-su2 and (r, p, q, t) for cayley-u1sq-cone.
/// Analytic frames come from the group generators and the system RHS.
Parametrization trajectory_family(const SystemSpec& system, const Trajectory& traj);

/// M_{u,v} with parameters (r, s, t); r sampled in [r_lo, r_hi].
Parametrization ruled_family(const RuledParams& params, double r_lo = 0.5, double r_hi = 2.0);

/// Coordinate plane (s, t, u, ...) -> (s, t, u, 0, ...).
Parametrization coordinate_plane(int n, int k);

// --- asymptotic rate -------------------------------------------------------

struct RateFit {
  std::vector<double> radii;
  std::vector<double> deviations;  // max over (s, t) samples at each radius
  std::vector<std::pair<double, double>> st_samples;
  std::vector<std::vector<double>> sample_deviations;  // [sample][radius]
  double exponent = std::numeric_limits<double>::quiet_NaN();
  double constant = std::numeric_limits<double>::quiet_NaN();
  double residual = std::numeric_limits<double>::quiet_NaN();
  bool exact_cone = false;
  bool unbounded = false;
};

/// Distance from `point` to the cone {rho phi(s', t')}, by Gauss-Newton over
/// (rho, s', t') started at (r, s + u/r, t + v/r).
double cone_distance(const RuledParams& params, const State& point, double r, double s, double t);

/// Fits d(r) ~ C r^alpha on log-log axes. (s, t) are drawn from
/// [0, 2 pi] x [0, period] (or [0, 1] when the period is unknown).
RateFit asymptotic_rate(const RuledParams& params, std::span<const double> radii, int st_samples,
                        std::uint64_t seed);

/// `count` radii evenly spaced in log r between lo and hi.
std::vector<double> log_radii(double lo, double hi, int count);

}  // namespace calib
