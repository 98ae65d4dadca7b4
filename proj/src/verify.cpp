#include "calib/verify.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace calib {

namespace {

constexpr double kPi = std::numbers::pi;
const cplx I(0, 1);

double norm(const State& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

State scaled(State v, double c) {
  for (double& x : v) x *= c;
  return v;
}

// Gram determinant of the normalized vectors; 0 if any vector vanishes.
double normalized_gram(const OrientedFrame& f) {
  const int k = f.size();
  Eigen::MatrixXd m(f.n, k);
  for (int j = 0; j < k; ++j) {
    const double nj = norm(f.vectors[j]);
    if (!(nj > 0) || !std::isfinite(nj)) return 0;
    for (int i = 0; i < f.n; ++i) m(i, j) = f.vectors[j][i] / nj;
  }
  return (m.transpose() * m).determinant();
}

OrientedFrame fd_frame(const Parametrization& p, std::span<const double> q, double h) {
  std::vector<double> a(q.begin(), q.end());
  std::vector<State> vs;
  for (int i = 0; i < p.k; ++i) {
    a[i] = q[i] + h;
    const State plus = p.point(a);
    a[i] = q[i] - h;
    const State minus = p.point(a);
    a[i] = q[i];
    State d(p.n);
    for (int j = 0; j < p.n; ++j) d[j] = (plus[j] - minus[j]) / (2 * h);
    vs.push_back(std::move(d));
  }
  return OrientedFrame(p.n, std::move(vs));
}

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

// Orientation-preserving Gram-Schmidt.
OrientedFrame orthonormalize(const OrientedFrame& f) {
  std::vector<State> out;
  for (const auto& v : f.vectors) {
    State w = v;
    for (const auto& e : out) {
      double dot = 0;
      for (int i = 0; i < f.n; ++i) dot += w[i] * e[i];
      for (int i = 0; i < f.n; ++i) w[i] -= dot * e[i];
    }
    const double nw = norm(w);
    if (!(nw > 0)) throw DegenerateFrame("frame vectors are dependent");
    out.push_back(scaled(std::move(w), 1.0 / nw));
  }
  return OrientedFrame(f.n, std::move(out));
}

// Tangent of the rotation z_j -> e^{i w_j s} z_j at y.
State rotation_tangent(const State& y, std::span<const double> weights) {
  State out(y.size(), 0.0);
  for (std::size_t j = 0; j < weights.size(); ++j) set_z(out, j + 1, I * weights[j] * z_of(y, j + 1));
  return out;
}

State rotate(State y, std::span<const double> angles) {
  for (std::size_t j = 0; j < angles.size(); ++j) set_z(y, j + 1, std::polar(1.0, angles[j]) * z_of(y, j + 1));
  return y;
}

// Orthonormal b1, b2 spanning the plane orthogonal to w in R^3 with b1 x b2 = w/|w|.
std::pair<Eigen::Vector3d, Eigen::Vector3d> plane_basis(const Eigen::Vector3d& w) {
  Eigen::Index axis;
  w.cwiseAbs().minCoeff(&axis);
  Eigen::Vector3d e = Eigen::Vector3d::Zero();
  e[axis] = 1;
  const Eigen::Vector3d b1 = e.cross(w).normalized();
  const Eigen::Vector3d b2 = w.cross(b1).normalized();
  return {b1, b2};
}

std::pair<double, double> t_domain(const Trajectory& traj) {
  const double margin = 1e-3 * (traj.t_end() - traj.t_begin());
  return {traj.t_begin() + margin, traj.t_end() - margin};
}

Parametrization assoc_cone_family(const SystemSpec& sys, const Trajectory& traj) {
  const std::array<double, 3> al{sys.parameter("alpha1"), sys.parameter("alpha2"), sys.parameter("alpha3")};
  auto dense = std::make_shared<const Trajectory>(traj);
  Parametrization p;
  p.family = sys.name;
  p.k = 3;
  p.n = 7;
  p.point = [=](std::span<const double> q) {
    const std::array<double, 3> ang{al[0] * q[1], al[1] * q[1], al[2] * q[1]};
    return scaled(rotate(dense->state_at(q[2]), ang), q[0]);
  };
  p.analytic_frame = [=](std::span<const double> q) {
    const double r = q[0];
    const std::array<double, 3> ang{al[0] * q[1], al[1] * q[1], al[2] * q[1]};
    const State y = dense->state_at(q[2]);
    const State P = scaled(rotate(y, ang), r);
    return OrientedFrame(7, {scaled(P, 1.0 / r), rotation_tangent(P, al), scaled(rotate(sys.derivative(y), ang), r)});
  };
  p.domain = {{0.5, 2.0}, {0, 2 * kPi}, t_domain(traj)};
  return p;
}

Parametrization assoc_r_u1sq_family(const SystemSpec& sys, const Trajectory& traj) {
  const Eigen::Vector3d w(sys.parameter("lambda"), sys.parameter("mu"), sys.parameter("nu"));
  const auto [b1, b2] = plane_basis(w);
  auto dense = std::make_shared<const Trajectory>(traj);
  // Group element (c, phi1, phi2) acts by translation of x1 and phases (phi1, phi2, -phi1-phi2).
  auto act = [](State y, const Eigen::Vector3d& g) {
    y[0] += g[0];
    const std::array<double, 3> ang{g[1], g[2], -g[1] - g[2]};
    return rotate(std::move(y), ang);
  };
  auto orbit_tangent = [](const State& P, const Eigen::Vector3d& b) {
    const std::array<double, 3> wts{b[1], b[2], -b[1] - b[2]};
    State v = rotation_tangent(P, wts);
    v[0] += b[0];
    return v;
  };
  Parametrization p;
  p.family = sys.name;
  p.k = 3;
  p.n = 7;
  p.point = [=](std::span<const double> q) { return act(dense->state_at(q[2]), q[0] * b1 + q[1] * b2); };
  p.analytic_frame = [=](std::span<const double> q) {
    const Eigen::Vector3d g = q[0] * b1 + q[1] * b2;
    const State y = dense->state_at(q[2]);
    const State P = act(y, g);
    State flow = sys.derivative(y);
    flow = rotate(flow, std::array<double, 3>{g[1], g[2], -g[1] - g[2]});
    return OrientedFrame(7, {orbit_tangent(P, b1), orbit_tangent(P, b2), flow});
  };
  p.domain = {{-1, 1}, {-1, 1}, t_domain(traj)};
  return p;
}

Parametrization coassoc_family(const SystemSpec& sys, const Trajectory& traj) {
  auto dense = std::make_shared<const Trajectory>(traj);
  Parametrization p;
  p.family = sys.name;
  p.k = 4;
  p.n = 7;
  p.point = [=](std::span<const double> q) {
    const std::array<double, 3> ang{q[1], q[2], -q[1] - q[2]};
    return scaled(rotate(dense->state_at(q[3]), ang), q[0]);
  };
  p.analytic_frame = [=](std::span<const double> q) {
    const double r = q[0];
    const std::array<double, 3> ang{q[1], q[2], -q[1] - q[2]};
    const State y = dense->state_at(q[3]);
    const State P = scaled(rotate(y, ang), r);
    const std::array<double, 3> w1{1, 0, -1}, w2{0, 1, -1};
    return OrientedFrame(7, {scaled(P, 1.0 / r), rotation_tangent(P, w1), rotation_tangent(P, w2),
                             scaled(rotate(sys.derivative(y), ang), r)});
  };
  p.domain = {{0.5, 2.0}, {0, 2 * kPi}, {0, 2 * kPi}, t_domain(traj)};
  return p;
}

// Real 8x8 matrices of the SU(2) generators, read off the linear action fields.
std::array<Eigen::Matrix<double, 8, 8>, 3> su2_matrices() {
  const ActionSpec a = cayley_su2_action();
  std::array<Eigen::Matrix<double, 8, 8>, 3> out;
  for (int g = 0; g < 3; ++g)
    for (int j = 0; j < 8; ++j) {
      std::vector<double> e(8, 0.0);
      e[j] = 1;
      const auto col = a.generators[g].eval(e);
      for (int i = 0; i < 8; ++i) out[g](i, j) = col[i];
    }
  return out;
}

Parametrization cayley_su2_family(const SystemSpec& sys, const Trajectory& traj) {
  auto dense = std::make_shared<const Trajectory>(traj);
  const auto U = su2_matrices();
  // exp(p.U) = cos|p| + sin|p|/|p| p.U, since (p.U)^2 = -|p|^2.
  auto group = [U](std::span<const double> q) {
    const double th = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
    const Eigen::Matrix<double, 8, 8> gen = q[0] * U[0] + q[1] * U[1] + q[2] * U[2];
    const double sinc = th == 0 ? 1.0 : std::sin(th) / th;
    return Eigen::Matrix<double, 8, 8>(std::cos(th) * Eigen::Matrix<double, 8, 8>::Identity() + sinc * gen);
  };
  auto apply = [](const Eigen::Matrix<double, 8, 8>& m, const State& y) {
    const Eigen::Map<const Eigen::Matrix<double, 8, 1>> v(y.data());
    const Eigen::Matrix<double, 8, 1> r = m * v;
    return State(r.data(), r.data() + 8);
  };
  Parametrization p;
  p.family = sys.name;
  p.k = 4;
  p.n = 8;
  p.point = [=](std::span<const double> q) { return apply(group(q), dense->state_at(q[3])); };
  p.analytic_frame = [=](std::span<const double> q) {
    const auto X = group(q);
    const State y = dense->state_at(q[3]);
    const State P = apply(X, y);
    return OrientedFrame(8, {apply(U[0], P), apply(U[1], P), apply(U[2], P), apply(X, sys.derivative(y))});
  };
  p.domain = {{-0.5, 0.5}, {-0.5, 0.5}, {-0.5, 0.5}, t_domain(traj)};
  return p;
}

Parametrization cayley_cone_family(const SystemSpec& sys, const Trajectory& traj) {
  Eigen::Vector4d ones = Eigen::Vector4d::Ones(), a;
  for (int j = 0; j < 4; ++j) a[j] = sys.parameter("a" + std::to_string(j + 1));
  // Orthonormal basis of the Lie algebra {theta : sum theta_j = 0, sum a_j theta_j = 0}.
  Eigen::Matrix<double, 4, 2> span_pa;
  span_pa << ones, a;
  Eigen::HouseholderQR<Eigen::Matrix4d> qr(Eigen::Matrix4d(Eigen::Matrix4d::Identity()));
  Eigen::Matrix4d full = Eigen::Matrix4d::Identity();
  full.leftCols<2>() = span_pa;
  qr.compute(full);
  const Eigen::Matrix4d Q = qr.householderQ();
  Eigen::Vector4d b1 = Q.col(2), b2 = Q.col(3);
  Eigen::Matrix4d orient;
  orient << ones, a, b1, b2;
  // The reduced flow is contracted against -(1/4) * (p ^ a)-dual; choose the
  // basis orientation that makes the frame (r, p, q, t) calibrated positively.
  if (orient.determinant() > 0) b2 = -b2;
  auto dense = std::make_shared<const Trajectory>(traj);
  auto angles = [=](std::span<const double> q) {
    const Eigen::Vector4d th = q[1] * b1 + q[2] * b2;
    return std::array<double, 4>{th[0], th[1], th[2], th[3]};
  };
  Parametrization p;
  p.family = sys.name;
  p.k = 4;
  p.n = 8;
  p.point = [=](std::span<const double> q) { return scaled(rotate(dense->state_at(q[3]), angles(q)), q[0]); };
  p.analytic_frame = [=](std::span<const double> q) {
    const double r = q[0];
    const State y = dense->state_at(q[3]);
    const auto ang = angles(q);
    const State P = scaled(rotate(y, ang), r);
    const std::array<double, 4> w1{b1[0], b1[1], b1[2], b1[3]}, w2{b2[0], b2[1], b2[2], b2[3]};
    return OrientedFrame(8, {scaled(P, 1.0 / r), rotation_tangent(P, w1), rotation_tangent(P, w2),
                             scaled(rotate(sys.derivative(y), ang), r)});
  };
  p.domain = {{0.5, 2.0}, {0, 2 * kPi}, {0, 2 * kPi}, t_domain(traj)};
  return p;
}

}  // namespace

std::optional<FrameSample> frame_at(const Parametrization& p, std::span<const double> params, double fd_step,
                                    FrameSource source) {
  if (static_cast<int>(params.size()) != p.k) throw DimensionMismatch("parameter tuple has the wrong length");
  FrameSample s;
  s.params.assign(params.begin(), params.end());
  try {
    s.point = p.point(params);
    if (source == FrameSource::Analytic && p.analytic_frame) {
      s.frame = p.analytic_frame(params);
      s.source = FrameSource::Analytic;
    } else {
      s.frame = fd_frame(p, params, fd_step);
      s.source = FrameSource::FiniteDifference;
    }
  } catch (const InvalidParameters&) {
    return std::nullopt;
  }
  for (const auto& v : s.frame.vectors)
    for (double x : v)
      if (!std::isfinite(x)) return std::nullopt;
  if (normalized_gram(s.frame) < kDegenerateFrame) return std::nullopt;
  return s;
}

FrameSet tangent_frames(const Parametrization& p, int count, std::uint64_t seed, double fd_step, FrameSource source) {
  if (count < 1) throw std::invalid_argument("sample count must be at least 1");
  if (static_cast<int>(p.domain.size()) != p.k) throw DimensionMismatch("parametrization domain has the wrong length");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  FrameSet out;
  for (int i = 0; i < count; ++i) {
    std::vector<double> q(p.k);
    for (int j = 0; j < p.k; ++j) q[j] = p.domain[j].first + unit(rng) * (p.domain[j].second - p.domain[j].first);
    if (auto s = frame_at(p, q, fd_step, source))
      out.samples.push_back(std::move(*s));
    else
      out.degenerate.push_back(std::move(q));
  }
  return out;
}

CalibrationReport check_calibrated(const AlternatingForm& form, const FrameSet& frames, double tol,
                                   const std::string& family) {
  CalibrationReport rep;
  rep.family = family;
  rep.skipped = frames.degenerate.size();
  std::vector<double> ratios;
  std::vector<const FrameSample*> used;
  for (const auto& s : frames.samples) {
    if (s.frame.size() != form.degree()) throw ArityMismatch("form degree differs from frame size");
    try {
      ratios.push_back(calibration_ratio(form, s.frame));
      used.push_back(&s);
    } catch (const DegenerateFrame&) {
      ++rep.skipped;
    }
  }
  rep.samples = ratios.size();
  if (ratios.empty()) return rep;
  rep.orientation_flipped = median(ratios) < 0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double r = rep.orientation_flipped ? -ratios[i] : ratios[i];
    const double dev = std::abs(r - 1.0);
    rep.max_deviation = std::max(rep.max_deviation, dev);
    if (!(dev <= tol)) rep.failures.push_back({used[i]->params, r});
  }
  rep.pass = rep.failures.empty();
  return rep;
}

CoassociativeReport check_coassociative(const FrameSet& frames, double tol, const std::string& family) {
  CoassociativeReport rep;
  rep.family = family;
  rep.skipped = frames.degenerate.size();
  const AlternatingForm phi = g2_form(), star = g2_star_form();
  std::vector<double> ratios;
  std::vector<double> restriction;
  std::vector<const FrameSample*> used;
  for (const auto& s : frames.samples) {
    if (s.frame.size() != 4 || s.frame.n != 7) throw ArityMismatch("coassociative check needs 4-frames in R^7");
    OrientedFrame e;
    try {
      e = orthonormalize(s.frame);
      ratios.push_back(calibration_ratio(star, s.frame));
    } catch (const DegenerateFrame&) {
      ++rep.skipped;
      continue;
    }
    double worst = 0;
    for (int drop = 0; drop < 4; ++drop) {
      std::vector<State> sub;
      for (int i = 0; i < 4; ++i)
        if (i != drop) sub.push_back(e.vectors[i]);
      worst = std::max(worst, std::abs(evaluate(phi, OrientedFrame(7, sub))));
    }
    restriction.push_back(worst);
    used.push_back(&s);
  }
  rep.samples = ratios.size();
  if (ratios.empty()) return rep;
  rep.orientation_flipped = median(ratios) < 0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double r = rep.orientation_flipped ? -ratios[i] : ratios[i];
    const double dev = std::abs(r - 1.0);
    rep.max_deviation = std::max(rep.max_deviation, dev);
    rep.max_restriction = std::max(rep.max_restriction, restriction[i]);
    if (!(dev <= tol) || !(restriction[i] <= tol)) rep.failures.push_back({used[i]->params, std::max(dev, restriction[i])});
  }
  rep.vanishing_pass = rep.max_restriction <= tol;
  rep.calibrated_pass = rep.max_deviation <= tol;
  rep.pass = rep.vanishing_pass && rep.calibrated_pass;
  return rep;
}

Parametrization trajectory_family(const SystemSpec& system, const Trajectory& traj) {
  if (traj.times.size() < 2) throw std::invalid_argument("trajectory has fewer than two points");
  if (system.name == "assoc-u1-cone") return assoc_cone_family(system, traj);
  if (system.name == "assoc-r-u1sq") return assoc_r_u1sq_family(system, traj);
  if (system.name == "coassoc-u1sq-cone") return coassoc_family(system, traj);
  if (system.name == "cayley-su2") return cayley_su2_family(system, traj);
  return cayley_cone_family(system, traj);
}

Parametrization ruled_family(const RuledParams& params, double r_lo, double r_hi) {
  Parametrization p;
  p.family = "ruled/" + params.pair.name;
  p.k = 3;
  p.n = 7;
  p.point = [params](std::span<const double> q) { return ruled_point(params, q[0], q[1], q[2]); };
  p.domain = {{r_lo, r_hi}, {0, 2 * kPi}, {0, params.period > 0 ? params.period : 1.0}};
  return p;
}

Parametrization coordinate_plane(int n, int k) {
  if (k < 1 || k > n) throw std::invalid_argument("plane dimension out of range");
  Parametrization p;
  p.family = "coordinate-plane";
  p.k = k;
  p.n = n;
  p.point = [n, k](std::span<const double> q) {
    State y(n, 0.0);
    for (int i = 0; i < k; ++i) y[i] = q[i];
    return y;
  };
  p.analytic_frame = [n, k](std::span<const double>) {
    std::vector<State> vs;
    for (int i = 0; i < k; ++i) {
      State e(n, 0.0);
      e[i] = 1;
      vs.push_back(std::move(e));
    }
    return OrientedFrame(n, std::move(vs));
  };
  p.domain.assign(k, {-1.0, 1.0});
  return p;
}

// --- asymptotic rate ----------------------------------------------------------

double cone_distance(const RuledParams& params, const State& point, double r, double s, double t) {
  const std::array<double, 3> weights{2, -1, -1};
  double rho = r;
  double sp = s + params.pair.u(s, t) / r;
  double tp = t + params.pair.v(s, t) / r;
  // t' wraps with a known period; otherwise it must stay on the base curve
  auto wrap = [&](double tt) { return params.period > 0 ? tt - params.period * std::floor(tt / params.period) : tt; };
  auto residual = [&](double rr, double ss, double tt) -> std::optional<State> {
    State d;
    try {
      d = ruled_direction(params, ss, wrap(tt));
    } catch (const std::out_of_range&) {
      return std::nullopt;
    }
    for (int i = 0; i < 7; ++i) d[i] = point[i] - rr * d[i];
    return d;
  };
  if (!residual(rho, sp, tp)) tp = t;
  State res = *residual(rho, sp, tp);
  double best = norm(res);
  for (int it = 0; it < 50 && best > 0; ++it) {
    const State phi = ruled_direction(params, sp, wrap(tp));
    const State phi_s = rotation_tangent(phi, weights);
    const std::array<double, 3> ang{2 * sp, -sp, -sp};
    const State phi_t = rotate(params.system.derivative(params.base(wrap(tp))), ang);
    Eigen::Matrix<double, 7, 3> J;
    Eigen::Matrix<double, 7, 1> R;
    for (int i = 0; i < 7; ++i) {
      J(i, 0) = phi[i];
      J(i, 1) = rho * phi_s[i];
      J(i, 2) = rho * phi_t[i];
      R(i) = res[i];
    }
    const Eigen::Vector3d step = J.colPivHouseholderQr().solve(R);
    double lam = 1.0;
    bool improved = false;
    for (int k = 0; k < 30; ++k, lam *= 0.5) {
      const auto trial = residual(rho + lam * step[0], sp + lam * step[1], tp + lam * step[2]);
      if (!trial) continue;
      const double nt = norm(*trial);
      if (nt < best) {
        rho += lam * step[0];
        sp += lam * step[1];
        tp += lam * step[2];
        res = *trial;
        improved = best - nt > 1e-15 * best;
        best = nt;
        break;
      }
    }
    if (!improved) break;
  }
  return best;
}

std::vector<double> log_radii(double lo, double hi, int count) {
  if (!(lo > 0) || !(hi > lo) || count < 2) throw std::invalid_argument("need 0 < lo < hi and at least two radii");
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
  return out;
}

RateFit asymptotic_rate(const RuledParams& params, std::span<const double> radii, int st_samples, std::uint64_t seed) {
  if (radii.size() < 2) throw std::invalid_argument("need at least two radii");
  if (!std::is_sorted(radii.begin(), radii.end()) || !(radii.front() > 0))
    throw std::invalid_argument("radii must be positive and increasing");
  RateFit fit;
  fit.radii.assign(radii.begin(), radii.end());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double t_hi = params.period > 0 ? params.period : 1.0;
  for (int i = 0; i < st_samples; ++i) fit.st_samples.emplace_back(2 * kPi * unit(rng), t_hi * unit(rng));

  fit.deviations.assign(radii.size(), 0.0);
  for (const auto& [s, t] : fit.st_samples) {
    std::vector<double> row;
    for (std::size_t k = 0; k < radii.size(); ++k) {
      const double r = radii[k];
      const double d = params.pair.zero ? 0.0 : cone_distance(params, ruled_point(params, r, s, t), r, s, t);
      row.push_back(d);
      if (!std::isfinite(d) || d > r) fit.unbounded = true;
      fit.deviations[k] = std::max(fit.deviations[k], d);
    }
    fit.sample_deviations.push_back(std::move(row));
  }
  if (fit.unbounded) return fit;
  fit.exact_cone = params.pair.zero ||
                   std::all_of(fit.deviations.begin(), fit.deviations.end(), [&](double d) { return d == 0; });
  if (fit.exact_cone) return fit;

  const std::size_t m = radii.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const double x = std::log(radii[k]), y = std::log(fit.deviations[k]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  fit.exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double intercept = (sy - fit.exponent * sx) / m;
  fit.constant = std::exp(intercept);
  double ss = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const double e = std::log(fit.deviations[k]) - (intercept + fit.exponent * std::log(radii[k]));
    ss += e * e;
  }
  fit.residual = std::sqrt(ss / m);
  return fit;
}

}  // namespace calib
