#include "calib/io.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

namespace calib {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw InvalidParameters("config: " + what); }

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) bad(where + " must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) bad("unknown key '" + k + "' in " + where);
}

double number(const json& j, const std::string& what) {
  if (!j.is_number()) bad(what + " must be a number");
  return j.get<double>();
}

State state_from(const json& j, const std::string& what) {
  if (!j.is_array()) bad(what + " must be an array of numbers");
  State y;
  for (const auto& v : j) y.push_back(number(v, what));
  return y;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

json failures_json(const std::vector<SampleFailure>& fs) {
  json arr = json::array();
  for (const auto& f : fs) arr.push_back({{"params", f.params}, {"value", f.value}});
  return arr;
}

}  // namespace

Rational rational_from_json(const json& j, const std::string& what) {
  if (j.is_number_integer()) return Rational(j.get<long>());
  if (j.is_number_float()) {
    const double d = j.get<double>();
    if (!std::isfinite(d)) bad(what + " is not finite");
    return Rational(d);
  }
  if (j.is_string()) {
    try {
      return parse_rational(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
      bad(what + ": " + e.what());
    }
  }
  bad(what + " must be a number or a \"p/q\" string");
}

RunConfig parse_config(const json& j) {
  try {
    only_keys(j, "config", {"system", "parameters", "initial_state", "gauge_fix", "integrator", "period", "sweep",
                            "verify", "export"});
    RunConfig c;
    if (!j.contains("system") || !j.at("system").is_string()) bad("'system' must name a system");
    c.system = j.at("system").get<std::string>();
    if (j.contains("parameters")) {
      if (!j.at("parameters").is_object()) bad("parameters must be an object");
      for (const auto& [k, v] : j.at("parameters").items()) c.parameters[k] = rational_from_json(v, "parameter " + k);
    }
    maybe(j, "gauge_fix", c.gauge_fix);

    if (j.contains("integrator")) {
      const auto& g = j.at("integrator");
      only_keys(g, "integrator",
                {"method", "step", "abs_tol", "rel_tol", "t_span", "max_steps", "max_step", "renormalize"});
      if (g.contains("method")) c.integrator.method = method_from_string(g.at("method").get<std::string>());
      if (g.contains("step")) c.integrator.step = number(g.at("step"), "integrator.step");
      if (g.contains("abs_tol")) c.integrator.abs_tol = number(g.at("abs_tol"), "integrator.abs_tol");
      if (g.contains("rel_tol")) c.integrator.rel_tol = number(g.at("rel_tol"), "integrator.rel_tol");
      if (g.contains("max_step")) c.integrator.max_step = number(g.at("max_step"), "integrator.max_step");
      maybe(g, "max_steps", c.integrator.max_steps);
      maybe(g, "renormalize", c.integrator.renormalize);
      if (g.contains("t_span")) {
        const State span = state_from(g.at("t_span"), "integrator.t_span");
        if (span.size() != 2) bad("integrator.t_span needs two entries");
        c.integrator.t0 = span[0];
        c.integrator.t1 = span[1];
      }
    }
    c.integrator.validate();

    if (j.contains("period")) {
      const auto& p = j.at("period");
      only_keys(p, "period", {"detect", "closure_tol", "min_period"});
      maybe(p, "detect", c.period.detect);
      if (p.contains("closure_tol")) c.period.closure_tol = number(p.at("closure_tol"), "period.closure_tol");
      if (p.contains("min_period")) c.period.min_period = number(p.at("min_period"), "period.min_period");
    }

    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      only_keys(s, "sweep", {"count", "grid"});
      maybe(s, "count", c.sweep.count);
      if (s.contains("grid")) {
        if (!s.at("grid").is_array()) bad("sweep.grid must be an array of states");
        for (const auto& row : s.at("grid")) c.sweep.grid.push_back(state_from(row, "sweep.grid row"));
      }
    }

    if (j.contains("verify")) {
      const auto& v = j.at("verify");
      only_keys(v, "verify", {"family", "samples", "fd_step", "tol", "frames", "ruled", "closed_form"});
      maybe(v, "family", c.verify.family);
      maybe(v, "samples", c.verify.samples);
      if (v.contains("fd_step")) c.verify.fd_step = number(v.at("fd_step"), "verify.fd_step");
      if (v.contains("tol")) c.verify.tol = number(v.at("tol"), "verify.tol");
      if (v.contains("frames")) {
        const auto f = v.at("frames").get<std::string>();
        if (f == "analytic")
          c.verify.source = FrameSource::Analytic;
        else if (f == "finite-difference")
          c.verify.source = FrameSource::FiniteDifference;
        else
          bad("verify.frames must be analytic or finite-difference");
      }
      if (v.contains("ruled")) {
        const auto& r = v.at("ruled");
        only_keys(r, "verify.ruled", {"pair", "scale", "c1", "c2", "r_min", "r_max", "radii", "st_samples"});
        auto& rs = c.verify.ruled;
        maybe(r, "pair", rs.pair);
        maybe(r, "scale", rs.scale);
        maybe(r, "c1", rs.c1);
        maybe(r, "c2", rs.c2);
        maybe(r, "r_min", rs.r_lo);
        maybe(r, "r_max", rs.r_hi);
        maybe(r, "radii", rs.radii);
        maybe(r, "st_samples", rs.st_samples);
      }
      if (v.contains("closed_form")) {
        const auto& k = v.at("closed_form");
        only_keys(k, "verify.closed_form", {"mu", "nu", "amplitudes", "x", "A", "B", "C"});
        auto& cf = c.verify.closed_form;
        maybe(k, "mu", cf.mu);
        maybe(k, "nu", cf.nu);
        maybe(k, "x", cf.x);
        maybe(k, "A", cf.A);
        maybe(k, "B", cf.B);
        maybe(k, "C", cf.C);
        if (k.contains("amplitudes")) {
          const auto& a = k.at("amplitudes");
          if (!a.is_array() || a.size() != 3) bad("closed_form.amplitudes needs three [re, im] pairs");
          for (int i = 0; i < 3; ++i) {
            const State z = state_from(a[i], "closed_form.amplitudes");
            if (z.size() != 2) bad("closed_form.amplitudes entries are [re, im]");
            cf.amplitudes[i] = {z[0], z[1]};
          }
        }
      }
      if (c.verify.samples < 1) bad("verify.samples must be positive");
      if (!(c.verify.fd_step > 0) || !(c.verify.tol > 0)) bad("verify.fd_step and verify.tol must be positive");
    }

    if (j.contains("export")) {
      const auto& e = j.at("export");
      only_keys(e, "export", {"grid", "r", "coords"});
      if (e.contains("grid")) {
        const State g = state_from(e.at("grid"), "export.grid");
        if (g.size() != 2) bad("export.grid needs two entries");
        c.export_.grid_u = static_cast<int>(g[0]);
        c.export_.grid_v = static_cast<int>(g[1]);
      }
      if (e.contains("r")) c.export_.r = number(e.at("r"), "export.r");
      if (e.contains("coords")) {
        const State k = state_from(e.at("coords"), "export.coords");
        if (k.size() != 3) bad("export.coords needs three coordinates");
        for (int i = 0; i < 3; ++i) c.export_.coords[i] = static_cast<int>(k[i]);
      }
    }

    if (j.contains("initial_state")) {
      const auto& s = j.at("initial_state");
      if (s.is_object()) {
        // {"special_max_A": {"gamma": [...]}}: the A = 1/(3 sqrt 3) solution at t = 0.
        only_keys(s, "initial_state", {"special_max_A"});
        if (c.system != "assoc-u1-cone") bad("special_max_A needs the assoc-u1-cone system");
        std::array<double, 3> gamma{0, 0, 0};
        const auto& sp = s.at("special_max_A");
        if (sp.contains("gamma")) {
          const State g = state_from(sp.at("gamma"), "gamma");
          if (g.size() != 3) bad("gamma needs three entries");
          gamma = {g[0], g[1], g[2]};
        }
        const auto sys = make_system(c.system, c.parameters);
        c.initial_state = special_solution_max_A(betas(sys), gamma, 0.0);
      } else {
        c.initial_state = state_from(s, "initial_state");
      }
    }
    return c;
  } catch (const json::exception& e) {
    bad(e.what());
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InvalidParameters("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw InvalidParameters("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  auto os = open_out(path);
  os << "t";
  for (int i = 1; i <= traj.dimension; ++i) os << ",x" << i;
  for (const auto& q : traj.quantity_names) os << "," << csv_quote(q);
  os << "\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    os << format_double(traj.times[k]);
    for (double v : traj.states[k]) os << "," << format_double(v);
    for (double v : traj.quantity_values[k]) os << "," << format_double(v);
    os << "\n";
  }
}

json run_summary(const SystemSpec& system, const InitialStateReport& init, const Trajectory& traj,
                 const std::optional<PeriodicityResult>& period, const std::string& status) {
  json params = json::object();
  for (std::size_t i = 0; i < system.parameters.size(); ++i)
    params[system.parameter_names[i]] = to_string(system.parameters[i]);
  json constants = json::object();
  if (!traj.quantity_values.empty())
    for (std::size_t i = 0; i < system.conserved.size(); ++i)
      if (system.conserved[i].kind != ConservedQuantity::Kind::Gauge)
        constants[system.conserved[i].name] = traj.quantity_values.front()[i];
  json drift = json::object();
  for (const auto& d : traj.drift) drift[d.name] = d.max_drift;
  json s = {
      {"system", system.name},
      {"params", params},
      {"initial_state", init.state},
      {"normalization",
       {{"projected_to_sphere", init.projected}, {"original_norm", init.original_norm}, {"gauge_fixed", init.gauge_fixed}}},
      {"constants", constants},
      {"drift", drift},
      {"max_drift", traj.max_drift()},
      {"steps", traj.times.empty() ? 0 : traj.times.size() - 1},
      {"rejected_steps", traj.rejected_steps},
      {"t_end", traj.times.empty() ? 0.0 : traj.t_end()},
      {"status", status},
  };
  if (period) {
    s["period"] = {{"found", period->found},
                   {"T", period->found ? json(period->period) : json(nullptr)},
                   {"closure_error", period->found ? json(period->closure_error) : json(nullptr)},
                   {"loop_error", std::isfinite(period->loop_error) ? json(period->loop_error) : json(nullptr)},
                   {"iterations", period->iterations}};
  } else {
    s["period"] = nullptr;
  }
  return s;
}

void write_sweep_csv(const std::filesystem::path& path, const SystemSpec& system, const SweepTable& table) {
  auto os = open_out(path);
  os << "index";
  for (int i = 1; i <= system.n; ++i) os << ",x" << i;
  for (const auto& n : table.constant_names) os << "," << csv_quote(n);
  os << ",period_found,period,closure_error,max_drift,error\n";
  for (const auto& r : table.rows) {
    os << r.index;
    for (int i = 0; i < system.n; ++i) os << "," << (i < static_cast<int>(r.initial.size()) ? format_double(r.initial[i]) : "");
    for (std::size_t k = 0; k < table.constant_names.size(); ++k)
      os << "," << (k < r.constants.size() ? format_double(r.constants[k]) : "");
    os << "," << (r.period_found ? "true" : "false") << "," << (r.period_found ? format_double(r.period) : "") << ","
       << (r.period_found ? format_double(r.closure_error) : "") << "," << format_double(r.max_drift) << ","
       << (r.error.empty() ? "" : csv_quote(r.error)) << "\n";
  }
}

json to_json(const CalibrationReport& r) {
  return {{"family", r.family},
          {"samples", r.samples},
          {"skipped", r.skipped},
          {"max_abs_ratio_minus_1", r.max_deviation},
          {"orientation_flipped", r.orientation_flipped},
          {"pass", r.pass},
          {"failures", failures_json(r.failures)}};
}

json to_json(const CoassociativeReport& r) {
  return {{"family", r.family},
          {"samples", r.samples},
          {"skipped", r.skipped},
          {"max_abs_ratio_minus_1", r.max_deviation},
          {"max_abs_phi_restriction", r.max_restriction},
          {"orientation_flipped", r.orientation_flipped},
          {"vanishing_pass", r.vanishing_pass},
          {"calibrated_pass", r.calibrated_pass},
          {"pass", r.pass},
          {"failures", failures_json(r.failures)}};
}

json to_json(const RateFit& r) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"radii", r.radii},
          {"deviations", r.deviations},
          {"exponent", num(r.exponent)},
          {"constant", num(r.constant)},
          {"residual", num(r.residual)},
          {"exact_cone", r.exact_cone},
          {"unbounded", r.unbounded}};
}

MeshGrid slice_grid(const Parametrization& p, std::vector<double> fixed, int axis_u, int axis_v, int nu, int nv) {
  if (nu < 2 || nv < 2) throw std::invalid_argument("mesh grid needs at least 2 x 2 points");
  if (axis_u == axis_v || axis_u < 0 || axis_v < 0 || axis_u >= p.k || axis_v >= p.k)
    throw std::invalid_argument("mesh axes must be two distinct parameters");
  if (static_cast<int>(fixed.size()) != p.k) throw DimensionMismatch("fixed parameter tuple has the wrong length");
  const auto [ulo, uhi] = p.domain[axis_u];
  const auto [vlo, vhi] = p.domain[axis_v];
  if (!(uhi > ulo) || !(vhi > vlo)) throw std::invalid_argument("mesh grid spans an empty parameter range");
  MeshGrid g{nu, nv, {}};
  g.points.reserve(static_cast<std::size_t>(nu) * nv);
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j) {
      fixed[axis_u] = ulo + (uhi - ulo) * i / (nu - 1);
      fixed[axis_v] = vlo + (vhi - vlo) * j / (nv - 1);
      g.points.push_back(p.point(fixed));
    }
  return g;
}

void write_obj(const std::filesystem::path& path, const MeshGrid& g, const std::array<int, 3>& coords) {
  const int n = g.points.empty() ? 0 : static_cast<int>(g.points.front().size());
  for (int c : coords)
    if (c < 1 || c > n) throw std::invalid_argument("OBJ coordinate " + std::to_string(c) + " out of range 1.." + std::to_string(n));
  auto os = open_out(path);
  os << "# " << g.nu << " x " << g.nv << " grid, coordinates x" << coords[0] << " x" << coords[1] << " x" << coords[2]
     << "\n";
  for (const auto& p : g.points)
    os << "v " << format_double(p[coords[0] - 1]) << " " << format_double(p[coords[1] - 1]) << " "
       << format_double(p[coords[2] - 1]) << "\n";
  for (int i = 0; i + 1 < g.nu; ++i)
    for (int j = 0; j + 1 < g.nv; ++j) {
      const long a = static_cast<long>(i) * g.nv + j + 1, b = a + g.nv, c = b + 1, d = a + 1;
      os << "f " << a << " " << b << " " << c << "\n";
      os << "f " << a << " " << c << " " << d << "\n";
    }
}

void write_point_cloud_csv(const std::filesystem::path& path, const MeshGrid& g) {
  auto os = open_out(path);
  const std::size_t n = g.points.empty() ? 0 : g.points.front().size();
  for (std::size_t i = 1; i <= n; ++i) os << (i > 1 ? "," : "") << "x" << i;
  os << "\n";
  for (const auto& p : g.points) {
    for (std::size_t i = 0; i < n; ++i) os << (i ? "," : "") << format_double(p[i]);
    os << "\n";
  }
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

json to_json(const RunManifest& m) {
  return {{"command", m.command},       {"config_path", m.config_path}, {"seed", m.seed},
          {"tool_version", m.tool_version}, {"input_hash", m.input_hash},  {"outputs", m.outputs},
          {"started", m.started},       {"finished", m.finished}};
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace calib
