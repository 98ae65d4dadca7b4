// calib: derive, integrate, sweep, verify and export symmetry-reduced
// calibrated submanifolds. Exit codes: 0 ok, 1 numerical or verification
// failure, 2 invalid input.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "calib/io.hpp"

namespace fs = std::filesystem;
using namespace calib;
using nlohmann::json;

namespace {

constexpr int kOk = 0, kFail = 1, kInvalid = 2;

struct Common {
  std::string config;
  std::string out = "out";
  std::uint64_t seed = 1;
  unsigned parallelism = 1;
  double tol = 0;  // 0: take from the config
  std::string coords;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw InvalidParameters("cannot read " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class Run {
 public:
  Run(std::string command, const Common& c, std::string input)
      : dir_(c.out) {
    m_.command = std::move(command);
    m_.config_path = c.config;
    m_.seed = c.seed;
    m_.tool_version = kToolVersion;
    m_.input_hash = sha256_hex(m_.command + "\n" + std::to_string(c.seed) + "\n" + input);
    m_.started = utc_timestamp();
    fs::create_directories(dir_);
  }
  fs::path output(const std::string& name) {
    m_.outputs.push_back((dir_ / name).string());
    return dir_ / name;
  }
  void write_json(const std::string& name, const json& j) {
    std::ofstream os(output(name), std::ios::binary);
    os << j.dump(2) << "\n";
  }
  ~Run() {
    m_.finished = utc_timestamp();
    std::ofstream os(dir_ / "manifest.json", std::ios::binary);
    os << to_json(m_).dump(2) << "\n";
  }

 private:
  fs::path dir_;
  RunManifest m_;
};

SystemSpec system_of(const RunConfig& c) { return make_system(c.system, c.parameters); }

std::optional<PeriodicityResult> maybe_period(const RunConfig& c, const Trajectory& traj) {
  if (!c.period.detect) return std::nullopt;
  const double min_period = c.period.min_period > 0 ? c.period.min_period : 10 * c.integrator.step;
  return detect_period(traj, c.period.closure_tol, min_period);
}

// --- derive ----------------------------------------------------------------

AlternatingForm form_by_name(const json& j) {
  if (j.is_object()) return form_from_json(j);
  const auto s = j.get<std::string>();
  if (s == "phi") return g2_form();
  if (s == "star-phi") return g2_star_form();
  if (s == "Phi") return spin7_form();
  throw InvalidParameters("unknown form '" + s + "' (phi, star-phi, Phi or a form object)");
}

// {"system": builtin to compare against, "form": ..., "parameters": [...],
//  "generators": [[component, ...], ...], "chi": [{"weight": poly, "generators": [1, 2]}],
//  "relations": {"alpha1": "-alpha2 - alpha3"}}
std::pair<ActionSpec, AlternatingForm> action_from_json(const json& j, std::string& compare_to) {
  try {
    compare_to = j.at("system").get<std::string>();
    ActionSpec a;
    a.name = j.value("name", compare_to);
    a.n = j.at("n").get<int>();
    a.parameters = j.value("parameters", std::vector<std::string>{});
    const auto names = a.variable_names();
    const int nv = a.variable_count();
    for (const auto& g : j.at("generators")) {
      if (static_cast<int>(g.size()) != a.n) throw InvalidParameters("generator needs n components");
      PolyVectorField f(a.n, nv);
      for (int i = 0; i < a.n; ++i) f.components[i] = parse_polynomial(g[i].get<std::string>(), names);
      a.generators.push_back(std::move(f));
    }
    if (j.contains("chi"))
      for (const auto& c : j.at("chi")) {
        ChiTerm t{parse_polynomial(c.at("weight").get<std::string>(), names), {}};
        for (int g : c.at("generators")) {
          if (g < 1 || g > static_cast<int>(a.generators.size())) throw InvalidParameters("chi names a missing generator");
          t.generators.push_back(g - 1);
        }
        a.chi.push_back(std::move(t));
      }
    if (j.contains("relations"))
      for (const auto& [k, v] : j.at("relations").items()) {
        const auto it = std::find(a.parameters.begin(), a.parameters.end(), k);
        if (it == a.parameters.end()) throw InvalidParameters("relation for unknown parameter " + k);
        a.relations.push_back({a.n + static_cast<int>(it - a.parameters.begin()),
                               parse_polynomial(v.get<std::string>(), names)});
      }
    return {std::move(a), form_by_name(j.at("form"))};
  } catch (const json::exception& e) {
    throw InvalidParameters(std::string("action spec: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw InvalidParameters(std::string("action spec: ") + e.what());
  }
}

int cmd_derive(const std::string& target, const Common& c) {
  ActionSpec action;
  std::optional<AlternatingForm> form;
  std::string compare_to = target, input = target;
  if (fs::exists(target) && fs::is_regular_file(target)) {
    input = slurp(target);
    json j;
    try {
      j = json::parse(input);
    } catch (const json::exception& e) {
      throw InvalidParameters(target + " is not valid JSON: " + e.what());
    }
    auto [a, f] = action_from_json(j, compare_to);
    action = std::move(a);
    form = std::move(f);
  } else {
    try {
      action = builtin_action(target);
    } catch (const std::invalid_argument&) {
      throw InvalidParameters("unknown system '" + target + "'");
    }
    form = builtin_form(target);
  }
  Run run("derive", c, input);
  const PolyVectorField derived = derive_rhs(action, *form);
  const auto names = action.variable_names();
  std::ostringstream text;
  text << "# " << action.name << ": " << derived.n << " components\n";
  for (int i = 0; i < derived.n; ++i)
    text << "dx" << i + 1 << "/dt = " << to_string(derived.components[i], names) << "\n";

  PolyVectorField expected;
  try {
    expected = hand_coded_rhs(compare_to);
  } catch (const std::invalid_argument&) {
    throw InvalidParameters("no builtin system '" + compare_to + "' to compare against");
  }
  if (expected.variable_count() != derived.variable_count() || expected.n != derived.n)
    throw InvalidParameters("action variables do not match builtin system " + compare_to);
  const auto diff = check_against(expected, derived, action.relations);
  text << (diff.empty() ? "diff: empty\n" : "diff:\n" + diff.to_text(names));
  std::cout << text.str();
  std::ofstream(run.output("derived.txt"), std::ios::binary) << text.str();
  return diff.empty() ? kOk : kFail;
}

// --- integrate ----------------------------------------------------------------

int cmd_integrate(const Common& c) {
  const RunConfig cfg = load_config(c.config);
  const SystemSpec sys = system_of(cfg);
  if (static_cast<int>(cfg.initial_state.size()) != sys.n)
    throw InvalidParameters("initial_state needs " + std::to_string(sys.n) + " entries");
  const auto init = prepare_initial_state(sys, cfg.initial_state, cfg.gauge_fix);
  Run run("integrate", c, slurp(c.config));
  try {
    const Trajectory traj = integrate(sys, init.state, cfg.integrator);
    const auto period = maybe_period(cfg, traj);
    write_trajectory_csv(run.output("trajectory.csv"), traj);
    run.write_json("summary.json", run_summary(sys, init, traj, period, "ok"));
    std::cout << "steps " << traj.times.size() - 1 << ", max drift " << format_double(traj.max_drift());
    if (period) std::cout << (period->found ? ", period " + format_double(period->period) : ", no period found");
    std::cout << "\n";
    return kOk;
  } catch (const IncompleteIntegration& e) {
    write_trajectory_csv(run.output("trajectory.csv"), e.partial());
    run.write_json("summary.json", run_summary(sys, init, e.partial(), std::nullopt,
                                               std::string("incomplete: ") + e.what()));
    std::cerr << "integration incomplete: " << e.what() << "\n";
    return kFail;
  } catch (const ConstraintViolation& e) {
    json report = {{"status", "constraint violation"}, {"message", e.what()}, {"constraints", json::array()}};
    for (const auto& k : sys.constraints)
      report["constraints"].push_back(
          {{"name", k.name}, {"required", k.required}, {"value", k.evaluate(init.state)}});
    run.write_json("summary.json", report);
    throw;
  }
}

// --- sweep ---------------------------------------------------------------------

int cmd_sweep(const Common& c) {
  const RunConfig cfg = load_config(c.config);
  const SystemSpec sys = system_of(cfg);
  const auto grid = cfg.sweep.grid.empty() ? random_unit_states(sys.n, cfg.sweep.count, c.seed) : cfg.sweep.grid;
  for (const auto& g : grid)
    if (static_cast<int>(g.size()) != sys.n) throw InvalidParameters("sweep grid row of the wrong length");
  SweepConfig sc;
  sc.integrator = cfg.integrator;
  sc.gauge_fix = cfg.gauge_fix;
  sc.detect = cfg.period.detect;
  sc.closure_tol = cfg.period.closure_tol;
  sc.min_period = cfg.period.min_period;
  Run run("sweep", c, slurp(c.config));
  const auto table = sweep(sys, grid, sc, std::max(1u, c.parallelism));
  write_sweep_csv(run.output("sweep.csv"), sys, table);
  std::size_t found = 0, failed = 0;
  for (const auto& r : table.rows) {
    found += r.period_found;
    failed += !r.error.empty();
  }
  std::cout << table.rows.size() << " rows, " << found << " periodic, " << failed << " failed\n";
  return kOk;
}

// --- verify --------------------------------------------------------------------

Parametrization family_of(const RunConfig& cfg, const SystemSpec& sys, std::optional<RuledParams>& ruled,
                          bool for_export) {
  const auto& v = cfg.verify;
  if (v.family == "lambda-zero" || v.family == "mu-nu-zero") return closed_form_trivial(v.family, v.closed_form);
  if (v.family != "trajectory" && v.family != "ruled")
    throw InvalidParameters("unknown verify.family '" + v.family + "'");
  if (static_cast<int>(cfg.initial_state.size()) != sys.n)
    throw InvalidParameters("initial_state needs " + std::to_string(sys.n) + " entries");
  const auto init = prepare_initial_state(sys, cfg.initial_state, cfg.gauge_fix || v.family == "ruled");
  auto traj = std::make_shared<Trajectory>(integrate(sys, init.state, cfg.integrator));
  if (v.family == "trajectory") return trajectory_family(sys, *traj);
  const auto period = maybe_period(cfg, *traj);
  ruled = make_ruled_params(sys, traj->dense(),
                            harmonic_pair(v.ruled.pair, v.ruled.scale, v.ruled.c1, v.ruled.c2),
                            period && period->found ? period->period : 0);
  return for_export ? ruled_family(*ruled, v.ruled.r_lo, v.ruled.r_hi) : ruled_family(*ruled);
}

int cmd_verify(const Common& c) {
  const RunConfig cfg = load_config(c.config);
  const SystemSpec sys = system_of(cfg);
  const double tol = c.tol > 0 ? c.tol : cfg.verify.tol;
  std::optional<RuledParams> ruled;
  const Parametrization fam = family_of(cfg, sys, ruled, false);
  Run run("verify", c, slurp(c.config));
  const FrameSet frames = tangent_frames(fam, cfg.verify.samples, c.seed, cfg.verify.fd_step, cfg.verify.source);

  json report;
  bool pass = false;
  std::size_t usable = 0;
  if (fam.n == 7 && fam.k == 4) {
    const auto r = check_coassociative(frames, tol, fam.family);
    report = to_json(r);
    pass = r.pass;
    usable = r.samples;
  } else {
    const auto form = fam.n == 8 ? spin7_form() : g2_form();
    const auto r = check_calibrated(form, frames, tol, fam.family);
    report = to_json(r);
    pass = r.pass;
    usable = r.samples;
  }
  report["tol"] = tol;
  if (ruled) {
    const auto radii = log_radii(cfg.verify.ruled.r_lo, cfg.verify.ruled.r_hi, cfg.verify.ruled.radii);
    const auto fit = asymptotic_rate(*ruled, radii, cfg.verify.ruled.st_samples, c.seed);
    report["rate"] = to_json(fit);
    const bool rate_ok = fit.exact_cone || (!fit.unbounded && std::abs(fit.exponent + 1) <= 0.1);
    report["rate"]["pass"] = rate_ok;
    pass = pass && rate_ok;
  }
  run.write_json("report.json", report);
  std::cout << fam.family << ": " << (pass ? "pass" : "fail") << ", max |ratio-1| "
            << format_double(report["max_abs_ratio_minus_1"].get<double>()) << " over " << usable << " samples\n";
  if (usable == 0) {
    std::cerr << "every sampled frame was degenerate\n";
    return kInvalid;
  }
  return pass ? kOk : kFail;
}

// --- export --------------------------------------------------------------------

std::array<int, 3> parse_coords(const std::string& s, std::array<int, 3> fallback) {
  if (s.empty()) return fallback;
  std::array<int, 3> out{};
  char sep1 = 0, sep2 = 0;
  std::istringstream is(s);
  if (!(is >> out[0] >> sep1 >> out[1] >> sep2 >> out[2]) || sep1 != ',' || sep2 != ',' || !is.eof())
    throw InvalidParameters("--coords expects i,j,k");
  return out;
}

int cmd_export(const Common& c) {
  const RunConfig cfg = load_config(c.config);
  const SystemSpec sys = system_of(cfg);
  const auto coords = parse_coords(c.coords, cfg.export_.coords);
  for (int k : coords)
    if (k < 1 || k > sys.n) throw InvalidParameters("--coords entries must lie in 1.." + std::to_string(sys.n));
  std::optional<RuledParams> ruled;
  const Parametrization fam = family_of(cfg, sys, ruled, true);
  Run run("export", c, slurp(c.config) + "\n" + c.coords);

  // Slice: the last two parameters vary, a leading radius is held at export.r,
  // anything else sits at 0 (or its domain start).
  std::vector<double> fixed(fam.k);
  for (int i = 0; i < fam.k; ++i) {
    const auto [lo, hi] = fam.domain[i];
    fixed[i] = lo <= 0 && 0 <= hi ? 0.0 : lo;
  }
  const bool radial = sys.cone || ruled.has_value();
  if (radial && cfg.verify.family != "lambda-zero" && cfg.verify.family != "mu-nu-zero") fixed[0] = cfg.export_.r;
  MeshGrid grid;
  try {
    grid = slice_grid(fam, fixed, fam.k - 2, fam.k - 1, cfg.export_.grid_u, cfg.export_.grid_v);
  } catch (const std::invalid_argument& e) {
    throw InvalidParameters(std::string("degenerate grid: ") + e.what());
  }
  write_obj(run.output("mesh.obj"), grid, coords);
  write_point_cloud_csv(run.output("points.csv"), grid);
  std::cout << grid.points.size() << " vertices\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symmetry-reduced calibrated submanifolds of R^7 and R^8"};
  app.require_subcommand(1);
  Common c;
  std::string target;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", c.config, "run configuration (JSON)")->check(CLI::ExistingFile);
    if (config_required) opt->required();
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
    sub->add_option("--seed", c.seed, "seed for all randomness")->capture_default_str();
  };
  auto* derive = app.add_subcommand("derive", "derive a reduced system and diff it against the builtin one");
  derive->add_option("target", target, "system name or action spec file")->required();
  derive->add_option("--out", c.out, "output directory")->capture_default_str();
  auto* integ = app.add_subcommand("integrate", "integrate a system from a config");
  add_common(integ, true);
  auto* sw = app.add_subcommand("sweep", "integrate a grid of initial states");
  add_common(sw, true);
  sw->add_option("--parallelism", c.parallelism, "worker threads")->capture_default_str();
  auto* ver = app.add_subcommand("verify", "certify that a family is calibrated");
  add_common(ver, true);
  ver->add_option("--tol", c.tol, "tolerance on |ratio - 1| (overrides the config)");
  auto* exp = app.add_subcommand("export", "write an OBJ mesh and CSV point cloud");
  add_common(exp, true);
  exp->add_option("--coords", c.coords, "three 1-based coordinates for the OBJ, e.g. 1,2,3");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }
  if (const char* dir = std::getenv("CALIB_OUT"); dir && *dir) {
    bool explicit_out = false;
    for (auto* s : {derive, integ, sw, ver, exp})
      if (app.got_subcommand(s) && s->get_option("--out")->count() > 0) explicit_out = true;
    if (!explicit_out) c.out = dir;
  }

  try {
    if (app.got_subcommand(derive)) return cmd_derive(target, c);
    if (app.got_subcommand(integ)) return cmd_integrate(c);
    if (app.got_subcommand(sw)) return cmd_sweep(c);
    if (app.got_subcommand(ver)) return cmd_verify(c);
    if (app.got_subcommand(exp)) return cmd_export(c);
  } catch (const InvalidParameters& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const ConstraintViolation& e) {
    std::cerr << "constraint violation: " << e.what() << "\n";
    return kInvalid;
  } catch (const DimensionMismatch& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const IntegrationFailure& e) {
    std::cerr << "integration failed: " << e.what() << "\n";
    return kFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
  return kInvalid;
}
