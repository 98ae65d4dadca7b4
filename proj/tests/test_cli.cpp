#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "calib/io.hpp"
#include "calib/symbolic.hpp"

namespace fs = std::filesystem;
using namespace calib;
using nlohmann::json;

namespace {

const fs::path kScratch = CALIB_SCRATCH;
const fs::path kConfigs = CALIB_CONFIGS;

int run(const std::string& args) {
  const std::string cmd = std::string(CALIB_BIN) + " " + args + " > " + (kScratch / "stdout.txt").string() + " 2> " +
                          (kScratch / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

fs::path out_dir(const std::string& name) {
  const auto d = kScratch / name;
  fs::remove_all(d);
  return d;
}

fs::path write_file(const std::string& name, const std::string& text) {
  fs::create_directories(kScratch);
  const auto p = kScratch / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

std::string config(const std::string& name) { return (kConfigs / name).string(); }

// builtin action as an action-spec file
json action_json(const std::string& system) {
  const auto a = builtin_action(system);
  const auto names = a.variable_names();
  json j = {{"system", system}, {"name", a.name}, {"n", a.n}, {"parameters", a.parameters}};
  j["generators"] = json::array();
  for (const auto& g : a.generators) {
    json comps = json::array();
    for (const auto& c : g.components) comps.push_back(to_string(c, names));
    j["generators"].push_back(comps);
  }
  if (!a.chi.empty()) {
    j["chi"] = json::array();
    for (const auto& t : a.chi) {
      json gens = json::array();
      for (int g : t.generators) gens.push_back(g + 1);
      j["chi"].push_back({{"weight", to_string(t.weight, names)}, {"generators", gens}});
    }
  }
  for (const auto& [idx, v] : a.relations) j["relations"][names[idx]] = to_string(v, names);
  j["form"] = to_json(builtin_form(system));
  return j;
}

}  // namespace

TEST_CASE("derive") {
  fs::create_directories(kScratch);
  const auto out = out_dir("derive");
  CHECK(run("derive assoc-u1-cone --out " + out.string()) == 0);
  const auto text = slurp(out / "derived.txt");
  CHECK(text.find("dx1/dt = x2^2*alpha1 + x3^2*alpha1 + x4^2*alpha2 + x5^2*alpha2 + x6^2*alpha3 + x7^2*alpha3") !=
        std::string::npos);
  CHECK(text.find("diff: empty") != std::string::npos);
  CHECK(run("derive cayley-su2 --out " + out.string()) == 0);
  CHECK(run("derive no-such-system --out " + out.string()) == 2);

  for (const auto& name : system_names()) {
    CAPTURE(name);
    const auto spec = write_file(name + ".action.json", action_json(name).dump(1));
    CHECK(run("derive " + spec.string() + " --out " + out.string()) == 0);
  }

  // one flipped sign in a generator must show up in the diff
  auto j = action_json("coassoc-u1sq-cone");
  const auto a = builtin_action("coassoc-u1sq-cone");
  j["generators"][0][1] = to_string(-a.generators[0].components[1], a.variable_names());
  const auto bad = write_file("perturbed.action.json", j.dump(1));
  CHECK(run("derive " + bad.string() + " --out " + out.string()) == 1);
  CHECK(slurp(out / "derived.txt").find("component") != std::string::npos);

  CHECK(run("derive " + write_file("junk.json", "{nope").string() + " --out " + out.string()) == 2);
}

TEST_CASE("integrate") {
  auto out = out_dir("integrate");
  CHECK(run("integrate --config " + config("special_max_a.json") + " --out " + out.string()) == 0);
  auto summary = read_json(out / "summary.json");
  CHECK(summary["max_drift"].get<double>() <= 1e-9);
  CHECK(summary["period"]["found"] == true);
  CHECK(std::abs(summary["period"]["T"].get<double>() - 2 * M_PI * std::sqrt(3.0) / 3) <= 1e-6);
  CHECK(fs::exists(out / "trajectory.csv"));

  // non-unit state is projected and gauge-fixed, and the report says so
  const auto cfg = write_file("projected.json", R"({
    "system": "assoc-u1-cone", "parameters": {"alpha1": 2, "alpha2": -1, "alpha3": -1},
    "initial_state": [0.6, 2.0, 0.8, 0.4, -1.4, 1.0, 0.2], "gauge_fix": true,
    "integrator": {"t_span": [0, 2]}})");
  out = out_dir("projected");
  CHECK(run("integrate --config " + cfg.string() + " --out " + out.string()) == 0);
  summary = read_json(out / "summary.json");
  CHECK(summary["normalization"]["projected_to_sphere"] == true);
  CHECK(summary["normalization"]["gauge_fixed"] == true);
  CHECK(summary["normalization"]["original_norm"].get<double>() == doctest::Approx(std::sqrt(8.16)));

  out = out_dir("bad");
  CHECK(run("integrate --config " + config("coassoc_bad.json") + " --out " + out.string()) == 2);
  CHECK(read_json(out / "summary.json")["status"] == "constraint violation");

  CHECK(run("integrate --config " + write_file("typo.json", R"({"system": "assoc-u1-cone", "integratr": {}})").string() +
            " --out " + out.string()) == 2);
  CHECK(run("integrate --out " + out.string()) == 2);
}

TEST_CASE("sweep is deterministic and independent of parallelism") {
  const auto cfg = write_file("sweep.json", R"({
    "system": "assoc-u1-cone", "parameters": {"alpha1": 2, "alpha2": -1, "alpha3": -1}, "gauge_fix": true,
    "integrator": {"rel_tol": 1e-10, "abs_tol": 1e-10, "t_span": [0, 5]},
    "period": {"detect": true, "min_period": 0.5}, "sweep": {"count": 16}})");
  const auto a = out_dir("sweep1"), b = out_dir("sweep8"), c = out_dir("sweep8b");
  CHECK(run("sweep --config " + cfg.string() + " --seed 3 --parallelism 1 --out " + a.string()) == 0);
  CHECK(run("sweep --config " + cfg.string() + " --seed 3 --parallelism 8 --out " + b.string()) == 0);
  CHECK(run("sweep --config " + cfg.string() + " --seed 3 --parallelism 8 --out " + c.string()) == 0);
  const auto csv = slurp(a / "sweep.csv");
  CHECK(csv == slurp(b / "sweep.csv"));
  CHECK(csv == slurp(c / "sweep.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 17);
  CHECK(read_json(a / "manifest.json")["input_hash"] == read_json(b / "manifest.json")["input_hash"]);
}

TEST_CASE("verify") {
  const auto out = out_dir("verify");
  CHECK(run("verify --config " + config("assoc_cone.json") + " --out " + out.string()) == 0);
  const auto report = read_json(out / "report.json");
  CHECK(report["pass"] == true);
  CHECK(report["max_abs_ratio_minus_1"].get<double>() <= 1e-5);
  CHECK(run("verify --config " + config("assoc_cone.json") + " --tol 1e-20 --out " + out.string()) == 1);
  CHECK(read_json(out / "report.json")["pass"] == false);

  CHECK(run("verify --config " + config("ruled.json") + " --out " + out.string()) == 0);
  const auto rate = read_json(out / "report.json")["rate"];
  CHECK(std::abs(rate["exponent"].get<double>() + 1) <= 0.1);

  const auto degenerate = write_file("degenerate.json", R"({
    "system": "assoc-u1-cone", "parameters": {"alpha1": 2, "alpha2": -1, "alpha3": -1},
    "initial_state": [1, 0, 0, 0, 0, 0, 0], "integrator": {"t_span": [0, 1]}, "verify": {"samples": 20}})");
  CHECK(run("verify --config " + degenerate.string() + " --out " + out.string()) == 2);
}

TEST_CASE("export") {
  const auto out = out_dir("export");
  CHECK(run("export --config " + config("assoc_cone.json") + " --out " + out.string()) == 0);
  std::ifstream obj(out / "mesh.obj");
  long v = 0, f = 0;
  for (std::string l; std::getline(obj, l);) {
    v += l.rfind("v ", 0) == 0;
    f += l.rfind("f ", 0) == 0;
  }
  CHECK(v == 40000);
  CHECK(f == 2 * 199 * 199);
  // cone slice at r = 1 lies on the unit sphere
  std::ifstream pts(out / "points.csv");
  std::string line;
  std::getline(pts, line);
  double worst = 0;
  while (std::getline(pts, line)) {
    std::istringstream is(line);
    double n2 = 0;
    for (std::string cell; std::getline(is, cell, ',');) n2 += std::stod(cell) * std::stod(cell);
    worst = std::max(worst, std::abs(std::sqrt(n2) - 1));
  }
  CHECK(worst <= 1e-8);

  const auto manifest = read_json(out / "manifest.json");
  CHECK(manifest["command"] == "export");
  CHECK(manifest["outputs"].size() == 2);
  for (const auto& o : manifest["outputs"]) CHECK(fs::exists(o.get<std::string>()));

  CHECK(run("export --config " + config("assoc_cone.json") + " --coords 1,2,9 --out " + out.string()) == 2);
  const auto flat = write_file("flat.json", R"({
    "system": "assoc-u1-cone", "parameters": {"alpha1": 2, "alpha2": -1, "alpha3": -1},
    "initial_state": [0.3, 1.0, 0.4, 0.2, -0.7, 0.5, 0.1], "export": {"grid": [1, 50]}})");
  CHECK(run("export --config " + flat.string() + " --out " + out.string()) == 2);
}

TEST_CASE("CALIB_OUT sets the default output directory") {
  const auto out = out_dir("env");
  setenv("CALIB_OUT", out.string().c_str(), 1);
  CHECK(run("derive assoc-u1-cone") == 0);
  unsetenv("CALIB_OUT");
  CHECK(fs::exists(out / "derived.txt"));
  CHECK(fs::exists(out / "manifest.json"));
}
