#pragma once

// Run configuration files and output writers shared by the CLI and tests.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "calib/integrate.hpp"
#include "calib/verify.hpp"

namespace calib {

struct PeriodSettings {
  bool detect = false;
  double closure_tol = 1e-6;
  double min_period = 0;  // 0 means 10x the initial step
};

struct SweepSettings {
  std::size_t count = 100;  // random unit initial states
  std::vector<State> grid;  // explicit grid; overrides count when nonempty
};

struct RuledSettings {
  std::string pair = "cos-cosh";
  double scale = 0.1;
  double c1 = 0, c2 = 0;
  double r_lo = 10, r_hi = 1000;
  int radii = 9;
  int st_samples = 8;
};

struct VerifySettings {
  std::string family = "trajectory";  // trajectory, ruled, lambda-zero, mu-nu-zero
  int samples = 200;
  double fd_step = 1e-5;
  double tol = 1e-5;
  FrameSource source = FrameSource::FiniteDifference;
  RuledSettings ruled;
  TrivialCaseConstants closed_form;
};

struct ExportSettings {
  int grid_u = 200;
  int grid_v = 200;
  double r = 1.0;
  std::array<int, 3> coords{1, 2, 3};  // 1-based ambient coordinates for the OBJ
};

struct RunConfig {
  std::string system;
  std::map<std::string, Rational> parameters;
  State initial_state;
  bool gauge_fix = false;
  IntegratorConfig integrator;
  PeriodSettings period;
  SweepSettings sweep;
  VerifySettings verify;
  ExportSettings export_;
};

/// Throws InvalidParameters with a readable message on malformed input.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// Accepts integers, decimal numbers (converted exactly) and "p/q" strings.
Rational rational_from_json(const nlohmann::json& j, const std::string& what);

std::string format_double(double v);

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);

nlohmann::json run_summary(const SystemSpec& system, const InitialStateReport& init, const Trajectory& traj,
                           const std::optional<PeriodicityResult>& period, const std::string& status);

void write_sweep_csv(const std::filesystem::path& path, const SystemSpec& system, const SweepTable& table);

nlohmann::json to_json(const CalibrationReport& r);
nlohmann::json to_json(const CoassociativeReport& r);
nlohmann::json to_json(const RateFit& r);

struct MeshGrid {
  int nu = 0, nv = 0;
  std::vector<State> points;  // row-major, nu * nv
};

/// Evaluates p on an nu x nv grid spanning the domains of parameters
/// axis_u and axis_v (endpoints included); other parameters take their value
/// from `fixed`. Throws std::invalid_argument on a degenerate grid.
MeshGrid slice_grid(const Parametrization& p, std::vector<double> fixed, int axis_u, int axis_v, int nu, int nv);

/// OBJ with the chosen 1-based coordinates; quads split into two triangles.
void write_obj(const std::filesystem::path& path, const MeshGrid& grid, const std::array<int, 3>& coords);
void write_point_cloud_csv(const std::filesystem::path& path, const MeshGrid& grid);

std::string sha256_hex(const std::string& bytes);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string tool_version;
  std::string input_hash;
  std::vector<std::string> outputs;
  std::string started;
  std::string finished;
};

nlohmann::json to_json(const RunManifest& m);
std::string utc_timestamp();

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace calib
