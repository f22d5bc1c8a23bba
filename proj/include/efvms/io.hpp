#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "efvms/rom.hpp"
#include "efvms/strategies.hpp"

namespace efvms {

enum class ProblemKind { Cylinder, Cavity, Channel };
std::string to_string(ProblemKind k);

/// Everything a run needs, read from an INI file with one section per module.
struct RunConfig {
  ProblemKind problem = ProblemKind::Cylinder;
  double ramp_time = 0.0;
  double mesh_h = 4e-2;
  double mesh_refinement = 9.0;
  std::string mesh_file;  ///< overrides the generated mesh when set
  StrategyConfig strategy;
  int r_u = 140;
  int r_s = 15;
  int r_p = 15;
  int r_bar_u = 77;
  LiftKind lift = LiftKind::Stokes;
  RomStrategy rom_strategy = RomStrategy::Galerkin;
  std::string output_dir = "out";

  RomConfig rom_config() const;
};

RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::filesystem::path& path);
/// INI text that parses back to the same configuration.
std::string format_config(const RunConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);

std::shared_ptr<const Mesh> make_mesh(const RunConfig& cfg);
Problem make_problem(const RunConfig& cfg, std::shared_ptr<const Mesh> mesh);
BoundaryData make_boundary_data(const RunConfig& cfg);

struct SnapshotHeader {
  std::uint32_t version = 0;
  std::uint64_t n_u = 0;
  std::uint64_t n_p = 0;
  std::uint64_t count = 0;
  nlohmann::json provenance;
};

void write_snapshots(const SnapshotSet& set, const std::filesystem::path& path);
SnapshotHeader read_snapshot_header(const std::filesystem::path& path);
SnapshotSet read_snapshots(const std::filesystem::path& path, const SpacePtr& space);

void write_basis(const ReducedBasis& basis, const nlohmann::json& metadata, const std::filesystem::path& path);
ReducedBasis read_basis(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

void write_reduced_operators(const ReducedOperators& ops, const nlohmann::json& metadata,
                             const std::filesystem::path& path);
ReducedOperators read_reduced_operators(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

/// Legacy ASCII VTK with vertex velocity, pressure and vorticity.
void export_vtk(const Field& u, const Field& p, const std::filesystem::path& path);

struct VtkData {
  std::vector<Point> points;
  std::vector<std::array<int, 3>> cells;
  std::map<std::string, std::vector<double>> scalars;
  std::map<std::string, std::vector<std::array<double, 3>>> vectors;
};
VtkData read_vtk(const std::filesystem::path& path);

struct RunManifest {
  nlohmann::json config;
  std::uint64_t mesh_hash = 0;
  std::string code_version;
  double wall_clock_seconds = 0.0;
  std::vector<std::pair<std::string, double>> timings;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;
};

std::string code_version();

}  // namespace efvms
