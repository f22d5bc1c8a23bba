#include "efvms/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "efvms/errors.hpp"
#include "efvms/io.hpp"

namespace efvms {

namespace fs = std::filesystem;

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// A finished FOM run directory: config echo, mesh and snapshots.
struct RunDir {
  fs::path dir;
  RunConfig cfg;
  OperatorsPtr ops;
  SnapshotSet snapshots;
};

RunDir open_run(const fs::path& dir) {
  RunDir r;
  r.dir = fs::absolute(dir);
  r.cfg = load_config(r.dir / "config.cfg");
  auto mesh = std::make_shared<const Mesh>(load_mesh(r.dir / "mesh.txt"));
  r.ops = Operators::build(std::make_shared<const TaylorHoodSpace>(mesh));
  r.snapshots = read_snapshots(r.dir / "snapshots.bin", r.ops->space);
  return r;
}

const Snapshot* snapshot_at(const SnapshotSet& set, double t) {
  for (const auto& s : set.snapshots) {
    if (std::abs(s.t - t) <= 1e-9 * std::max(1.0, std::abs(t))) return &s;
  }
  return nullptr;
}

int cmd_mesh(const std::string& config, const std::string& problem, double h, double refinement, const std::string& out,
             std::ostream& os) {
  RunConfig cfg;
  if (!config.empty()) cfg = load_config(config);
  if (!problem.empty()) {
    std::istringstream is("[problem]\nname = " + problem + "\n");
    cfg.problem = parse_config(is).problem;
  }
  if (h > 0.0) cfg.mesh_h = h;
  if (refinement > 0.0) cfg.mesh_refinement = refinement;
  const auto mesh = make_mesh(cfg);
  save_mesh(*mesh, out);
  const auto s = mesh_stats(*mesh);
  os << "vertices " << s.n_vertices << "\ntriangles " << s.n_triangles << "\nh_min " << s.h_min << "\nh_max " << s.h_max
     << "\nshortest_edge " << s.shortest_edge << "\nwrote " << out << '\n';
  return 0;
}

int cmd_fom(const std::string& config, const std::string& out_override, const std::string& strategy, double t_final,
            std::ostream& os) {
  Stopwatch total;
  RunConfig cfg = load_config(config);
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (!strategy.empty()) cfg.strategy.strategy = strategy_from_string(strategy);
  if (t_final > 0.0) cfg.strategy.t_final = t_final;
  cfg.strategy.validate();
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);

  RunManifest manifest;
  Stopwatch stage;
  const auto mesh = make_mesh(cfg);
  save_mesh(*mesh, dir / "mesh.txt");
  {
    std::ofstream echo(dir / "config.cfg");
    echo << format_config(cfg);
  }
  const Problem problem = make_problem(cfg, mesh);
  manifest.timings.emplace_back("setup", stage.seconds());
  os << "mesh: " << mesh->n_vertices() << " vertices, " << mesh->n_triangles() << " triangles, "
     << problem.ops->space->n_total() << " dofs\n";

  stage = Stopwatch{};
  const int n = cfg.strategy.n_steps();
  const int report = std::max(1, n / 20);
  RunResult result = run(cfg.strategy, problem, [&](int step, const Field&, const Field&) {
    if (step > 0 && (step % report == 0 || step == n)) {
      os << "step " << step << "/" << n << "  t = " << step * cfg.strategy.dt << "  elapsed " << std::fixed
         << std::setprecision(1) << stage.seconds() << " s" << std::defaultfloat << std::setprecision(6) << '\n';
    }
  });
  manifest.timings.emplace_back("time_loop", stage.seconds());

  result.snapshots.provenance["run_config"] = to_json(cfg);
  result.snapshots.provenance["mesh_file"] = "mesh.txt";
  write_snapshots(result.snapshots, dir / "snapshots.bin");
  result.diagnostics.write_csv(dir / "diagnostics.csv");
  manifest.config = to_json(cfg);
  manifest.mesh_hash = mesh->hash();
  manifest.code_version = code_version();
  manifest.outputs = {"mesh.txt", "config.cfg", "snapshots.bin", "diagnostics.csv"};
  manifest.wall_clock_seconds = total.seconds();
  manifest.write(dir / "manifest.json");
  os << "wrote " << result.snapshots.size() << " snapshots to " << dir.string() << '\n';
  return 0;
}

int cmd_pod(const std::string& snapshots, int r_u, int r_s, int r_p, const std::string& lift_name,
            const std::string& out, std::ostream& os) {
  Stopwatch total;
  RunDir run = open_run(snapshots);
  const RunConfig& cfg = run.cfg;
  if (r_u < 0) r_u = cfg.r_u;
  if (r_s < 0) r_s = cfg.r_s;
  if (r_p < 0) r_p = cfg.r_p;
  LiftKind lift_kind = cfg.lift;
  if (lift_name == "stokes") lift_kind = LiftKind::Stokes;
  else if (lift_name == "first_snapshot") lift_kind = LiftKind::FirstSnapshot;
  else if (!lift_name.empty()) throw ConfigError("unknown lift '" + lift_name + "'");

  Vector lift = make_lift(lift_kind, run.snapshots, run.ops, make_boundary_data(cfg), cfg.strategy.nu);
  const ReducedBasis basis = build_basis(run.snapshots, *run.ops, r_u, r_s, r_p, std::move(lift));
  const ReducedOperators reduced = project_operators(basis, *run.ops);

  nlohmann::json meta = {{"run_dir", run.dir.string()},
                         {"mesh_hash", run.ops->space->mesh().hash()},
                         {"config", to_json(cfg)},
                         {"r_u", r_u},
                         {"r_s", r_s},
                         {"r_p", r_p},
                         {"r_us", basis.r_us()},
                         {"lift", lift_kind == LiftKind::Stokes ? "stokes" : "first_snapshot"},
                         {"code_version", code_version()}};
  const fs::path basis_path = out.empty() ? run.dir / "basis.bin" : fs::path(out);
  const fs::path ops_path = basis_path.parent_path() / "reduced_operators.bin";
  write_basis(basis, meta, basis_path);
  write_reduced_operators(reduced, meta, ops_path);
  os << "r_us " << basis.r_us() << "\nr_p " << basis.r_p << "\nwrote " << basis_path.string() << " and "
     << ops_path.string() << " in " << total.seconds() << " s\n";
  return 0;
}

int cmd_rom(const std::string& basis_path, const std::string& strategy, int steps, const std::string& out,
            std::ostream& os) {
  nlohmann::json meta;
  const ReducedBasis basis = read_basis(basis_path, &meta);
  RunDir run = open_run(meta.at("run_dir").get<std::string>());
  if (meta.at("mesh_hash").get<std::uint64_t>() != run.ops->space->mesh().hash()) {
    throw Error("basis was built on a different mesh than " + run.dir.string());
  }
  const fs::path ops_path = fs::path(basis_path).parent_path() / "reduced_operators.bin";
  auto reduced = std::make_shared<ReducedOperators>(fs::exists(ops_path) ? read_reduced_operators(ops_path)
                                                                         : project_operators(basis, *run.ops));
  RunConfig cfg = run.cfg;
  cfg.r_u = basis.r_u;
  if (!strategy.empty()) cfg.rom_strategy = rom_strategy_from_string(strategy);
  if (run.snapshots.snapshots.empty()) throw Error("no snapshots to start the reduced trajectory from");
  const auto& first = run.snapshots.snapshots.front();
  const double dt = cfg.strategy.dt;
  if (steps < 0) steps = static_cast<int>(std::lround((run.snapshots.snapshots.back().t - first.t) / dt));

  RomStepper stepper(reduced, cfg.rom_config());
  const ReducedState init = project_state(first.u, first.p, basis, *run.ops);
  const auto states = rom_run(cfg.rom_strategy, stepper, init, steps);

  const fs::path dir = out.empty() ? run.dir / ("rom_" + to_string(cfg.rom_strategy)) : fs::path(out);
  fs::create_directories(dir);
  DiagnosticsRecorder recorder(run.ops->space, cfg.strategy.nu, cfg.strategy.u_ref, cfg.strategy.l_ref);
  DiagnosticsSeries series;
  std::ofstream coeffs(dir / "coefficients.csv");
  coeffs << std::setprecision(17);
  for (std::size_t n = 0; n < states.size(); ++n) {
    ReducedState s = states[n];
    s.t = first.t + static_cast<double>(n) * dt;
    auto [u, p] = expand(s, basis, run.ops->space);
    const Snapshot* ref = snapshot_at(run.snapshots, s.t);
    series.records.push_back(recorder.record(u, p, ref ? &ref->u : nullptr));
    coeffs << s.t;
    for (Eigen::Index i = 0; i < s.a_u.size(); ++i) coeffs << ',' << s.a_u[i];
    for (Eigen::Index i = 0; i < s.a_p.size(); ++i) coeffs << ',' << s.a_p[i];
    coeffs << '\n';
  }
  series.write_csv(dir / "diagnostics.csv");
  os << to_string(cfg.rom_strategy) << ": " << steps << " steps, wrote " << dir.string() << '\n';
  return 0;
}

int cmd_diag(const std::string& snapshots, const std::string& reference, const std::string& out, std::ostream& os) {
  RunDir run = open_run(snapshots);
  std::optional<RunDir> ref;
  if (!reference.empty()) ref = open_run(reference);
  DiagnosticsRecorder recorder(run.ops->space, run.cfg.strategy.nu, run.cfg.strategy.u_ref, run.cfg.strategy.l_ref);
  DiagnosticsSeries series;
  for (const auto& s : run.snapshots.snapshots) {
    std::optional<Field> r;
    if (ref) {
      if (const Snapshot* rs = snapshot_at(ref->snapshots, s.t)) {
        r = rs->u.space->mesh().hash() == run.ops->space->mesh().hash()
                ? Field::velocity(run.ops->space, rs->u.coeffs, s.t)
                : cross_mesh_project(rs->u, run.ops->space, 1e-3);
      }
    }
    series.records.push_back(recorder.record(s.u, s.p, r ? &*r : nullptr));
  }
  const fs::path path = out.empty() ? run.dir / "snapshot_diagnostics.csv" : fs::path(out);
  series.write_csv(path);
  os << "wrote " << series.records.size() << " rows to " << path.string() << '\n';
  return 0;
}

int cmd_export(const std::string& snapshots, int index, const std::string& vtk, double line_y, int points,
               const std::string& csv, std::ostream& os) {
  RunDir run = open_run(snapshots);
  const auto& set = run.snapshots.snapshots;
  if (set.empty()) throw Error("no snapshots in " + run.dir.string());
  if (index < 0) index = static_cast<int>(set.size()) - 1;
  if (index >= static_cast<int>(set.size())) throw Error("snapshot index out of range");
  const auto& s = set[static_cast<std::size_t>(index)];
  if (!vtk.empty()) {
    export_vtk(s.u, s.p, vtk);
    os << "wrote " << vtk << '\n';
  }
  if (!csv.empty()) {
    std::ofstream f(csv);
    if (!f) throw Error("cannot write " + csv);
    f << "x,speed\n" << std::setprecision(17);
    for (const auto& sample : line_sample(s.u, line_y, points)) {
      f << sample.x << ',';
      if (sample.magnitude) f << *sample.magnitude;
      f << '\n';
    }
    os << "wrote " << csv << '\n';
  }
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Filtered and variational multiscale Navier-Stokes solvers with POD reduced models", "efvms"};
  app.require_subcommand(1);

  std::string config, problem, out_path, strategy, snapshots, reference, lift, vtk, csv;
  double h = 0.0, refinement = 0.0, t_final = 0.0, line_y = 0.205;
  int r_u = -1, r_s = -1, r_p = -1, steps = -1, index = -1, points = 200;

  auto* mesh = app.add_subcommand("mesh", "Build a mesh and save it");
  mesh->add_option("--config", config, "Configuration file");
  mesh->add_option("--problem", problem, "cylinder, cavity or channel");
  mesh->add_option("--mesh-h", h, "Target element diameter");
  mesh->add_option("--refinement", refinement, "Refinement factor near the obstacle");
  mesh->add_option("--out", out_path, "Output mesh file")->required();

  auto* fom = app.add_subcommand("fom", "Run a full-order strategy");
  fom->add_option("--config", config, "Configuration file")->required();
  fom->add_option("--out", out_path, "Output directory (overrides the config)");
  fom->add_option("--strategy", strategy, "Strategy override");
  fom->add_option("--t-final", t_final, "Final time override");

  auto* pod_cmd = app.add_subcommand("pod", "Build a reduced basis from a run directory");
  pod_cmd->add_option("--snapshots", snapshots, "Run directory")->required();
  pod_cmd->add_option("--ru", r_u, "Velocity modes");
  pod_cmd->add_option("--rs", r_s, "Supremizer modes");
  pod_cmd->add_option("--rp", r_p, "Pressure modes");
  pod_cmd->add_option("--lift", lift, "stokes or first_snapshot");
  pod_cmd->add_option("--out", out_path, "Basis file");

  auto* rom = app.add_subcommand("rom", "Run a reduced trajectory");
  rom->add_option("--basis", out_path, "Basis file")->required();
  rom->add_option("--strategy", strategy, "g-rom, ef-rom, effc-rom or epfc-rom");
  rom->add_option("--steps", steps, "Number of steps (default: span of the snapshots)");
  rom->add_option("--out", reference, "Output directory");

  auto* diag = app.add_subcommand("diag", "Recompute diagnostics from snapshots");
  diag->add_option("--snapshots", snapshots, "Run directory")->required();
  diag->add_option("--reference", reference, "Reference run directory for E_u");
  diag->add_option("--out", out_path, "CSV file");

  auto* exp = app.add_subcommand("export", "Write VTK fields or line samples");
  exp->add_option("--snapshots", snapshots, "Run directory")->required();
  exp->add_option("--index", index, "Snapshot index (default: last)");
  exp->add_option("--vtk", vtk, "VTK output file");
  exp->add_option("--line-y", line_y, "Ordinate of the sample line");
  exp->add_option("--points", points, "Number of line samples");
  exp->add_option("--csv", csv, "Line sample CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*mesh) return cmd_mesh(config, problem, h, refinement, out_path, out);
    if (*fom) return cmd_fom(config, out_path, strategy, t_final, out);
    if (*pod_cmd) return cmd_pod(snapshots, r_u, r_s, r_p, lift, out_path, out);
    if (*rom) return cmd_rom(out_path, strategy, steps, reference, out);
    if (*diag) return cmd_diag(snapshots, reference, out_path, out);
    if (*exp) return cmd_export(snapshots, index, vtk, line_y, points, csv, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace efvms
