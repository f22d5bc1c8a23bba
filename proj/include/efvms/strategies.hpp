#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "efvms/diagnostics.hpp"
#include "efvms/evolve.hpp"
#include "efvms/filters.hpp"

namespace efvms {

enum class Strategy { Unfiltered, EF, EFR, EFFC, EPFC, DiffCorrect };

std::string to_string(Strategy s);
/// Accepts the names produced by to_string, case-insensitively.
Strategy strategy_from_string(const std::string& name);

struct StrategyConfig {
  Strategy strategy = Strategy::Unfiltered;
  double nu = 1e-4;
  double dt = 4e-4;
  double t_final = 4.0;
  double delta = 1.59e-3;
  double delta1 = 1.59e-3;
  double delta2 = 1.59e-3;
  double chi = 4e-4;
  double gamma_d = 100.0;
  double gamma_p = 0.01;
  CoarseSpace::Kind coarse = CoarseSpace::Kind::NestedP1;
  /// Newton and Smagorinsky settings; ν and Δt are taken from the fields above.
  EvolveConfig evolve;
  /// Reference scales of the force coefficients.
  double u_ref = 1.0;
  double l_ref = 0.1;
  int n_snapshots = 1000;
  /// 0 selects max(1, round(N_T / n_snapshots)).
  int snapshot_stride = 0;

  void validate() const;
  int n_steps() const;
  int stride() const;
  EvolveConfig evolve_config() const;
};

nlohmann::json to_json(const StrategyConfig& cfg);
StrategyConfig strategy_config_from_json(const nlohmann::json& j);

struct Snapshot {
  double t = 0.0;
  Field u;
  Field p;
};

struct SnapshotSet {
  std::vector<Snapshot> snapshots;
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t size() const { return snapshots.size(); }
  /// Throws unless times increase strictly and all fields share one space.
  void check() const;
};

/// Flow problem: space operators, Dirichlet data and initial state.
struct Problem {
  OperatorsPtr ops;
  BoundaryData bc;
  Field u0;
  Field p0;

  /// Zero initial velocity and pressure.
  static Problem at_rest(OperatorsPtr ops, BoundaryData bc);
};

struct RunResult {
  SnapshotSet snapshots;
  DiagnosticsSeries diagnostics;
  Field u;
  Field p;
};

using StepObserver = std::function<void(int step, const Field& u, const Field& p)>;

/// Advances one strategy step at a time; holds the Newton stepper and the
/// filter factorizations for the whole run.
class StrategyRunner {
 public:
  StrategyRunner(StrategyConfig cfg, Problem problem);

  const StrategyConfig& config() const { return cfg_; }
  const FilterBank& filters() const { return filters_; }
  const CoarseSpace& coarse() const { return coarse_; }

  /// Evolve to t_next, then apply the configured filter/correction to w.
  std::pair<Field, Field> step(const Field& u, const Field& p, double t_next);
  /// Post-evolve part of a step.
  Field postprocess(const Field& w) const;

  RunResult run(const StepObserver& observer = {});

 private:
  StrategyConfig cfg_;
  Problem problem_;
  Evolver evolver_;
  FilterBank filters_;
  CoarseSpace coarse_;
};

RunResult run(const StrategyConfig& cfg, const Problem& problem, const StepObserver& observer = {});
RunResult run_ef(const StrategyConfig& cfg, const Problem& problem);
RunResult run_efr(const StrategyConfig& cfg, const Problem& problem);
RunResult run_effc(const StrategyConfig& cfg, const Problem& problem);
RunResult run_epfc(const StrategyConfig& cfg, const Problem& problem);
RunResult run_diffcorrect(const StrategyConfig& cfg, const Problem& problem);

}  // namespace efvms
