#include "efvms/strategies.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "efvms/errors.hpp"

namespace efvms {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Unfiltered:
      return "unfiltered";
    case Strategy::EF:
      return "ef";
    case Strategy::EFR:
      return "efr";
    case Strategy::EFFC:
      return "effc";
    case Strategy::EPFC:
      return "epfc";
    case Strategy::DiffCorrect:
      return "diffcorrect";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Strategy s : {Strategy::Unfiltered, Strategy::EF, Strategy::EFR, Strategy::EFFC, Strategy::EPFC,
                     Strategy::DiffCorrect}) {
    if (to_string(s) == n) return s;
  }
  if (n == "vms-effc") return Strategy::EFFC;
  if (n == "vms-epfc") return Strategy::EPFC;
  throw ConfigError("unknown strategy '" + name + "'");
}

void StrategyConfig::validate() const {
  if (!(nu > 0.0)) throw ConfigError("viscosity must be positive");
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (!(t_final > 0.0)) throw ConfigError("final time must be positive");
  if (delta < 0.0 || delta1 < 0.0 || delta2 < 0.0) throw ConfigError("filter radii must be non-negative");
  if (chi < 0.0 || chi > 1.0) throw ConfigError("relaxation parameter must lie in [0, 1]");
  if (gamma_d < 0.0 || gamma_p < 0.0) throw ConfigError("grad-div penalties must be non-negative");
  if (!(u_ref > 0.0) || !(l_ref > 0.0)) throw ConfigError("reference scales must be positive");
  if (n_snapshots < 1) throw ConfigError("snapshot count must be positive");
  if (snapshot_stride < 0) throw ConfigError("snapshot stride must be non-negative");
  const double n = std::round(t_final / dt);
  if (std::abs(n * dt - t_final) > 1e-12 * std::max(1.0, t_final)) {
    throw ConfigError("final time is not an integer multiple of the time step");
  }
  evolve_config().validate();
}

int StrategyConfig::n_steps() const { return static_cast<int>(std::lround(t_final / dt)); }

int StrategyConfig::stride() const {
  if (snapshot_stride > 0) return snapshot_stride;
  return std::max(1, static_cast<int>(std::lround(static_cast<double>(n_steps()) / n_snapshots)));
}

EvolveConfig StrategyConfig::evolve_config() const {
  EvolveConfig e = evolve;
  e.nu = nu;
  e.dt = dt;
  return e;
}

nlohmann::json to_json(const StrategyConfig& c) {
  return {{"strategy", to_string(c.strategy)},
          {"nu", c.nu},
          {"dt", c.dt},
          {"t_final", c.t_final},
          {"delta", c.delta},
          {"delta1", c.delta1},
          {"delta2", c.delta2},
          {"chi", c.chi},
          {"gamma_d", c.gamma_d},
          {"gamma_p", c.gamma_p},
          {"coarse", c.coarse == CoarseSpace::Kind::NestedP1 ? "nested_p1" : "fine"},
          {"newton_tol", c.evolve.newton_tol},
          {"newton_max_iter", c.evolve.newton_max_iter},
          {"smagorinsky", c.evolve.smagorinsky_enabled},
          {"c_s", c.evolve.c_s},
          {"u_ref", c.u_ref},
          {"l_ref", c.l_ref},
          {"n_snapshots", c.n_snapshots},
          {"snapshot_stride", c.snapshot_stride}};
}

StrategyConfig strategy_config_from_json(const nlohmann::json& j) {
  StrategyConfig c;
  c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  c.nu = j.at("nu").get<double>();
  c.dt = j.at("dt").get<double>();
  c.t_final = j.at("t_final").get<double>();
  c.delta = j.at("delta").get<double>();
  c.delta1 = j.at("delta1").get<double>();
  c.delta2 = j.at("delta2").get<double>();
  c.chi = j.at("chi").get<double>();
  c.gamma_d = j.at("gamma_d").get<double>();
  c.gamma_p = j.at("gamma_p").get<double>();
  c.coarse = j.at("coarse").get<std::string>() == "fine" ? CoarseSpace::Kind::Fine : CoarseSpace::Kind::NestedP1;
  c.evolve.newton_tol = j.at("newton_tol").get<double>();
  c.evolve.newton_max_iter = j.at("newton_max_iter").get<int>();
  c.evolve.smagorinsky_enabled = j.at("smagorinsky").get<bool>();
  c.evolve.c_s = j.at("c_s").get<double>();
  c.u_ref = j.at("u_ref").get<double>();
  c.l_ref = j.at("l_ref").get<double>();
  c.n_snapshots = j.at("n_snapshots").get<int>();
  c.snapshot_stride = j.at("snapshot_stride").get<int>();
  return c;
}

void SnapshotSet::check() const {
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    const auto& s = snapshots[i];
    s.u.check();
    s.p.check();
    if (s.u.space != snapshots.front().u.space || s.p.space != snapshots.front().u.space) {
      throw Error("snapshot " + std::to_string(i) + " lives on a different space");
    }
    if (i > 0 && !(s.t > snapshots[i - 1].t)) throw Error("snapshot times must increase strictly");
  }
}

Problem Problem::at_rest(OperatorsPtr ops, BoundaryData bc) {
  Problem p{ops, std::move(bc), Field::zeros(ops->space, FieldKind::Velocity),
            Field::zeros(ops->space, FieldKind::Pressure)};
  return p;
}

StrategyRunner::StrategyRunner(StrategyConfig cfg, Problem problem)
    : cfg_(std::move(cfg)),
      problem_(std::move(problem)),
      evolver_((cfg_.validate(), problem_.ops), cfg_.evolve_config()),
      filters_(problem_.ops),
      coarse_(problem_.ops, cfg_.coarse) {
  if (cfg_.evolve.smagorinsky_enabled) {
    EvolveConfig e = cfg_.evolve_config();
    e.small_scale = coarse_.small_scale_operator();
    evolver_ = Evolver(problem_.ops, e);
  }
}

Field StrategyRunner::postprocess(const Field& w) const {
  const auto& c = cfg_;
  switch (c.strategy) {
    case Strategy::Unfiltered:
      return w;
    case Strategy::EF:
      return filters_.differential(w, c.delta, c.gamma_d, FilterBC::MatchDirichlet);
    case Strategy::EFR: {
      const Field f = filters_.differential(w, c.delta, c.gamma_d, FilterBC::MatchDirichlet);
      return Field::velocity(w.space, (1.0 - c.chi) * w.coeffs + c.chi * f.coeffs, w.time);
    }
    case Strategy::EFFC: {
      const Field large = filters_.differential(w, c.delta1, c.gamma_d, FilterBC::MatchDirichlet);
      const Field small = small_scales(w, large);
      const Field small_f = filters_.differential(small, c.delta2, c.gamma_d, FilterBC::Homogeneous);
      return Field::velocity(w.space, large.coeffs + small_f.coeffs, w.time);
    }
    case Strategy::EPFC: {
      const Field large = coarse_.l2_projection(w, c.gamma_p);
      const Field small = small_scales(w, large);
      const Field small_f = filters_.differential(small, c.delta, c.gamma_d, FilterBC::Homogeneous);
      return Field::velocity(w.space, large.coeffs + small_f.coeffs, w.time);
    }
    case Strategy::DiffCorrect: {
      const Field tilde = coarse_.l2_projection(w, c.gamma_p);
      const Field fw = filters_.differential(w, c.delta, c.gamma_d, FilterBC::MatchDirichlet);
      const Field ft = filters_.differential(tilde, c.delta, c.gamma_d, FilterBC::MatchDirichlet);
      return Field::velocity(w.space, tilde.coeffs + (fw.coeffs - ft.coeffs), w.time);
    }
  }
  throw Error("unknown strategy");
}

std::pair<Field, Field> StrategyRunner::step(const Field& u, const Field& p, double t_next) {
  auto r = evolver_.step(u, p, problem_.bc, t_next);
  return {postprocess(r.w), std::move(r.p)};
}

RunResult StrategyRunner::run(const StepObserver& observer) {
  const int n = cfg_.n_steps();
  const int stride = cfg_.stride();
  const auto& space = problem_.ops->space;
  DiagnosticsRecorder recorder(space, cfg_.nu, cfg_.u_ref, cfg_.l_ref);
  RunResult out;
  out.snapshots.provenance = {{"config", to_json(cfg_)}, {"mesh_hash", space->mesh().hash()}};
  Field u = problem_.u0;
  Field p = problem_.p0;
  u.time = p.time = 0.0;
  out.diagnostics.records.push_back(recorder.record(u, p));
  if (observer) observer(0, u, p);
  for (int step = 1; step <= n; ++step) {
    const double t = step * cfg_.dt;
    try {
      std::tie(u, p) = this->step(u, p, t);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("step " + std::to_string(step) + " (t = " + std::to_string(t) + "): " + e.what(),
                             e.residual());
    }
    out.diagnostics.records.push_back(recorder.record(u, p));
    if (!std::isfinite(out.diagnostics.records.back().energy)) {
      throw Error("step " + std::to_string(step) + ": velocity is no longer finite");
    }
    if (step % stride == 0) out.snapshots.snapshots.push_back({t, u, p});
    if (observer) observer(step, u, p);
  }
  out.u = std::move(u);
  out.p = std::move(p);
  return out;
}

RunResult run(const StrategyConfig& cfg, const Problem& problem, const StepObserver& observer) {
  return StrategyRunner(cfg, problem).run(observer);
}

namespace {

RunResult run_checked(const StrategyConfig& cfg, const Problem& problem, Strategy expected) {
  if (cfg.strategy != expected) throw ConfigError("configuration selects strategy " + to_string(cfg.strategy));
  return run(cfg, problem);
}

}  // namespace

RunResult run_ef(const StrategyConfig& cfg, const Problem& problem) { return run_checked(cfg, problem, Strategy::EF); }
RunResult run_efr(const StrategyConfig& cfg, const Problem& problem) { return run_checked(cfg, problem, Strategy::EFR); }
RunResult run_effc(const StrategyConfig& cfg, const Problem& problem) {
  return run_checked(cfg, problem, Strategy::EFFC);
}
RunResult run_epfc(const StrategyConfig& cfg, const Problem& problem) {
  return run_checked(cfg, problem, Strategy::EPFC);
}
RunResult run_diffcorrect(const StrategyConfig& cfg, const Problem& problem) {
  return run_checked(cfg, problem, Strategy::DiffCorrect);
}

}  // namespace efvms
