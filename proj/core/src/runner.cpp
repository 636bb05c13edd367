#include "sweep/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "sweep/csv.hpp"

namespace sweep {

namespace {

std::string summary_csv(const SolveResult& sr) {
  char buf[256];
  std::string out = "objective,kkt_residual,max_constraint_violation,iterations,status\n";
  const char* st = sr.status == SolveStatus::Converged
                       ? "converged"
                       : (sr.status == SolveStatus::MaxIter ? "max-iter" : "infeasible");
  std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%d,%s\n", sr.objective, sr.kkt_residual,
                sr.max_constraint_violation, sr.iterations, st);
  return out + buf;
}

std::vector<Vec> const_nodes(const Vec& v, int k) {
  return std::vector<Vec>(static_cast<size_t>(k) + 1, v);
}

}  // namespace

int run(const ModelConfig& cfg_in, const std::string& command, const RunOverrides& ov,
        std::string* out_dir_ptr) {
  ModelConfig cfg = cfg_in;
  if (ov.k_override > 1) cfg.k = ov.k_override;
  if (!ov.variant_override.empty()) cfg.variant = ov.variant_override;
  if (!ov.case_override.empty()) cfg.case_name = ov.case_override;
  if (ov.tol_override > 0.0) cfg.tol = ov.tol_override;

  Model mdl = instantiate(cfg);
  const std::string dir = make_output_dir(ov.out_parent, mdl.name + "-" + command, ov.out_exact);
  if (out_dir_ptr) *out_dir_ptr = dir;
  namespace fs = std::filesystem;

  write_file((fs::path(dir) / "config.json").string(), config_to_json(cfg));

  if (command == "simulate") {
    std::vector<Vec> u, a;
    if (mdl.has_analytic) {
      DiscreteTrajectory s = mdl.analytic.sample(mdl.spec, cfg.k);
      u = s.u;
      a = s.a;
    } else {
      if (mdl.default_u_init.size() == 0 || mdl.default_a_init.size() == 0)
        throw ConfigError("simulate: custom model requires u_init and a_init");
      u = const_nodes(mdl.default_u_init, cfg.k);
      a = const_nodes(mdl.default_a_init, cfg.k);
    }
    DiscreteTrajectory traj = integrate(mdl.spec, u, a, cfg.k);
    write_file((fs::path(dir) / "trajectory.csv").string(), trajectory_csv(traj));
    std::cout << "simulate: wrote " << dir << "/trajectory.csv\n";
    return 0;
  }

  if (command == "solve") {
    std::optional<ReferencePath> ref;
    if (mdl.solve_with_reference && mdl.has_analytic) ref = mdl.analytic.path;
    DiscreteProblem pb = build_pk(mdl.spec, mdl.cost, cfg.k, ref, cfg.epsilon_loc, cfg.mu);
    if (mdl.default_u_init.size() == 0 || mdl.default_a_init.size() == 0)
      throw ConfigError("solve: model provides no initial controls");
    SolveResult sr = solve(pb, const_nodes(mdl.default_u_init, cfg.k),
                           const_nodes(mdl.default_a_init, cfg.k), cfg.solver);
    write_file((fs::path(dir) / "trajectory.csv").string(), trajectory_csv(sr.trajectory));
    write_file((fs::path(dir) / "summary.csv").string(), summary_csv(sr));
    std::cout << "solve: objective " << sr.objective << ", status "
              << (sr.status == SolveStatus::Converged ? "converged" : "not-converged") << "\n";
    return sr.status == SolveStatus::Infeasible ? 2 : 0;
  }

  if (command == "check") {
    if (!mdl.has_analytic)
      throw ConfigError("check: requires a builtin model with an analytic solution");
    CheckOptions copt;
    copt.tol_scale = cfg.tol;
    DiscreteTrajectory traj = mdl.analytic.sample(mdl.spec, cfg.k);
    DiscreteProblem pb = build_pk(mdl.spec, mdl.cost, cfg.k);
    DualSystem du = reconstruct_duals(traj, pb, 1.0, copt);
    ConditionReport disc = check_discrete(traj, du, pb, copt);
    write_file((fs::path(dir) / "report_discrete.txt").string(), disc.to_text());
    write_file((fs::path(dir) / "report_discrete.csv").string(), disc.to_csv());
    bool ok = disc.overall;
    std::cout << "discrete conditions: " << (disc.overall ? "pass" : "FAIL") << "\n";
    if (cfg.k >= 100) {
      ConditionReport cont = check_continuous(traj, du, mdl.spec, mdl.cost, copt);
      write_file((fs::path(dir) / "report_continuous.txt").string(), cont.to_text());
      write_file((fs::path(dir) / "report_continuous.csv").string(), cont.to_csv());
      std::cout << "continuous conditions: " << (cont.overall ? "pass" : "FAIL") << "\n";
      ok = ok && cont.overall;
    }
    return ok ? 0 : 1;
  }

  if (command == "converge") {
    if (!mdl.has_analytic)
      throw ConfigError("converge: requires a builtin model with an analytic solution");
    std::vector<Vec> u0{mdl.default_u_init};
    std::vector<Vec> a0{mdl.default_a_init};
    auto rows = convergence_study(mdl.spec, mdl.cost, cfg.k_list, mdl.analytic.path,
                                  mdl.analytic.objective, u0, a0, cfg.solver);
    write_file((fs::path(dir) / "convergence.csv").string(), convergence_csv(rows));
    std::cout << "converge: wrote " << dir << "/convergence.csv\n";
    return 0;
  }

  throw ConfigError("run: unknown command '" + command + "'");
}

}  // namespace sweep
