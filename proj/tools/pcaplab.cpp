// pcaplab: numerical laboratory for p-capacitary potentials of convex
// bodies. `pcaplab run <config.json>` drives the verification scenarios;
// the other subcommands are direct utilities around single solves.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pcap/kernels.hpp"
#include "pcap/lab.hpp"
#include "pcap/level_set.hpp"
#include "pcap/parallel.hpp"

namespace {

using pcap::Json;
namespace lab = pcap::lab;

struct CommonOpts {
  int n = 2;
  double p = 1.5;
  double half_width = 8.0;
  int cells = 512;
  std::string out_dir = "out";
  int workers = 1;
  std::uint64_t seed = 0;
  std::string farfield = "asymptotic";
  std::string simd = "auto";
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--n", o.n, "space dimension (2 or 3)");
  cmd->add_option("--p", o.p, "p-Laplace exponent, 1 < p < n");
  cmd->add_option("--half-width", o.half_width, "truncation box half-width");
  cmd->add_option("--grid", o.cells, "grid cells per axis");
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--workers", o.workers, "max concurrent solves");
  cmd->add_option("--seed", o.seed, "rng seed for sampled checks");
  cmd->add_option("--farfield", o.farfield,
                  "truncation data: asymptotic | zero");
  cmd->add_option("--simd", o.simd, "kernel lane: auto | scalar | avx2");
}

void apply_simd(const std::string& simd) {
  if (simd == "scalar") {
    pcap::kern::set_simd_mode(pcap::kern::SimdMode::Scalar);
  } else if (simd == "avx2") {
    pcap::kern::set_simd_mode(pcap::kern::SimdMode::Avx2);
  } else if (simd == "auto") {
    pcap::kern::set_simd_mode(pcap::kern::SimdMode::Auto);
  } else {
    throw lab::ConfigError("--simd must be auto, scalar or avx2");
  }
}

lab::ExperimentConfig base_config(const CommonOpts& o,
                                  const std::vector<std::string>& bodies,
                                  const std::string& scenario) {
  lab::ExperimentConfig cfg;
  cfg.n = o.n;
  cfg.p = o.p;
  cfg.scenario = scenario;
  cfg.half_width = o.half_width;
  cfg.cells = o.cells;
  cfg.out_dir = o.out_dir;
  cfg.workers = o.workers;
  cfg.seed = o.seed;
  if (o.farfield == "zero") {
    cfg.farfield_mode = pcap::FarfieldMode::ZeroDirichlet;
  } else if (o.farfield != "asymptotic") {
    throw lab::ConfigError("--farfield must be asymptotic or zero");
  }
  for (const std::string& b : bodies) {
    cfg.bodies.push_back(lab::BodyConfig::from_shorthand(b));
  }
  cfg.params();  // validate n, p
  return cfg;
}

// Direct single-solve helpers shared by solve/capacity/concavity/levelsets.
struct SolveBundle {
  lab::ExperimentConfig cfg;
  std::shared_ptr<const pcap::DirectionGrid> dirs;
  pcap::ConvexBody body;
  pcap::SolverConfig solver_cfg;
  pcap::SolveReport report;
};

SolveBundle run_single_solve(const CommonOpts& o,
                             const std::vector<std::string>& bodies) {
  if (bodies.size() != 1) {
    throw lab::ConfigError("expected exactly one --body");
  }
  SolveBundle sb{base_config(o, bodies, "solve"), nullptr, {}, {}, {}};
  sb.dirs = pcap::make_direction_grid(sb.cfg.n, sb.cfg.dirs_count);
  sb.body = sb.cfg.bodies[0].build(sb.dirs);
  sb.solver_cfg = sb.cfg.solver_proto();
  const pcap::Vec c = pcap::support_center(sb.body);
  const double hw = std::max(sb.cfg.half_width,
                             5.2 * pcap::circumradius(sb.body, c));
  sb.solver_cfg.grid =
      pcap::make_grid_centered(sb.cfg.n, c, hw, sb.cfg.cells);
  sb.report = pcap::solve_exterior(sb.body, sb.solver_cfg);
  return sb;
}

void write_json_out(const std::string& out_dir, const std::string& name,
                    const Json& j) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  pcap::write_text_file((fs::path(out_dir) / name).string(), j.dump(2) + "\n");
}

Json solve_summary(const SolveBundle& sb) {
  const pcap::SolveReport& r = sb.report;
  Json j;
  j["n"] = sb.cfg.n;
  j["p"] = sb.cfg.p;
  j["body"] = sb.cfg.bodies[0].to_json();
  j["grid"] = Json{{"half_width",
                    0.5 * (r.field.grid.hi[0] - r.field.grid.lo[0])},
                   {"cells", r.field.grid.cells[0]},
                   {"spacing", r.field.grid.spacing()}};
  j["energy"] = r.energy;
  j["residual"] = r.residual;
  j["picard_iterations"] = r.picard_iterations;
  j["outer_iterations"] = r.outer_iterations;
  j["cg_iterations"] = r.cg_iterations;
  j["farfield_coeff"] = r.farfield_coeff;
  j["farfield_residual"] = r.farfield_residual;
  j["converged"] = r.converged;
  return j;
}

int cmd_solve(const CommonOpts& o, const std::vector<std::string>& bodies,
              bool dump_field) {
  const SolveBundle sb = run_single_solve(o, bodies);
  Json j = solve_summary(sb);
  write_json_out(o.out_dir, "solve.json", j);
  if (dump_field) {
    const auto& f = sb.report.field;
    std::vector<std::vector<double>> rows;
    const int nx = f.grid.nx(), ny = f.grid.ny(), nz = f.grid.nz();
    for (int k = 0; k < nz; ++k) {
      for (int jj = 0; jj < ny; ++jj) {
        for (int i = 0; i < nx; ++i) {
          const pcap::Vec x = f.grid.node_pos(i, jj, k);
          const std::size_t id = f.grid.node_index(i, jj, k);
          rows.push_back({x[0], x[1], x[2], f.values[id],
                          static_cast<double>(f.mask[id])});
        }
      }
    }
    pcap::write_csv(
        (std::filesystem::path(o.out_dir) / "field.csv").string(),
        {"x", "y", "z", "u", "mask"}, rows);
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_capacity(const CommonOpts& o, const std::vector<std::string>& bodies) {
  const SolveBundle sb = run_single_solve(o, bodies);
  const pcap::Params mp = sb.cfg.params();
  const auto energy = pcap::capacity_energy(sb.report, mp);
  const auto asym = pcap::capacity_asymptotic(sb.report, mp);
  Json j = solve_summary(sb);
  j["capacity"] = Json::object();
  j["capacity"]["energy"] = Json{{"value", energy.value},
                                 {"error_indicator", energy.error_indicator},
                                 {"reliable", energy.reliable}};
  j["capacity"]["asymptotic"] = Json{{"value", asym.value},
                                     {"error_indicator", asym.error_indicator},
                                     {"reliable", asym.reliable}};
  if (sb.cfg.bodies[0].kind == lab::BodyConfig::Kind::Ball) {
    const auto exact = pcap::capacity_ball_exact(sb.cfg.bodies[0].radius, mp);
    j["capacity"]["exact_ball"] = Json{{"value", exact.value}};
  }
  write_json_out(o.out_dir, "capacity.json", j);
  std::cout << j["capacity"].dump(2) << "\n";
  return 0;
}

int cmd_concavity(const CommonOpts& o, const std::vector<std::string>& bodies,
                  int pairs) {
  const SolveBundle sb = run_single_solve(o, bodies);
  const pcap::Params mp = sb.cfg.params();
  const auto pw =
      pcap::concavity_number_pointwise(sb.report.field, *sb.dirs, 1e-3, 3);
  Json j = solve_summary(sb);
  j["alpha_star"] = mp.alpha_star;
  j["alpha_pointwise"] = pw.alpha;
  j["pointwise_excluded_fraction"] = pw.excluded_fraction;
  try {
    const auto tg = sb.cfg.effective_support_levels();
    const auto sm = pcap::support_matrix(sb.report.field, tg, sb.dirs);
    const auto sup = pcap::alpha_from_support(sm);
    j["alpha_support"] = sup.alpha;
  } catch (const std::exception& ex) {
    j["alpha_support_error"] = ex.what();
  }
  const auto mid = pcap::midpoint_concavity_test(sb.report.field,
                                                 mp.alpha_star, pairs, o.seed);
  j["midpoint_at_alpha_star"] = Json{{"worst_violation", mid.worst_violation},
                                     {"pairs_evaluated", mid.pairs_evaluated},
                                     {"passed", mid.passed}};
  write_json_out(o.out_dir, "concavity.json", j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_levelsets(const CommonOpts& o, const std::vector<std::string>& bodies,
                  std::vector<double> levels) {
  const SolveBundle sb = run_single_solve(o, bodies);
  const pcap::Params mp = sb.cfg.params();
  if (levels.empty()) levels = {0.2, 0.4, 0.6, 0.8};
  Json j = solve_summary(sb);
  Json out_levels = Json::array();
  std::vector<double> ok_levels;
  std::vector<pcap::ConvexBody> ok_bodies;
  for (double t : levels) {
    Json ej;
    ej["t"] = t;
    try {
      pcap::ConvexBody b = pcap::level_set_extract(sb.report.field, t, sb.dirs);
      ej["diameter"] = pcap::diameter(b);
      ok_levels.push_back(t);
      ok_bodies.push_back(std::move(b));
    } catch (const std::exception& ex) {
      ej["skipped"] = ex.what();
    }
    out_levels.push_back(ej);
  }
  j["levels"] = out_levels;
  Json fits = Json::array();
  std::vector<std::vector<double>> rows;
  for (std::size_t a = 0; a < ok_bodies.size(); ++a) {
    for (std::size_t b = a + 1; b < ok_bodies.size(); ++b) {
      const auto fit = pcap::homothety_fit(ok_bodies[b], ok_bodies[a]);
      const double rel =
          fit.residual / std::max(pcap::diameter(ok_bodies[a]), 1e-300);
      const double law =
          (ok_levels[a] / ok_levels[b]) * std::pow(fit.rho, mp.q_rad);
      fits.push_back(Json{{"t_low", ok_levels[a]},
                          {"t_high", ok_levels[b]},
                          {"rho", fit.rho},
                          {"residual", fit.residual},
                          {"rel_residual", rel},
                          {"ratio_law_err", std::abs(law - 1.0)}});
      rows.push_back({ok_levels[a], ok_levels[b], fit.rho, fit.residual, rel,
                      std::abs(law - 1.0)});
    }
  }
  j["pairwise_homothety"] = fits;
  write_json_out(o.out_dir, "levelsets.json", j);
  pcap::write_csv((std::filesystem::path(o.out_dir) / "levels.csv").string(),
                  {"t_low", "t_high", "rho", "residual", "rel_residual",
                   "ratio_law_err"},
                  rows);
  std::cout << j["pairwise_homothety"].dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"p-capacitary potential laboratory"};
  app.require_subcommand(1);

  // run
  std::string config_path;
  std::string run_scenario_name;
  std::vector<std::string> run_bodies;
  CommonOpts run_opts;
  bool run_plots = false;
  CLI::App* run = app.add_subcommand("run", "run a scenario from a config");
  run->add_option("config", config_path, "scenario config JSON");
  run->add_option("--scenario", run_scenario_name,
                  "scenario name (alternative to a config file)");
  run->add_option("--bodies", run_bodies,
                  "comma-separated body shorthands for --scenario")
      ->delimiter(',');
  run->add_flag("--plots", run_plots, "emit SVG plots");
  add_common(run, run_opts);

  // direct utilities
  CommonOpts solve_opts, cap_opts, conc_opts, bm_opts, lvl_opts;
  std::vector<std::string> solve_bodies, cap_bodies, conc_bodies, bm_bodies,
      lvl_bodies;
  bool dump_field = false;
  int midpoint_pairs = 2000;
  std::vector<double> lvl_levels;
  std::vector<double> bm_lambdas;

  CLI::App* solve = app.add_subcommand("solve", "single exterior solve");
  solve->add_option("--body", solve_bodies, "body shorthand")->delimiter(',');
  solve->add_flag("--field", dump_field, "write the full field as CSV");
  add_common(solve, solve_opts);

  CLI::App* capacity = app.add_subcommand("capacity", "capacity estimators");
  capacity->add_option("--body", cap_bodies, "body shorthand")->delimiter(',');
  add_common(capacity, cap_opts);

  CLI::App* concavity =
      app.add_subcommand("concavity", "concavity number estimators");
  concavity->add_option("--body", conc_bodies, "body shorthand")
      ->delimiter(',');
  concavity->add_option("--pairs", midpoint_pairs, "midpoint test pairs");
  add_common(concavity, conc_opts);

  CLI::App* bm = app.add_subcommand("bm", "Brunn-Minkowski deficit sweep");
  bm->add_option("--bodies", bm_bodies, "two body shorthands")->delimiter(',');
  bm->add_option("--lambdas", bm_lambdas, "lambda sweep")->delimiter(',');
  add_common(bm, bm_opts);

  CLI::App* levelsets =
      app.add_subcommand("levelsets", "level-set extraction + homothety");
  levelsets->add_option("--body", lvl_bodies, "body shorthand")
      ->delimiter(',');
  levelsets->add_option("--levels", lvl_levels, "levels in (0,1)")
      ->delimiter(',');
  add_common(levelsets, lvl_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      apply_simd(run_opts.simd);
      lab::ExperimentConfig cfg;
      if (!config_path.empty()) {
        lab::CliOverrides ov;
        if (run->count("--out")) ov.out_dir = run_opts.out_dir;
        if (run->count("--workers")) ov.workers = run_opts.workers;
        if (run->count("--seed")) ov.seed = run_opts.seed;
        if (run->count("--grid")) ov.cells = run_opts.cells;
        if (run_plots) ov.plots = true;
        cfg = lab::load_config(config_path, ov);
      } else if (!run_scenario_name.empty()) {
        cfg = base_config(run_opts, run_bodies, run_scenario_name);
        cfg.plots = run_plots;
      } else {
        throw lab::ConfigError("run: provide a config file or --scenario");
      }
      return lab::run_config(cfg);
    }
    if (solve->parsed()) {
      apply_simd(solve_opts.simd);
      return cmd_solve(solve_opts, solve_bodies, dump_field);
    }
    if (capacity->parsed()) {
      apply_simd(cap_opts.simd);
      return cmd_capacity(cap_opts, cap_bodies);
    }
    if (concavity->parsed()) {
      apply_simd(conc_opts.simd);
      return cmd_concavity(conc_opts, conc_bodies, midpoint_pairs);
    }
    if (bm->parsed()) {
      apply_simd(bm_opts.simd);
      lab::ExperimentConfig cfg = base_config(bm_opts, bm_bodies, "bm");
      if (!bm_lambdas.empty()) cfg.lambdas = bm_lambdas;
      return lab::run_config(cfg);
    }
    if (levelsets->parsed()) {
      apply_simd(lvl_opts.simd);
      return cmd_levelsets(lvl_opts, lvl_bodies, lvl_levels);
    }
  } catch (const lab::ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return 3;
  } catch (const pcap::SolveError& ex) {
    std::cerr << "solver failure: " << ex.what() << "\n";
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 3;
}
