// szc: optimal barrier-insertion protocols for a single-particle box.
//
// Subcommands: spectrum, evolve, sweep, crab, dqn, ddpg, interp.
// Exit codes: 0 success, 2 usage error, 3 domain/validation error,
// 4 numerical-convergence failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "szc/agents.hpp"
#include "szc/crab.hpp"
#include "szc/dynamics.hpp"
#include "szc/errors.hpp"
#include "szc/io_formats.hpp"
#include "szc/spectrum.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace szc;

namespace {

struct CommonArgs {
  std::string out_dir = ".";
  std::string tier = "report";
  int n_micro = 0;   // override when > 0
  int n_basis = 0;   // override when > 0
  double box_width = 1.0;
  int jobs = 0;  // 0: hardware concurrency
};

PropagateOptions tier_options(const CommonArgs& c, double duration) {
  PropagateOptions o = c.tier == "train" ? train_fidelity(duration) : report_fidelity(duration);
  if (c.n_micro > 0) o.n_micro = c.n_micro;
  if (c.n_basis > 0) o.n_basis = c.n_basis;
  return o;
}

void add_common(CLI::App* cmd, CommonArgs& c, bool with_tier = true) {
  cmd->add_option("--out-dir", c.out_dir, "artifact directory")->capture_default_str();
  cmd->add_option("--L", c.box_width, "box width")->capture_default_str();
  if (with_tier) {
    cmd->add_option("--tier", c.tier, "fidelity tier: train (coarse) or report (fine)")
        ->check(CLI::IsMember({"train", "report"}))
        ->capture_default_str();
    cmd->add_option("--n-micro", c.n_micro, "micro-step override (0: tier default)");
    cmd->add_option("--n-basis", c.n_basis, "basis-size override (0: tier default)");
    cmd->add_option("--jobs", c.jobs, "worker threads (0: all cores)")->capture_default_str();
  }
}

// Seed resolution: flag/config value, overridden by SZC_SEED when set.
std::uint64_t resolve_seed(std::uint64_t seed) {
  if (const char* env = std::getenv("SZC_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      throw std::domain_error("SZC_SEED is not an integer");
    }
  }
  return seed;
}

void write_config_snapshot(const fs::path& dir, const std::string& subcommand, const json& opts) {
  json j;
  j["format_version"] = 1;
  j["subcommand"] = subcommand;
  j["options"] = opts;
  write_text_file(dir / "config.json", j.dump(2) + "\n");
}

json propagate_options_json(const PropagateOptions& o) {
  return {{"n_micro", o.n_micro},
          {"n_basis", o.n_basis},
          {"solver_tol", o.solver_tol},
          {"norm_tolerance", o.norm_tolerance}};
}

json training_config_json(const TrainingConfig& c, const PropagateOptions& train_opts,
                          const PropagateOptions& report_opts) {
  return {{"T", c.duration},
          {"n_steps", c.n_steps},
          {"alpha_max", c.alpha_max},
          {"sigma", c.sigma},
          {"gamma", c.gamma},
          {"learning_rate", c.learning_rate},
          {"tau", c.tau},
          {"episodes", c.episodes},
          {"eps_initial", c.eps_initial},
          {"eps_final", c.eps_final},
          {"eps_anneal_fraction", c.eps_anneal_fraction},
          {"batch_size", c.batch_size},
          {"replay_capacity", c.replay_capacity},
          {"warmup_experiences", c.warmup_experiences},
          {"eval_every", c.eval_every},
          {"asymmetries", c.asymmetries},
          {"seed", c.seed},
          {"L", c.geometry.box_width},
          {"action_bound", c.action_bound},
          {"noise_sigma_initial", c.noise_sigma_initial},
          {"noise_sigma_final", c.noise_sigma_final},
          {"train_propagate", propagate_options_json(train_opts)},
          {"report_propagate", propagate_options_json(report_opts)}};
}

json train_result_json(const TrainResult& r) {
  json occ = json::array();
  for (Eigen::Index i = 0; i < r.report_occupations.size(); ++i)
    occ.push_back(r.report_occupations[i]);
  return {{"best_score_train_fidelity", r.best_score},
          {"report_cost", r.report_cost},
          {"report_terminal_reward", r.report_terminal_reward},
          {"report_occupations", std::move(occ)},
          {"discarded_episodes", r.discarded_episodes}};
}

// Shared argument block and artifact emission for the two agents.
struct AgentArgs {
  CommonArgs common;
  TrainingConfig config;
  double d_single = -1.0;
  double d_min = -1.0, d_max = -1.0;
  int n_asym = 10;
  double sweep_min = 0.01, sweep_max = 0.1;
  int sweep_steps = 19;
};

void add_agent_options(CLI::App* cmd, AgentArgs& a) {
  add_common(cmd, a.common);
  cmd->add_option("--d", a.d_single, "single training asymmetry");
  cmd->add_option("--d-min", a.d_min, "robust training: lowest asymmetry");
  cmd->add_option("--d-max", a.d_max, "robust training: highest asymmetry");
  cmd->add_option("--n-asym", a.n_asym, "robust training: number of asymmetries")
      ->capture_default_str();
  cmd->add_option("--episodes", a.config.episodes)->capture_default_str();
  cmd->add_option("--T", a.config.duration)->capture_default_str();
  cmd->add_option("--nt", a.config.n_steps, "actions per episode")->capture_default_str();
  cmd->add_option("--alpha-max", a.config.alpha_max)->capture_default_str();
  cmd->add_option("--sigma", a.config.sigma, "terminal reward width")->capture_default_str();
  cmd->add_option("--gamma", a.config.gamma)->capture_default_str();
  cmd->add_option("--batch", a.config.batch_size)->capture_default_str();
  cmd->add_option("--lr", a.config.learning_rate)->capture_default_str();
  cmd->add_option("--tau", a.config.tau)->capture_default_str();
  cmd->add_option("--replay-capacity", a.config.replay_capacity,
                  "0: 20% of episodes * nt")
      ->capture_default_str();
  cmd->add_option("--warmup", a.config.warmup_experiences)->capture_default_str();
  cmd->add_option("--eval-every", a.config.eval_every)->capture_default_str();
  cmd->add_option("--seed", a.config.seed)->capture_default_str();
  cmd->add_option("--sweep-min", a.sweep_min, "final-protocol sweep: lowest d")
      ->capture_default_str();
  cmd->add_option("--sweep-max", a.sweep_max, "final-protocol sweep: highest d")
      ->capture_default_str();
  cmd->add_option("--sweep-steps", a.sweep_steps)->capture_default_str();
}

void finalize_agent_config(AgentArgs& a) {
  a.config.seed = resolve_seed(a.config.seed);
  a.config.geometry.box_width = a.common.box_width;
  if (a.d_single >= 0.0) {
    a.config.asymmetries = {a.d_single};
  } else if (a.d_min >= 0.0 && a.d_max >= 0.0) {
    a.config.asymmetries = TrainingConfig::spaced_asymmetries(a.d_min, a.d_max, a.n_asym);
  } else {
    throw CLI::ValidationError("dqn/ddpg", "provide --d or both --d-min and --d-max");
  }
  a.config.train_propagate = train_fidelity(a.config.duration);
  PropagateOptions rep = report_fidelity(a.config.duration);
  if (a.common.n_micro > 0) rep.n_micro = a.common.n_micro;
  if (a.common.n_basis > 0) rep.n_basis = a.common.n_basis;
  a.config.report_propagate = rep;
}

int emit_agent_artifacts(const AgentArgs& a, const TrainResult& result,
                         const std::string& subcommand) {
  const fs::path dir(a.common.out_dir);
  fs::create_directories(dir);
  save_network(result.policy, dir / "weights.json");
  if (result.critic) save_network(*result.critic, dir / "critic.json");
  save_protocol(result.protocol, dir / "protocol.json");
  write_text_file(dir / "reward_history.csv", reward_history_csv(result.history));

  PropagateOptions sweep_opts = a.config.report_propagate;
  sweep_opts.norm_tolerance = 0.0;
  const auto rows =
      sweep_protocol(result.protocol, a.config.geometry,
                     TrainingConfig::spaced_asymmetries(a.sweep_min, a.sweep_max, a.sweep_steps),
                     sweep_opts, a.common.jobs);
  write_text_file(dir / "sweep.csv", sweep_csv(rows));
  write_text_file(dir / "result.json", train_result_json(result).dump(2) + "\n");

  json opts = training_config_json(a.config, a.config.train_propagate, a.config.report_propagate);
  opts["sweep_min"] = a.sweep_min;
  opts["sweep_max"] = a.sweep_max;
  opts["sweep_steps"] = a.sweep_steps;
  write_config_snapshot(dir, subcommand, opts);
  std::cout << train_result_json(result).dump(2) << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimal time-dependent barrier-strength protocols for a single-particle box"};
  app.set_config("--config", "", "INI configuration file; command-line flags take precedence");
  app.require_subcommand(1);

  // ---- spectrum
  auto* cmd_spectrum = app.add_subcommand("spectrum", "eigenvalues at fixed barrier strength");
  struct {
    CommonArgs common;
    double d = 0.0, alpha = 0.0, tol = 1e-13;
    int n = 10;
    std::optional<std::string> out_dir;
  } sp;
  cmd_spectrum->add_option("--d", sp.d, "barrier offset from center")->required();
  cmd_spectrum->add_option("--alpha", sp.alpha, "barrier strength in E0*L")->required();
  cmd_spectrum->add_option("--n", sp.n, "number of levels")->capture_default_str();
  cmd_spectrum->add_option("--tol", sp.tol, "root-finding relative tolerance")
      ->capture_default_str();
  cmd_spectrum->add_option("--L", sp.common.box_width, "box width")->capture_default_str();
  std::string sp_out;
  cmd_spectrum->add_option("--out-dir", sp_out, "artifact directory (default: stdout only)");

  // ---- evolve
  auto* cmd_evolve = app.add_subcommand("evolve", "propagate a protocol, write the trajectory");
  struct {
    CommonArgs common;
    std::string protocol_file;
    double d = 0.0;
    int stride = 0;
  } ev;
  add_common(cmd_evolve, ev.common);
  cmd_evolve->add_option("--protocol", ev.protocol_file, "protocol JSON file")->required();
  cmd_evolve->add_option("--d", ev.d, "asymmetry")->required();
  cmd_evolve->add_option("--stride", ev.stride, "record every n-th micro-step (0: auto)");

  // ---- sweep
  auto* cmd_sweep = app.add_subcommand("sweep", "final occupations over a range of asymmetries");
  struct {
    CommonArgs common;
    std::string protocol_file;
    double d_min = 0.0, d_max = 0.1;
    int steps = 21;
  } sw;
  add_common(cmd_sweep, sw.common);
  cmd_sweep->add_option("--protocol", sw.protocol_file, "protocol JSON file")->required();
  cmd_sweep->add_option("--d-min", sw.d_min)->required();
  cmd_sweep->add_option("--d-max", sw.d_max)->required();
  cmd_sweep->add_option("--steps", sw.steps)->capture_default_str();

  // ---- crab
  auto* cmd_crab = app.add_subcommand("crab", "randomized-Fourier protocol optimization");
  struct {
    CommonArgs common;
    CrabOptions options;
    double d = 0.0, duration = 5.0;
    std::string out_file = "protocol.json";
  } cr;
  add_common(cmd_crab, cr.common);
  cmd_crab->add_option("--d", cr.d, "asymmetry to optimize for")->required();
  cmd_crab->add_option("--T", cr.duration)->capture_default_str();
  cmd_crab->add_option("--nc", cr.options.n_components, "Fourier components")
      ->capture_default_str();
  cmd_crab->add_option("--max-evals", cr.options.max_evals, "per restart")->capture_default_str();
  cmd_crab->add_option("--restarts", cr.options.restarts)->capture_default_str();
  cmd_crab->add_option("--seed", cr.options.seed)->capture_default_str();
  cmd_crab->add_option("--alpha-final", cr.options.alpha_final)->capture_default_str();
  cmd_crab->add_option("--target-cost", cr.options.target_cost)->capture_default_str();
  cmd_crab->add_option("--target-leakage", cr.options.target_leakage)->capture_default_str();
  cmd_crab->add_option("--dense-knots", cr.options.dense_knots)->capture_default_str();
  cmd_crab->add_option("--out", cr.out_file, "protocol file name")->capture_default_str();

  // ---- dqn / ddpg
  auto* cmd_dqn = app.add_subcommand("dqn", "deep Q-learning over discrete barrier rates");
  AgentArgs dq;
  add_agent_options(cmd_dqn, dq);
  cmd_dqn->add_option("--eps-initial", dq.config.eps_initial)->capture_default_str();
  cmd_dqn->add_option("--eps-final", dq.config.eps_final)->capture_default_str();
  cmd_dqn->add_option("--eps-anneal-fraction", dq.config.eps_anneal_fraction)
      ->capture_default_str();

  auto* cmd_ddpg = app.add_subcommand("ddpg", "deterministic policy gradient, continuous rates");
  AgentArgs dp;
  dp.config.n_steps = 20;
  add_agent_options(cmd_ddpg, dp);
  cmd_ddpg->add_option("--noise-initial", dp.config.noise_sigma_initial,
                       "exploration noise, fraction of the rate bound")
      ->capture_default_str();
  cmd_ddpg->add_option("--noise-final", dp.config.noise_sigma_final)->capture_default_str();
  cmd_ddpg->add_option("--action-bound", dp.config.action_bound, "rate clip, E0*L/s")
      ->capture_default_str();

  // ---- interp
  auto* cmd_interp = app.add_subcommand("interp", "spline-resample a protocol knot file");
  struct {
    std::string in_file;
    std::string out_file = "interp.json";
    std::string out_dir = ".";
    int samples = 0;
  } ip;
  cmd_interp->add_option("--in", ip.in_file, "protocol JSON file")->required();
  cmd_interp->add_option("--samples", ip.samples, "number of output knots")->required();
  cmd_interp->add_option("--out", ip.out_file)->capture_default_str();
  cmd_interp->add_option("--out-dir", ip.out_dir)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 2;
  }

  try {
    if (*cmd_spectrum) {
      SpbGeometry g{sp.common.box_width, sp.d};
      const Spectrum spectrum = solve_spectrum(g, sp.alpha, sp.n, sp.tol);
      const std::string csv = spectrum_csv(spectrum);
      if (!sp_out.empty()) {
        const fs::path dir(sp_out);
        write_text_file(dir / "spectrum.csv", csv);
        write_config_snapshot(dir, "spectrum",
                              {{"d", sp.d},
                               {"alpha", sp.alpha},
                               {"n", sp.n},
                               {"tol", sp.tol},
                               {"L", sp.common.box_width}});
      }
      std::cout << csv;
      return 0;
    }

    if (*cmd_evolve) {
      SpbGeometry g{ev.common.box_width, ev.d};
      g.validate();
      const Protocol protocol = load_protocol(ev.protocol_file);
      PropagateOptions opts = tier_options(ev.common, protocol.duration);
      opts.record_trajectory = true;
      opts.record_stride = ev.stride;
      const AmplitudeState init =
          ground_state(std::max(protocol.alpha_start(), 0.0), opts.n_basis);
      const PropagationResult run = propagate(init, protocol, g, opts);
      const fs::path dir(ev.common.out_dir);
      write_text_file(dir / "trajectory.csv", trajectory_csv(run.trajectory));
      write_config_snapshot(dir, "evolve",
                            {{"protocol", ev.protocol_file},
                             {"d", ev.d},
                             {"L", ev.common.box_width},
                             {"tier", ev.common.tier},
                             {"propagate", propagate_options_json(opts)},
                             {"norm_drift", run.norm_drift},
                             {"clamped_steps", run.clamped_steps}});
      std::cout << "final occupations:";
      const Eigen::VectorXd occ = occupations(run.final_state);
      for (int i = 0; i < 3 && i < occ.size(); ++i) std::cout << ' ' << format_double(occ[i]);
      std::cout << " ... (norm drift " << format_double(run.norm_drift) << ")\n";
      return 0;
    }

    if (*cmd_sweep) {
      SpbGeometry g{sw.common.box_width, 0.0};
      const Protocol protocol = load_protocol(sw.protocol_file);
      PropagateOptions opts = tier_options(sw.common, protocol.duration);
      const auto ds = TrainingConfig::spaced_asymmetries(sw.d_min, sw.d_max, sw.steps);
      const auto rows = sweep_protocol(protocol, g, ds, opts, sw.common.jobs);
      const fs::path dir(sw.common.out_dir);
      write_text_file(dir / "sweep.csv", sweep_csv(rows));
      write_config_snapshot(dir, "sweep",
                            {{"protocol", sw.protocol_file},
                             {"d_min", sw.d_min},
                             {"d_max", sw.d_max},
                             {"steps", sw.steps},
                             {"L", sw.common.box_width},
                             {"tier", sw.common.tier},
                             {"propagate", propagate_options_json(opts)}});
      std::cout << sweep_csv(rows);
      return 0;
    }

    if (*cmd_crab) {
      cr.options.seed = resolve_seed(cr.options.seed);
      SpbGeometry g{cr.common.box_width, cr.d};
      if (cr.common.n_micro > 0 || cr.common.n_basis > 0) {
        PropagateOptions rep = report_fidelity(cr.duration);
        if (cr.common.n_micro > 0) rep.n_micro = cr.common.n_micro;
        if (cr.common.n_basis > 0) rep.n_basis = cr.common.n_basis;
        cr.options.report_fidelity = rep;
      }
      const CrabResult result = crab_optimize(g, cr.duration, cr.options);

      json occ = json::array();
      for (Eigen::Index i = 0; i < result.occupations.size(); ++i)
        occ.push_back(result.occupations[i]);
      json ansatz = {{"T", result.ansatz.duration},
                     {"alpha_final", result.ansatz.alpha_final},
                     {"A", std::vector<double>(result.ansatz.a.begin(), result.ansatz.a.end())},
                     {"B", std::vector<double>(result.ansatz.b.begin(), result.ansatz.b.end())},
                     {"omega", std::vector<double>(result.ansatz.omega.begin(),
                                                   result.ansatz.omega.end())}};
      json rj = {{"cost", result.cost},
                 {"leakage", result.leakage},
                 {"occupations", std::move(occ)},
                 {"ansatz", std::move(ansatz)},
                 {"eval_count", result.eval_count},
                 {"restarts_used", result.restarts_used},
                 {"below_target", result.below_target}};

      const fs::path dir(cr.common.out_dir);
      save_protocol(result.protocol, dir / cr.out_file);
      write_text_file(dir / "result.json", rj.dump(2) + "\n");
      write_config_snapshot(dir, "crab",
                            {{"d", cr.d},
                             {"T", cr.duration},
                             {"nc", cr.options.n_components},
                             {"max_evals", cr.options.max_evals},
                             {"restarts", cr.options.restarts},
                             {"seed", cr.options.seed},
                             {"alpha_final", cr.options.alpha_final},
                             {"target_cost", cr.options.target_cost},
                             {"target_leakage", cr.options.target_leakage},
                             {"dense_knots", cr.options.dense_knots},
                             {"L", cr.common.box_width},
                             {"out", cr.out_file}});
      std::cout << rj.dump(2) << std::endl;
      return 0;  // below-target results are still valid artifacts
    }

    if (*cmd_dqn) {
      finalize_agent_config(dq);
      const TrainResult result = dqn_train(dq.config);
      return emit_agent_artifacts(dq, result, "dqn");
    }

    if (*cmd_ddpg) {
      finalize_agent_config(dp);
      const TrainResult result = ddpg_train(dp.config);
      return emit_agent_artifacts(dp, result, "ddpg");
    }

    if (*cmd_interp) {
      if (ip.samples < 2) throw std::domain_error("interp: --samples must be >= 2");
      const Protocol protocol = load_protocol(ip.in_file);
      const Protocol dense = protocol.resampled(ip.samples);
      const fs::path dir(ip.out_dir);
      save_protocol(dense, dir / ip.out_file);
      write_config_snapshot(
          dir, "interp",
          {{"in", ip.in_file}, {"samples", ip.samples}, {"out", ip.out_file}});
      std::cout << "wrote " << (dir / ip.out_file).string() << " (" << ip.samples << " knots)\n";
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const BracketingError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
