// icl: command-line driver for feature banks, lasso runs, constructed
// transformers, episodes, emulation checks and sweeps.
//
// Exit codes: 0 success, 1 validation or usage error, 2 runtime error.
// Errors go to stderr as one JSON object per line.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "icl/io.hpp"

namespace {

using namespace icl;

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

void report_error(const std::string& kind, const std::string& message) {
  std::cerr << Json{{"error", kind}, {"message", message}}.dump() << '\n';
}

// Writes to --out when given, stdout otherwise.
void emit(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Error(ErrorKind::InvalidConfig, "cannot open '" + out + "' for writing");
  f << text;
}

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* sub, Common& c, const char* seed_help) {
  sub->add_option("--config", c.config_path, "experiment config (JSON)")->required();
  sub->add_option("--seed", c.seed, seed_help);
  sub->add_option("--out", c.out, "output path (default: stdout)");
}

std::uint64_t data_seed(const ExperimentConfig& cfg, const Common& c) {
  return c.seed ? *c.seed : cfg.seeds.front();
}

int cmd_bank(const Common& c) {
  ExperimentConfig cfg = load_config(c.config_path);
  if (c.seed) cfg.bank_seed = *c.seed;
  const FeatureBank bank = make_feature_bank(*cfg.spec, cfg.n, cfg.tau_ff, cfg.bank_seed);
  emit(c.out, to_json(bank).dump(2) + "\n");
  return kOk;
}

int cmd_solve(const Common& c, std::optional<int> steps) {
  const ExperimentConfig cfg = load_config(c.config_path);
  const FeatureBank bank = make_feature_bank(*cfg.spec, cfg.n, cfg.tau_ff, cfg.bank_seed);
  const Task task = generate_task(cfg.spec, cfg.member_seed, cfg.N, cfg.d, cfg.sigma, data_seed(cfg, c),
                                  cfg.input, cfg.noise);
  LassoProblem p;
  p.phi = eval_features_batch(bank, task.prompt.x).transpose();
  p.y = task.prompt.y;
  p.lambda = cfg.resolved_lambda();
  p.eta = cfg.resolved_eta();
  p.validate();
  const int T = steps ? *steps : (cfg.L - 1) / 2;
  if (T < 0) throw Error(ErrorKind::InvalidConfig, "--steps must be >= 0");
  const LassoTrajectory traj = run_ista(p, T);
  std::ostringstream os;
  write_trajectory_csv(os, traj, lasso_objective(p, oracle_solve(p)));
  emit(c.out, os.str());
  return kOk;
}

int cmd_build(const Common& c) {
  ExperimentConfig cfg = load_config(c.config_path);
  if (c.seed) cfg.bank_seed = *c.seed;
  auto bank = std::make_shared<const FeatureBank>(make_feature_bank(*cfg.spec, cfg.n, cfg.tau_ff, cfg.bank_seed));
  const TransformerWeights w =
      build_icl_transformer(bank, cfg.L, cfg.resolved_lambda(), cfg.tau, cfg.resolved_eta(), cfg.N);
  emit(c.out, to_json(w).dump() + "\n");
  return kOk;
}

int cmd_episode(const Common& c) {
  const ExperimentConfig cfg = load_config(c.config_path);
  const EpisodeReport r = run_episode(cfg, cfg.member_seed, data_seed(cfg, c));
  emit(c.out, to_json(r).dump(2) + "\n");
  return kOk;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << v;
  return os.str();
}

int cmd_verify(const Common& c, bool strict) {
  ExperimentConfig cfg = load_config(c.config_path);
  const std::uint64_t seed = data_seed(cfg, c);
  EpisodeArtifacts hi, lo;
  const EpisodeReport rh = run_episode(cfg, cfg.member_seed, seed, &hi);
  ExperimentConfig low = cfg;
  low.tau = cfg.tau / 10.0;
  const EpisodeReport rl = run_episode(low, cfg.member_seed, seed, &lo);

  std::ostringstream os;
  os << "tau = " << format_double(cfg.tau) << "  (checked again at tau/10 = " << format_double(low.tau) << ")\n";
  os << std::left << std::setw(6) << "block" << std::setw(12) << "|e|_inf" << std::setw(12) << "bound"
     << std::setw(6) << "ok" << std::setw(12) << "etilde" << std::setw(12) << "bound" << "ok\n";
  for (const BlockResidual& b : hi.emulation.blocks)
    os << std::setw(6) << b.t << std::setw(12) << fmt(b.e_inf) << std::setw(12) << fmt(b.e_bound + b.e_slack)
       << std::setw(6) << (b.e_ok ? "PASS" : "FAIL") << std::setw(12) << fmt(b.etilde) << std::setw(12)
       << fmt(b.etilde_bound + b.etilde_slack) << (b.etilde_ok ? "PASS" : "FAIL") << '\n';

  const double l1 = rh.l1_of_rho_L;
  const bool readout_ok = rh.readout_consistency_gap <= 2.0 * l1 * l1 / cfg.tau + 1e-15;
  const bool low_ok = lo.emulation.all_ok;
  const double ratio = rl.max_emulation_residual / rh.max_emulation_residual;
  const bool ratio_ok = ratio >= 5.0 && ratio <= 20.0;
  os << "per-block bounds at tau     " << (hi.emulation.all_ok ? "PASS" : "FAIL") << '\n'
     << "per-block bounds at tau/10  " << (low_ok ? "PASS" : "FAIL") << '\n'
     << "readout gap " << fmt(rh.readout_consistency_gap) << " <= 2|rho|_1^2/tau " << fmt(2.0 * l1 * l1 / cfg.tau)
     << "  " << (readout_ok ? "PASS" : "FAIL") << '\n'
     << "residual ratio tau/10 : tau = " << fmt(ratio) << (strict ? (ratio_ok ? "  PASS" : "  FAIL") : "  (info)")
     << '\n';
  emit(c.out, os.str());
  const bool ok = hi.emulation.all_ok && low_ok && readout_ok && (!strict || ratio_ok);
  return ok ? kOk : kRuntime;
}

int cmd_sweep(const Common& c, const std::vector<std::string>& axes, std::optional<int> workers) {
  ExperimentConfig cfg = load_config(c.config_path);
  if (c.seed) cfg.member_seed = *c.seed;
  if (workers) cfg.workers = *workers;
  cfg.validate();
  SweepGrid grid;
  for (const std::string& a : axes) add_grid_axis(grid, a);
  const std::string out = c.out.empty() ? cfg.output : c.out;
  if (out.empty())
    sweep(cfg, grid, std::cout);
  else
    sweep(cfg, grid, out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"In-context lasso via constructed transformers"};
  app.require_subcommand(1);

  Common bank_opts, solve_opts, build_opts, episode_opts, verify_opts, sweep_opts;
  std::optional<int> steps, workers;
  bool strict = false;
  std::vector<std::string> axes;

  auto* bank = app.add_subcommand("bank", "emit the feature bank as JSON");
  add_common(bank, bank_opts, "bank seed");
  auto* solve = app.add_subcommand("solve", "run ISTA on one task and emit the trajectory CSV");
  add_common(solve, solve_opts, "data seed");
  solve->add_option("--steps", steps, "ISTA steps (default: (L-1)/2)");
  auto* build = app.add_subcommand("build", "emit the constructed transformer weights as JSON");
  add_common(build, build_opts, "bank seed");
  auto* episode = app.add_subcommand("episode", "run one episode and emit its report as JSON");
  add_common(episode, episode_opts, "data seed");
  auto* verify = app.add_subcommand("verify", "check the emulation bounds and print a pass/fail table");
  add_common(verify, verify_opts, "data seed");
  verify->add_flag("--strict", strict, "also require the tau/10 residual ratio to lie in [5, 20]");
  auto* sw = app.add_subcommand("sweep", "risk sweep over a grid, one CSV row per cell");
  add_common(sw, sweep_opts, "member seed");
  sw->add_option("--grid", axes, "axis such as N=32,128,512 (repeatable)");
  sw->add_option("--workers", workers, "concurrent cells");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("UsageError", e.what());
    return kValidation;
  }

  try {
    if (*bank) return cmd_bank(bank_opts);
    if (*solve) return cmd_solve(solve_opts, steps);
    if (*build) return cmd_build(build_opts);
    if (*episode) return cmd_episode(episode_opts);
    if (*verify) return cmd_verify(verify_opts, strict);
    if (*sw) return cmd_sweep(sweep_opts, axes, workers);
  } catch (const Error& e) {
    report_error(to_string(e.kind()), e.what());
    return is_validation_error(e.kind()) ? kValidation : kRuntime;
  } catch (const std::exception& e) {
    report_error("RuntimeError", e.what());
    return kRuntime;
  }
  return kOk;
}
