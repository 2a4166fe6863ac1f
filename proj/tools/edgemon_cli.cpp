// edgemon: solve, simulate and sweep AoI-driven edge-server query policies.
//
//   edgemon solve [config] [--key value ...] [--mu X] [--qtable FILE]
//   edgemon run   [config] [--key value ...] [--qtable FILE]
//   edgemon sweep [config] [--key value ...]
//   edgemon plot  results.csv [--sweep n|m|none] [--out chart.svg]
//
// Exit codes: 0 success, 1 validation error, 2 solver non-convergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "edgemon/dual.hpp"
#include "edgemon/experiment.hpp"
#include "edgemon/qtable_io.hpp"

namespace {

using namespace edgemon;

constexpr int kExitValidation = 1;
constexpr int kExitNonConvergence = 2;

const char* const kConfigKeys[] = {"n",        "k",       "m",          "t",      "lambda",     "phi",
                                   "psi",      "aoi_max", "seed",       "reps",   "sweep",      "sweep_values",
                                   "policies", "outdir",  "warmup",     "beta",   "gamma",      "dual_iters",
                                   "eval_t",   "rvi_tol"};

struct ConfigArgs {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("config", config_path, "key=value config file")->check(CLI::ExistingFile);
    for (const char* key : kConfigKeys) {
      app->add_option(std::string("--") + key, overrides[key], std::string("override config key '") + key + "'");
    }
  }

  ExperimentSpec load(const CLI::App* app) const {
    std::string text;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      std::stringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    ExperimentSpec spec;
    apply_config_text(spec, text, config_path.empty() ? "" : config_path + ": ");
    for (const auto& [key, value] : overrides) {
      if (app->count(std::string("--") + key) > 0) apply_setting(spec, key, value);
    }
    spec.validate();
    return spec;
  }
};

void print_metrics(const char* policy, const SimMetrics& m, std::optional<double> mu) {
  std::printf("policy=%s arrivals=%lld successes=%lld drops=%lld queries=%lld slots=%lld success_rate=%.6f "
              "queries_per_slot=%.6f model_reward=%.6f",
              policy, static_cast<long long>(m.arrivals), static_cast<long long>(m.successes),
              static_cast<long long>(m.drops), static_cast<long long>(m.queries_used),
              static_cast<long long>(m.measured_slots), m.success_rate, m.queries_per_slot, m.model_reward);
  if (mu) std::printf(" mu_star=%.6g", *mu);
  std::printf("\n");
}

TableSet load_tables(const std::string& path, const SystemConfig& sys) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  auto table = std::make_shared<const QTable>(load_qtable(in));
  const auto expect = sys.dispatcher_spec(0, table->spec.mu);
  if (!sys.is_homogeneous() || table->spec.servers != expect.servers || table->spec.aoi_max != expect.aoi_max ||
      table->spec.lambda != expect.lambda || table->spec.lambda_sum != expect.lambda_sum) {
    throw ValidationError(path + ": table parameters do not match the configured system");
  }
  return TableSet::shared(std::move(table), sys.num_dispatchers);
}

int cmd_solve(const ExperimentSpec& spec, std::optional<double> fixed_mu, std::string qtable_path) {
  namespace fs = std::filesystem;
  fs::create_directories(spec.outdir);
  if (qtable_path.empty()) qtable_path = (fs::path(spec.outdir) / "qtable.bin").string();
  const auto rc = spec.run_config(spec.sweep == SweepVar::kNone ? 0 : spec.points().front(), spec.seed);
  if (!rc.system.is_homogeneous()) throw ValidationError("solve exports a single table; system must be homogeneous");

  TableSet tables;
  double mu = 0.0;
  if (fixed_mu) {
    mu = *fixed_mu;
    auto opt = spec.dual_config().rvi;
    tables = TableSet::solve(rc.system, mu, opt);
  } else {
    const auto dual = solve_mu(spec.dual_config(), rc.system, rc.channels);
    mu = dual.mu_star;
    tables = dual.tables;
    std::ofstream tr(fs::path(spec.outdir) / "dual_trace.csv", std::ios::binary);
    write_trace_csv(tr, dual.trace);
    std::printf("relaxed_query_rate=%.6f\n", dual.query_rate);
  }
  std::ofstream out(qtable_path, std::ios::binary);
  save_qtable(out, tables[0]);
  std::printf("mu_star=%.17g gain=%.17g sweeps=%d span=%.3g states=%llu qtable=%s\n", mu, tables[0].gain,
              tables[0].sweeps, tables[0].span_residual, static_cast<unsigned long long>(tables[0].num_states),
              qtable_path.c_str());
  return 0;
}

int cmd_run(const ExperimentSpec& spec, const std::string& qtable_path) {
  const auto rc = spec.run_config(spec.sweep == SweepVar::kNone ? 0 : spec.points().front(), spec.seed);
  for (PolicyName p : spec.policies) {
    if (p == PolicyName::kNgm) {
      TableSet tables;
      double mu = 0.0;
      if (!qtable_path.empty()) {
        tables = load_tables(qtable_path, rc.system);
        mu = tables[0].spec.mu;
      } else {
        auto dual = solve_mu(spec.dual_config(), rc.system, rc.channels);
        tables = std::move(dual.tables);
        mu = dual.mu_star;
      }
      print_metrics(to_string(p), run(rc, NgmPolicy{tables.solved(), mu}), mu);
    } else if (p == PolicyName::kRoundRobin) {
      print_metrics(to_string(p), run(rc, RoundRobinPolicy{}), std::nullopt);
    } else {
      print_metrics(to_string(p), run(rc, NeverQueryPolicy{}), std::nullopt);
    }
  }
  return 0;
}

int cmd_sweep(const ExperimentSpec& spec) {
  const auto result = run_experiment(spec, [](const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); });
  std::fputs(format_summary(result.summary, spec.sweep).c_str(), stdout);
  std::printf("# wrote %s/results.csv, summary.txt, chart.svg (aoi_max=%d)\n", spec.outdir.c_str(),
              result.aoi_max_used);
  return 0;
}

int cmd_plot(const std::string& csv_path, const std::string& sweep, std::string out_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + csv_path);
  const auto rows = read_results_csv(in);
  SweepVar v = infer_sweep(rows);
  if (sweep == "n") v = SweepVar::kN;
  else if (sweep == "m") v = SweepVar::kM;
  else if (sweep == "none") v = SweepVar::kNone;
  else if (!sweep.empty()) throw ValidationError("--sweep must be n, m or none");
  if (out_path.empty()) out_path = (std::filesystem::path(csv_path).parent_path() / "chart.svg").string();
  std::ofstream out(out_path, std::ios::binary);
  out << render_chart(rows, v);
  std::printf("wrote %s (%zu rows, sweep=%s)\n", out_path.c_str(), rows.size(), to_string(v));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-server monitoring: NGM query scheduling solver and simulator"};
  app.require_subcommand(1);

  ConfigArgs solve_args, run_args, sweep_args;
  auto* solve = app.add_subcommand("solve", "solve the dual and per-dispatcher MDP; export the Q-table");
  solve_args.attach(solve);
  double fixed_mu = 0.0;
  std::string solve_qtable;
  solve->add_option("--mu", fixed_mu, "solve at this price instead of running the dual search")->check(CLI::NonNegativeNumber);
  solve->add_option("--qtable", solve_qtable, "output Q-table path (default <outdir>/qtable.bin)");

  auto* run_cmd = app.add_subcommand("run", "simulate one configuration for each listed policy");
  run_args.attach(run_cmd);
  std::string run_qtable;
  run_cmd->add_option("--qtable", run_qtable, "use a previously exported Q-table for NGM")->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "run a full N or M sweep with replications");
  sweep_args.attach(sweep);

  auto* plot = app.add_subcommand("plot", "re-render chart.svg from results.csv");
  std::string csv_path, plot_sweep, plot_out;
  plot->add_option("results", csv_path, "results.csv")->required()->check(CLI::ExistingFile);
  plot->add_option("--sweep", plot_sweep, "n, m or none (inferred by default)");
  plot->add_option("--out", plot_out, "output SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (solve->parsed()) {
      return cmd_solve(solve_args.load(solve), solve->count("--mu") ? std::optional<double>(fixed_mu) : std::nullopt,
                       solve_qtable);
    }
    if (run_cmd->parsed()) return cmd_run(run_args.load(run_cmd), run_qtable);
    if (sweep->parsed()) return cmd_sweep(sweep_args.load(sweep));
    if (plot->parsed()) return cmd_plot(csv_path, plot_sweep, plot_out);
  } catch (const ConvergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNonConvergence;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
  return 0;
}
