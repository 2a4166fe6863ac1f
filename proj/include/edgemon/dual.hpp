#pragma once

// Dual subgradient search for the query price mu.
//
//   mu_{l+1} = [ mu_l + beta_l * (rate(mu_l) - M) ]_+ ,  beta_l = beta / (1 + gamma * l)
//
// rate(mu) is the time-average number of queries per slot when every
// dispatcher plays its own subproblem-greedy action with no shared budget.

#include <cmath>
#include <iomanip>
#include <algorithm>
#include <optional>
#include <memory>
#include <ostream>
#include <sstream>
#include <vector>

#include "edgemon/error.hpp"
#include "edgemon/mdp.hpp"
#include "edgemon/policy.hpp"
#include "edgemon/sim.hpp"

namespace edgemon {

struct DualConfig {
  // Initial step. Unset means the problem-scaled default_beta(); rewards are
  // normalized by sum(lambda), so mu lives on a 1/N scale while the query
  // gap lives on an N scale.
  std::optional<double> beta;
  double gamma = 0.1;
  int iters = 50;
  std::int64_t eval_horizon = 20'000;
  std::uint64_t eval_seed = 1;
  double mu0 = 0.0;
  double feasibility_slack = 0.05;  // accept rate <= M * (1 + slack) at mu*
  RviOptions rvi;

  void validate() const {
    std::ostringstream bad;
    if (beta && !(*beta > 0.0)) bad << " beta must be > 0;";
    if (!(gamma >= 0.0)) bad << " gamma must be >= 0;";
    if (iters < 1) bad << " iters must be >= 1;";
    if (eval_horizon < 1) bad << " eval_horizon must be >= 1;";
    if (!(mu0 >= 0.0)) bad << " mu0 must be >= 0;";
    if (!bad.str().empty()) throw ValidationError("invalid dual config:" + bad.str());
  }
};

struct DualRecord {
  int iter = 0;
  double mu = 0.0;
  double query_rate = 0.0;
  double gap = 0.0;  // query_rate - M
};

struct DualTrace {
  std::vector<DualRecord> records;
};

class DualError : public ConvergenceError {
 public:
  DualError(const std::string& what, double residual, DualTrace trace)
      : ConvergenceError(what, residual), trace_(std::move(trace)) {}
  const DualTrace& trace() const noexcept { return trace_; }

 private:
  DualTrace trace_;
};

// One solved table per dispatcher; identically parameterized dispatchers
// share a single solve.
class TableSet {
 public:
  TableSet() = default;

  static TableSet solve(const SystemConfig& sys, double mu, const RviOptions& rvi, const TableSet* warm = nullptr) {
    TableSet out;
    out.by_dispatcher_.resize(static_cast<std::size_t>(sys.num_dispatchers));
    std::vector<int> representative;  // dispatcher index owning each unique table
    std::vector<std::shared_ptr<const QTable>> unique;
    for (int n = 0; n < sys.num_dispatchers; ++n) {
      std::size_t u = 0;
      while (u < representative.size() && !sys.same_dispatcher(representative[u], n)) ++u;
      if (u == representative.size()) {
        RviOptions opt = rvi;
        if (warm && !warm->by_dispatcher_.empty()) {
          opt.warm_start = &warm->by_dispatcher_[static_cast<std::size_t>(n)]->values;
        }
        representative.push_back(n);
        unique.push_back(std::make_shared<const QTable>(
            relative_value_iteration(DispatcherModel(sys.dispatcher_spec(n, mu)), opt)));
      }
      out.by_dispatcher_[static_cast<std::size_t>(n)] = unique[u];
    }
    out.unique_count_ = unique.size();
    return out;
  }

  static TableSet shared(std::shared_ptr<const QTable> table, int num_dispatchers) {
    TableSet out;
    out.by_dispatcher_.assign(static_cast<std::size_t>(num_dispatchers), std::move(table));
    out.unique_count_ = 1;
    return out;
  }

  const QTable& operator[](int n) const { return *by_dispatcher_[static_cast<std::size_t>(n)]; }
  std::shared_ptr<const QTable> table(int n) const { return by_dispatcher_[static_cast<std::size_t>(n)]; }
  int size() const noexcept { return static_cast<int>(by_dispatcher_.size()); }
  std::size_t unique_count() const noexcept { return unique_count_; }

  std::vector<SolvedDispatcher> solved() const {
    std::vector<SolvedDispatcher> out;
    out.reserve(by_dispatcher_.size());
    for (const auto& t : by_dispatcher_) out.emplace_back(t);
    return out;
  }

 private:
  std::vector<std::shared_ptr<const QTable>> by_dispatcher_;
  std::size_t unique_count_ = 0;
};

// Each dispatcher independently plays argmax_a Q(I_n, a) (ties to no query).
inline ScheduleDecision relaxed_greedy_decide(std::span<const DispatcherBelief> beliefs,
                                              std::span<const SolvedDispatcher> tables) {
  ScheduleDecision d;
  for (std::size_t n = 0; n < beliefs.size(); ++n) {
    const auto& t = tables[n];
    const int a = t.table->greedy_action(t.codec.encode(beliefs[n]));
    if (a != 0) d.queries.push_back({static_cast<int>(n), a - 1});
  }
  return d;
}

// Time-average total queries per slot under the relaxed (budget-free)
// dynamics. A homogeneous system simulates one dispatcher and scales by N
// unless force_full is set.
inline double empirical_query_rate(const TableSet& tables, const SystemConfig& sys, std::int64_t horizon,
                                   std::uint64_t seed, bool force_full = false) {
  if (horizon < 1) throw ValidationError("empirical_query_rate: horizon must be >= 1");
  RunConfig cfg;
  cfg.horizon = horizon;
  cfg.warmup = 0;
  cfg.seed = seed;
  std::vector<SolvedDispatcher> solved;
  double scale = 1.0;
  if (!force_full && sys.is_homogeneous()) {
    cfg.system.num_dispatchers = 1;
    cfg.system.servers_per_dispatcher = sys.servers_per_dispatcher;
    cfg.system.lambda = {sys.lambda[0]};
    const auto s0 = sys.dispatcher_servers(0);
    cfg.system.servers.assign(s0.begin(), s0.end());
    cfg.system.aoi_max = sys.aoi_max;
    solved.emplace_back(tables.table(0));
    scale = static_cast<double>(sys.num_dispatchers);
  } else {
    cfg.system = sys;
    solved = tables.solved();
  }
  cfg.channels = cfg.system.num_dispatchers;
  const auto m = run_with(cfg, [&](std::span<const DispatcherBelief> b) { return relaxed_greedy_decide(b, solved); });
  return scale * m.queries_per_slot;
}

struct DualResult {
  double mu_star = 0.0;
  double query_rate = 0.0;  // rate(mu_star)
  DualTrace trace;
  TableSet tables;          // solved at mu_star
};

inline double default_beta(const SystemConfig& sys) {
  const double lam_max = *std::max_element(sys.lambda.begin(), sys.lambda.end());
  return 0.5 * (lam_max / sys.lambda_sum()) / static_cast<double>(sys.num_dispatchers);
}

// Runs `iters` subgradient updates and returns the final iterate. The trace
// holds one record per evaluated mu, the last being mu* itself.
inline DualResult solve_mu(const DualConfig& config, const SystemConfig& sys, int channels) {
  config.validate();
  sys.validate();
  if (channels < 1) throw ValidationError("solve_mu: M must be >= 1");
  const double budget = static_cast<double>(channels);

  const double beta = config.beta.value_or(default_beta(sys));

  DualResult out;
  double mu = config.mu0;
  TableSet tables;
  for (int l = 0; l <= config.iters; ++l) {
    tables = TableSet::solve(sys, mu, config.rvi, tables.size() ? &tables : nullptr);
    const double rate = empirical_query_rate(tables, sys, config.eval_horizon, config.eval_seed);
    out.trace.records.push_back({l, mu, rate, rate - budget});
    if (l == config.iters) {
      out.mu_star = mu;
      out.query_rate = rate;
      break;
    }
    const double step = beta / (1.0 + config.gamma * static_cast<double>(l));
    mu = std::max(0.0, mu + step * (rate - budget));
  }
  out.tables = std::move(tables);
  if (out.query_rate > budget * (1.0 + config.feasibility_slack)) {
    std::ostringstream os;
    os << "dual iteration budget exhausted: rate " << out.query_rate << " exceeds " << budget << " * "
       << (1.0 + config.feasibility_slack) << " at mu " << out.mu_star;
    throw DualError(os.str(), out.query_rate - budget, std::move(out.trace));
  }
  return out;
}

inline void write_trace_csv(std::ostream& os, const DualTrace& trace) {
  os << "iter,mu,query_rate,gap\n";
  const auto old = os.precision(17);
  for (const auto& r : trace.records) os << r.iter << ',' << r.mu << ',' << r.query_rate << ',' << r.gap << '\n';
  os.precision(old);
}

}  // namespace edgemon
