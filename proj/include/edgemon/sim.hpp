#pragma once

// Discrete-time ground-truth simulator.
//
// Within slot t:
//   1. the policy decides queries from the slot-t information states;
//   2. arrivals are drawn and each job goes to the dispatcher's most-likely
//      idle server, judged on the same slot-t beliefs;
//   3. a job succeeds iff its server is truly idle at t, otherwise it is dropped;
//   4. queried and assigned servers reveal X(t);
//   5. every server chain moves to t+1;
//   6. information states advance (observed -> (X(t), 1), others age).

#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <vector>

#include "edgemon/belief.hpp"
#include "edgemon/chain.hpp"
#include "edgemon/error.hpp"
#include "edgemon/mdp.hpp"
#include "edgemon/policy.hpp"
#include "edgemon/rng.hpp"

namespace edgemon {

struct SystemConfig {
  int num_dispatchers = 15;
  int servers_per_dispatcher = 5;
  std::vector<double> lambda;             // per dispatcher
  std::vector<TransitionMatrix> servers;  // dispatcher-major, N*K entries
  int aoi_max = 20;

  static SystemConfig homogeneous(int n, int k, double lambda, double phi, double psi, int aoi_max) {
    if (n < 1 || k < 1) throw ValidationError("system needs N >= 1 and K >= 1");
    SystemConfig c;
    c.num_dispatchers = n;
    c.servers_per_dispatcher = k;
    c.lambda.assign(static_cast<std::size_t>(n), lambda);
    c.servers.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(k), TransitionMatrix(phi, psi));
    c.aoi_max = aoi_max;
    c.validate();
    return c;
  }

  void validate() const {
    std::ostringstream bad;
    if (num_dispatchers < 1) bad << " N must be >= 1;";
    if (servers_per_dispatcher < 1) bad << " K must be >= 1;";
    if (servers_per_dispatcher > kMaxServersPerDispatcher) bad << " K must be <= " << kMaxServersPerDispatcher << ";";
    if (aoi_max < 1) bad << " aoi_max must be >= 1;";
    if (lambda.size() != static_cast<std::size_t>(std::max(num_dispatchers, 0))) bad << " lambda needs N entries;";
    for (double l : lambda) {
      if (!(l >= 0.0 && l <= 1.0)) {
        bad << " lambda must lie in [0,1];";
        break;
      }
    }
    if (servers.size() != static_cast<std::size_t>(std::max(num_dispatchers, 0)) *
                              static_cast<std::size_t>(std::max(servers_per_dispatcher, 0))) {
      bad << " servers needs N*K entries;";
    }
    if (!bad.str().empty()) throw ValidationError("invalid system config:" + bad.str());
  }

  double lambda_sum() const {
    double s = 0.0;
    for (double l : lambda) s += l;
    return s;
  }

  std::span<const TransitionMatrix> dispatcher_servers(int n) const {
    return std::span<const TransitionMatrix>(servers).subspan(
        static_cast<std::size_t>(n) * static_cast<std::size_t>(servers_per_dispatcher),
        static_cast<std::size_t>(servers_per_dispatcher));
  }

  MdpSpec dispatcher_spec(int n, double mu) const {
    const auto s = dispatcher_servers(n);
    return MdpSpec{{s.begin(), s.end()}, aoi_max, lambda[static_cast<std::size_t>(n)], lambda_sum(), mu};
  }

  bool same_dispatcher(int a, int b) const {
    if (lambda[static_cast<std::size_t>(a)] != lambda[static_cast<std::size_t>(b)]) return false;
    const auto sa = dispatcher_servers(a);
    const auto sb = dispatcher_servers(b);
    return std::equal(sa.begin(), sa.end(), sb.begin());
  }

  bool is_homogeneous() const {
    for (int n = 1; n < num_dispatchers; ++n) {
      if (!same_dispatcher(0, n)) return false;
    }
    return true;
  }
};

struct RunConfig {
  SystemConfig system;
  int channels = 5;                     // M
  std::int64_t horizon = 200'000;       // T, including warmup
  std::optional<std::int64_t> warmup;   // default: 10% of T
  std::uint64_t seed = 1;
  std::int64_t series_window = 0;       // 0 disables the windowed success series

  std::int64_t warmup_slots() const { return warmup.value_or(horizon / 10); }

  void validate() const {
    system.validate();
    std::ostringstream bad;
    if (channels < 0) bad << " M must be >= 0;";
    if (horizon < 1) bad << " T must be >= 1;";
    if (warmup && (*warmup < 0 || *warmup >= horizon)) bad << " warmup must lie in [0, T);";
    if (series_window < 0) bad << " series_window must be >= 0;";
    if (!bad.str().empty()) throw ValidationError("invalid run config:" + bad.str());
  }
};

struct SlotEvents {
  int arrivals = 0;
  int successes = 0;
  int drops = 0;
  int queries = 0;
  double expected_reward = 0.0;  // sum over arriving jobs of the belief-predicted success probability
};

struct SimMetrics {
  std::int64_t arrivals = 0;
  std::int64_t successes = 0;
  std::int64_t drops = 0;
  std::int64_t queries_used = 0;
  std::int64_t measured_slots = 0;
  std::int64_t budget_checked_slots = 0;  // slots whose decision passed the budget check
  double success_rate = 0.0;              // successes / arrivals
  double queries_per_slot = 0.0;
  double model_reward = 0.0;  // (1 / (T * sum lambda)) * sum_t sum_n z_n r_n
  std::vector<double> series;  // success rate per window, when enabled

  friend bool operator==(const SimMetrics&, const SimMetrics&) = default;
};

class Simulator {
 public:
  explicit Simulator(RunConfig config) : config_((config.validate(), std::move(config))) {
    const auto& sys = config_.system;
    const auto n = static_cast<std::size_t>(sys.num_dispatchers);
    const auto k = static_cast<std::size_t>(sys.servers_per_dispatcher);
    for (const auto& p : sys.servers) idle_.emplace_back(p, sys.aoi_max);
    server_rng_.reserve(n * k);
    for (std::size_t i = 0; i < n * k; ++i) server_rng_.emplace_back(config_.seed, StreamKind::kServer, i);
    arrival_rng_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) arrival_rng_.emplace_back(config_.seed, StreamKind::kArrival, i);

    status_.resize(n * k);
    beliefs_.assign(n, DispatcherBelief(k));
    for (std::size_t i = 0; i < n * k; ++i) {
      const auto pi = stationary(sys.servers[i]);
      status_[i] = server_rng_[i].bernoulli(pi.pi0) ? 0 : 1;
      // Free initial observation of X(0).
      beliefs_[i / k][i % k] = {status_[i], 1};
    }
    observed_.assign(n * k, -1);
  }

  const RunConfig& config() const noexcept { return config_; }
  std::int64_t clock() const noexcept { return clock_; }
  std::span<const DispatcherBelief> beliefs() const noexcept { return beliefs_; }

  // Ground truth, for metrics and oracle tests only.
  std::uint8_t true_status(int n, int k) const {
    return status_[index(n, k)];
  }

  double idle_prob_of(int n, int k) const {
    const auto& b = beliefs_[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)];
    return idle_[index(n, k)](b.last_status, b.aoi);
  }

  SlotEvents step(const ScheduleDecision& decision) {
    const auto& sys = config_.system;
    check_budget(decision, sys.num_dispatchers, sys.servers_per_dispatcher, config_.channels);
    ++budget_checked_;

    SlotEvents ev;
    const int kk = sys.servers_per_dispatcher;
    for (int n = 0; n < sys.num_dispatchers; ++n) {
      if (!arrival_rng_[static_cast<std::size_t>(n)].bernoulli(sys.lambda[static_cast<std::size_t>(n)])) continue;
      const auto& belief = beliefs_[static_cast<std::size_t>(n)];
      const auto tables = std::span<const IdleProbTable>(idle_).subspan(index(n, 0), static_cast<std::size_t>(kk));
      const auto j = assign_server(belief, tables);
      const auto i = index(n, static_cast<int>(j));
      ++ev.arrivals;
      ev.expected_reward += tables[j](belief[j].last_status, belief[j].aoi);
      if (status_[i] == 0) {
        ++ev.successes;
      } else {
        ++ev.drops;
      }
      observed_[i] = status_[i];
    }
    for (const auto& q : decision.queries) {
      const auto i = index(q.dispatcher, q.server);
      observed_[i] = status_[i];
      ++ev.queries;
    }

    for (std::size_t i = 0; i < status_.size(); ++i) {
      const auto& p = sys.servers[i];
      const double stay = status_[i] == 0 ? p.phi() : p.psi();
      if (!server_rng_[i].bernoulli(stay)) status_[i] ^= 1;
    }

    for (std::size_t i = 0; i < status_.size(); ++i) {
      auto& info = beliefs_[i / static_cast<std::size_t>(kk)][i % static_cast<std::size_t>(kk)];
      info = observed_[i] >= 0 ? advance(info, static_cast<std::uint8_t>(observed_[i]), sys.aoi_max)
                               : advance(info, std::nullopt, sys.aoi_max);
      observed_[i] = -1;
    }
    ++clock_;
    return ev;
  }

  std::int64_t budget_checked_slots() const noexcept { return budget_checked_; }

 private:
  std::size_t index(int n, int k) const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(config_.system.servers_per_dispatcher) +
           static_cast<std::size_t>(k);
  }

  RunConfig config_;
  std::vector<IdleProbTable> idle_;
  std::vector<RandomStream> server_rng_;
  std::vector<RandomStream> arrival_rng_;
  std::vector<std::uint8_t> status_;
  std::vector<DispatcherBelief> beliefs_;
  std::vector<int> observed_;  // -1 = not observed this slot
  std::int64_t clock_ = 0;
  std::int64_t budget_checked_ = 0;
};

using DecideFn = std::function<ScheduleDecision(std::span<const DispatcherBelief>)>;

// Runs T slots with an arbitrary per-slot scheduler.
inline SimMetrics run_with(const RunConfig& config, const DecideFn& decide_slot) {
  Simulator sim(config);
  const std::int64_t warmup = config.warmup_slots();
  SimMetrics m;
  double reward_sum = 0.0;
  std::int64_t win_arrivals = 0;
  std::int64_t win_successes = 0;
  for (std::int64_t t = 0; t < config.horizon; ++t) {
    const auto decision = decide_slot(sim.beliefs());
    const auto ev = sim.step(decision);
    if (t < warmup) continue;
    m.arrivals += ev.arrivals;
    m.successes += ev.successes;
    m.drops += ev.drops;
    m.queries_used += ev.queries;
    reward_sum += ev.expected_reward;
    ++m.measured_slots;
    if (config.series_window > 0) {
      win_arrivals += ev.arrivals;
      win_successes += ev.successes;
      if (m.measured_slots % config.series_window == 0) {
        m.series.push_back(win_arrivals ? static_cast<double>(win_successes) / static_cast<double>(win_arrivals) : 0.0);
        win_arrivals = win_successes = 0;
      }
    }
  }
  m.budget_checked_slots = sim.budget_checked_slots();
  if (m.arrivals > 0) m.success_rate = static_cast<double>(m.successes) / static_cast<double>(m.arrivals);
  if (m.measured_slots > 0) {
    const auto slots = static_cast<double>(m.measured_slots);
    m.queries_per_slot = static_cast<double>(m.queries_used) / slots;
    if (config.system.lambda_sum() > 0.0) m.model_reward = reward_sum / (slots * config.system.lambda_sum());
  }
  return m;
}

inline SimMetrics run(const RunConfig& config, Policy policy) {
  if (auto* ngm = std::get_if<NgmPolicy>(&policy)) {
    if (ngm->tables.size() != static_cast<std::size_t>(config.system.num_dispatchers)) {
      throw ValidationError("NGM policy needs one solved table per dispatcher");
    }
  }
  const int k = config.system.servers_per_dispatcher;
  const int m = config.channels;
  return run_with(config, [&](std::span<const DispatcherBelief> beliefs) { return decide(policy, beliefs, k, m); });
}

}  // namespace edgemon
