#pragma once

// Per-dispatcher average-reward MDP of the Lagrangian subproblem.
//
// State: the joint information state of the dispatcher's K servers.
// Action: 0 = no query, k in 1..K = query server k-1.
// Reward: (lambda / lambda_sum) * max_k Pr[server k idle] - mu * [action != 0].
//
// The slot-t query result is not available to the slot-t assignment; both the
// query and the ACK/NAK of an assigned job observe X(t) and reset the age at t+1.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "edgemon/belief.hpp"
#include "edgemon/chain.hpp"
#include "edgemon/error.hpp"
#include "edgemon/parallel.hpp"

namespace edgemon {

using StateId = std::uint64_t;

inline constexpr int kMaxServersPerDispatcher = 16;

struct MdpSpec {
  std::vector<TransitionMatrix> servers;  // K entries
  int aoi_max = 20;
  double lambda = 0.3;      // this dispatcher's arrival probability
  double lambda_sum = 0.3;  // sum over all dispatchers; normalizes the reward
  double mu = 0.0;          // price per query

  int num_servers() const noexcept { return static_cast<int>(servers.size()); }

  void validate() const {
    std::ostringstream bad;
    if (servers.empty()) bad << " K must be >= 1;";
    if (num_servers() > kMaxServersPerDispatcher) bad << " K exceeds " << kMaxServersPerDispatcher << ";";
    if (aoi_max < 1) bad << " aoi_max must be >= 1;";
    if (!(lambda >= 0.0 && lambda <= 1.0)) bad << " lambda must lie in [0,1];";
    if (!(lambda_sum > 0.0)) bad << " lambda_sum must be > 0;";
    if (!(mu >= 0.0)) bad << " mu must be >= 0;";
    if (!bad.str().empty()) throw ValidationError("invalid MDP spec:" + bad.str());
  }
};

// Dense mixed-radix encoding of a DispatcherBelief. Server k contributes the
// digit last_status * aoi_max + (aoi - 1) at place (2 * aoi_max)^k.
class StateCodec {
 public:
  StateCodec(int num_servers, int aoi_max)
      : num_servers_(num_servers), aoi_max_(aoi_max), radix_(2 * static_cast<StateId>(aoi_max)) {
    if (num_servers < 1 || num_servers > kMaxServersPerDispatcher || aoi_max < 1 || aoi_max > 4096) {
      throw ValidationError("StateCodec: need 1 <= K <= 16 and 1 <= aoi_max <= 4096");
    }
    places_.resize(static_cast<std::size_t>(num_servers));
    StateId place = 1;
    for (int k = 0; k < num_servers; ++k) {
      places_[static_cast<std::size_t>(k)] = place;
      place *= radix_;
      if (place > std::numeric_limits<std::uint32_t>::max()) {
        throw ValidationError("StateCodec: state space exceeds 2^32 states");
      }
    }
    size_ = place;
  }

  int num_servers() const noexcept { return num_servers_; }
  int aoi_max() const noexcept { return aoi_max_; }
  StateId radix() const noexcept { return radix_; }
  StateId size() const noexcept { return size_; }
  StateId place(int k) const noexcept { return places_[static_cast<std::size_t>(k)]; }

  int digit(InfoState s) const noexcept { return s.last_status * aoi_max_ + (s.aoi - 1); }
  InfoState from_digit(int d) const noexcept {
    return {static_cast<std::uint8_t>(d / aoi_max_), d % aoi_max_ + 1};
  }

  StateId encode(std::span<const InfoState> belief) const {
    if (static_cast<int>(belief.size()) != num_servers_) {
      throw ValidationError("StateCodec::encode: belief has the wrong number of servers");
    }
    StateId id = 0;
    for (int k = 0; k < num_servers_; ++k) {
      const auto& s = belief[static_cast<std::size_t>(k)];
      if (s.last_status > 1 || s.aoi < 1 || s.aoi > aoi_max_) {
        throw ValidationError("StateCodec::encode: info state out of range");
      }
      id += static_cast<StateId>(digit(s)) * places_[static_cast<std::size_t>(k)];
    }
    return id;
  }

  DispatcherBelief decode(StateId id) const {
    DispatcherBelief out(static_cast<std::size_t>(num_servers_));
    for (auto& s : out) {
      s = from_digit(static_cast<int>(id % radix_));
      id /= radix_;
    }
    return out;
  }

 private:
  int num_servers_;
  int aoi_max_;
  StateId radix_;
  StateId size_ = 0;
  std::vector<StateId> places_;
};

struct Transition {
  StateId next;
  double prob;
};

// Closed-form transition model of one dispatcher. Successor distributions are
// generated on demand from cached idle probabilities.
class DispatcherModel {
 public:
  explicit DispatcherModel(MdpSpec spec)
      : spec_((spec.validate(), std::move(spec))), codec_(spec_.num_servers(), spec_.aoi_max) {
    const int a = spec_.aoi_max;
    idle_.reserve(spec_.servers.size());
    for (const auto& p : spec_.servers) idle_.emplace_back(p, a);
    aged_.resize(2 * static_cast<std::size_t>(a));
    for (int d = 0; d < 2 * a; ++d) {
      const int last = d / a;
      const int age0 = d % a;  // aoi - 1
      aged_[static_cast<std::size_t>(d)] = last * a + std::min(age0 + 1, a - 1);
    }
    reward_scale_ = spec_.lambda / spec_.lambda_sum;
  }

  const MdpSpec& spec() const noexcept { return spec_; }
  const StateCodec& codec() const noexcept { return codec_; }
  const std::vector<IdleProbTable>& idle_tables() const noexcept { return idle_; }
  StateId num_states() const noexcept { return codec_.size(); }
  int num_actions() const noexcept { return spec_.num_servers() + 1; }
  StateId reference_state() const noexcept { return 0; }  // every server at (idle, aoi 1)

  double expected_reward(StateId s, int action) const {
    Digits d{};
    unpack(s, d);
    return reward_from(d, best_server(d), action);
  }

  // Calls fn(next_state, probability) once per successor outcome with
  // non-zero probability. Outcomes are not merged.
  template <class Fn>
  void for_each_successor(StateId s, int action, Fn&& fn) const {
    Digits d{};
    unpack(s, d);
    const int best = best_server(d);
    emit_successors(d, best, action, fn);
  }

  std::vector<Transition> successors(StateId s, int action) const {
    std::vector<Transition> out;
    for_each_successor(s, action, [&](StateId n, double p) { out.push_back({n, p}); });
    return out;
  }

  // Reward and successors in one pass, for solver sweeps.
  template <class Fn>
  double expand(StateId s, int action, Fn&& fn) const {
    Digits d{};
    unpack(s, d);
    const int best = best_server(d);
    emit_successors(d, best, action, fn);
    return reward_from(d, best, action);
  }

 private:
  using Digits = std::array<int, kMaxServersPerDispatcher>;

  void unpack(StateId s, Digits& d) const {
    const StateId radix = codec_.radix();
    for (int k = 0; k < spec_.num_servers(); ++k) {
      d[static_cast<std::size_t>(k)] = static_cast<int>(s % radix);
      s /= radix;
    }
  }

  double idle_by_digit(int k, int digit) const {
    const auto& t = idle_[static_cast<std::size_t>(k)];
    const auto st = codec_.from_digit(digit);
    return t(st.last_status, st.aoi);
  }

  int best_server(const Digits& d) const {
    int best = 0;
    double best_p = idle_by_digit(0, d[0]);
    for (int k = 1; k < spec_.num_servers(); ++k) {
      const double p = idle_by_digit(k, d[static_cast<std::size_t>(k)]);
      if (p > best_p) {
        best_p = p;
        best = k;
      }
    }
    return best;
  }

  double reward_from(const Digits& d, int best, int action) const {
    return reward_scale_ * idle_by_digit(best, d[static_cast<std::size_t>(best)]) -
           (action != 0 ? spec_.mu : 0.0);
  }

  template <class Fn>
  void emit_successors(const Digits& d, int best, int action, Fn& fn) const {
    const int a = spec_.aoi_max;
    StateId base = 0;
    for (int k = 0; k < spec_.num_servers(); ++k) {
      base += static_cast<StateId>(aged_[static_cast<std::size_t>(d[static_cast<std::size_t>(k)])]) *
              codec_.place(k);
    }
    // Replace server k's aged digit with a fresh observation of `bit`.
    auto observe = [&](StateId from, int k, int bit) {
      const StateId place = codec_.place(k);
      return from - static_cast<StateId>(aged_[static_cast<std::size_t>(d[static_cast<std::size_t>(k)])]) * place +
             static_cast<StateId>(bit * a) * place;
    };
    auto emit = [&](StateId n, double p) {
      if (p > 0.0) fn(n, p);
    };

    const double lam = spec_.lambda;
    const double p_best = idle_by_digit(best, d[static_cast<std::size_t>(best)]);
    const int queried = action - 1;

    if (action == 0) {
      emit(base, 1.0 - lam);
      emit(observe(base, best, 0), lam * p_best);
      emit(observe(base, best, 1), lam * (1.0 - p_best));
      return;
    }

    const double p_q = idle_by_digit(queried, d[static_cast<std::size_t>(queried)]);
    const StateId q_idle = observe(base, queried, 0);
    const StateId q_busy = observe(base, queried, 1);
    if (queried == best) {
      // Query and ACK/NAK see the same bit.
      emit(q_idle, p_q);
      emit(q_busy, 1.0 - p_q);
      return;
    }
    emit(q_idle, (1.0 - lam) * p_q);
    emit(q_busy, (1.0 - lam) * (1.0 - p_q));
    emit(observe(q_idle, best, 0), lam * p_q * p_best);
    emit(observe(q_idle, best, 1), lam * p_q * (1.0 - p_best));
    emit(observe(q_busy, best, 0), lam * (1.0 - p_q) * p_best);
    emit(observe(q_busy, best, 1), lam * (1.0 - p_q) * (1.0 - p_best));
  }

  MdpSpec spec_;
  StateCodec codec_;
  std::vector<IdleProbTable> idle_;
  std::vector<int> aged_;  // digit -> digit after one unobserved slot
  double reward_scale_ = 0.0;
};

inline double expected_reward(std::span<const InfoState> state, int action, const MdpSpec& spec) {
  const DispatcherModel model(spec);
  return model.expected_reward(model.codec().encode(state), action);
}

inline std::vector<Transition> successors(std::span<const InfoState> state, int action,
                                          const MdpSpec& spec) {
  const DispatcherModel model(spec);
  return model.successors(model.codec().encode(state), action);
}

// Solved relative action-value function. q is row-major [state][action].
struct QTable {
  MdpSpec spec;
  double tol = 0.0;
  StateId num_states = 0;
  int num_actions = 0;
  std::vector<double> q;
  std::vector<double> values;  // relative values h, h(reference) = 0
  double gain = 0.0;
  double span_residual = 0.0;
  int sweeps = 0;

  double operator()(StateId s, int action) const {
    return q[s * static_cast<StateId>(num_actions) + static_cast<StateId>(action)];
  }

  // Q(s, k) - Q(s, 0) for k in 1..K.
  double net_gain(StateId s, int k) const { return (*this)(s, k) - (*this)(s, 0); }

  // argmax_a Q(s, a); exact ties go to action 0, then to the lowest index.
  int greedy_action(StateId s) const {
    int best = 0;
    double best_q = (*this)(s, 0);
    for (int a = 1; a < num_actions; ++a) {
      const double v = (*this)(s, a);
      if (v > best_q) {
        best_q = v;
        best = a;
      }
    }
    return best;
  }
};

inline double net_gain(const QTable& table, StateId s, int k) {
  if (k < 1 || k >= table.num_actions) throw ValidationError("net_gain: server action out of range");
  return table.net_gain(s, k);
}

struct RviOptions {
  double tol = 1e-9;
  int max_sweeps = 100000;
  std::optional<StateId> reference;        // defaults to the all-(0,1) state
  const std::vector<double>* warm_start = nullptr;  // relative values to start from
  StateId materialize_limit = 1'000'000;  // kernel is stored below this many states
  unsigned threads = 1;
};

namespace detail {

// Compressed (state, action) -> successors table.
struct Kernel {
  std::vector<std::uint64_t> row_start;
  std::vector<std::uint32_t> next;
  std::vector<double> prob;
  std::vector<double> reward;

  explicit Kernel(const DispatcherModel& m) {
    const StateId rows = m.num_states() * static_cast<StateId>(m.num_actions());
    row_start.reserve(rows + 1);
    reward.reserve(rows);
    row_start.push_back(0);
    for (StateId s = 0; s < m.num_states(); ++s) {
      for (int a = 0; a < m.num_actions(); ++a) {
        reward.push_back(m.expand(s, a, [&](StateId n, double p) {
          next.push_back(static_cast<std::uint32_t>(n));
          prob.push_back(p);
        }));
        row_start.push_back(next.size());
      }
    }
  }

  double backup(StateId row, const std::vector<double>& h) const {
    double acc = 0.0;
    for (auto i = row_start[row]; i < row_start[row + 1]; ++i) acc += prob[i] * h[next[i]];
    return reward[row] + acc;
  }
};

}  // namespace detail

// Synchronous relative value iteration. Each sweep applies the Bellman
// operator to h, re-centres at the reference state, and stops once the span
// of (T h - h) is within tol.
inline QTable relative_value_iteration(const DispatcherModel& model, const RviOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw ValidationError("relative_value_iteration: tol must be > 0");
  const StateId n = model.num_states();
  const int na = model.num_actions();
  const StateId ref = opt.reference.value_or(model.reference_state());
  if (ref >= n) throw ValidationError("relative_value_iteration: reference state out of range");

  std::optional<detail::Kernel> kernel;
  if (n <= opt.materialize_limit) kernel.emplace(model);

  auto backup = [&](StateId s, int a, const std::vector<double>& h) {
    if (kernel) return kernel->backup(s * static_cast<StateId>(na) + static_cast<StateId>(a), h);
    double acc = 0.0;
    const double r = model.expand(s, a, [&](StateId next, double p) { acc += p * h[next]; });
    return r + acc;
  };

  std::vector<double> h(n, 0.0);
  if (opt.warm_start && opt.warm_start->size() == n) h = *opt.warm_start;
  std::vector<double> th(n, 0.0);

  double span = std::numeric_limits<double>::infinity();
  int sweep = 0;
  while (sweep < opt.max_sweeps) {
    ++sweep;
    detail::parallel_for(0, n, opt.threads, [&](std::size_t lo, std::size_t hi) {
      for (StateId s = lo; s < hi; ++s) {
        double best = backup(s, 0, h);
        for (int a = 1; a < na; ++a) best = std::max(best, backup(s, a, h));
        th[s] = best;
      }
    });
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (StateId s = 0; s < n; ++s) {
      const double diff = th[s] - h[s];
      lo = std::min(lo, diff);
      hi = std::max(hi, diff);
    }
    span = hi - lo;
    const double offset = th[ref];
    for (StateId s = 0; s < n; ++s) h[s] = th[s] - offset;
    if (span <= opt.tol) break;
  }
  if (!(span <= opt.tol)) {
    std::ostringstream os;
    os << "relative value iteration did not converge in " << opt.max_sweeps
       << " sweeps (span " << span << " > tol " << opt.tol << ")";
    throw ConvergenceError(os.str(), span);
  }

  QTable out;
  out.spec = model.spec();
  out.tol = opt.tol;
  out.num_states = n;
  out.num_actions = na;
  out.span_residual = span;
  out.sweeps = sweep;
  out.q.resize(n * static_cast<StateId>(na));
  detail::parallel_for(0, n, opt.threads, [&](std::size_t lo, std::size_t hi) {
    for (StateId s = lo; s < hi; ++s) {
      for (int a = 0; a < na; ++a) out.q[s * static_cast<StateId>(na) + static_cast<StateId>(a)] = backup(s, a, h);
    }
  });
  double gain = out.q[ref * static_cast<StateId>(na)];
  for (int a = 1; a < na; ++a) gain = std::max(gain, out.q[ref * static_cast<StateId>(na) + static_cast<StateId>(a)]);
  for (auto& v : out.q) v -= gain;
  out.gain = gain;
  out.values = std::move(h);
  return out;
}

inline QTable relative_value_iteration(const MdpSpec& spec, double tol = 1e-9, int max_sweeps = 100000) {
  RviOptions opt;
  opt.tol = tol;
  opt.max_sweeps = max_sweeps;
  return relative_value_iteration(DispatcherModel(spec), opt);
}

}  // namespace edgemon
