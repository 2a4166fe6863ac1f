#pragma once

// Per-slot query schedulers. Every decision respects two budgets: at most M
// queries in the slot, and at most one query per dispatcher.

#include <algorithm>
#include <memory>
#include <numeric>
#include <sstream>
#include <utility>
#include <variant>
#include <vector>

#include "edgemon/belief.hpp"
#include "edgemon/error.hpp"
#include "edgemon/mdp.hpp"

namespace edgemon {

struct QueryPair {
  int dispatcher;
  int server;

  friend bool operator==(const QueryPair&, const QueryPair&) = default;
};

struct ScheduleDecision {
  std::vector<QueryPair> queries;

  bool empty() const noexcept { return queries.empty(); }
};

inline void check_budget(const ScheduleDecision& d, int num_dispatchers, int servers_per_dispatcher,
                         int channels) {
  if (static_cast<int>(d.queries.size()) > channels) {
    std::ostringstream os;
    os << "decision issues " << d.queries.size() << " queries with only " << channels << " channels";
    throw BudgetViolation(os.str());
  }
  std::vector<char> used(static_cast<std::size_t>(num_dispatchers), 0);
  for (const auto& q : d.queries) {
    if (q.dispatcher < 0 || q.dispatcher >= num_dispatchers || q.server < 0 ||
        q.server >= servers_per_dispatcher) {
      throw BudgetViolation("decision names a dispatcher or server out of range");
    }
    if (used[static_cast<std::size_t>(q.dispatcher)]++) {
      std::ostringstream os;
      os << "dispatcher " << q.dispatcher << " issues more than one query in a slot";
      throw BudgetViolation(os.str());
    }
  }
}

// ---- Net-gain maximization ------------------------------------------------

struct DispatcherGain {
  int server = 0;     // k*_n, 0-based
  double gain = 0.0;  // alpha*_n
};

// Best server to query and its net gain; ties go to the lowest server index.
inline DispatcherGain best_net_gain(const QTable& table, StateId s) {
  DispatcherGain best{0, table.net_gain(s, 1)};
  for (int a = 2; a < table.num_actions; ++a) {
    const double g = table.net_gain(s, a);
    if (g > best.gain) best = {a - 1, g};
  }
  return best;
}

// Up to M dispatchers with the largest non-negative gains; ties across
// dispatchers go to the lowest index.
inline ScheduleDecision select_top_gains(std::span<const DispatcherGain> gains, int channels) {
  ScheduleDecision out;
  if (channels <= 0) return out;
  std::vector<int> order;
  for (int n = 0; n < static_cast<int>(gains.size()); ++n) {
    if (gains[static_cast<std::size_t>(n)].gain >= 0.0) order.push_back(n);
  }
  const auto take = std::min<std::size_t>(order.size(), static_cast<std::size_t>(channels));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](int a, int b) {
                      const double ga = gains[static_cast<std::size_t>(a)].gain;
                      const double gb = gains[static_cast<std::size_t>(b)].gain;
                      return ga != gb ? ga > gb : a < b;
                    });
  for (std::size_t i = 0; i < take; ++i) {
    const int n = order[i];
    out.queries.push_back({n, gains[static_cast<std::size_t>(n)].server});
  }
  return out;
}

// Q-table plus the codec that maps a live belief onto its rows.
struct SolvedDispatcher {
  std::shared_ptr<const QTable> table;
  StateCodec codec;

  explicit SolvedDispatcher(std::shared_ptr<const QTable> t)
      : table(std::move(t)), codec(table->spec.num_servers(), table->spec.aoi_max) {}
};

inline ScheduleDecision ngm_decide(std::span<const DispatcherBelief> beliefs,
                                   std::span<const SolvedDispatcher> tables, int channels) {
  std::vector<DispatcherGain> gains(beliefs.size());
  for (std::size_t n = 0; n < beliefs.size(); ++n) {
    const auto& t = tables[n];
    gains[n] = best_net_gain(*t.table, t.codec.encode(beliefs[n]));
  }
  return select_top_gains(gains, channels);
}

// ---- Round robin ----------------------------------------------------------

// A single cursor walks the N*K (dispatcher, server) pairs in lexicographic
// order. Pairs skipped because their dispatcher already queried this slot
// stay pending; pairs served ahead of the cursor are marked so the cursor
// steps over them on its way round.
struct RoundRobinCursor {
  std::size_t position = 0;
  std::vector<bool> served_ahead;

  friend bool operator==(const RoundRobinCursor&, const RoundRobinCursor&) = default;
};

inline std::pair<ScheduleDecision, RoundRobinCursor> round_robin_decide(RoundRobinCursor cursor,
                                                                        int num_dispatchers,
                                                                        int servers_per_dispatcher,
                                                                        int channels) {
  ScheduleDecision out;
  const auto n_pairs = static_cast<std::size_t>(num_dispatchers) * static_cast<std::size_t>(servers_per_dispatcher);
  if (channels <= 0 || n_pairs == 0) return {out, cursor};
  if (cursor.served_ahead.size() != n_pairs) {
    cursor.served_ahead.assign(n_pairs, false);
    cursor.position %= n_pairs;
  }
  const auto k_count = static_cast<std::size_t>(servers_per_dispatcher);
  std::vector<char> used(static_cast<std::size_t>(num_dispatchers), 0);
  for (std::size_t step = 0; step < n_pairs && static_cast<int>(out.queries.size()) < channels; ++step) {
    const std::size_t pos = (cursor.position + step) % n_pairs;
    if (cursor.served_ahead[pos]) continue;
    const std::size_t n = pos / k_count;
    if (used[n]) continue;
    used[n] = 1;
    cursor.served_ahead[pos] = true;
    out.queries.push_back({static_cast<int>(n), static_cast<int>(pos % k_count)});
  }
  // Move past the contiguous run of served pairs; the first pending one is next.
  for (std::size_t step = 0; step < n_pairs && cursor.served_ahead[cursor.position]; ++step) {
    cursor.served_ahead[cursor.position] = false;
    cursor.position = (cursor.position + 1) % n_pairs;
  }
  return {out, cursor};
}

inline ScheduleDecision never_query_decide() { return {}; }

// ---- Policy kinds -----------------------------------------------------------

struct NgmPolicy {
  std::vector<SolvedDispatcher> tables;  // one per dispatcher (may share a table)
  double mu_star = 0.0;
};

struct RoundRobinPolicy {
  RoundRobinCursor cursor;
};

struct NeverQueryPolicy {};

using Policy = std::variant<NgmPolicy, RoundRobinPolicy, NeverQueryPolicy>;

inline ScheduleDecision decide(Policy& policy, std::span<const DispatcherBelief> beliefs,
                               int servers_per_dispatcher, int channels) {
  return std::visit(
      [&](auto& p) -> ScheduleDecision {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NgmPolicy>) {
          return ngm_decide(beliefs, p.tables, channels);
        } else if constexpr (std::is_same_v<T, RoundRobinPolicy>) {
          auto [d, next] = round_robin_decide(std::move(p.cursor), static_cast<int>(beliefs.size()),
                                              servers_per_dispatcher, channels);
          p.cursor = std::move(next);
          return d;
        } else {
          return never_query_decide();
        }
      },
      policy);
}

}  // namespace edgemon
