#pragma once

// Per-server information state (last observed status, age of information)
// and the assignment rule a dispatcher applies to an arriving job.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "edgemon/chain.hpp"

namespace edgemon {

struct InfoState {
  std::uint8_t last_status = 0;  // 0 idle, 1 busy
  int aoi = 1;                   // 1 <= aoi <= aoi_max

  friend bool operator==(const InfoState&, const InfoState&) = default;
};

using DispatcherBelief = std::vector<InfoState>;

// One slot of AoI dynamics. An observation (query result or ACK/NAK, which
// report the same bit) resets the age to one; otherwise it grows and
// saturates at aoi_max.
inline InfoState advance(InfoState info, std::optional<std::uint8_t> observed, int aoi_max) {
  if (observed) return {*observed, 1};
  return {info.last_status, std::min(info.aoi + 1, aoi_max)};
}

namespace detail {

template <class IdleFn>
std::size_t argmax_idle(std::size_t count, IdleFn&& idle) {
  std::size_t best = 0;
  double best_p = idle(0);
  for (std::size_t k = 1; k < count; ++k) {
    const double p = idle(k);
    if (p > best_p) {  // strict: ties keep the lowest index
      best_p = p;
      best = k;
    }
  }
  return best;
}

}  // namespace detail

inline std::size_t assign_server(std::span<const InfoState> beliefs,
                                 std::span<const IdleProbTable> servers) {
  return detail::argmax_idle(beliefs.size(), [&](std::size_t k) {
    return servers[k](beliefs[k].last_status, beliefs[k].aoi);
  });
}

inline std::size_t assign_server(std::span<const InfoState> beliefs,
                                 std::span<const TransitionMatrix> servers) {
  return detail::argmax_idle(beliefs.size(), [&](std::size_t k) {
    return idle_prob(servers[k], beliefs[k].last_status, beliefs[k].aoi);
  });
}

// Probability that a job arriving now succeeds: the best server's idle probability.
inline double dispatcher_reward(std::span<const InfoState> beliefs,
                                std::span<const IdleProbTable> servers) {
  const auto k = assign_server(beliefs, servers);
  return servers[k](beliefs[k].last_status, beliefs[k].aoi);
}

inline double dispatcher_reward(std::span<const InfoState> beliefs,
                                std::span<const TransitionMatrix> servers) {
  const auto k = assign_server(beliefs, servers);
  return idle_prob(servers[k], beliefs[k].last_status, beliefs[k].aoi);
}

}  // namespace edgemon
