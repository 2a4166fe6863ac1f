#pragma once

// Two-state (idle/busy) server availability chain.
//
//        | phi      1 - phi |
//   P =  |                  |      state 0 = idle, state 1 = busy
//        | 1 - psi  psi     |
//
// For a 2x2 stochastic matrix the delta-step entries have the closed form
//   phi(d) = pi0 + pi1 * r^d,  psi(d) = pi1 + pi0 * r^d,  r = phi + psi - 1,
// which is what step_entries() evaluates.

#include <cmath>
#include <sstream>
#include <vector>

#include "edgemon/error.hpp"

namespace edgemon {

class TransitionMatrix {
 public:
  TransitionMatrix(double phi, double psi) : phi_(phi), psi_(psi) {
    if (!(phi > 0.0 && phi < 1.0) || !(psi > 0.0 && psi < 1.0)) {
      std::ostringstream os;
      os << "transition matrix is not ergodic: phi=" << phi << " psi=" << psi
         << " (both must lie in the open interval (0,1))";
      throw ValidationError(os.str());
    }
  }

  double phi() const noexcept { return phi_; }
  double psi() const noexcept { return psi_; }
  // Second eigenvalue; governs how fast beliefs decay to the stationary mass.
  double eigen() const noexcept { return phi_ + psi_ - 1.0; }

  friend bool operator==(const TransitionMatrix&, const TransitionMatrix&) = default;

 private:
  double phi_;
  double psi_;
};

struct StationaryDist {
  double pi0;  // idle mass
  double pi1;  // busy mass
};

struct StepEntries {
  double phi_delta;  // P^delta(0,0)
  double psi_delta;  // P^delta(1,1)
};

inline StationaryDist stationary(const TransitionMatrix& p) {
  const double leave_idle = 1.0 - p.phi();
  const double leave_busy = 1.0 - p.psi();
  const double pi0 = leave_busy / (leave_idle + leave_busy);
  return {pi0, leave_idle / (leave_idle + leave_busy)};
}

inline StepEntries step_entries(const TransitionMatrix& p, int delta) {
  if (delta < 1) {
    throw ValidationError("step_entries: delta must be >= 1 (minimum AoI is one slot)");
  }
  if (delta == 1) return {p.phi(), p.psi()};
  const auto pi = stationary(p);
  const double decay = std::pow(p.eigen(), delta);
  return {pi.pi0 + pi.pi1 * decay, pi.pi1 + pi.pi0 * decay};
}

// Pr[X(t) = 0 | last observed status, age].
inline double idle_prob(const TransitionMatrix& p, int last_status, int delta) {
  const auto e = step_entries(p, delta);
  return last_status == 0 ? e.phi_delta : 1.0 - e.psi_delta;
}

// Idle probabilities for delta = 1..aoi_max, precomputed once per server.
class IdleProbTable {
 public:
  IdleProbTable(const TransitionMatrix& p, int aoi_max) : matrix_(p), aoi_max_(aoi_max) {
    if (aoi_max < 1) throw ValidationError("aoi_max must be >= 1");
    table_.resize(2 * static_cast<std::size_t>(aoi_max));
    for (int d = 1; d <= aoi_max; ++d) {
      const auto e = step_entries(p, d);
      table_[static_cast<std::size_t>(d - 1)] = e.phi_delta;
      table_[static_cast<std::size_t>(aoi_max + d - 1)] = 1.0 - e.psi_delta;
    }
  }

  double operator()(int last_status, int aoi) const noexcept {
    return table_[static_cast<std::size_t>(last_status * aoi_max_ + aoi - 1)];
  }

  const TransitionMatrix& matrix() const noexcept { return matrix_; }
  int aoi_max() const noexcept { return aoi_max_; }

 private:
  TransitionMatrix matrix_;
  int aoi_max_;
  std::vector<double> table_;  // [last_status][aoi-1]
};

}  // namespace edgemon
