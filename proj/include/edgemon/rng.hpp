#pragma once

// Seeded random streams. Every stochastic source in the simulator (each
// server chain, each dispatcher's arrival process) owns an independent
// std::mt19937_64 whose state is expanded by std::seed_seq from
// (run seed, stream kind, stream index). Streams never share draws, so a
// policy that changes what is observed cannot perturb server or arrival
// trajectories: runs with the same seed see the same world.

#include <cstdint>
#include <random>

namespace edgemon {

enum class StreamKind : std::uint32_t { kServer = 1, kArrival = 2 };

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, StreamKind kind, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(kind), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    engine_.seed(seq);
  }

  // Uniform on [0, 1) with 53 random bits; bit-identical across platforms.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace edgemon
