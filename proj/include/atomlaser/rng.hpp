#pragma once

#include <cstdint>
#include <random>

namespace atomlaser {

/// Independent random streams addressed by (master seed, trajectory, stream).
/// The 64-bit seed and index are folded through std::seed_seq into the
/// state of a std::mt19937_64, one engine per address.
class RandomStream {
 public:
  enum Stream : std::uint32_t { trapped = 0, untrapped = 1, absorber = 2 };

  RandomStream(std::uint64_t seed, std::uint64_t trajectory, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trajectory),
                      static_cast<std::uint32_t>(trajectory >> 32), stream, 0x61746c61u};
    engine_.seed(seq);
  }

  /// Standard normal deviate (exact distribution, Marsaglia polar method).
  double gaussian() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace atomlaser
