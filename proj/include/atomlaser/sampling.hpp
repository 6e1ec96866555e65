#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "grid.hpp"
#include "rng.hpp"

// Wigner-distribution initial conditions. Every grid point is an
// independent single mode; the noise amplitude eta has real and imaginary
// standard deviation 1/2 and enters the field as eta / sqrt(dV).

namespace atomlaser {

struct Squeeze {
  double r = 0.0;
  double theta = 0.0;  // rad
};

/// Everything needed to reproduce one trajectory's random numbers.
struct NoiseSpec {
  std::uint64_t seed = 0;
  std::uint64_t trajectory = 0;
  std::array<Squeeze, 2> squeeze{};  // per component (trapped, untrapped)
  /// Points whose mean occupation |psi0|^2 dV is below this value receive
  /// coherent (unsqueezed) noise. 0 squeezes every point.
  double squeeze_min_occupation = 0.0;
};

/// psi0 + eta / sqrt(dV), eta complex Gaussian with component sd 1/2.
/// `component` (1 or 2) selects the random stream.
inline std::vector<std::complex<double>> sample_coherent(std::span<const std::complex<double>> mean,
                                                         const Grid& g, const NoiseSpec& noise,
                                                         int component) {
  RandomStream rng(noise.seed, noise.trajectory,
                   component == 1 ? RandomStream::trapped : RandomStream::untrapped);
  const double s = 0.5 / std::sqrt(g.volume_element());
  std::vector<std::complex<double>> out(mean.begin(), mean.end());
  for (auto& v : out) {
    const double re = rng.gaussian();
    const double im = rng.gaussian();
    v += std::complex<double>{s * re, s * im};
  }
  return out;
}

/// Point-local quadrature squeezing. At each point the noise is squeezed by
/// e^{-r} along the direction arg(psi0) + theta/2 and stretched by e^{+r}
/// orthogonally; at vacuum points the direction is theta/2. r = 0 is exactly
/// sample_coherent().
inline std::vector<std::complex<double>> sample_squeezed(std::span<const std::complex<double>> mean,
                                                         const Grid& g, const NoiseSpec& noise,
                                                         int component) {
  const Squeeze sq = noise.squeeze[component == 1 ? 0 : 1];
  if (sq.r == 0.0) return sample_coherent(mean, g, noise, component);
  RandomStream rng(noise.seed, noise.trajectory,
                   component == 1 ? RandomStream::trapped : RandomStream::untrapped);
  const double dv = g.volume_element();
  const double s = 0.5 / std::sqrt(dv);
  const double narrow = std::exp(-sq.r);
  const double wide = std::exp(sq.r);
  std::vector<std::complex<double>> out(mean.begin(), mean.end());
  for (auto& v : out) {
    const double re = rng.gaussian();
    const double im = rng.gaussian();
    if (std::norm(v) * dv < noise.squeeze_min_occupation) {
      v += std::complex<double>{s * re, s * im};
      continue;
    }
    const double local = std::norm(v) > 0.0 ? std::arg(v) : 0.0;
    const auto frame = std::polar(1.0, local + 0.5 * sq.theta);
    v += frame * std::complex<double>{s * narrow * re, s * wide * im};
  }
  return out;
}

/// Symmetric-ordering number estimator per point: mean |psi|^2 - 1/(2 dV)
/// (m^-d). Multiply by dV and sum for a total count.
inline std::vector<double> number_estimator(std::span<const std::vector<std::complex<double>>> samples,
                                            const Grid& g) {
  if (samples.empty()) return {};
  const std::size_t n = samples.front().size();
  std::vector<double> out(n, 0.0);
  for (const auto& s : samples)
    for (std::size_t i = 0; i < n; ++i) out[i] += std::norm(s[i]);
  const double inv = 1.0 / static_cast<double>(samples.size());
  const double vac = 0.5 / g.volume_element();
  for (auto& v : out) v = v * inv - vac;
  return out;
}

}  // namespace atomlaser
