#pragma once

#include <numbers>

namespace atomlaser {

/// Reduced Planck constant (J s), CODATA 2018 exact value.
inline constexpr double hbar = 1.054571817e-34;
inline constexpr double pi = std::numbers::pi;

}  // namespace atomlaser
