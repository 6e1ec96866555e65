#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <string>

#include "constants.hpp"
#include "error.hpp"

namespace atomlaser {

/// Physical description of the two-state outcoupler. All members are SI.
///
/// The single-beam light shifts of the three-level scheme are spatially
/// uniform, so only their difference matters; it is folded into `detuning`.
/// When `detuning` is empty the integrator picks the value that puts the
/// Raman resonance at the condensate centre (see resonant_detuning()).
struct PhysicalParams {
  double mass = 0.0;            // kg
  double trap_frequency = 0.0;  // rad/s, isotropic
  double a11 = 0.0;             // m, trapped-trapped scattering length
  double a22 = 0.0;             // m, beam-beam
  double a12 = 0.0;             // m, cross
  std::complex<double> rabi{0.0, 0.0};  // rad/s, two-photon Rabi frequency
  std::optional<double> detuning;       // rad/s, effective two-photon detuning
  double kick = 0.0;                    // 1/m, |k0|
  std::array<double, 2> kick_direction{0.0, 1.0};  // unit vector (x, z), 2D only
  std::optional<double> transverse_area;    // m^2, reduction to 1D
  std::optional<double> transverse_length;  // m, reduction to 2D
  double atom_number = 0.0;
  double squeeze_r = 0.0;
  double squeeze_theta = 0.0;  // rad

  /// Sets a11 = a22 = a12 = a.
  PhysicalParams& set_scattering_length(double a) {
    a11 = a22 = a12 = a;
    return *this;
  }

  /// Bare contact strength U_ij = 4 pi hbar^2 a_ij / m (J m^3).
  double contact_strength(double a) const { return 4.0 * pi * hbar * hbar * a / mass; }

  /// Reduction factor dividing U for a `dimension`-dimensional model.
  double reduction_factor(int dimension) const {
    switch (dimension) {
      case 1:
        if (!transverse_area || !(*transverse_area > 0.0))
          throw ParameterError("1D model requires a positive transverse_area");
        return *transverse_area;
      case 2:
        if (!transverse_length || !(*transverse_length > 0.0))
          throw ParameterError("2D model requires a positive transverse_length");
        return *transverse_length;
      case 3:
        return 1.0;
      default:
        throw ParameterError("dimension must be 1, 2 or 3");
    }
  }

  /// Dimensionally reduced interaction strength (J m^d).
  double interaction(int i, int j, int dimension) const {
    const double a = (i == 1 && j == 1) ? a11 : (i == 2 && j == 2) ? a22 : a12;
    return contact_strength(a) / reduction_factor(dimension);
  }

  void validate(int dimension) const {
    if (!(mass > 0.0)) throw ParameterError("mass must be positive");
    if (!(trap_frequency > 0.0)) throw ParameterError("trap_frequency must be positive");
    if (!(atom_number > 0.0)) throw ParameterError("atom_number must be positive");
    if (a11 < 0.0 || a22 < 0.0 || a12 < 0.0)
      throw ParameterError("scattering lengths must be non-negative");
    if (!(kick >= 0.0)) throw ParameterError("kick must be non-negative");
    if (!std::isfinite(squeeze_r) || !std::isfinite(squeeze_theta))
      throw ParameterError("squeeze parameters must be finite");
    reduction_factor(dimension);
    if (dimension == 2) {
      const double n = std::hypot(kick_direction[0], kick_direction[1]);
      if (std::abs(n - 1.0) > 1e-9) throw ParameterError("kick_direction must be a unit vector");
    }
  }
};

/// Harmonic-oscillator unit system: length sqrt(hbar/(m w)), time 1/w,
/// energy hbar w.
struct OscillatorUnits {
  double length;
  double time;
  double energy;

  explicit OscillatorUnits(const PhysicalParams& p)
      : length(std::sqrt(hbar / (p.mass * p.trap_frequency))),
        time(1.0 / p.trap_frequency),
        energy(hbar * p.trap_frequency) {}

  double wavenumber() const { return 1.0 / length; }
  /// Scale of a d-dimensional field amplitude (m^{-d/2}).
  double field(int dimension) const { return std::pow(length, -0.5 * dimension); }
  /// Dimensionless interaction strength for a d-dimensional model.
  double interaction(const PhysicalParams& p, int i, int j, int dimension) const {
    return p.interaction(i, j, dimension) / (energy * std::pow(length, dimension));
  }
};

}  // namespace atomlaser
