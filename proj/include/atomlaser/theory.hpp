#pragma once

#include <cmath>
#include <complex>

#include "constants.hpp"
#include "error.hpp"
#include "params.hpp"

// Closed-form Thomas-Fermi and single-mode phase-diffusion predictions.
// These use a11 as "the" scattering length of the condensate.

namespace atomlaser {

namespace detail {
inline void check_theory_inputs(int dimension, double n) {
  if (dimension < 1 || dimension > 3) throw ParameterError("dimension must be 1, 2 or 3");
  if (!(n > 0.0)) throw ParameterError("atom number must be positive");
}
}  // namespace detail

/// Thomas-Fermi chemical potential (J) of N atoms in an isotropic trap,
/// reduced to `dimension` dimensions.
inline double chemical_potential(const PhysicalParams& p, int dimension, double n) {
  detail::check_theory_inputs(dimension, n);
  const double m = p.mass;
  const double w2 = p.trap_frequency * p.trap_frequency;
  const double u = p.contact_strength(p.a11);
  switch (dimension) {
    case 1: {
      const double area = p.reduction_factor(1);
      return 0.5 * m * w2 * std::pow(3.0 * n * u / (2.0 * m * w2 * area), 2.0 / 3.0);
    }
    case 2: {
      const double length = p.reduction_factor(2);
      return std::sqrt(u * m * w2 * n / (pi * length));
    }
    default:
      return 0.5 * m * w2 * std::pow(15.0 * n * u / (4.0 * pi * m * w2), 2.0 / 5.0);
  }
}

/// Energy uncertainty sqrt(N) dmu/dN (J) from coherent-state number
/// fluctuations; the phase-diffusion floor of the laser linewidth is twice
/// this value.
inline double phase_diffusion_limit(const PhysicalParams& p, int dimension, double n) {
  detail::check_theory_inputs(dimension, n);
  const double m = p.mass;
  const double w = p.trap_frequency;
  const double a = p.a11;
  switch (dimension) {
    case 1: {
      const double area = p.reduction_factor(1);
      return m * w * w / 3.0 *
             std::pow(6.0 * pi * hbar * hbar * a / (m * m * w * w * area), 2.0 / 3.0) *
             std::pow(n, 1.0 / 6.0);
    }
    case 2: {
      const double length = p.reduction_factor(2);
      return hbar * w * std::sqrt(a / length);
    }
    default:
      // sqrt(N) dmu/dN of the 3D Thomas-Fermi potential.
      return m * w * w / 5.0 * std::pow(15.0 * hbar * hbar * a / (m * m * w * w), 2.0 / 5.0) *
             std::pow(n, -0.1);
  }
}

/// Beam wavenumber once atoms have left the condensate: the Raman kick plus
/// the mean-field energy mu converted to kinetic energy.
inline double predicted_peak_momentum(const PhysicalParams& p, double mu) {
  if (mu < 0.0) throw ParameterError("chemical potential must be non-negative");
  return std::sqrt(p.kick * p.kick + 2.0 * p.mass * mu / (hbar * hbar));
}

struct NumberStats {
  double mean;
  double variance;
};

/// Number statistics of a displaced squeezed state with coherent amplitude
/// alpha, squeezing r and squeeze phase theta.
inline NumberStats squeezed_number_stats(std::complex<double> alpha, double r, double theta) {
  const double c = std::cosh(r);
  const double s = std::sinh(r);
  const std::complex<double> amp = alpha * c - std::conj(alpha) * std::polar(1.0, -theta) * s;
  return {std::norm(alpha) + s * s, std::norm(amp) + 2.0 * c * c * s * s};
}

/// Ratio of the squeezed to coherent number standard deviation for a large
/// real amplitude sqrt(N); scales the phase-diffusion floor.
inline double squeezed_linewidth_factor(double n, double r, double theta) {
  const auto st = squeezed_number_stats({std::sqrt(n), 0.0}, r, theta);
  return std::sqrt(st.variance / n);
}

}  // namespace atomlaser
