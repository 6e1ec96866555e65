#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <vector>

#include "constants.hpp"
#include "error.hpp"

namespace atomlaser {

/// Uniform periodic lattice in one or two dimensions together with its
/// conjugate momentum lattice. Values are SI (m, 1/m).
///
/// In 2D axis 0 is the transverse coordinate x and axis 1 the longitudinal
/// coordinate z; storage is row-major with axis 1 fastest. The trap centre
/// sits at coordinate 0, so `origin` (the lower edge of each axis) places
/// the condensate inside the box.
class Grid {
 public:
  Grid() = default;

  Grid(int dimension, std::array<std::size_t, 2> points, std::array<double, 2> extent,
       std::array<double, 2> origin)
      : dimension_(dimension), points_(points), extent_(extent), origin_(origin) {
    if (dimension != 1 && dimension != 2) throw ParameterError("grid dimension must be 1 or 2");
    for (int a = 0; a < dimension; ++a) {
      if (points[a] < 2 || !std::has_single_bit(points[a]))
        throw ParameterError("grid points per axis must be a power of two >= 2");
      if (!(extent[a] > 0.0)) throw ParameterError("grid extent must be positive");
    }
    if (dimension == 1) {
      points_[1] = 1;
      extent_[1] = 1.0;
      origin_[1] = 0.0;
    }
    for (int a = 0; a < dimension; ++a) {
      const std::size_t n = points_[a];
      const double dx = extent_[a] / static_cast<double>(n);
      const double dk = 2.0 * pi / extent_[a];
      x_[a].resize(n);
      k_[a].resize(n);
      for (std::size_t j = 0; j < n; ++j) {
        x_[a][j] = origin_[a] + dx * static_cast<double>(j);
        auto signed_j = static_cast<long long>(j);
        if (j >= n / 2) signed_j -= static_cast<long long>(n);
        k_[a][j] = dk * static_cast<double>(signed_j);
      }
    }
  }

  /// Convenience constructor for a 1D lattice [origin, origin + extent).
  static Grid line(std::size_t points, double extent, double origin) {
    return Grid(1, {points, 1}, {extent, 1.0}, {origin, 0.0});
  }

  /// Square 2D lattice with `points` per axis.
  static Grid plane(std::size_t points, std::array<double, 2> extent,
                    std::array<double, 2> origin) {
    return Grid(2, {points, points}, extent, origin);
  }

  int dimension() const { return dimension_; }
  std::size_t points(int axis) const { return points_[axis]; }
  std::array<std::size_t, 2> shape() const { return points_; }
  std::size_t size() const { return points_[0] * points_[1]; }
  double extent(int axis) const { return extent_[axis]; }
  double origin(int axis) const { return origin_[axis]; }
  double spacing(int axis) const { return extent_[axis] / static_cast<double>(points_[axis]); }
  double k_spacing(int axis) const { return 2.0 * pi / extent_[axis]; }

  /// Real-space cell volume dV = prod dx (m^d).
  double volume_element() const {
    double v = 1.0;
    for (int a = 0; a < dimension_; ++a) v *= spacing(a);
    return v;
  }

  /// Momentum-space cell volume dV_k = prod 2 pi / L (m^-d).
  double k_volume_element() const {
    double v = 1.0;
    for (int a = 0; a < dimension_; ++a) v *= k_spacing(a);
    return v;
  }

  /// Largest representable |k| along an axis (the Nyquist wavenumber).
  double k_max(int axis) const { return pi / spacing(axis); }

  const std::vector<double>& x(int axis) const { return x_[axis]; }
  /// Momentum coordinates in FFT order: 0, dk, ..., -N/2 dk, ..., -dk.
  const std::vector<double>& k(int axis) const { return k_[axis]; }

  bool operator==(const Grid& o) const {
    return dimension_ == o.dimension_ && points_ == o.points_ && extent_ == o.extent_ &&
           origin_ == o.origin_;
  }

 private:
  int dimension_ = 1;
  std::array<std::size_t, 2> points_{1, 1};
  std::array<double, 2> extent_{1.0, 1.0};
  std::array<double, 2> origin_{0.0, 0.0};
  std::array<std::vector<double>, 2> x_;
  std::array<std::vector<double>, 2> k_;
};

}  // namespace atomlaser
