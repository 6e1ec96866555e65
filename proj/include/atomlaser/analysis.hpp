#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "constants.hpp"
#include "ensemble.hpp"
#include "error.hpp"
#include "params.hpp"
#include "theory.hpp"

namespace atomlaser {

// ---------------------------------------------------------------------------
// Gaussian envelope fit  y = A exp(-((k - kc) / w)^2)

struct GaussianFit {
  double amplitude = 0.0;
  double center = 0.0;
  double width = 0.0;  // w; full width at 1/e is 2w
  double r_squared = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool ok = false;  // converged and r_squared >= threshold
  std::string message;
};

namespace detail {

inline bool solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b,
                   std::array<double, 3>& x) {
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) < 1e-300) return false;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (int r = c + 1; r < 3; ++r) {
      const double f = a[r][c] / a[c][c];
      for (int k = c; k < 3; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < 3; ++k) s -= a[r][k] * x[k];
    x[r] = s / a[r][r];
  }
  return true;
}

}  // namespace detail

/// Levenberg-Marquardt fit of a Gaussian envelope. Negative samples are
/// used as given. The problem is solved in coordinates normalised to the
/// data's span and peak so that SI wavenumbers (~1e7 1/m) stay well scaled.
inline GaussianFit fit_gaussian(std::span<const double> k, std::span<const double> y,
                                double min_r_squared = 0.5) {
  if (k.size() != y.size()) throw FitError("fit_gaussian: size mismatch");
  if (k.size() < 4) throw FitError("fit_gaussian: need at least 4 samples");
  const auto [kmin_it, kmax_it] = std::minmax_element(k.begin(), k.end());
  const double k_mid = 0.5 * (*kmin_it + *kmax_it);
  const double k_scale = 0.5 * (*kmax_it - *kmin_it);
  const double y_scale = *std::max_element(y.begin(), y.end());
  GaussianFit fit;
  if (!(k_scale > 0.0) || !(y_scale > 0.0)) {
    fit.message = "degenerate input";
    return fit;
  }
  const std::size_t n = k.size();
  std::vector<double> u(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = (k[i] - k_mid) / k_scale;
    v[i] = y[i] / y_scale;
  }

  // Moment-based start from the positive part.
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::max(v[i], 0.0);
    s0 += w;
    s1 += w * u[i];
  }
  const double c0 = s1 / s0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::max(v[i], 0.0);
    s2 += w * (u[i] - c0) * (u[i] - c0);
  }
  std::array<double, 3> p{1.0, c0, std::max(std::sqrt(2.0 * s2 / s0), 1e-6)};

  auto cost = [&](const std::array<double, 3>& q) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = (u[i] - q[1]) / q[2];
      const double r = v[i] - q[0] * std::exp(-z * z);
      c += r * r;
    }
    return c;
  };

  double lambda = 1e-3;
  double current = cost(p);
  for (std::size_t it = 0; it < 500; ++it) {
    fit.iterations = it + 1;
    std::array<std::array<double, 3>, 3> jtj{};
    std::array<double, 3> jtr{};
    for (std::size_t i = 0; i < n; ++i) {
      const double z = (u[i] - p[1]) / p[2];
      const double e = std::exp(-z * z);
      const double model = p[0] * e;
      const std::array<double, 3> jac{e, model * 2.0 * z / p[2], model * 2.0 * z * z / p[2]};
      const double r = v[i] - model;
      for (int a = 0; a < 3; ++a) {
        jtr[a] += jac[a] * r;
        for (int b = 0; b < 3; ++b) jtj[a][b] += jac[a] * jac[b];
      }
    }
    bool improved = false;
    std::array<double, 3> delta{};
    for (int attempt = 0; attempt < 30 && !improved; ++attempt) {
      auto m = jtj;
      for (int a = 0; a < 3; ++a) m[a][a] += lambda * std::max(jtj[a][a], 1e-300);
      if (!detail::solve3(m, jtr, delta)) {
        lambda *= 10.0;
        continue;
      }
      std::array<double, 3> trial{p[0] + delta[0], p[1] + delta[1], p[2] + delta[2]};
      if (!(trial[2] > 0.0)) {
        lambda *= 10.0;
        continue;
      }
      const double c = cost(trial);
      if (c <= current) {
        const double rel = std::abs(delta[0]) / std::max(std::abs(p[0]), 1e-300) +
                           std::abs(delta[1]) / std::max(p[2], 1e-300) +
                           std::abs(delta[2]) / p[2];
        p = trial;
        const double drop = current - c;
        current = c;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (rel < 1e-14 || drop <= 1e-16 * std::max(current, 1e-300)) fit.converged = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) fit.converged = true;  // no downhill step left: at a minimum
    if (fit.converged) break;
  }

  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(n);
  double tot = 0.0;
  for (double x : v) tot += (x - mean) * (x - mean);
  fit.amplitude = p[0] * y_scale;
  fit.center = k_mid + p[1] * k_scale;
  fit.width = std::abs(p[2]) * k_scale;
  fit.r_squared = tot > 0.0 ? 1.0 - current / tot : 0.0;
  fit.ok = fit.converged && fit.r_squared >= min_r_squared;
  if (!fit.converged)
    fit.message = "fit did not converge";
  else if (!fit.ok)
    fit.message = "poor fit (R^2 " + std::to_string(fit.r_squared) + ")";
  return fit;
}

// ---------------------------------------------------------------------------
// Spectrum helpers

/// 1D spectrum with wavenumbers sorted ascending.
struct Profile {
  std::vector<double> k;
  std::vector<double> value;
};

/// Reorders an FFT-ordered 1D array to ascending k.
inline Profile sorted_profile(const std::vector<double>& fft_k, std::span<const double> values) {
  const std::size_t n = fft_k.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return fft_k[a] < fft_k[b]; });
  Profile p;
  p.k.reserve(n);
  p.value.reserve(n);
  for (auto i : order) {
    p.k.push_back(fft_k[i]);
    p.value.push_back(values[i]);
  }
  return p;
}

struct FitWindow {
  double lo = 0.0;
  double hi = 0.0;
};

/// Window around the beam peak. Inside the band between the midpoint of
/// (k0, k_peak) and its mirror above k_peak, the maximum of the 5-bin
/// smoothed spectrum is located and its half-maximum width measured; the
/// window is that centre +- scale x the equivalent Gaussian sigma. The lower
/// edge never drops below the (k0, k_peak) midpoint, which keeps the residual
/// in-condensate feature near k0 out of the fit.
inline FitWindow auto_window(const Profile& p, double k_peak, double k0, double scale = 5.0) {
  const double floor = 0.5 * (std::max(k0, 0.0) + k_peak);
  double top = k_peak + (k_peak - floor);
  if (!(top > floor)) top = floor + std::abs(k_peak) + 1.0;
  const std::size_t n = p.k.size();
  std::vector<double> smooth(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= 2 ? i - 2 : 0;
    const std::size_t hi = std::min(n - 1, i + 2);
    double s = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) s += p.value[j];
    smooth[i] = s / static_cast<double>(hi - lo + 1);
  }
  std::size_t peak = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (p.k[i] < floor || p.k[i] > top) continue;
    if (peak == n || smooth[i] > smooth[peak]) peak = i;
  }
  if (peak == n || !(smooth[peak] > 0.0)) return {floor, top};
  const double half = 0.5 * smooth[peak];
  std::size_t l = peak, r = peak;
  while (l > 0 && smooth[l - 1] > half) --l;
  while (r + 1 < n && smooth[r + 1] > half) ++r;
  const double dk = n > 1 ? p.k[1] - p.k[0] : 1.0;
  // Half-maximum width, at least one bin; sigma = FWHM / 2.3548.
  const double fwhm = std::max(p.k[r] - p.k[l] + dk, dk);
  const double sigma = fwhm / 2.3548200450309493;
  const double c = p.k[peak];
  return {std::max(floor, c - scale * sigma), c + scale * sigma};
}

inline GaussianFit fit_in_window(const Profile& p, const FitWindow& w, double min_r2 = 0.5) {
  std::vector<double> k, y;
  for (std::size_t i = 0; i < p.k.size(); ++i) {
    if (p.k[i] < w.lo || p.k[i] > w.hi) continue;
    k.push_back(p.k[i]);
    y.push_back(p.value[i]);
  }
  if (k.size() < 4) {
    GaussianFit f;
    f.message = "window holds fewer than 4 bins";
    return f;
  }
  return fit_gaussian(k, y, min_r2);
}

/// Energy width from a wavenumber width at centre kc: dE = hbar^2 kc dk / m.
inline double energy_width(const PhysicalParams& p, double k_center, double k_width) {
  return hbar * hbar * k_center * k_width / p.mass;
}
inline double wavenumber_width(const PhysicalParams& p, double k_center, double e_width) {
  return e_width * p.mass / (hbar * hbar * k_center);
}

// ---------------------------------------------------------------------------
// 2D momentum arc

struct ArcProfile {
  Profile longitudinal;              // along the kick direction through k = 0
  std::vector<double> shell_radius;  // 1/m, shell centres
  std::vector<double> shell_weight;  // atoms per shell
  double peak_radius = 0.0;          // 1/m, interpolated
  double predicted_radius = 0.0;     // sqrt(k0^2 + 2 m mu / hbar^2)
  double snr = 0.0;
  int angular_maxima = 0;  // local maxima of the angular profile on the arc
};

/// Values along the ray k = s * dir (s >= 0), nearest bin, in steps of the
/// finer k spacing.
inline Profile longitudinal_cut(std::span<const double> spectrum, const Grid& g,
                                std::array<double, 2> dir) {
  Profile out;
  const double step = std::min(g.k_spacing(0), g.k_spacing(1));
  const double kmax = std::min(g.k_max(0), g.k_max(1));
  const auto count = static_cast<std::size_t>(std::floor(kmax / step));
  auto bin_of = [](double kv, double dk, std::size_t n) {
    auto j = static_cast<long long>(std::llround(kv / dk));
    if (j < 0) j += static_cast<long long>(n);
    return static_cast<std::size_t>(j) % n;
  };
  for (std::size_t s = 0; s + 1 < count; ++s) {
    const double kr = static_cast<double>(s) * step;
    const std::size_t i = bin_of(kr * dir[0], g.k_spacing(0), g.points(0));
    const std::size_t j = bin_of(kr * dir[1], g.k_spacing(1), g.points(1));
    out.k.push_back(kr);
    out.value.push_back(spectrum[i * g.points(1) + j]);
  }
  return out;
}

/// Longitudinal cut and radial-shell histogram of a 2D spectrum (FFT order).
/// Throws FitError when the peak shell is not significant (SNR < 3).
inline ArcProfile arc_profile_2d(std::span<const double> spectrum, const Grid& g,
                                 const PhysicalParams& p, double mu) {
  if (g.dimension() != 2) throw ParameterError("arc_profile_2d needs a 2D grid");
  if (spectrum.size() != g.size()) throw ParameterError("spectrum does not match grid");
  ArcProfile out;
  out.predicted_radius = predicted_peak_momentum(p, mu);
  const std::size_t n0 = g.points(0), n1 = g.points(1);
  const auto& kx = g.k(0);
  const auto& kz = g.k(1);

  out.longitudinal = longitudinal_cut(spectrum, g, p.kick_direction);
  const double step = std::min(g.k_spacing(0), g.k_spacing(1));
  const std::size_t count = out.longitudinal.k.size() + 1;

  // Radial shells.
  const std::size_t shells = count;
  out.shell_radius.resize(shells);
  out.shell_weight.assign(shells, 0.0);
  for (std::size_t s = 0; s < shells; ++s) out.shell_radius[s] = (static_cast<double>(s) + 0.5) * step;
  const double dvk = g.k_volume_element();
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j) {
      const double r = std::hypot(kx[i], kz[j]);
      const auto s = static_cast<std::size_t>(r / step);
      if (s < shells) out.shell_weight[s] += spectrum[i * n1 + j] * dvk;
    }
  std::size_t peak = 1;
  for (std::size_t s = 1; s < shells; ++s)
    if (out.shell_weight[s] > out.shell_weight[peak]) peak = s;
  double offset = 0.0;
  if (peak + 1 < shells) {
    const double a = out.shell_weight[peak - 1], b = out.shell_weight[peak],
                 c = out.shell_weight[peak + 1];
    const double denom = a - 2.0 * b + c;
    if (denom < 0.0) offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
  }
  out.peak_radius = out.shell_radius[peak] + offset * step;

  std::vector<double> sorted = out.shell_weight;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(shells / 2), sorted.end());
  const double median = sorted[shells / 2];
  std::vector<double> dev(shells);
  for (std::size_t s = 0; s < shells; ++s) dev[s] = std::abs(out.shell_weight[s] - median);
  std::nth_element(dev.begin(), dev.begin() + static_cast<long>(shells / 2), dev.end());
  const double noise = 1.4826 * dev[shells / 2];
  out.snr = noise > 0.0 ? (out.shell_weight[peak] - median) / noise
                        : std::numeric_limits<double>::infinity();

  // Angular structure on the peak shell +- 1.
  constexpr int angular_bins = 72;
  std::vector<double> ang(angular_bins, 0.0);
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j) {
      const double r = std::hypot(kx[i], kz[j]);
      const auto s = static_cast<std::size_t>(r / step);
      if (s + 1 < peak || s > peak + 1) continue;
      const double phi = std::atan2(kx[i], kz[j]);
      auto a = static_cast<int>(std::floor((phi + pi) / (2.0 * pi) * angular_bins));
      ang[static_cast<std::size_t>(std::clamp(a, 0, angular_bins - 1))] += spectrum[i * n1 + j];
    }
  std::vector<double> smooth(angular_bins);
  for (int a = 0; a < angular_bins; ++a)
    smooth[a] = (ang[(a + angular_bins - 1) % angular_bins] + ang[a] +
                 ang[(a + 1) % angular_bins]) / 3.0;
  const double top = *std::max_element(smooth.begin(), smooth.end());
  for (int a = 0; a < angular_bins; ++a) {
    const double l = smooth[(a + angular_bins - 1) % angular_bins];
    const double r = smooth[(a + 1) % angular_bins];
    if (smooth[a] > l && smooth[a] >= r && smooth[a] > 0.1 * top) ++out.angular_maxima;
  }

  if (!(out.snr >= 3.0))
    throw FitError("momentum arc not detected (shell SNR " + std::to_string(out.snr) + ")");
  return out;
}

// ---------------------------------------------------------------------------
// Linewidth time series

struct LinewidthRecord {
  double time = 0.0;              // s
  double center = 0.0;            // k_c, 1/m
  double width = 0.0;             // w of A exp(-((k-kc)/w)^2), 1/m
  double linewidth_k = 0.0;       // 2w, full width at 1/e, 1/m
  double linewidth_energy = 0.0;  // J, via dE/dk = hbar^2 kc / m
  double sigma_k = 0.0;           // w / sqrt(2), the exp(-x^2/2 s^2) convention
  double r_squared = 0.0;
  double theory_limit = 0.0;           // 2 dE (J), coherent source
  double theory_limit_squeezed = 0.0;  // 2 dE sqrt(var N / N) (J)
  FitWindow window;
  bool fit_ok = false;
  std::string message;
};

struct LinewidthOptions {
  double window_scale = 5.0;
  double min_r_squared = 0.5;
};

/// Fits one spectrum (1D directly, 2D via the longitudinal cut).
inline LinewidthRecord linewidth_at(const FinalSpectrum& spec, const Grid& g,
                                    const PhysicalParams& p, double mu,
                                    const LinewidthOptions& opt = {}) {
  LinewidthRecord rec;
  rec.time = spec.time;
  const int d = g.dimension();
  rec.theory_limit = 2.0 * phase_diffusion_limit(p, d, p.atom_number);
  rec.theory_limit_squeezed =
      rec.theory_limit * squeezed_linewidth_factor(p.atom_number, p.squeeze_r, p.squeeze_theta);
  Profile prof;
  if (d == 1) {
    prof = sorted_profile(g.k(0), spec.value);
  } else {
    try {
      prof = arc_profile_2d(spec.value, g, p, mu).longitudinal;
    } catch (const FitError& e) {
      rec.message = e.what();
      return rec;
    }
  }
  const double kp = predicted_peak_momentum(p, mu);
  rec.window = auto_window(prof, kp, p.kick, opt.window_scale);
  const auto fit = fit_in_window(prof, rec.window, opt.min_r_squared);
  rec.center = fit.center;
  rec.width = fit.width;
  rec.linewidth_k = 2.0 * fit.width;
  rec.sigma_k = fit.width / std::sqrt(2.0);
  rec.linewidth_energy = energy_width(p, fit.center, rec.linewidth_k);
  rec.r_squared = fit.r_squared;
  rec.fit_ok = fit.ok;
  rec.message = fit.message;
  return rec;
}

inline std::vector<LinewidthRecord> linewidth_series(const SpectrumSeries& series,
                                                     const PhysicalParams& p,
                                                     const LinewidthOptions& opt = {}) {
  if (series.times.size() < 2) throw ParameterError("linewidth_series needs >= 2 analysis times");
  std::vector<LinewidthRecord> out;
  for (std::size_t t = 0; t < series.times.size(); ++t)
    out.push_back(linewidth_at(series.finalize(t), series.grid, p, series.chemical_potential, opt));
  return out;
}

/// Mean energy linewidth over the last `tail` fraction of well-fitted records.
inline double plateau_linewidth(const std::vector<LinewidthRecord>& recs, double tail = 0.3) {
  std::vector<double> vals;
  if (recs.empty()) throw ParameterError("no linewidth records");
  const double t_end = recs.back().time;
  const double t_start = recs.front().time;
  const double cut = t_end - tail * (t_end - t_start);
  for (const auto& r : recs)
    if (r.fit_ok && r.time >= cut) vals.push_back(r.linewidth_energy);
  if (vals.empty()) throw FitError("no successful fits in the plateau window");
  return std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
}

// ---------------------------------------------------------------------------
// Power-law fits

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LineFit least_squares_line(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

/// Slope of log(value) against log(time).
inline double loglog_slope(std::span<const double> t, std::span<const double> v) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < t.size(); ++i) {
    lx.push_back(std::log(t[i]));
    ly.push_back(std::log(v[i]));
  }
  return least_squares_line(lx, ly).slope;
}

struct ScalingFit {
  double exponent = 0.0;
  double prefactor = 0.0;
  double ci_low = 0.0;  // 95% bootstrap interval on the exponent
  double ci_high = 0.0;
};

/// value = prefactor * N^exponent by log-log regression, with a pairs
/// bootstrap (fixed seed) for the exponent's 95% interval.
inline ScalingFit scaling_fit(std::span<const std::array<double, 2>> points,
                              std::size_t resamples = 2000, std::uint64_t seed = 12345) {
  if (points.size() < 4) throw ParameterError("scaling_fit needs at least 4 points");
  std::vector<double> lx, ly;
  for (const auto& pt : points) {
    if (!(pt[0] > 0.0) || !(pt[1] > 0.0)) throw ParameterError("scaling_fit needs positive data");
    lx.push_back(std::log(pt[0]));
    ly.push_back(std::log(pt[1]));
  }
  const auto [lo, hi] = std::minmax_element(lx.begin(), lx.end());
  if ((*hi - *lo) / std::log(10.0) < 1.5 - 1e-9)
    throw ParameterError("scaling_fit needs N spanning at least 1.5 decades");
  const auto line = least_squares_line(lx, ly);
  ScalingFit out{line.slope, std::exp(line.intercept), line.slope, line.slope};

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, lx.size() - 1);
  std::vector<double> slopes;
  std::vector<double> bx(lx.size()), by(lx.size());
  for (std::size_t r = 0; r < resamples; ++r) {
    for (std::size_t i = 0; i < lx.size(); ++i) {
      const auto j = pick(rng);
      bx[i] = lx[j];
      by[i] = ly[j];
    }
    const auto [blo, bhi] = std::minmax_element(bx.begin(), bx.end());
    if (*bhi - *blo < 1e-12) continue;
    slopes.push_back(least_squares_line(bx, by).slope);
  }
  if (!slopes.empty()) {
    std::sort(slopes.begin(), slopes.end());
    const auto at = [&](double q) {
      return slopes[static_cast<std::size_t>(q * static_cast<double>(slopes.size() - 1))];
    };
    out.ci_low = at(0.025);
    out.ci_high = at(0.975);
  }
  return out;
}

}  // namespace atomlaser
