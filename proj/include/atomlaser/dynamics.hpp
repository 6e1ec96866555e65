#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "constants.hpp"
#include "error.hpp"
#include "fft.hpp"
#include "grid.hpp"
#include "params.hpp"
#include "rng.hpp"
#include "theory.hpp"

namespace atomlaser {

using cplx = std::complex<double>;

enum class Mode { semiclassical, wigner };

/// Trapped (psi1) and untrapped (psi2) fields on a grid, SI amplitude
/// units m^{-d/2}.
struct FieldPair {
  std::vector<cplx> psi1;
  std::vector<cplx> psi2;
  double time = 0.0;  // s

  FieldPair() = default;
  explicit FieldPair(const Grid& g) : psi1(g.size()), psi2(g.size()) {}

  /// Raw norm sum |psi_c|^2 dV of component 1 or 2 (no vacuum subtraction).
  double norm(int component, const Grid& g) const {
    const auto& f = component == 1 ? psi1 : psi2;
    double s = 0.0;
    for (const auto& v : f) s += std::norm(v);
    return s * g.volume_element();
  }
};

/// Cosine-ramp imaginary potential acting on psi2 within `width` of every
/// boundary.
struct Absorber {
  double width = 0.0;     // m
  double strength = 0.0;  // 1/s, peak damping rate
  bool active() const { return width > 0.0 && strength > 0.0; }
};

/// Individual Hamiltonian terms; all on for physics, selectively off in tests.
struct TermSwitches {
  bool kinetic = true;
  bool potential = true;
  bool nonlinear = true;
  bool coupling = true;
  bool detuning = true;
};

struct EvolutionSpec {
  Mode mode = Mode::semiclassical;
  double time_step = 0.0;          // s
  double total_time = 0.0;         // s
  double snapshot_interval = 0.0;  // s, 0 means only the initial and final state
  Absorber absorber;
  TermSwitches terms;
  /// Vacuum-mean corrections -1/dV (self) and -1/(2dV) (cross) in the
  /// nonlinear terms. Defaults to on in wigner mode only.
  std::optional<bool> vacuum_corrections;
  /// Vacuum noise re-injected by the absorber so absorbed cells stay in the
  /// vacuum state. Defaults to on in wigner mode only.
  std::optional<bool> absorber_noise;

  bool corrections() const { return vacuum_corrections.value_or(mode == Mode::wigner); }
  bool noisy_absorber() const {
    return absorber.active() && absorber_noise.value_or(mode == Mode::wigner);
  }

  std::size_t steps() const {
    return static_cast<std::size_t>(std::llround(total_time / time_step));
  }
  std::size_t steps_per_snapshot() const {
    if (snapshot_interval <= 0.0) return std::max<std::size_t>(steps(), 1);
    return std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(snapshot_interval / time_step)));
  }

  void validate(const Grid& g) const {
    if (!(time_step > 0.0)) throw ParameterError("time_step must be positive");
    if (!(total_time >= 0.0)) throw ParameterError("total_time must be non-negative");
    if (snapshot_interval != 0.0 && snapshot_interval < time_step * (1.0 - 1e-9))
      throw ParameterError("snapshot_interval must be >= time_step");
    if (absorber.width < 0.0 || absorber.strength < 0.0)
      throw ParameterError("absorber settings must be non-negative");
    for (int a = 0; a < g.dimension(); ++a)
      if (absorber.width >= 0.5 * g.extent(a))
        throw ParameterError("absorber width must be below half the domain");
  }
};

/// Momentum-space view of psi2 handed to snapshot consumers.
struct Snapshot {
  std::size_t index = 0;
  double time = 0.0;                  // s
  std::span<const cplx> psi2_k;       // m^{d/2}, FFT order, sum |.|^2 dV_k = N2
  double trapped_norm = 0.0;          // sum |psi1|^2 dV, raw
  double untrapped_norm = 0.0;        // sum |psi2|^2 dV, raw
};

using SnapshotSink = std::function<void(const Snapshot&)>;

/// Default step: the fastest phase (mu, kinetic energy at the Nyquist
/// wavenumber, or hbar |Omega|) advances by at most 0.05 rad.
inline double default_time_step(const PhysicalParams& p, const Grid& g, double mu) {
  double kmax = 0.0;
  for (int a = 0; a < g.dimension(); ++a) kmax = std::max(kmax, g.k_max(a));
  const double kinetic = hbar * hbar * kmax * kmax / (2.0 * p.mass);
  const double fastest = std::max({mu, kinetic, hbar * std::abs(p.rabi)});
  return 0.05 * hbar / fastest;
}

/// 1.2 x (beam speed x T) plus the Thomas-Fermi diameter.
inline double default_domain_length(const PhysicalParams& p, double mu, double total_time) {
  const double speed = hbar * predicted_peak_momentum(p, mu) / p.mass;
  const double radius = std::sqrt(2.0 * mu / (p.mass * p.trap_frequency * p.trap_frequency));
  return 1.2 * speed * total_time + 2.0 * radius;
}

/// Split-step integrator in oscillator units. One instance holds the
/// precomputed tables for a (params, grid, spec) triple and may be shared by
/// concurrent trajectories: all per-trajectory state lives in the caller's
/// buffers.
class Propagator {
 public:
  Propagator(const PhysicalParams& p, const Grid& g, const EvolutionSpec& spec)
      : grid_(g), spec_(spec), units_(p), fft_(g.dimension(), g.shape()) {
    p.validate(g.dimension());
    spec.validate(g);
    const int d = g.dimension();
    const std::size_t n = g.size();
    const auto& T = spec.terms;

    dt_ = spec.time_step / units_.time;
    dv_ = g.volume_element() / std::pow(units_.length, d);
    field_scale_ = units_.field(d);
    // dV / (2 pi)^{d/2} times the SI field scale.
    k_field_scale_ = g.volume_element() / std::pow(2.0 * pi, 0.5 * d) * field_scale_;

    g11_ = T.nonlinear ? units_.interaction(p, 1, 1, d) : 0.0;
    g22_ = T.nonlinear ? units_.interaction(p, 2, 2, d) : 0.0;
    g12_ = T.nonlinear ? units_.interaction(p, 1, 2, d) : 0.0;
    if (spec.corrections()) {
      self_shift_ = 1.0 / dv_;
      cross_shift_ = 0.5 / dv_;
    }

    omega_ = T.coupling ? p.rabi * units_.time : cplx{0.0, 0.0};
    if (T.detuning && std::abs(omega_) > 0.0 && !p.detuning)
      throw ParameterError("detuning is unresolved; call resonant_detuning() first");
    detuning_ = T.detuning ? p.detuning.value_or(0.0) * units_.time : 0.0;

    potential_.assign(n, 0.0);
    kick_.assign(n, cplx{1.0, 0.0});
    damping_.assign(n, 0.0);
    const double k0 = p.kick * units_.length;
    const std::array<double, 2> dir =
        d == 1 ? std::array<double, 2>{1.0, 0.0} : p.kick_direction;
    for_each_point([&](std::size_t idx, std::array<double, 2> r) {
      const double x0 = r[0] / units_.length;
      const double x1 = d == 2 ? r[1] / units_.length : 0.0;
      if (T.potential) potential_[idx] = 0.5 * (x0 * x0 + x1 * x1);
      // 1D: k0 along the axis. 2D: (x, z) components of the kick direction.
      const double phase = d == 1 ? k0 * x0 : k0 * (dir[0] * x0 + dir[1] * x1);
      kick_[idx] = std::polar(1.0, phase);
      if (spec.absorber.active())
        damping_[idx] = spec.absorber.strength * units_.time * absorber_profile(r);
    });
    absorbing_ = spec.absorber.active();

    kinetic_.assign(n, cplx{1.0, 0.0});
    const double inv_n = 1.0 / static_cast<double>(n);
    const std::size_t n1 = g.points(1);
    for (std::size_t idx = 0; idx < n; ++idx) {
      double k2 = 0.0;
      if (d == 1) {
        const double k = g.k(0)[idx] * units_.length;
        k2 = k * k;
      } else {
        const double ka = g.k(0)[idx / n1] * units_.length;
        const double kb = g.k(1)[idx % n1] * units_.length;
        k2 = ka * ka + kb * kb;
      }
      kinetic_[idx] = T.kinetic ? std::polar(inv_n, -0.5 * k2 * dt_) : cplx{inv_n, 0.0};
    }
  }

  const Grid& grid() const { return grid_; }
  const EvolutionSpec& spec() const { return spec_; }
  const OscillatorUnits& units() const { return units_; }

  /// Advance `state` by spec.total_time, emitting momentum-space snapshots of
  /// psi2 at t0 and every snapshot interval thereafter (and at the end).
  /// `absorber_noise` is required when `spec.noisy_absorber()` is true.
  FieldPair evolve(const FieldPair& initial, const SnapshotSink& sink = {},
                   RandomStream* absorber_noise = nullptr) const {
    if (spec_.noisy_absorber() && absorber_noise == nullptr)
      throw ParameterError("noisy absorber requires a random stream");
    Work w = to_scaled(initial);
    const std::size_t steps = spec_.steps();
    const std::size_t every = spec_.steps_per_snapshot();
    const double h = 0.5 * dt_;
    std::size_t emitted = 0;
    std::vector<cplx> kbuf;

    auto emit = [&](std::size_t step_index) {
      if (!sink) return;
      kbuf.assign(w.psi2.begin(), w.psi2.end());
      fft_.forward(kbuf);
      for (auto& v : kbuf) v *= k_field_scale_;
      Snapshot snap;
      snap.index = emitted++;
      snap.time = initial.time + static_cast<double>(step_index) * spec_.time_step;
      snap.psi2_k = kbuf;
      snap.trapped_norm = scaled_norm(w.psi1);
      snap.untrapped_norm = scaled_norm(w.psi2);
      sink(snap);
    };

    emit(0);
    if (steps > 0) diagonal(w, h, 0, absorber_noise);
    for (std::size_t s = 1; s <= steps; ++s) {
      coupling(w, h);
      kinetic(w);
      coupling(w, h);
      const bool last = s == steps;
      const bool snap = last || s % every == 0;
      if (snap) {
        diagonal(w, h, s, absorber_noise);
        emit(s);
        if (!last) diagonal(w, h, s, absorber_noise);
      } else {
        diagonal(w, dt_, s, absorber_noise);
      }
    }
    FieldPair out = from_scaled(w);
    out.time = initial.time + static_cast<double>(steps) * spec_.time_step;
    return out;
  }

  /// One symmetric step A(dt/2) B(dt/2) K(dt) B(dt/2) A(dt/2), where A is the
  /// diagonal position-space flow (trap, nonlinearity, detuning, absorber), B
  /// the exact Rabi rotation and K the exact kinetic flow.
  FieldPair step(const FieldPair& state, RandomStream* absorber_noise = nullptr) const {
    if (spec_.noisy_absorber() && absorber_noise == nullptr)
      throw ParameterError("noisy absorber requires a random stream");
    Work w = to_scaled(state);
    const double h = 0.5 * dt_;
    diagonal(w, h, 0, absorber_noise);
    coupling(w, h);
    kinetic(w);
    coupling(w, h);
    diagonal(w, h, 1, absorber_noise);
    FieldPair out = from_scaled(w);
    out.time = state.time + spec_.time_step;
    return out;
  }

 private:
  struct Work {
    std::vector<cplx> psi1;
    std::vector<cplx> psi2;
  };

  template <class F>
  void for_each_point(F&& f) const {
    if (grid_.dimension() == 1) {
      for (std::size_t i = 0; i < grid_.points(0); ++i) f(i, {grid_.x(0)[i], 0.0});
    } else {
      const std::size_t n1 = grid_.points(1);
      for (std::size_t i = 0; i < grid_.points(0); ++i)
        for (std::size_t j = 0; j < n1; ++j) f(i * n1 + j, {grid_.x(0)[i], grid_.x(1)[j]});
    }
  }

  double absorber_profile(std::array<double, 2> r) const {
    const double width = spec_.absorber.width;
    double prof = 0.0;
    for (int a = 0; a < grid_.dimension(); ++a) {
      const double lo = r[a] - grid_.origin(a);
      const double hi = grid_.origin(a) + grid_.extent(a) - grid_.spacing(a) - r[a];
      const double dist = std::min(lo, hi);
      if (dist < width) {
        const double s = std::sin(0.5 * pi * (width - dist) / width);
        prof = std::max(prof, s * s);
      }
    }
    return prof;
  }

  Work to_scaled(const FieldPair& f) const {
    if (f.psi1.size() != grid_.size() || f.psi2.size() != grid_.size())
      throw ParameterError("field shape does not match grid");
    const double s = 1.0 / field_scale_;
    Work w{f.psi1, f.psi2};
    for (auto& v : w.psi1) v *= s;
    for (auto& v : w.psi2) v *= s;
    return w;
  }

  FieldPair from_scaled(const Work& w) const {
    FieldPair f;
    f.psi1 = w.psi1;
    f.psi2 = w.psi2;
    for (auto& v : f.psi1) v *= field_scale_;
    for (auto& v : f.psi2) v *= field_scale_;
    return f;
  }

  double scaled_norm(const std::vector<cplx>& f) const {
    double s = 0.0;
    for (const auto& v : f) s += std::norm(v);
    return s * dv_;
  }

  void diagonal(Work& w, double tau, std::size_t step_index, RandomStream* noise) const {
    const std::size_t n = w.psi1.size();
    double check = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double n1 = std::norm(w.psi1[i]);
      const double n2 = std::norm(w.psi2[i]);
      check += n1 + n2;
      const double e1 = potential_[i] + g11_ * (n1 - self_shift_) + g12_ * (n2 - cross_shift_);
      const double e2 = -detuning_ + g22_ * (n2 - self_shift_) + g12_ * (n1 - cross_shift_);
      w.psi1[i] *= std::polar(1.0, -e1 * tau);
      w.psi2[i] *= std::polar(1.0, -e2 * tau);
    }
    if (!std::isfinite(check)) throw IntegrationError("non-finite field", step_index);
    if (!absorbing_) return;
    const bool inject = spec_.noisy_absorber();
    for (std::size_t i = 0; i < n; ++i) {
      if (damping_[i] <= 0.0) continue;
      const double decay = std::exp(-damping_[i] * tau);
      w.psi2[i] *= decay;
      if (inject) {
        // Keeps the per-component variance at the vacuum value 1/(4 dV).
        const double sd = std::sqrt((1.0 - decay * decay) / (4.0 * dv_));
        const double re = noise->gaussian();
        const double im = noise->gaussian();
        w.psi2[i] += cplx{sd * re, sd * im};
      }
    }
  }

  void coupling(Work& w, double tau) const {
    const double mag = std::abs(omega_);
    if (mag == 0.0) return;
    const double c = std::cos(mag * tau);
    const cplx u = cplx{0.0, std::sin(mag * tau)} * (omega_ / mag);
    const std::size_t n = w.psi1.size();
    for (std::size_t i = 0; i < n; ++i) {
      const cplx m = u * kick_[i];
      const cplx a = w.psi1[i];
      const cplx b = w.psi2[i];
      w.psi1[i] = c * a - std::conj(m) * b;
      w.psi2[i] = c * b + m * a;
    }
  }

  void kinetic(Work& w) const {
    for (auto* f : {&w.psi1, &w.psi2}) {
      fft_.forward(*f);
      auto& v = *f;
      for (std::size_t i = 0; i < v.size(); ++i) v[i] *= kinetic_[i];
      fft_.backward(*f);
    }
  }

  Grid grid_;
  EvolutionSpec spec_;
  OscillatorUnits units_;
  FourierTransform fft_;

  double dt_ = 0.0;
  double dv_ = 0.0;
  double field_scale_ = 1.0;
  double k_field_scale_ = 1.0;
  double g11_ = 0.0, g22_ = 0.0, g12_ = 0.0;
  double self_shift_ = 0.0, cross_shift_ = 0.0;
  cplx omega_{0.0, 0.0};
  double detuning_ = 0.0;
  bool absorbing_ = false;
  std::vector<double> potential_;
  std::vector<cplx> kick_;
  std::vector<double> damping_;
  std::vector<cplx> kinetic_;
};

/// Single step; builds a Propagator per call, so prefer Propagator::step in loops.
inline FieldPair step(const FieldPair& state, const PhysicalParams& p, const Grid& g,
                      const EvolutionSpec& spec, RandomStream* absorber_noise = nullptr) {
  return Propagator(p, g, spec).step(state, absorber_noise);
}

inline FieldPair evolve(const FieldPair& initial, const PhysicalParams& p, const Grid& g,
                        const EvolutionSpec& spec, const SnapshotSink& sink = {},
                        RandomStream* absorber_noise = nullptr) {
  return Propagator(p, g, spec).evolve(initial, sink, absorber_noise);
}

// ---------------------------------------------------------------------------
// Imaginary-time ground state

struct GroundStateOptions {
  double time_step = 0.0;  // s of imaginary time; 0 picks min(0.005/omega, 0.05 hbar/mu_TF)
  double tolerance = 1e-10;
  std::size_t max_iterations = 200000;
  std::size_t min_iterations = 10;
  bool record_energy = false;
  /// Width of the Gaussian start guess in oscillator lengths; only used when
  /// the Thomas-Fermi guess is unavailable (no interactions) or forced.
  double guess_width = 1.0;
  bool force_gaussian_guess = false;
};

struct GroundState {
  FieldPair fields;
  double chemical_potential = 0.0;   // J
  double energy_per_particle = 0.0;  // J
  std::size_t iterations = 0;
  std::vector<double> energy_history;  // J per particle, one entry per iteration
};

namespace detail {

struct ScaledEnergy {
  double energy;  // total functional
  double mu_numerator;
};

inline ScaledEnergy gp_energy(const std::vector<cplx>& psi, const std::vector<double>& potential,
                              const std::vector<double>& k2, double g, double dv,
                              const FourierTransform& fft, std::vector<cplx>& scratch) {
  scratch.assign(psi.begin(), psi.end());
  fft.forward(scratch);
  double kin = 0.0;
  for (std::size_t i = 0; i < scratch.size(); ++i) kin += 0.5 * k2[i] * std::norm(scratch[i]);
  kin *= dv / static_cast<double>(psi.size());
  double pot = 0.0, inter = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double n = std::norm(psi[i]);
    pot += potential[i] * n;
    inter += g * n * n;
  }
  pot *= dv;
  inter *= dv;
  return {kin + pot + 0.5 * inter, kin + pot + inter};
}

}  // namespace detail

/// Relaxes psi1 in imaginary time (Omega = 0, psi2 = 0) with renormalisation
/// to `target_n` after every step. Converged when the relative change of the
/// chemical potential per step, divided by the step in units of 1/omega,
/// drops below options.tolerance; this keeps the criterion independent of
/// the step size.
inline GroundState ground_state(const PhysicalParams& p, const Grid& g, double target_n,
                                const GroundStateOptions& opt = {}) {
  if (!(target_n > 0.0)) throw ParameterError("target atom number must be positive");
  p.validate(g.dimension());
  const OscillatorUnits units(p);
  const int d = g.dimension();
  const std::size_t n = g.size();
  const double dv = g.volume_element() / std::pow(units.length, d);
  const double gint = units.interaction(p, 1, 1, d);
  FourierTransform fft(d, g.shape());

  std::vector<double> potential(n), k2(n), kin(n);
  std::vector<cplx> psi(n);
  const std::size_t n1 = g.points(1);
  for (std::size_t idx = 0; idx < n; ++idx) {
    double r2 = 0.0, kk = 0.0;
    if (d == 1) {
      const double x = g.x(0)[idx] / units.length;
      const double k = g.k(0)[idx] * units.length;
      r2 = x * x;
      kk = k * k;
    } else {
      const double x = g.x(0)[idx / n1] / units.length;
      const double z = g.x(1)[idx % n1] / units.length;
      const double ka = g.k(0)[idx / n1] * units.length;
      const double kb = g.k(1)[idx % n1] * units.length;
      r2 = x * x + z * z;
      kk = ka * ka + kb * kb;
    }
    potential[idx] = 0.5 * r2;
    k2[idx] = kk;
  }

  // Start guess: Thomas-Fermi profile, or a Gaussian without interactions.
  const bool tf = gint > 0.0 && !opt.force_gaussian_guess;
  const double mu_tf = !tf ? 0.0
                       : d == 1 ? 0.5 * std::pow(1.5 * target_n * gint, 2.0 / 3.0)
                                : std::sqrt(gint * target_n / pi);
  const double dt = opt.time_step > 0.0 ? opt.time_step / units.time
                                         : std::min(0.005, 0.05 / std::max(mu_tf, 1.0));
  for (std::size_t i = 0; i < n; ++i) kin[i] = std::exp(-0.5 * k2[i] * dt) / static_cast<double>(n);
  const double w2 = opt.guess_width * opt.guess_width;
  for (std::size_t i = 0; i < n; ++i) {
    const double gauss = std::exp(-potential[i] / w2);
    psi[i] = tf ? std::sqrt(std::max(mu_tf - potential[i], 0.0) / gint) + 1e-3 * gauss : gauss;
  }

  auto normalise = [&]() {
    double s = 0.0;
    for (const auto& v : psi) s += std::norm(v);
    s *= dv;
    if (!(s > 0.0) || !std::isfinite(s))
      throw ConvergenceError("ground state lost its norm", s);
    const double f = std::sqrt(target_n / s);
    for (auto& v : psi) v *= f;
  };
  normalise();

  GroundState out;
  std::vector<cplx> scratch;
  double mu_prev = 0.0;
  double residual = 0.0;
  const double h = 0.5 * dt;
  for (std::size_t it = 1; it <= opt.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i)
      psi[i] *= std::exp(-(potential[i] + gint * std::norm(psi[i])) * h);
    fft.forward(psi);
    for (std::size_t i = 0; i < n; ++i) psi[i] *= kin[i];
    fft.backward(psi);
    // Renormalising before the second half-step keeps the nonlinear term
    // at the target density; otherwise the norm lost so far biases mu by O(dt).
    normalise();
    for (std::size_t i = 0; i < n; ++i)
      psi[i] *= std::exp(-(potential[i] + gint * std::norm(psi[i])) * h);
    normalise();

    const auto e = detail::gp_energy(psi, potential, k2, gint, dv, fft, scratch);
    const double mu = e.mu_numerator / target_n;
    if (opt.record_energy) out.energy_history.push_back(e.energy / target_n * units.energy);
    residual = it > 1 ? std::abs(mu - mu_prev) / (std::abs(mu) * dt) : 1.0;
    mu_prev = mu;
    out.iterations = it;
    if (it >= opt.min_iterations && residual < opt.tolerance) {
      out.chemical_potential = mu * units.energy;
      out.energy_per_particle = e.energy / target_n * units.energy;
      out.fields = FieldPair(g);
      const double fs = units.field(d);
      for (std::size_t i = 0; i < n; ++i) out.fields.psi1[i] = psi[i] * fs;
      return out;
    }
  }
  throw ConvergenceError("imaginary-time relaxation did not converge", residual);
}

/// Detuning (rad/s) that places the Raman resonance at the peak of the
/// trapped density: hbar^2 k0^2 / 2m + U12 n1(0) - hbar delta = mu.
inline double resonant_detuning(const PhysicalParams& p, const Grid& g, const GroundState& gs) {
  double peak = 0.0;
  for (const auto& v : gs.fields.psi1) peak = std::max(peak, std::norm(v));
  const double u12 = p.interaction(1, 2, g.dimension());
  return hbar * p.kick * p.kick / (2.0 * p.mass) + (u12 * peak - gs.chemical_potential) / hbar;
}

}  // namespace atomlaser
