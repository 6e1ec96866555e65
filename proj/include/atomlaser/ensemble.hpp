#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dynamics.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "params.hpp"
#include "sampling.hpp"

namespace atomlaser {

struct EnsembleSpec {
  std::size_t trajectories = 1;
  std::uint64_t seed = 0;
  EvolutionSpec evolution;
  std::vector<double> analysis_times;  // s, each must land on a snapshot
  double squeeze_min_occupation = 0.0;

  void validate(const Grid& g) const {
    if (trajectories < 1) throw ParameterError("trajectory count must be >= 1");
    evolution.validate(g);
    if (analysis_times.empty()) throw ParameterError("at least one analysis time is required");
    snapshot_steps();
  }

  /// Step index of every analysis time; throws if one is not a snapshot time.
  std::vector<std::size_t> snapshot_steps() const {
    const std::size_t steps = evolution.steps();
    const std::size_t every = evolution.steps_per_snapshot();
    std::vector<std::size_t> out;
    for (double t : analysis_times) {
      const double exact = t / evolution.time_step;
      const auto s = static_cast<long long>(std::llround(exact));
      if (s < 0 || static_cast<std::size_t>(s) > steps ||
          std::abs(exact - static_cast<double>(s)) > 1e-6 * std::max(1.0, exact))
        throw ParameterError("analysis time " + std::to_string(t) + " s is not a step time");
      const auto su = static_cast<std::size_t>(s);
      if (su % every != 0 && su != steps)
        throw ParameterError("analysis time " + std::to_string(t) + " s is not a snapshot time");
      out.push_back(su);
    }
    return out;
  }
};

/// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      carry += (sum - t) + x;
    else
      carry += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

struct FinalSpectrum {
  double time = 0.0;
  std::vector<double> value;   // <Psi2^dag(k) Psi2(k)>, m^d, FFT order
  std::vector<double> stderr;  // per-bin standard error (0 for a single trajectory)
  double negative_fraction = 0.0;
  double untrapped_number = 0.0;  // sum value * dV_k
  double trapped_number = 0.0;    // symmetric-ordering estimate
};

/// Accumulated |psi2(k)|^2 over trajectories at each analysis time. Also
/// carries the bookkeeping needed to resume an interrupted run.
struct SpectrumSeries {
  Grid grid;
  Mode mode = Mode::semiclassical;
  std::vector<double> times;  // s
  std::uint64_t seed = 0;
  std::size_t planned = 0;                 // trajectories requested
  std::vector<std::uint8_t> completed;     // per trajectory: folded or excluded
  std::vector<std::uint64_t> excluded;     // diverged trajectory indices
  std::size_t folded = 0;                  // trajectories contributing
  double chemical_potential = 0.0;         // J, of the shared ground state
  std::string config_hash;

  // [time][bin]
  std::vector<std::vector<CompensatedSum>> power;
  std::vector<std::vector<CompensatedSum>> power_sq;
  std::vector<CompensatedSum> trapped;
  std::vector<CompensatedSum> untrapped;

  bool vacuum_subtracted() const { return mode == Mode::wigner; }

  void reset(const Grid& g, Mode m, const std::vector<double>& t, std::uint64_t s,
             std::size_t n) {
    grid = g;
    mode = m;
    times = t;
    seed = s;
    planned = n;
    completed.assign(n, 0);
    excluded.clear();
    folded = 0;
    power.assign(t.size(), std::vector<CompensatedSum>(g.size()));
    power_sq.assign(t.size(), std::vector<CompensatedSum>(g.size()));
    trapped.assign(t.size(), {});
    untrapped.assign(t.size(), {});
  }

  std::size_t done() const {
    return static_cast<std::size_t>(std::count(completed.begin(), completed.end(), 1));
  }

  FinalSpectrum finalize(std::size_t t) const {
    if (folded == 0) throw Error("spectrum series has no trajectories");
    FinalSpectrum out;
    out.time = times.at(t);
    const std::size_t bins = grid.size();
    const double n = static_cast<double>(folded);
    const double vac = vacuum_subtracted() ? 0.5 / grid.k_volume_element() : 0.0;
    out.value.resize(bins);
    out.stderr.resize(bins);
    std::size_t negative = 0;
    double total = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
      const double mean = power[t][b].value() / n;
      const double var =
          folded > 1 ? std::max(power_sq[t][b].value() / n - mean * mean, 0.0) * n / (n - 1.0)
                     : 0.0;
      out.value[b] = mean - vac;
      out.stderr[b] = std::sqrt(var / n);
      if (out.value[b] < 0.0) ++negative;
      total += out.value[b];
    }
    out.negative_fraction = static_cast<double>(negative) / static_cast<double>(bins);
    out.untrapped_number = total * grid.k_volume_element();
    const double modes = vacuum_subtracted() ? 0.5 * static_cast<double>(bins) : 0.0;
    out.trapped_number = trapped[t].value() / n - modes;
    return out;
  }
};

struct EnsembleOptions {
  unsigned workers = 1;
  /// Fold at most this many new trajectories, then return (0 = all). Used to
  /// checkpoint and resume.
  std::size_t max_new_trajectories = 0;
  /// Called after each fold with the series in a consistent state.
  std::function<void(const SpectrumSeries&)> on_fold;
};

namespace detail {

struct TrajectoryResult {
  std::vector<std::vector<double>> power;  // [time][bin]
  std::vector<double> trapped;
  std::vector<double> untrapped;
  bool failed = false;
};

inline TrajectoryResult run_trajectory(const Propagator& prop, const EnsembleSpec& spec,
                                       const PhysicalParams& p, const FieldPair& ground,
                                       const std::vector<std::size_t>& steps,
                                       std::uint64_t index) {
  const Grid& g = prop.grid();
  FieldPair init(g);
  init.time = 0.0;
  NoiseSpec noise;
  noise.seed = spec.seed;
  noise.trajectory = index;
  noise.squeeze[0] = {p.squeeze_r, p.squeeze_theta};
  noise.squeeze_min_occupation = spec.squeeze_min_occupation;
  if (spec.evolution.mode == Mode::wigner) {
    init.psi1 = sample_squeezed(ground.psi1, g, noise, 1);
    init.psi2 = sample_coherent(std::vector<cplx>(g.size()), g, noise, 2);
  } else {
    init.psi1 = ground.psi1;
  }

  TrajectoryResult r;
  r.power.resize(steps.size());
  r.trapped.assign(steps.size(), 0.0);
  r.untrapped.assign(steps.size(), 0.0);
  const std::size_t every = spec.evolution.steps_per_snapshot();
  const std::size_t total = spec.evolution.steps();
  auto sink = [&](const Snapshot& s) {
    const std::size_t step = std::min(s.index * every, total);
    for (std::size_t t = 0; t < steps.size(); ++t) {
      if (steps[t] != step) continue;
      auto& out = r.power[t];
      out.resize(s.psi2_k.size());
      for (std::size_t b = 0; b < out.size(); ++b) out[b] = std::norm(s.psi2_k[b]);
      r.trapped[t] = s.trapped_norm;
      r.untrapped[t] = s.untrapped_norm;
    }
  };
  RandomStream absorber(spec.seed, index, RandomStream::absorber);
  try {
    prop.evolve(init, sink, &absorber);
  } catch (const IntegrationError&) {
    r.failed = true;
  }
  return r;
}

inline void fold(SpectrumSeries& s, const TrajectoryResult& r, std::size_t index) {
  s.completed[index] = 1;
  if (r.failed) {
    s.excluded.push_back(index);
    return;
  }
  for (std::size_t t = 0; t < s.times.size(); ++t) {
    auto& acc = s.power[t];
    auto& acc2 = s.power_sq[t];
    const auto& v = r.power[t];
    for (std::size_t b = 0; b < v.size(); ++b) {
      acc[b].add(v[b]);
      acc2[b].add(v[b] * v[b]);
    }
    s.trapped[t].add(r.trapped[t]);
    s.untrapped[t].add(r.untrapped[t]);
  }
  ++s.folded;
}

}  // namespace detail

/// Runs (or continues, if `series` already holds progress) an ensemble of
/// trajectories from the shared ground state. Trajectory i uses noise
/// stream (seed, i). Contributions are folded strictly in index order, so
/// the result does not depend on the number of workers.
///
/// `params.detuning` must be resolved.
inline void run_ensemble(SpectrumSeries& series, const EnsembleSpec& spec,
                         const PhysicalParams& params, const Grid& grid,
                         const GroundState& ground, const EnsembleOptions& options = {}) {
  spec.validate(grid);
  const auto steps = spec.snapshot_steps();
  if (series.planned == 0) {
    series.reset(grid, spec.evolution.mode, spec.analysis_times, spec.seed, spec.trajectories);
    series.chemical_potential = ground.chemical_potential;
  } else {
    if (series.seed != spec.seed) throw CheckpointError("resume refused: master seed differs");
    if (!(series.grid == grid)) throw CheckpointError("resume refused: grid differs");
    if (series.planned != spec.trajectories || series.times != spec.analysis_times ||
        series.mode != spec.evolution.mode)
      throw CheckpointError("resume refused: ensemble layout differs");
  }

  std::vector<std::uint64_t> todo;
  for (std::size_t i = 0; i < series.planned; ++i)
    if (!series.completed[i]) todo.push_back(i);
  if (options.max_new_trajectories > 0 && todo.size() > options.max_new_trajectories)
    todo.resize(options.max_new_trajectories);
  if (todo.empty()) return;

  const Propagator prop(params, grid, spec.evolution);
  std::mutex mutex;
  std::map<std::uint64_t, detail::TrajectoryResult> ready;
  std::size_t next_fold = 0;  // position in `todo`
  std::atomic<std::size_t> next_claim{0};
  std::exception_ptr failure;

  auto worker = [&]() {
    for (;;) {
      const std::size_t pos = next_claim.fetch_add(1);
      if (pos >= todo.size()) return;
      {
        std::lock_guard lock(mutex);
        if (failure) return;
      }
      detail::TrajectoryResult r;
      try {
        r = detail::run_trajectory(prop, spec, params, ground.fields, steps, todo[pos]);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
      std::lock_guard lock(mutex);
      ready.emplace(todo[pos], std::move(r));
      while (next_fold < todo.size()) {
        auto it = ready.find(todo[next_fold]);
        if (it == ready.end()) break;
        detail::fold(series, it->second, todo[next_fold]);
        ready.erase(it);
        ++next_fold;
        if (options.on_fold) options.on_fold(series);
      }
    }
  };

  const unsigned workers =
      std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(todo.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  const std::size_t attempted = series.folded + series.excluded.size();
  if (series.excluded.size() * 100 > attempted)
    throw IntegrationError("more than 1% of trajectories diverged",
                           static_cast<std::size_t>(series.excluded.front()));
}

inline SpectrumSeries run_ensemble(const EnsembleSpec& spec, const PhysicalParams& params,
                                   const Grid& grid, const GroundState& ground,
                                   const EnsembleOptions& options = {}) {
  SpectrumSeries s;
  run_ensemble(s, spec, params, grid, ground, options);
  return s;
}

}  // namespace atomlaser
