#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "config.hpp"
#include "dynamics.hpp"
#include "ensemble.hpp"

// Orchestration: ground state, then one ensemble per requested mode, then
// linewidth analysis. No file I/O happens here.

namespace atomlaser {

struct ModeOutcome {
  Mode mode = Mode::semiclassical;
  SpectrumSeries series;
  bool complete = false;  // every planned trajectory folded or excluded
  std::vector<LinewidthRecord> records;
  std::optional<double> plateau;  // J, wigner only
  std::string analysis_error;
};

struct ExperimentOutcome {
  ResolvedExperiment setup;
  double chemical_potential = 0.0;  // J, numerical ground state
  std::size_t ground_state_iterations = 0;
  std::vector<ModeOutcome> modes;
  std::optional<ArcProfile> arc;  // 2D only, from the last spectrum of the last mode

  bool complete() const {
    for (const auto& m : modes)
      if (!m.complete) return false;
    return true;
  }
  const ModeOutcome* find(Mode m) const {
    for (const auto& o : modes)
      if (o.mode == m) return &o;
    return nullptr;
  }
};

struct RunControl {
  unsigned workers = 1;
  /// Fold at most this many new trajectories per mode (0 = all).
  std::size_t max_new_trajectories = 0;
  /// Partially accumulated series to continue, keyed by mode.
  std::map<Mode, SpectrumSeries> resume;
  /// Called every `checkpoint_every` folds and once when a mode finishes.
  std::function<void(const SpectrumSeries&)> checkpoint;
  std::function<void(const std::string&)> log;
};

inline std::size_t ensemble_size(const ResolvedExperiment& r, Mode m) {
  return m == Mode::wigner ? r.config.ensemble.trajectories : 1;
}

inline EnsembleSpec ensemble_spec(const ResolvedExperiment& r, Mode m) {
  EnsembleSpec e;
  e.trajectories = ensemble_size(r, m);
  e.seed = r.config.ensemble.seed;
  e.evolution = r.evolution(m);
  e.analysis_times = r.analysis_times;
  e.squeeze_min_occupation = r.config.ensemble.squeeze_min_occupation;
  return e;
}

/// Relaxes the ground state and fills in the default detuning.
inline GroundState prepare(ResolvedExperiment& r) {
  GroundState gs = ground_state(r.params, r.grid, r.params.atom_number);
  if (!r.params.detuning) r.params.detuning = resonant_detuning(r.params, r.grid, gs);
  return gs;
}

inline void analyse(ModeOutcome& m, const ResolvedExperiment& r) {
  LinewidthOptions opt;
  opt.window_scale = r.config.analysis.window_scale;
  opt.min_r_squared = r.config.analysis.min_r_squared;
  try {
    m.records = linewidth_series(m.series, r.params, opt);
    if (m.mode == Mode::wigner) m.plateau = plateau_linewidth(m.records, r.config.analysis.plateau_fraction);
  } catch (const FitError& e) {
    m.analysis_error = e.what();
  }
}

inline ExperimentOutcome run_experiment(ResolvedExperiment setup, const RunControl& control = {}) {
  ExperimentOutcome out;
  const GroundState gs = prepare(setup);
  out.setup = setup;
  out.chemical_potential = gs.chemical_potential;
  out.ground_state_iterations = gs.iterations;
  auto log = [&](const std::string& s) {
    if (control.log) control.log(s);
  };

  for (Mode mode : setup.config.evolution.modes) {
    ModeOutcome m;
    m.mode = mode;
    const EnsembleSpec spec = ensemble_spec(setup, mode);
    if (auto it = control.resume.find(mode); it != control.resume.end()) {
      m.series = it->second;
      check_resumable(m.series, setup.hash, spec.seed, setup.grid);
    }
    m.series.config_hash = setup.hash;
    EnsembleOptions eo;
    eo.workers = control.workers;
    eo.max_new_trajectories = control.max_new_trajectories;
    const std::size_t every = setup.config.ensemble.checkpoint_every;
    std::size_t since = 0;
    if (control.checkpoint)
      eo.on_fold = [&](const SpectrumSeries& s) {
        if (++since >= every) {
          since = 0;
          control.checkpoint(s);
        }
      };
    log(std::string(mode_name(mode)) + ": " + std::to_string(spec.trajectories - m.series.done()) +
        " trajectories to run");
    if (m.series.planned == 0) m.series.config_hash = setup.hash;
    run_ensemble(m.series, spec, setup.params, setup.grid, gs, eo);
    m.series.config_hash = setup.hash;
    if (control.checkpoint) control.checkpoint(m.series);
    m.complete = m.series.done() == m.series.planned;
    if (m.complete && m.series.folded > 0) analyse(m, setup);
    out.modes.push_back(std::move(m));
  }

  if (setup.grid.dimension() == 2 && out.complete() && !out.modes.empty()) {
    const auto& last = out.modes.back().series;
    try {
      out.arc = arc_profile_2d(last.finalize(last.times.size() - 1).value, setup.grid, setup.params,
                               out.chemical_potential);
    } catch (const FitError& e) {
      log(std::string("arc analysis failed: ") + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameter sweeps

struct SweepPoint {
  double value = 0.0;      // swept parameter
  double squeeze_r = 0.0;
  double atom_number = 0.0;
  std::string hash;
  double plateau = 0.0;        // J, 0 if the plateau fit failed
  double theory_limit = 0.0;   // 2 dE (J), squeezing included
  bool ok = false;
  std::string message;
};

struct SweepSeries {
  double squeeze_r = 0.0;
  std::vector<SweepPoint> points;
  std::optional<ScalingFit> scaling;  // atom_number sweeps only
  std::string scaling_error;
};

/// Configuration of one sweep point: wigner mode only, sweep section removed.
inline ExperimentConfig sweep_point_config(const ExperimentConfig& base, std::size_t index,
                                           double squeeze_r) {
  if (!base.sweep) throw ParameterError("configuration has no 'sweep' section");
  const auto& s = *base.sweep;
  ExperimentConfig c = base;
  c.sweep.reset();
  c.evolution.modes = {Mode::wigner};
  if (s.parameter == "atom_number") {
    c.physics.atom_number = s.values.at(index);
    c.physics.squeeze_r = squeeze_r;
  } else {
    c.physics.squeeze_r = s.values.at(index);
  }
  if (!s.time_steps.empty()) c.evolution.time_step = s.time_steps.at(index);
  c.name = base.name + "-" + std::to_string(index);
  return c;
}

inline std::vector<SweepSeries> run_sweep(const ExperimentConfig& base, const RunControl& control = {}) {
  if (!base.sweep) throw ParameterError("configuration has no 'sweep' section");
  const auto& s = *base.sweep;
  const std::vector<double> series_r =
      s.parameter == "atom_number" ? s.squeeze_r_series : std::vector<double>{base.physics.squeeze_r};
  // Resolve every point before computing anything so a bad value fails fast.
  std::vector<std::vector<ResolvedExperiment>> setups;
  for (double r : series_r) {
    setups.emplace_back();
    for (std::size_t i = 0; i < s.values.size(); ++i)
      setups.back().push_back(resolve(sweep_point_config(base, i, r)));
  }

  std::vector<SweepSeries> out;
  for (std::size_t k = 0; k < series_r.size(); ++k) {
    SweepSeries series;
    series.squeeze_r = series_r[k];
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const auto& setup = setups[k][i];
      if (control.log)
        control.log("sweep point " + std::to_string(i + 1) + "/" + std::to_string(s.values.size()) +
                    " (squeeze_r " + std::to_string(series_r[k]) + ")");
      RunControl rc;
      rc.workers = control.workers;
      rc.log = control.log;
      const auto outcome = run_experiment(setup, rc);
      const auto& m = outcome.modes.front();
      SweepPoint pt;
      pt.value = s.values[i];
      pt.squeeze_r = setup.params.squeeze_r;
      pt.atom_number = setup.params.atom_number;
      pt.hash = setup.hash;
      pt.theory_limit = 2.0 * setup.delta_e *
                        squeezed_linewidth_factor(pt.atom_number, pt.squeeze_r, setup.params.squeeze_theta);
      if (m.plateau) {
        pt.plateau = *m.plateau;
        pt.ok = true;
      } else {
        pt.message = m.analysis_error;
      }
      series.points.push_back(pt);
    }
    if (s.parameter == "atom_number") {
      std::vector<std::array<double, 2>> xy;
      for (const auto& p : series.points)
        if (p.ok) xy.push_back({p.atom_number, p.plateau});
      try {
        series.scaling = scaling_fit(xy);
      } catch (const Error& e) {
        series.scaling_error = e.what();
      }
    }
    out.push_back(std::move(series));
  }
  return out;
}

}  // namespace atomlaser
