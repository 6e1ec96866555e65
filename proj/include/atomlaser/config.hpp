#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "checkpoint.hpp"
#include "dynamics.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "params.hpp"
#include "theory.hpp"

// Experiment configuration: JSON text with nested sections and SI values
// whose key names carry the unit. Every key is checked; unknown keys are a
// validation error so typos cannot silently fall back to defaults.

namespace atomlaser {

using json = nlohmann::json;

struct GridSettings {
  std::vector<std::size_t> points;        // one entry per dimension
  std::optional<std::vector<double>> extent;  // m
  std::optional<std::vector<double>> origin;  // m, lower edge
};

struct EvolutionSettings {
  std::vector<Mode> modes{Mode::semiclassical};
  double total_time = 0.0;          // s
  std::optional<double> time_step;  // s
  double snapshot_interval = 0.0;   // s
  double absorber_width = 0.0;      // m
  double absorber_strength = 0.0;   // 1/s
};

struct EnsembleSettings {
  std::size_t trajectories = 1;
  std::uint64_t seed = 1;
  double squeeze_min_occupation = 0.0;
  std::size_t checkpoint_every = 16;  // trajectories between checkpoint writes
};

struct AnalysisSettings {
  double window_scale = 5.0;
  double min_r_squared = 0.5;
  double plateau_fraction = 0.3;  // tail of the time span averaged for the plateau
};

struct OutputSettings {
  bool plots = true;
};

struct SweepSettings {
  std::string parameter;  // "atom_number" or "squeeze_r"
  std::vector<double> values;
  std::vector<double> time_steps;  // s, optional, one per value
  std::vector<double> squeeze_r_series{0.0};  // only for atom_number sweeps
};

struct ExperimentConfig {
  std::string name;
  std::string description;
  int dimension = 1;
  PhysicalParams physics;
  std::optional<double> rabi_frequency;  // rad/s; empty picks the weak-outcoupling default
  GridSettings grid;
  EvolutionSettings evolution;
  EnsembleSettings ensemble;
  AnalysisSettings analysis;
  OutputSettings output;
  std::optional<SweepSettings> sweep;
};

inline const char* mode_name(Mode m) { return m == Mode::wigner ? "wigner" : "semiclassical"; }

namespace detail {

/// Walks one JSON object, remembering which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParameterError(path_ + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ParameterError("missing required key " + where(key));
    return j_.at(key);
  }

  double number(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_number()) throw ParameterError(where(key) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParameterError(where(key) + " must be finite");
    return d;
  }
  double number(const std::string& key, double fallback) {
    used_.insert(key);
    return has(key) ? number(key) : fallback;
  }
  std::optional<double> optional_number(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    return number(key);
  }
  double positive(const std::string& key) {
    const double d = number(key);
    if (!(d > 0.0)) throw ParameterError(where(key) + " must be positive");
    return d;
  }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw ParameterError(where(key) + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  }
  std::string text(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ParameterError(where(key) + " must be a string");
    return v.get<std::string>();
  }
  bool flag(const std::string& key, bool fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ParameterError(where(key) + " must be true or false");
    return v.get<bool>();
  }
  std::vector<double> numbers(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_array()) throw ParameterError(where(key) + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ParameterError(where(key) + " must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  Section child(const std::string& key) {
    used_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, path_.empty() ? key : path_ + "." + key);
  }
  void mark(const std::string& key) { used_.insert(key); }

  /// Throws on any key that was never consumed.
  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw ParameterError("unknown key " + where(k));
  }

 private:
  std::string where(const std::string& key) const {
    return "'" + (path_.empty() ? key : path_ + "." + key) + "'";
  }
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline Mode parse_mode(const std::string& s) {
  if (s == "semiclassical") return Mode::semiclassical;
  if (s == "wigner") return Mode::wigner;
  throw ParameterError("evolution.modes entries must be \"semiclassical\" or \"wigner\", got \"" + s +
                       "\"");
}

}  // namespace detail

/// Parses and validates a configuration. With `desk` the document's "desk"
/// object is applied as a JSON merge patch first.
inline ExperimentConfig config_from_json(const json& doc, bool desk = false) {
  if (!doc.is_object()) throw ParameterError("configuration must be a JSON object");
  json j = doc;
  if (j.contains("desk")) {
    if (!j["desk"].is_object()) throw ParameterError("'desk' must be an object");
    if (desk) j.merge_patch(j["desk"]);
    j.erase("desk");
  } else if (desk) {
    throw ParameterError("--desk requested but the configuration has no 'desk' section");
  }

  ExperimentConfig c;
  detail::Section top(j, "");
  c.name = top.text("name", "experiment");
  c.description = top.text("description", "");
  c.dimension = static_cast<int>(top.count("dimension", 1));
  if (c.dimension != 1 && c.dimension != 2)
    throw ParameterError("'dimension' must be 1 or 2 (3D appears only in theory output)");

  {
    auto s = top.child("physics");
    auto& p = c.physics;
    p.mass = s.positive("mass_kg");
    p.trap_frequency = s.positive("trap_frequency_rad_s");
    p.atom_number = s.positive("atom_number");
    const double a = s.number("scattering_length_m", 0.0);
    p.a11 = s.number("a11_m", a);
    p.a22 = s.number("a22_m", a);
    p.a12 = s.number("a12_m", a);
    p.kick = s.number("kick_wavenumber_per_m", 0.0);
    if (s.has("kick_direction")) {
      const auto d = s.numbers("kick_direction");
      if (d.size() != 2) throw ParameterError("'physics.kick_direction' must have 2 entries (x, z)");
      p.kick_direction = {d[0], d[1]};
    } else {
      s.mark("kick_direction");
    }
    c.rabi_frequency = s.optional_number("rabi_frequency_rad_s");
    const double phase = s.number("rabi_phase_rad", 0.0);
    if (c.rabi_frequency) {
      if (*c.rabi_frequency < 0.0) throw ParameterError("'physics.rabi_frequency_rad_s' must be >= 0");
      p.rabi = std::polar(*c.rabi_frequency, phase);
    } else {
      p.rabi = std::polar(1.0, phase);  // magnitude fixed in resolve()
    }
    p.detuning = s.optional_number("detuning_rad_s");
    if (auto v = s.optional_number("transverse_area_m2")) p.transverse_area = *v;
    if (auto v = s.optional_number("transverse_length_m")) p.transverse_length = *v;
    p.squeeze_r = s.number("squeeze_r", 0.0);
    p.squeeze_theta = s.number("squeeze_theta_rad", 0.0);
    s.finish();
    p.validate(c.dimension);
  }

  {
    auto s = top.child("grid");
    for (double v : s.numbers("points")) {
      if (v < 2 || v != std::floor(v)) throw ParameterError("'grid.points' entries must be integers >= 2");
      c.grid.points.push_back(static_cast<std::size_t>(v));
    }
    if (c.grid.points.size() != static_cast<std::size_t>(c.dimension))
      throw ParameterError("'grid.points' needs one entry per dimension");
    if (s.has("extent_m")) c.grid.extent = s.numbers("extent_m");
    else s.mark("extent_m");
    if (s.has("origin_m")) c.grid.origin = s.numbers("origin_m");
    else s.mark("origin_m");
    for (const auto* v : {&c.grid.extent, &c.grid.origin})
      if (*v && (*v)->size() != c.grid.points.size())
        throw ParameterError("'grid.extent_m' and 'grid.origin_m' need one entry per dimension");
    if (c.grid.extent)
      for (double e : *c.grid.extent)
        if (!(e > 0.0)) throw ParameterError("'grid.extent_m' entries must be positive");
    s.finish();
  }

  {
    auto s = top.child("evolution");
    auto& e = c.evolution;
    if (s.has("modes")) {
      const auto& m = s.raw("modes");
      if (!m.is_array() || m.empty()) throw ParameterError("'evolution.modes' must be a non-empty array");
      e.modes.clear();
      for (const auto& v : m) {
        if (!v.is_string()) throw ParameterError("'evolution.modes' entries must be strings");
        const Mode mode = detail::parse_mode(v.get<std::string>());
        if (std::find(e.modes.begin(), e.modes.end(), mode) != e.modes.end())
          throw ParameterError("'evolution.modes' lists a mode twice");
        e.modes.push_back(mode);
      }
    } else {
      s.mark("modes");
    }
    e.total_time = s.positive("total_time_s");
    e.time_step = s.optional_number("time_step_s");
    if (e.time_step && !(*e.time_step > 0.0)) throw ParameterError("'evolution.time_step_s' must be positive");
    e.snapshot_interval = s.positive("snapshot_interval_s");
    e.absorber_width = s.number("absorber_width_m", 0.0);
    e.absorber_strength = s.number("absorber_strength_per_s", 0.0);
    if (e.absorber_width < 0.0 || e.absorber_strength < 0.0)
      throw ParameterError("absorber settings must be non-negative");
    const double n = e.total_time / e.snapshot_interval;
    if (std::abs(n - std::round(n)) > 1e-9 * n || std::round(n) < 2)
      throw ParameterError(
          "'evolution.total_time_s' must be an integer multiple (>= 2) of 'snapshot_interval_s'");
    if (e.time_step) {
      const double m = e.snapshot_interval / *e.time_step;
      if (std::abs(m - std::round(m)) > 1e-9 * m || std::round(m) < 1)
        throw ParameterError("'evolution.snapshot_interval_s' must be an integer multiple of 'time_step_s'");
    }
    s.finish();
  }

  {
    auto s = top.child("ensemble");
    auto& e = c.ensemble;
    e.trajectories = s.count("trajectories", 1);
    if (e.trajectories < 1) throw ParameterError("'ensemble.trajectories' must be >= 1");
    e.seed = s.count("seed", 1);
    e.squeeze_min_occupation = s.number("squeeze_min_occupation", 0.0);
    if (e.squeeze_min_occupation < 0.0)
      throw ParameterError("'ensemble.squeeze_min_occupation' must be >= 0");
    e.checkpoint_every = s.count("checkpoint_every", 16);
    if (e.checkpoint_every < 1) throw ParameterError("'ensemble.checkpoint_every' must be >= 1");
    s.finish();
  }

  {
    auto s = top.child("analysis");
    auto& a = c.analysis;
    a.window_scale = s.number("window_scale", 5.0);
    a.min_r_squared = s.number("min_r_squared", 0.5);
    a.plateau_fraction = s.number("plateau_fraction", 0.3);
    if (!(a.window_scale > 0.0)) throw ParameterError("'analysis.window_scale' must be positive");
    if (!(a.min_r_squared >= 0.0 && a.min_r_squared <= 1.0))
      throw ParameterError("'analysis.min_r_squared' must lie in [0, 1]");
    if (!(a.plateau_fraction > 0.0 && a.plateau_fraction <= 1.0))
      throw ParameterError("'analysis.plateau_fraction' must lie in (0, 1]");
    s.finish();
  }

  {
    auto s = top.child("output");
    c.output.plots = s.flag("plots", true);
    s.finish();
  }

  if (top.has("sweep")) {
    auto s = top.child("sweep");
    SweepSettings w;
    w.parameter = s.text("parameter", "atom_number");
    if (w.parameter != "atom_number" && w.parameter != "squeeze_r")
      throw ParameterError("'sweep.parameter' must be \"atom_number\" or \"squeeze_r\"");
    w.values = s.numbers("values");
    if (w.values.empty()) throw ParameterError("'sweep.values' must not be empty");
    if (w.parameter == "atom_number")
      for (double v : w.values)
        if (!(v > 0.0)) throw ParameterError("'sweep.values' atom numbers must be positive");
    if (s.has("time_step_s")) {
      w.time_steps = s.numbers("time_step_s");
      if (w.time_steps.size() != w.values.size())
        throw ParameterError("'sweep.time_step_s' needs one entry per sweep value");
    } else {
      s.mark("time_step_s");
    }
    if (s.has("squeeze_r_series")) {
      if (w.parameter != "atom_number")
        throw ParameterError("'sweep.squeeze_r_series' only applies to atom_number sweeps");
      w.squeeze_r_series = s.numbers("squeeze_r_series");
      if (w.squeeze_r_series.empty()) throw ParameterError("'sweep.squeeze_r_series' must not be empty");
    } else {
      s.mark("squeeze_r_series");
    }
    s.finish();
    c.sweep = w;
  } else {
    top.mark("sweep");
  }

  top.finish();
  return c;
}

/// Canonical JSON form. Parsing it back yields an identical configuration.
inline json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["description"] = c.description;
  j["dimension"] = c.dimension;
  const auto& p = c.physics;
  auto& ph = j["physics"];
  ph["mass_kg"] = p.mass;
  ph["trap_frequency_rad_s"] = p.trap_frequency;
  ph["atom_number"] = p.atom_number;
  ph["a11_m"] = p.a11;
  ph["a22_m"] = p.a22;
  ph["a12_m"] = p.a12;
  ph["kick_wavenumber_per_m"] = p.kick;
  if (c.dimension == 2) ph["kick_direction"] = {p.kick_direction[0], p.kick_direction[1]};
  if (c.rabi_frequency) ph["rabi_frequency_rad_s"] = *c.rabi_frequency;
  ph["rabi_phase_rad"] = std::arg(p.rabi);
  if (p.detuning) ph["detuning_rad_s"] = *p.detuning;
  if (p.transverse_area) ph["transverse_area_m2"] = *p.transverse_area;
  if (p.transverse_length) ph["transverse_length_m"] = *p.transverse_length;
  ph["squeeze_r"] = p.squeeze_r;
  ph["squeeze_theta_rad"] = p.squeeze_theta;

  j["grid"]["points"] = c.grid.points;
  if (c.grid.extent) j["grid"]["extent_m"] = *c.grid.extent;
  if (c.grid.origin) j["grid"]["origin_m"] = *c.grid.origin;

  auto& ev = j["evolution"];
  ev["modes"] = json::array();
  for (Mode m : c.evolution.modes) ev["modes"].push_back(mode_name(m));
  ev["total_time_s"] = c.evolution.total_time;
  if (c.evolution.time_step) ev["time_step_s"] = *c.evolution.time_step;
  ev["snapshot_interval_s"] = c.evolution.snapshot_interval;
  ev["absorber_width_m"] = c.evolution.absorber_width;
  ev["absorber_strength_per_s"] = c.evolution.absorber_strength;

  j["ensemble"] = {{"trajectories", c.ensemble.trajectories},
                   {"seed", c.ensemble.seed},
                   {"squeeze_min_occupation", c.ensemble.squeeze_min_occupation},
                   {"checkpoint_every", c.ensemble.checkpoint_every}};
  j["analysis"] = {{"window_scale", c.analysis.window_scale},
                   {"min_r_squared", c.analysis.min_r_squared},
                   {"plateau_fraction", c.analysis.plateau_fraction}};
  j["output"] = {{"plots", c.output.plots}};
  if (c.sweep) {
    auto& s = j["sweep"];
    s["parameter"] = c.sweep->parameter;
    s["values"] = c.sweep->values;
    if (!c.sweep->time_steps.empty()) s["time_step_s"] = c.sweep->time_steps;
    if (c.sweep->parameter == "atom_number") s["squeeze_r_series"] = c.sweep->squeeze_r_series;
  }
  return j;
}

/// FNV-1a over the canonical JSON minus the output section, as 16 hex digits.
/// Keys are sorted and doubles printed round-trip exact, so equal
/// configurations hash equally.
inline std::string config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("output");
  const std::uint64_t h = fnv1a(j.dump());
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot read configuration " + path.string());
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ParameterError("configuration " + path.string() + " is not valid JSON: " + e.what());
  }
}

#ifndef ATOMLASER_PRESET_DIR
#define ATOMLASER_PRESET_DIR "presets"
#endif

/// Accepts a file path or the name of a shipped preset ("fig4").
inline std::filesystem::path find_config(const std::string& name_or_path) {
  const std::filesystem::path p(name_or_path);
  if (std::filesystem::exists(p)) return p;
  for (const std::filesystem::path dir : {std::filesystem::path(ATOMLASER_PRESET_DIR),
                                          std::filesystem::path("presets")}) {
    auto candidate = dir / (name_or_path + ".json");
    if (std::filesystem::exists(candidate)) return candidate;
  }
  throw ParameterError("no configuration file or preset named '" + name_or_path + "'");
}

inline ExperimentConfig load_config(const std::string& name_or_path, bool desk = false) {
  return config_from_json(read_json_file(find_config(name_or_path)), desk);
}

// ---------------------------------------------------------------------------
// Derived quantities

/// Rabi frequency giving an outcoupled fraction of about `fraction` after
/// `total_time`: an atom crossing the condensate (diameter 2R) at the beam
/// speed spends tau = 2R/v in the coupling region and transfers with
/// probability ~ (Omega tau)^2 per crossing, so the depletion rate is
/// ~ Omega^2 tau.
inline double weak_outcoupling_rabi(const PhysicalParams& p, double mu, double total_time,
                                    double fraction = 0.2) {
  const double radius = std::sqrt(2.0 * mu / (p.mass * p.trap_frequency * p.trap_frequency));
  const double k = std::max(predicted_peak_momentum(p, mu), p.kick);
  const double speed = hbar * std::max(k, 1.0 / radius) / p.mass;
  const double tau = 2.0 * radius / speed;
  return std::sqrt(fraction / (tau * total_time));
}

/// Everything derived from a configuration before any field is evolved.
struct ResolvedExperiment {
  ExperimentConfig config;
  std::string hash;
  PhysicalParams params;  // rabi resolved; detuning may still be empty
  Grid grid;
  double mu_tf = 0.0;       // J, Thomas-Fermi estimate
  double delta_e = 0.0;     // J
  double k_peak = 0.0;      // 1/m, from mu_tf
  double time_step = 0.0;   // s
  std::vector<double> analysis_times;  // s

  EvolutionSpec evolution(Mode m) const {
    EvolutionSpec e;
    e.mode = m;
    e.time_step = time_step;
    e.total_time = config.evolution.total_time;
    e.snapshot_interval = config.evolution.snapshot_interval;
    e.absorber = {config.evolution.absorber_width, config.evolution.absorber_strength};
    return e;
  }
};

inline ResolvedExperiment resolve(const ExperimentConfig& c) {
  ResolvedExperiment r;
  r.config = c;
  r.hash = config_hash(c);
  r.params = c.physics;
  const int d = c.dimension;
  r.params.validate(d);
  r.mu_tf = chemical_potential(r.params, d, r.params.atom_number);
  r.delta_e = phase_diffusion_limit(r.params, d, r.params.atom_number);
  r.k_peak = predicted_peak_momentum(r.params, r.mu_tf);
  const double T = c.evolution.total_time;
  if (!c.rabi_frequency)
    r.params.rabi = std::polar(weak_outcoupling_rabi(r.params, r.mu_tf, T), std::arg(c.physics.rabi));

  // Default box: the beam axis (1D, or the dominant kick axis in 2D) holds the
  // condensate near its lower end; other axes are centred on the trap.
  const double radius =
      std::sqrt(2.0 * r.mu_tf / (r.params.mass * r.params.trap_frequency * r.params.trap_frequency));
  std::array<std::size_t, 2> pts{c.grid.points[0], d == 2 ? c.grid.points[1] : 1};
  std::array<double, 2> ext{1.0, 1.0}, org{0.0, 0.0};
  const double length = default_domain_length(r.params, r.mu_tf, T) + 2.0 * c.evolution.absorber_width;
  for (int a = 0; a < d; ++a) {
    const bool beam_axis = d == 1 || std::abs(r.params.kick_direction[a]) >= 0.5;
    ext[a] = c.grid.extent ? (*c.grid.extent)[a] : length;
    if (c.grid.origin) {
      org[a] = (*c.grid.origin)[a];
    } else if (beam_axis) {
      const double lead = 1.5 * radius + c.evolution.absorber_width;
      org[a] = (d == 2 && r.params.kick_direction[a] < 0.0) ? -(ext[a] - lead) : -lead;
    } else {
      org[a] = -0.5 * ext[a];
    }
  }
  r.grid = Grid(d, pts, ext, org);
  for (int a = 0; a < d; ++a)
    if (r.grid.origin(a) > -radius || r.grid.origin(a) + r.grid.extent(a) < radius)
      throw ParameterError("grid does not contain the condensate (Thomas-Fermi radius " +
                           std::to_string(radius) + " m)");

  const double interval = c.evolution.snapshot_interval;
  if (c.evolution.time_step) {
    r.time_step = *c.evolution.time_step;
  } else {
    // Shrink the default step until it divides the snapshot interval.
    const double dt = default_time_step(r.params, r.grid, r.mu_tf);
    r.time_step = interval / std::ceil(interval / dt * (1.0 - 1e-12));
  }
  const auto snapshots = static_cast<std::size_t>(std::llround(T / interval));
  const auto per = static_cast<std::size_t>(std::llround(interval / r.time_step));
  for (std::size_t j = 1; j <= snapshots; ++j)
    r.analysis_times.push_back(static_cast<double>(j * per) * r.time_step);
  r.evolution(c.evolution.modes.front()).validate(r.grid);
  return r;
}

}  // namespace atomlaser
