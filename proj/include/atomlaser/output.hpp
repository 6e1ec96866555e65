#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "analysis.hpp"
#include "experiment.hpp"
#include "svg.hpp"

// Artifact writers. CSV tables start with '#' comment lines carrying the
// config hash and column units; spectra also go to a binary container.

namespace atomlaser::output {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("failed writing " + path.string());
}

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct Column {
  std::string name;
  std::string unit;
};

inline std::string csv_header(const std::string& title, const std::string& hash,
                              const std::vector<std::string>& notes, const std::vector<Column>& cols) {
  std::string o = "# " + title + "\n# config_hash: " + hash + "\n";
  for (const auto& n : notes) o += "# " + n + "\n";
  o += "# units:";
  for (const auto& c : cols) o += " " + c.name + " [" + c.unit + "]";
  o += "\n";
  for (std::size_t i = 0; i < cols.size(); ++i) o += (i ? "," : "") + cols[i].name;
  return o + "\n";
}

inline std::string linewidth_csv(const ExperimentOutcome& out, const ModeOutcome& m) {
  std::vector<Column> cols{{"time_s", "s"},
                           {"center_k", "1/m"},
                           {"width_w", "1/m"},
                           {"linewidth_k", "1/m"},
                           {"linewidth_J", "J"},
                           {"linewidth_Hz", "Hz"},
                           {"sigma_k", "1/m"},
                           {"r_squared", "1"},
                           {"theory_2dE_J", "J"},
                           {"theory_2dE_squeezed_J", "J"},
                           {"window_lo", "1/m"},
                           {"window_hi", "1/m"},
                           {"fit_ok", "bool"}};
  std::vector<std::string> notes{
      std::string("mode: ") + mode_name(m.mode),
      "trajectories folded: " + std::to_string(m.series.folded),
      "linewidth = 2w, the full width at 1/e of A exp(-((k-kc)/w)^2); sigma_k = w/sqrt(2)",
  };
  if (m.plateau) notes.push_back("plateau_J: " + num(*m.plateau));
  if (!m.analysis_error.empty()) notes.push_back("analysis error: " + m.analysis_error);
  std::string o = csv_header("linewidth time series", out.setup.hash, notes, cols);
  for (const auto& r : m.records) {
    o += num(r.time) + "," + num(r.center) + "," + num(r.width) + "," + num(r.linewidth_k) + "," +
         num(r.linewidth_energy) + "," + num(r.linewidth_energy / (2.0 * pi * hbar)) + "," +
         num(r.sigma_k) + "," + num(r.r_squared) + "," + num(r.theory_limit) + "," +
         num(r.theory_limit_squeezed) + "," + num(r.window.lo) + "," + num(r.window.hi) + "," +
         (r.fit_ok ? "1" : "0") + "\n";
  }
  return o;
}

/// 1D: the full spectrum per time. 2D: the longitudinal cut per time.
inline std::string spectra_csv(const ExperimentOutcome& out, const ModeOutcome& m) {
  const auto& s = m.series;
  const Grid& g = s.grid;
  std::vector<Profile> value, err;
  for (std::size_t t = 0; t < s.times.size(); ++t) {
    const auto f = s.finalize(t);
    if (g.dimension() == 1) {
      value.push_back(sorted_profile(g.k(0), f.value));
      err.push_back(sorted_profile(g.k(0), f.stderr));
    } else {
      value.push_back(longitudinal_cut(f.value, g, out.setup.params.kick_direction));
      err.push_back(longitudinal_cut(f.stderr, g, out.setup.params.kick_direction));
    }
  }
  const std::string unit = g.dimension() == 1 ? "m" : "m^2";
  std::vector<Column> cols{{"k", "1/m"}};
  for (std::size_t t = 0; t < s.times.size(); ++t) {
    cols.push_back({"S_t" + std::to_string(t), unit});
    cols.push_back({"SE_t" + std::to_string(t), unit});
  }
  std::vector<std::string> notes{std::string("mode: ") + mode_name(m.mode),
                                 "S = <|psi2(k)|^2> per unit wavenumber volume, vacuum subtracted in "
                                 "wigner mode; SE = standard error",
                                 g.dimension() == 1 ? "layout: full 1D spectrum"
                                                    : "layout: cut along the kick direction through k = 0"};
  std::string times = "times_s:";
  for (double t : s.times) times += " " + num(t);
  notes.push_back(times);
  std::string o = csv_header("momentum spectra", out.setup.hash, notes, cols);
  const std::size_t rows = value.empty() ? 0 : value.front().k.size();
  for (std::size_t i = 0; i < rows; ++i) {
    o += num(value.front().k[i]);
    for (std::size_t t = 0; t < value.size(); ++t) o += "," + num(value[t].value[i]) + "," + num(err[t].value[i]);
    o += "\n";
  }
  return o;
}

/// "ATLSSPEC", u32 version, u64 header length, JSON header (shape, axes,
/// times, units, config hash), then f64 values [time][bin] in FFT order
/// followed by f64 standard errors in the same layout.
inline std::string spectra_binary(const ExperimentOutcome& out, const ModeOutcome& m) {
  const auto& s = m.series;
  nlohmann::json h;
  h["format"] = "atomlaser spectra";
  h["config_hash"] = out.setup.hash;
  h["mode"] = mode_name(m.mode);
  h["dimension"] = s.grid.dimension();
  h["shape"] = nlohmann::json::array();
  for (int a = 0; a < s.grid.dimension(); ++a) {
    h["shape"].push_back(s.grid.points(a));
    h["k_axes_per_m"].push_back(s.grid.k(a));
  }
  h["order"] = "row-major, last axis fastest, FFT order on every axis";
  h["times_s"] = s.times;
  h["value_unit"] = s.grid.dimension() == 1 ? "m" : "m^2";
  h["trajectories"] = s.folded;
  h["blocks"] = {"value", "stderr"};
  const std::string header = h.dump();
  detail::ByteWriter w;
  w.put_bytes("ATLSSPEC");
  w.put(std::uint32_t{1});
  w.put(static_cast<std::uint64_t>(header.size()));
  w.put_bytes(header);
  std::vector<FinalSpectrum> fs;
  for (std::size_t t = 0; t < s.times.size(); ++t) fs.push_back(s.finalize(t));
  for (const auto& f : fs)
    for (double v : f.value) w.put(v);
  for (const auto& f : fs)
    for (double v : f.stderr) w.put(v);
  return w.bytes();
}

inline std::string arc_csv(const ExperimentOutcome& out) {
  const auto& a = *out.arc;
  std::vector<std::string> notes{"peak_radius_per_m: " + num(a.peak_radius),
                                 "predicted_radius_per_m: " + num(a.predicted_radius),
                                 "shell_snr: " + num(a.snr),
                                 "angular_maxima: " + std::to_string(a.angular_maxima)};
  std::string o = csv_header("radial shell histogram of the final 2D spectrum", out.setup.hash, notes,
                             {{"shell_radius", "1/m"}, {"atoms", "1"}});
  for (std::size_t i = 0; i < a.shell_radius.size(); ++i)
    o += num(a.shell_radius[i]) + "," + num(a.shell_weight[i]) + "\n";
  return o;
}

inline nlohmann::json derived_json(const ResolvedExperiment& r) {
  return {{"thomas_fermi_chemical_potential_J", r.mu_tf},
          {"phase_diffusion_dE_J", r.delta_e},
          {"theory_bar_2dE_J", 2.0 * r.delta_e},
          {"predicted_peak_k_per_m", r.k_peak},
          {"rabi_frequency_rad_s", std::abs(r.params.rabi)},
          {"time_step_s", r.time_step},
          {"steps", r.evolution(Mode::semiclassical).steps()},
          {"domain_extent_m", [&] {
             std::vector<double> e;
             for (int a = 0; a < r.grid.dimension(); ++a) e.push_back(r.grid.extent(a));
             return e;
           }()},
          {"domain_origin_m", [&] {
             std::vector<double> e;
             for (int a = 0; a < r.grid.dimension(); ++a) e.push_back(r.grid.origin(a));
             return e;
           }()}};
}

// ---------------------------------------------------------------------------
// Plots

inline std::string linewidth_plot(const ExperimentOutcome& out) {
  svg::Plot plot(out.setup.config.name + ": linewidth", "time (s)", "linewidth (J)", true, true);
  for (const auto& m : out.modes) {
    svg::Series s;
    s.label = m.mode == Mode::wigner ? "stochastic" : "semiclassical";
    s.color = m.mode == Mode::wigner ? "#1f77b4" : "#555555";
    s.dashed = m.mode == Mode::semiclassical;
    for (const auto& r : m.records)
      if (r.fit_ok) {
        s.x.push_back(r.time);
        s.y.push_back(r.linewidth_energy);
      }
    plot.add(std::move(s));
  }
  const auto& p = out.setup.params;
  plot.add(svg::HorizontalBar{2.0 * out.setup.delta_e, "#d62728", "2 dE"});
  if (p.squeeze_r != 0.0)
    plot.add(svg::HorizontalBar{
        2.0 * out.setup.delta_e * squeezed_linewidth_factor(p.atom_number, p.squeeze_r, p.squeeze_theta),
        "#ff7f0e", "2 dE squeezed"});
  return plot.render();
}

/// Last spectrum of the last mode with its Gaussian fit.
inline std::string spectrum_plot(const ExperimentOutcome& out) {
  const auto& m = out.modes.back();
  const auto& s = m.series;
  const auto f = s.finalize(s.times.size() - 1);
  Profile prof;
  if (s.grid.dimension() == 1) {
    prof = sorted_profile(s.grid.k(0), f.value);
  } else if (out.arc) {
    prof = out.arc->longitudinal;
  }
  svg::Plot plot(out.setup.config.name + ": spectrum at t = " + svg::fmt(f.time) + " s", "k (1/m)",
                 "power spectrum", false, false);
  if (prof.k.empty()) return plot.render();
  const auto* rec = m.records.empty() ? nullptr : &m.records.back();
  double lo = prof.k.front(), hi = prof.k.back();
  if (rec && rec->window.hi > rec->window.lo) {
    const double span = rec->window.hi - rec->window.lo;
    lo = rec->window.lo - span;
    hi = rec->window.hi + span;
  }
  svg::Series data;
  data.label = m.mode == Mode::wigner ? "stochastic" : "semiclassical";
  for (std::size_t i = 0; i < prof.k.size(); ++i)
    if (prof.k[i] >= lo && prof.k[i] <= hi) {
      data.x.push_back(prof.k[i]);
      data.y.push_back(prof.value[i]);
    }
  plot.add(data);
  if (rec && rec->width > 0.0) {
    svg::Series fit;
    fit.label = "Gaussian fit";
    fit.color = "#d62728";
    fit.dashed = true;
    // The record keeps centre and width only; refit in the same window for A.
    const auto g = fit_in_window(prof, rec->window, 0.0);
    const double amp = g.amplitude;
    for (int i = 0; i <= 400; ++i) {
      const double k = lo + (hi - lo) * i / 400.0;
      const double z = (k - g.center) / g.width;
      fit.x.push_back(k);
      fit.y.push_back(amp * std::exp(-z * z));
    }
    plot.add(fit);
  }
  return plot.render();
}

inline std::string density_plot(const ExperimentOutcome& out) {
  const auto& s = out.modes.back().series;
  const Grid& g = s.grid;
  const auto f = s.finalize(s.times.size() - 1);
  // Reorder from FFT order to ascending k on both axes (rows = kz, cols = kx).
  const std::size_t n0 = g.points(0), n1 = g.points(1);
  std::vector<double> img(n0 * n1);
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j) {
      const std::size_t ci = (i + n0 / 2) % n0, cj = (j + n1 / 2) % n1;
      img[cj * n0 + ci] = std::max(f.value[i * n1 + j], 0.0);
    }
  const double kx0 = -g.k_max(0), kx1 = g.k_max(0) - g.k_spacing(0);
  const double kz0 = -g.k_max(1), kz1 = g.k_max(1) - g.k_spacing(1);
  return svg::density_map(img, n1, n0, kx0, kx1, kz0, kz1,
                          out.setup.config.name + ": momentum density at t = " + svg::fmt(f.time) + " s",
                          "k_x (1/m)", "k_z (1/m)",
                          predicted_peak_momentum(out.setup.params, out.chemical_potential));
}

inline std::string sweep_plot(const std::string& name, const std::vector<SweepSeries>& sweeps,
                              const std::string& parameter) {
  const bool by_n = parameter == "atom_number";
  svg::Plot plot(name + ": linewidth plateau", by_n ? "atom number N" : "squeezing r", "linewidth (J)", by_n,
                 by_n);
  const char* colors[] = {"#1f77b4", "#2ca02c", "#9467bd", "#8c564b"};
  for (std::size_t k = 0; k < sweeps.size(); ++k) {
    svg::Series sim, th;
    sim.color = th.color = colors[k % 4];
    sim.markers = true;
    th.dashed = true;
    sim.label = "stochastic, r = " + svg::fmt(sweeps[k].squeeze_r, "%.3g");
    th.label = "2 dE, r = " + svg::fmt(sweeps[k].squeeze_r, "%.3g");
    for (const auto& p : sweeps[k].points) {
      if (p.ok) {
        sim.x.push_back(p.value);
        sim.y.push_back(p.plateau);
      }
      th.x.push_back(p.value);
      th.y.push_back(p.theory_limit);
    }
    plot.add(sim);
    plot.add(th);
  }
  return plot.render();
}

}  // namespace atomlaser::output
