#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <fftw3.h>
#include <json.hpp>

#include "atomlaser/atomlaser.hpp"

namespace fs = std::filesystem;
using namespace atomlaser;

namespace {

enum Exit { ok = 0, validation = 2, numerical = 3, fit = 4 };

struct Options {
  std::string config;
  std::string out;
  std::optional<unsigned> workers;
  std::optional<std::uint64_t> seed;
  bool dry_run = false;
  bool desk = false;
  bool plot = true;
  bool plot_given = false;
  std::size_t stop_after = 0;
  bool json = false;
};

void log(const std::string& s) { std::cerr << "[atomlaser] " << s << std::endl; }

/// Machine-readable failure on stderr, one JSON object per line.
int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"exit_code", code}, {"message", message}}.dump() << std::endl;
  return code;
}

unsigned worker_count(const Options& o) {
  if (o.workers) return std::max(1u, *o.workers);
  if (const char* env = std::getenv("ATOMLASER_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ParameterError("ATOMLASER_WORKERS must be a positive integer");
    return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

nlohmann::json versions() {
  return {{"atomlaser", std::string(atomlaser::version)},
          {"fftw", std::string(fftw_version)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", std::string(CLI11_VERSION)},
          {"compiler", std::string(__VERSION__)}};
}

ExperimentConfig load(const Options& o) {
  ExperimentConfig c = load_config(o.config, o.desk);
  if (o.seed) c.ensemble.seed = *o.seed;
  if (o.plot_given) c.output.plots = o.plot;
  worker_count(o);  // reject a bad ATOMLASER_WORKERS before any work, dry runs included
  return c;
}

void print_derived(const ResolvedExperiment& r, bool as_json) {
  auto j = output::derived_json(r);
  j["config_hash"] = r.hash;
  j["name"] = r.config.name;
  j["modes"] = nlohmann::json::array();
  for (Mode m : r.config.evolution.modes) j["modes"].push_back(mode_name(m));
  j["trajectories"] = r.config.ensemble.trajectories;
  j["analysis_times"] = r.analysis_times.size();
  if (as_json) {
    std::cout << j.dump(2) << std::endl;
    return;
  }
  const OscillatorUnits u(r.params);
  std::printf("config            %s (hash %s)\n", r.config.name.c_str(), r.hash.c_str());
  std::printf("mu (Thomas-Fermi) %.6e J  (%.4f hbar w)\n", r.mu_tf, r.mu_tf / u.energy);
  std::printf("dE                %.6e J  (2 dE = %.6e J, %.4f Hz)\n", r.delta_e, 2.0 * r.delta_e,
              2.0 * r.delta_e / (2.0 * pi * hbar));
  std::printf("k_peak            %.6e 1/m\n", r.k_peak);
  std::printf("Rabi |Omega|      %.6e rad/s\n", std::abs(r.params.rabi));
  std::printf("time step         %.6e s  (%zu steps)\n", r.time_step,
              r.evolution(Mode::semiclassical).steps());
  for (int a = 0; a < r.grid.dimension(); ++a)
    std::printf("domain axis %d     %.6e m from %.6e m, %zu points\n", a, r.grid.extent(a),
                r.grid.origin(a), r.grid.points(a));
  std::printf("analysis times    %zu\n", r.analysis_times.size());
}

bool fit_failed(const ExperimentOutcome& out) {
  for (const auto& m : out.modes)
    if (!m.analysis_error.empty() || m.records.empty() || !m.records.back().fit_ok) return true;
  return out.setup.grid.dimension() == 2 && !out.arc;
}

fs::path checkpoint_path(const fs::path& dir, Mode m) {
  return dir / (std::string("checkpoint_") + mode_name(m) + ".bin");
}

int finish_run(const ExperimentOutcome& out, const fs::path& dir, double wall, unsigned workers,
               const std::string& started) {
  nlohmann::json meta;
  meta["name"] = out.setup.config.name;
  meta["config_hash"] = out.setup.hash;
  meta["seed"] = out.setup.config.ensemble.seed;
  meta["versions"] = versions();
  meta["started_utc"] = started;
  meta["wall_time_s"] = wall;
  meta["workers"] = workers;
  meta["derived"] = output::derived_json(out.setup);
  meta["chemical_potential_J"] = out.chemical_potential;
  meta["ground_state_iterations"] = out.ground_state_iterations;
  meta["detuning_rad_s"] = out.setup.params.detuning.value_or(0.0);
  meta["linewidth_convention"] =
      "2w of A exp(-((k-kc)/w)^2) (1/e full width); sigma_k = w/sqrt(2) in the exp(-x^2/2s^2) form";
  meta["files"] = nlohmann::json::array();
  auto emit = [&](const std::string& name, const std::string& content) {
    output::write_file(dir / name, content);
    meta["files"].push_back(name);
  };

  for (const auto& m : out.modes) {
    nlohmann::json mj{{"mode", mode_name(m.mode)},
                      {"planned", m.series.planned},
                      {"folded", m.series.folded},
                      {"excluded", m.series.excluded},
                      {"complete", m.complete}};
    if (m.plateau) mj["plateau_J"] = *m.plateau;
    if (!m.analysis_error.empty()) mj["analysis_error"] = m.analysis_error;
    meta["modes"].push_back(mj);
  }
  if (!out.complete()) {
    meta["status"] = "incomplete";
    output::write_file(dir / "metadata.json", meta.dump(2) + "\n");
    log("stopped with a checkpoint; continue with: atomlaser resume --out " + dir.string());
    return ok;
  }

  for (const auto& m : out.modes) {
    const std::string tag = mode_name(m.mode);
    emit("linewidth_" + tag + ".csv", output::linewidth_csv(out, m));
    emit("spectra_" + tag + ".csv", output::spectra_csv(out, m));
    emit("spectra_" + tag + ".bin", output::spectra_binary(out, m));
  }
  if (out.arc) {
    emit("arc.csv", output::arc_csv(out));
    meta["arc"] = {{"peak_radius_per_m", out.arc->peak_radius},
                   {"predicted_radius_per_m", out.arc->predicted_radius},
                   {"snr", out.arc->snr},
                   {"angular_maxima", out.arc->angular_maxima}};
  }
  if (out.setup.config.output.plots) {
    emit("linewidth.svg", output::linewidth_plot(out));
    emit("spectrum.svg", output::spectrum_plot(out));
    if (out.setup.grid.dimension() == 2) emit("momentum_density.svg", output::density_plot(out));
  }
  const bool failed = fit_failed(out);
  meta["status"] = failed ? "fit_failure" : "ok";
  output::write_file(dir / "metadata.json", meta.dump(2) + "\n");
  for (const auto& m : out.modes)
    if (m.plateau) log(std::string(mode_name(m.mode)) + " plateau " + output::num(*m.plateau) + " J");
  if (failed) return fail(fit, "fit", "linewidth fit failed; data written to " + dir.string());
  log("done in " + output::num(wall) + " s, artifacts in " + dir.string());
  return ok;
}

int execute(ResolvedExperiment setup, const fs::path& dir, const Options& o,
            std::map<Mode, SpectrumSeries> resume) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  RunControl rc;
  rc.workers = worker_count(o);
  rc.max_new_trajectories = o.stop_after;
  rc.resume = std::move(resume);
  rc.log = log;
  rc.checkpoint = [&](const SpectrumSeries& s) { save_checkpoint(checkpoint_path(dir, s.mode), s); };
  log("running " + setup.config.name + " with " + std::to_string(rc.workers) + " worker(s)");
  const auto out = run_experiment(std::move(setup), rc);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return finish_run(out, dir, wall, rc.workers, started);
}

fs::path output_dir(const Options& o, const ExperimentConfig& c) {
  fs::path dir = o.out.empty() ? fs::path("out") / c.name : fs::path(o.out);
  fs::create_directories(dir);
  return dir;
}

int cmd_run(const Options& o) {
  const ExperimentConfig c = load(o);
  const auto setup = resolve(c);
  if (o.dry_run) {
    print_derived(setup, o.json);
    return ok;
  }
  const fs::path dir = output_dir(o, c);
  for (Mode m : {Mode::semiclassical, Mode::wigner}) fs::remove(checkpoint_path(dir, m));
  auto stored = to_json(c);
  stored["config_hash"] = setup.hash;
  output::write_file(dir / "config.json", stored.dump(2) + "\n");
  return execute(setup, dir, o, {});
}

int cmd_resume(const Options& o) {
  if (o.out.empty()) throw ParameterError("resume needs --out pointing at an earlier run");
  const fs::path dir(o.out);
  auto stored = read_json_file(dir / "config.json");
  const std::string recorded = stored.value("config_hash", "");
  stored.erase("config_hash");
  ExperimentConfig c = config_from_json(stored);
  if (o.plot_given) c.output.plots = o.plot;
  const auto setup = resolve(c);
  if (setup.hash != recorded)
    throw CheckpointError("resume refused: config.json hash " + setup.hash + " differs from recorded " + recorded);
  std::map<Mode, SpectrumSeries> resume;
  for (Mode m : c.evolution.modes)
    if (fs::exists(checkpoint_path(dir, m))) resume[m] = load_checkpoint(checkpoint_path(dir, m));
  if (resume.empty()) throw CheckpointError("no checkpoint found in " + dir.string());
  return execute(setup, dir, o, std::move(resume));
}

int cmd_theory(const Options& o) {
  const ExperimentConfig c = load(o);
  const auto& p = c.physics;
  nlohmann::json j;
  j["config"] = c.name;
  j["atom_number"] = p.atom_number;
  for (int d = 1; d <= 3; ++d) {
    nlohmann::json e;
    try {
      e["chemical_potential_J"] = chemical_potential(p, d, p.atom_number);
      e["phase_diffusion_dE_J"] = phase_diffusion_limit(p, d, p.atom_number);
      e["theory_bar_2dE_J"] = 2.0 * phase_diffusion_limit(p, d, p.atom_number);
      e["theory_bar_2dE_squeezed_J"] = 2.0 * phase_diffusion_limit(p, d, p.atom_number) *
                                       squeezed_linewidth_factor(p.atom_number, p.squeeze_r, p.squeeze_theta);
      e["predicted_peak_k_per_m"] = predicted_peak_momentum(p, e["chemical_potential_J"].get<double>());
    } catch (const ParameterError& err) {
      e["unavailable"] = err.what();
    }
    j[std::to_string(d) + "d"] = e;
  }
  const auto stats = squeezed_number_stats(std::sqrt(p.atom_number), p.squeeze_r, p.squeeze_theta);
  j["number_mean"] = stats.mean;
  j["number_variance"] = stats.variance;
  if (o.json) {
    std::cout << j.dump(2) << std::endl;
    return ok;
  }
  std::printf("%s, N = %.6g, squeeze r = %.4g\n", c.name.c_str(), p.atom_number, p.squeeze_r);
  for (int d = 1; d <= 3; ++d) {
    const auto& e = j[std::to_string(d) + "d"];
    if (e.contains("unavailable")) {
      std::printf("%dD: %s\n", d, e["unavailable"].get<std::string>().c_str());
      continue;
    }
    std::printf("%dD: mu = %.6e J, dE = %.6e J, 2dE = %.6e J (squeezed %.6e J), k_peak = %.6e 1/m\n", d,
                e["chemical_potential_J"].get<double>(), e["phase_diffusion_dE_J"].get<double>(),
                e["theory_bar_2dE_J"].get<double>(), e["theory_bar_2dE_squeezed_J"].get<double>(),
                e["predicted_peak_k_per_m"].get<double>());
  }
  std::printf("number statistics: mean %.6g, variance %.6g\n", stats.mean, stats.variance);
  return ok;
}

int cmd_sweep(const Options& o) {
  const ExperimentConfig c = load(o);
  if (!c.sweep) throw ParameterError("configuration has no 'sweep' section");
  if (o.dry_run) {
    for (double r : c.sweep->parameter == "atom_number" ? c.sweep->squeeze_r_series
                                                        : std::vector<double>{c.physics.squeeze_r})
      for (std::size_t i = 0; i < c.sweep->values.size(); ++i) {
        print_derived(resolve(sweep_point_config(c, i, r)), o.json);
        if (!o.json) std::printf("\n");
      }
    return ok;
  }
  const fs::path dir = output_dir(o, c);
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  RunControl rc;
  rc.workers = worker_count(o);
  rc.log = log;
  auto stored = to_json(c);
  stored["config_hash"] = config_hash(c);
  output::write_file(dir / "config.json", stored.dump(2) + "\n");
  const auto sweeps = run_sweep(c, rc);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  bool failed = false;
  std::vector<std::string> notes{"parameter: " + c.sweep->parameter};
  nlohmann::json meta;
  for (const auto& s : sweeps) {
    nlohmann::json sj{{"squeeze_r", s.squeeze_r}};
    if (s.scaling) {
      notes.push_back("r " + output::num(s.squeeze_r) + ": exponent " + output::num(s.scaling->exponent) +
                      " (95% CI " + output::num(s.scaling->ci_low) + " .. " + output::num(s.scaling->ci_high) +
                      "), prefactor " + output::num(s.scaling->prefactor) + " J");
      sj["exponent"] = s.scaling->exponent;
      sj["exponent_ci95"] = {s.scaling->ci_low, s.scaling->ci_high};
      sj["prefactor_J"] = s.scaling->prefactor;
    } else if (!s.scaling_error.empty()) {
      sj["scaling_error"] = s.scaling_error;
      failed = true;
    }
    for (const auto& p : s.points) failed = failed || !p.ok;
    meta["series"].push_back(sj);
  }
  std::string csv = output::csv_header(
      "linewidth plateau sweep", config_hash(c), notes,
      {{"squeeze_r", "1"}, {"atom_number", "1"}, {"value", "1"},
       {"plateau_J", "J"}, {"theory_2dE_J", "J"}, {"ratio", "1"}, {"ok", "bool"}, {"point_hash", "hex"}});
  for (const auto& s : sweeps)
    for (const auto& p : s.points)
      csv += output::num(p.squeeze_r) + "," + output::num(p.atom_number) + "," + output::num(p.value) + "," +
             output::num(p.plateau) + "," + output::num(p.theory_limit) + "," +
             output::num(p.ok ? p.plateau / p.theory_limit : 0.0) + "," + (p.ok ? "1" : "0") + "," + p.hash + "\n";
  output::write_file(dir / "sweep.csv", csv);
  meta["files"] = {"config.json", "sweep.csv"};
  if (c.output.plots) {
    output::write_file(dir / "plateau_vs_N.svg", output::sweep_plot(c.name, sweeps, c.sweep->parameter));
    meta["files"].push_back("plateau_vs_N.svg");
  }
  meta["name"] = c.name;
  meta["config_hash"] = config_hash(c);
  meta["seed"] = c.ensemble.seed;
  meta["versions"] = versions();
  meta["started_utc"] = started;
  meta["wall_time_s"] = wall;
  meta["workers"] = rc.workers;
  meta["status"] = failed ? "fit_failure" : "ok";
  output::write_file(dir / "metadata.json", meta.dump(2) + "\n");
  if (failed) return fail(fit, "fit", "a sweep point or the scaling fit failed; data written to " + dir.string());
  log("sweep done in " + output::num(wall) + " s, artifacts in " + dir.string());
  return ok;
}

void common(CLI::App* sub, Options& o, bool needs_config) {
  if (needs_config) sub->add_option("--config", o.config, "configuration file or preset name")->required();
  sub->add_option("--out", o.out, "output directory (default out/<name>)");
  sub->add_option("--workers", o.workers, "worker threads (default $ATOMLASER_WORKERS or all cores)");
  sub->add_option("--seed", o.seed, "override the master seed");
  sub->add_flag("--dry-run", o.dry_run, "validate and print derived quantities only");
  sub->add_flag("--desk", o.desk, "apply the configuration's reduced-scale 'desk' variant");
  sub->add_flag("--plot,!--no-plot", o.plot, "write SVG plots")->each([&o](const std::string&) { o.plot_given = true; });
  sub->add_flag("--json", o.json, "print derived quantities as JSON");
  sub->add_option("--stop-after", o.stop_after, "fold at most this many trajectories per mode, then checkpoint and stop");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Atom laser linewidth simulator"};
  app.require_subcommand(1);
  Options o;
  auto* run = app.add_subcommand("run", "ground state, ensembles and linewidth analysis for one configuration");
  auto* theory = app.add_subcommand("theory", "print the Thomas-Fermi and phase-diffusion predictions");
  auto* resume = app.add_subcommand("resume", "continue an interrupted run from its checkpoints");
  auto* sweep = app.add_subcommand("sweep", "plateau linewidth over a list of N or r");
  common(run, o, true);
  common(theory, o, true);
  common(resume, o, false);
  common(sweep, o, true);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : validation;
  }
  try {
    if (*run) return cmd_run(o);
    if (*theory) return cmd_theory(o);
    if (*resume) return cmd_resume(o);
    return cmd_sweep(o);
  } catch (const ParameterError& e) {
    return fail(validation, "validation", e.what());
  } catch (const CheckpointError& e) {
    return fail(validation, "checkpoint", e.what());
  } catch (const IntegrationError& e) {
    return fail(numerical, "integration", e.what());
  } catch (const ConvergenceError& e) {
    return fail(numerical, "convergence", e.what());
  } catch (const FitError& e) {
    return fail(fit, "fit", e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(validation, "io", e.what());
  } catch (const std::exception& e) {
    return fail(1, "internal", e.what());
  }
}
