#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <sstream>

#include "atomlaser/checkpoint.hpp"
#include "atomlaser/experiment.hpp"
#include "atomlaser/output.hpp"
#include "atomlaser/svg.hpp"

using namespace atomlaser;
using nlohmann::json;

namespace {

ExperimentConfig tiny() {
  return config_from_json(json::parse(R"({
    "name": "tiny",
    "dimension": 1,
    "physics": {"mass_kg": 1.443e-25, "trap_frequency_rad_s": 250, "atom_number": 1e4,
                "scattering_length_m": 5e-9, "transverse_area_m2": 1.2e-11,
                "kick_wavenumber_per_m": 1.2e6, "rabi_frequency_rad_s": 10},
    "grid": {"points": [512]},
    "evolution": {"modes": ["semiclassical", "wigner"], "total_time_s": 0.02,
                  "snapshot_interval_s": 0.005},
    "ensemble": {"trajectories": 6, "seed": 5, "checkpoint_every": 2}
  })"));
}

const ExperimentOutcome& shared_outcome() {
  static const ExperimentOutcome out = run_experiment(resolve(tiny()));
  return out;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Experiment, RunsEveryMode) {
  const auto& out = shared_outcome();
  ASSERT_EQ(out.modes.size(), 2u);
  EXPECT_TRUE(out.complete());
  EXPECT_EQ(out.find(Mode::semiclassical)->series.folded, 1u);
  EXPECT_EQ(out.find(Mode::wigner)->series.folded, 6u);
  EXPECT_EQ(out.find(Mode::wigner)->records.size(), 4u);
  EXPECT_GT(out.chemical_potential, 0.0);
  EXPECT_FALSE(out.arc.has_value());
}

TEST(Experiment, CheckpointedResumeMatches) {
  const auto setup = resolve(tiny());
  std::map<Mode, SpectrumSeries> saved;
  RunControl first;
  first.max_new_trajectories = 2;
  int calls = 0;
  first.checkpoint = [&](const SpectrumSeries& s) {
    ++calls;
    saved[s.mode] = deserialize_checkpoint(serialize_checkpoint(s));
  };
  const auto partial = run_experiment(setup, first);
  EXPECT_FALSE(partial.complete());
  EXPECT_GT(calls, 0);
  RunControl second;
  second.resume = saved;
  const auto resumed = run_experiment(setup, second);
  ASSERT_TRUE(resumed.complete());
  const auto& a = resumed.find(Mode::wigner)->series;
  const auto& b = shared_outcome().find(Mode::wigner)->series;
  for (std::size_t t = 0; t < a.times.size(); ++t) EXPECT_EQ(a.finalize(t).value, b.finalize(t).value);
}

TEST(Experiment, ResumeRefusesOtherConfiguration) {
  auto setup = resolve(tiny());
  RunControl first;
  first.max_new_trajectories = 1;
  std::map<Mode, SpectrumSeries> saved;
  first.checkpoint = [&](const SpectrumSeries& s) { saved[s.mode] = s; };
  run_experiment(setup, first);
  auto other = tiny();
  other.physics.atom_number = 2e4;
  RunControl second;
  second.resume = saved;
  EXPECT_THROW(run_experiment(resolve(other), second), CheckpointError);
}

TEST(Output, LinewidthCsvCarriesHashAndUnits) {
  const auto& out = shared_outcome();
  const auto csv = output::linewidth_csv(out, *out.find(Mode::wigner));
  const auto ls = lines(csv);
  ASSERT_GT(ls.size(), 5u);
  EXPECT_EQ(ls[1], "# config_hash: " + out.setup.hash);
  bool units = false;
  std::size_t header = 0;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    if (ls[i].rfind("# units:", 0) == 0) {
      units = true;
      EXPECT_NE(ls[i].find("time_s [s]"), std::string::npos);
      EXPECT_NE(ls[i].find("linewidth_J [J]"), std::string::npos);
    }
    if (!ls[i].empty() && ls[i][0] != '#' && header == 0) header = i;
  }
  EXPECT_TRUE(units);
  EXPECT_EQ(ls[header].rfind("time_s,", 0), 0u);
  EXPECT_EQ(ls.size() - header - 1, 4u);
}

TEST(Output, SpectraCsvHasOneRowPerBin) {
  const auto& out = shared_outcome();
  const auto ls = lines(output::spectra_csv(out, *out.find(Mode::semiclassical)));
  std::size_t data = 0;
  for (const auto& l : ls)
    if (!l.empty() && l[0] != '#') ++data;
  EXPECT_EQ(data, 1 + 512u);
}

TEST(Output, BinarySpectraContainer) {
  const auto& out = shared_outcome();
  const auto& m = *out.find(Mode::wigner);
  const auto bytes = output::spectra_binary(out, m);
  ASSERT_EQ(bytes.substr(0, 8), "ATLSSPEC");
  std::uint32_t version;
  std::uint64_t hlen;
  std::memcpy(&version, bytes.data() + 8, 4);
  std::memcpy(&hlen, bytes.data() + 12, 8);
  EXPECT_EQ(version, 1u);
  const auto h = json::parse(bytes.substr(20, hlen));
  EXPECT_EQ(h.at("config_hash"), out.setup.hash);
  EXPECT_EQ(h.at("shape")[0], 512);
  const std::size_t times = h.at("times_s").size();
  ASSERT_EQ(bytes.size(), 20 + hlen + 2 * times * 512 * sizeof(double));
  double first;
  std::memcpy(&first, bytes.data() + 20 + hlen, sizeof first);
  EXPECT_EQ(first, m.series.finalize(0).value[0]);
}

TEST(Output, DerivedQuantities) {
  const auto setup = resolve(tiny());
  const auto j = output::derived_json(setup);
  EXPECT_DOUBLE_EQ(j.at("theory_bar_2dE_J").get<double>(), 2 * setup.delta_e);
  EXPECT_DOUBLE_EQ(j.at("rabi_frequency_rad_s").get<double>(), 10.0);
  EXPECT_EQ(j.at("domain_extent_m").size(), 1u);
}

TEST(Output, PlotsRender) {
  const auto& out = shared_outcome();
  for (const auto& s : {output::linewidth_plot(out), output::spectrum_plot(out)}) {
    EXPECT_EQ(s.rfind("<svg", 0), 0u);
    EXPECT_NE(s.find("</svg>"), std::string::npos);
  }
  EXPECT_NE(output::linewidth_plot(out).find("2 dE"), std::string::npos);
}

TEST(Svg, LogAxesAndDensityMap) {
  svg::Plot p("t", "x", "y", true, true);
  svg::Series s;
  s.x = {1e-3, 1e-2, 1e-1};
  s.y = {1e2, 1e1, 1e0};
  s.label = "data";
  p.add(s);
  p.add(svg::HorizontalBar{5.0, "#000", "bar"});
  const auto out = p.render();
  EXPECT_NE(out.find("<polyline"), std::string::npos);
  EXPECT_NE(out.find("bar"), std::string::npos);
  const std::vector<double> img{0, 1, 2, 3};
  const auto d = svg::density_map(img, 2, 2, -1, 1, -1, 1, "d", "kx", "kz", 0.5);
  EXPECT_EQ(d.rfind("<svg", 0), 0u);
  EXPECT_GE(std::count_if(d.begin(), d.end(), [](char c) { return c == '<'; }), 6);
}
