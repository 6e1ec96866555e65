#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "atomlaser/config.hpp"
#include "atomlaser/experiment.hpp"

using namespace atomlaser;
using nlohmann::json;

namespace {

json minimal() {
  return json::parse(R"({
    "name": "t",
    "dimension": 1,
    "physics": {"mass_kg": 1.443e-25, "trap_frequency_rad_s": 250, "atom_number": 1e4,
                "scattering_length_m": 5e-9, "transverse_area_m2": 1.2e-11,
                "kick_wavenumber_per_m": 1.2e6},
    "grid": {"points": [512]},
    "evolution": {"total_time_s": 0.02, "snapshot_interval_s": 0.01},
    "desk": {"physics": {"atom_number": 2e3}, "ensemble": {"trajectories": 3}}
  })");
}

}  // namespace

TEST(Config, ParsesMinimalDocument) {
  const auto c = config_from_json(minimal());
  EXPECT_EQ(c.name, "t");
  EXPECT_EQ(c.dimension, 1);
  EXPECT_EQ(c.physics.a11, 5e-9);
  EXPECT_EQ(c.physics.a12, 5e-9);
  EXPECT_FALSE(c.rabi_frequency.has_value());
  ASSERT_EQ(c.evolution.modes.size(), 1u);
  EXPECT_EQ(c.ensemble.trajectories, 1u);
  EXPECT_EQ(c.analysis.window_scale, 5.0);
}

TEST(Config, DeskPatchApplies) {
  const auto c = config_from_json(minimal(), true);
  EXPECT_EQ(c.physics.atom_number, 2e3);
  EXPECT_EQ(c.ensemble.trajectories, 3u);
  auto doc = minimal();
  doc.erase("desk");
  EXPECT_THROW(config_from_json(doc, true), ParameterError);
}

TEST(Config, RejectsUnknownKeys) {
  auto doc = minimal();
  doc["physics"]["mass"] = 1.0;
  EXPECT_THROW(config_from_json(doc), ParameterError);
  doc = minimal();
  doc["extra"] = 1;
  EXPECT_THROW(config_from_json(doc), ParameterError);
}

TEST(Config, ValidatesValues) {
  auto bad = [](auto edit) {
    auto doc = minimal();
    edit(doc);
    return doc;
  };
  EXPECT_THROW(config_from_json(bad([](json& d) { d["physics"]["mass_kg"] = -1; })), ParameterError);
  EXPECT_THROW(config_from_json(bad([](json& d) { d["physics"]["atom_number"] = 0; })), ParameterError);
  EXPECT_THROW(config_from_json(bad([](json& d) { d["dimension"] = 3; })), ParameterError);
  EXPECT_THROW(config_from_json(bad([](json& d) { d["grid"]["points"] = {512, 512}; })), ParameterError);
  EXPECT_THROW(config_from_json(bad([](json& d) { d["evolution"]["total_time_s"] = 0.025; })),
               ParameterError);
  EXPECT_THROW(config_from_json(bad([](json& d) { d["evolution"]["time_step_s"] = 3e-3; })),
               ParameterError);
  EXPECT_THROW(config_from_json(bad([](json& d) { d["evolution"]["modes"] = {"quantum"}; })),
               ParameterError);
  EXPECT_THROW(config_from_json(bad([](json& d) { d["physics"].erase("transverse_area_m2"); })),
               ParameterError);
  EXPECT_THROW(config_from_json(bad([](json& d) { d["analysis"]["min_r_squared"] = 2; })),
               ParameterError);
  EXPECT_THROW(config_from_json(json::array()), ParameterError);
}

TEST(Config, CanonicalFormRoundTrips) {
  const auto c = config_from_json(minimal(), true);
  const auto again = config_from_json(to_json(c));
  EXPECT_EQ(to_json(again), to_json(c));
  EXPECT_EQ(config_hash(again), config_hash(c));
}

TEST(Config, HashTracksPhysicsButNotOutput) {
  const auto base = config_from_json(minimal());
  auto doc = minimal();
  doc["output"]["plots"] = false;
  EXPECT_EQ(config_hash(config_from_json(doc)), config_hash(base));
  doc["physics"]["atom_number"] = 1.0001e4;
  EXPECT_NE(config_hash(config_from_json(doc)), config_hash(base));
  EXPECT_EQ(config_hash(base).size(), 16u);
}

TEST(Config, ReadsCommentedJsonFiles) {
  const auto path = std::filesystem::temp_directory_path() / "atomlaser_cfg_test.json";
  {
    std::ofstream out(path);
    out << "// leading comment\n" << minimal().dump(2) << "\n";
  }
  EXPECT_EQ(load_config(path.string()).name, "t");
  std::filesystem::remove(path);
  EXPECT_THROW(find_config("no-such-preset"), ParameterError);
}

TEST(Config, ResolveDerivesDefaults) {
  const auto c = config_from_json(minimal());
  const auto r = resolve(c);
  EXPECT_GT(std::abs(r.params.rabi), 0.0);
  EXPECT_DOUBLE_EQ(std::abs(r.params.rabi), weak_outcoupling_rabi(r.params, r.mu_tf, 0.02));
  EXPECT_EQ(r.analysis_times.size(), 2u);
  EXPECT_NEAR(r.analysis_times.back(), 0.02, 1e-12);
  const double per = 0.01 / r.time_step;
  EXPECT_NEAR(per, std::round(per), 1e-9);
  EXPECT_LE(r.time_step, default_time_step(r.params, r.grid, r.mu_tf) * (1 + 1e-12));
  EXPECT_LT(r.grid.origin(0), 0.0);
  EXPECT_GT(r.grid.origin(0) + r.grid.extent(0), 0.0);
  EXPECT_DOUBLE_EQ(r.delta_e, phase_diffusion_limit(r.params, 1, 1e4));
}

TEST(Config, ResolveRejectsBoxWithoutCondensate) {
  auto doc = minimal();
  doc["grid"]["extent_m"] = {1e-4};
  doc["grid"]["origin_m"] = {1e-5};
  EXPECT_THROW(resolve(config_from_json(doc)), ParameterError);
}

TEST(Config, WeakOutcouplingFormula) {
  PhysicalParams p;
  p.mass = 1.443e-25;
  p.trap_frequency = 250;
  p.kick = 1e7;
  const double mu = 1e-30;
  const double radius = std::sqrt(2 * mu / (p.mass * 250.0 * 250.0));
  const double v = hbar * predicted_peak_momentum(p, mu) / p.mass;
  EXPECT_DOUBLE_EQ(weak_outcoupling_rabi(p, mu, 0.1, 0.2), std::sqrt(0.2 / (2 * radius / v * 0.1)));
}

class Preset : public ::testing::TestWithParam<std::string> {};

TEST_P(Preset, FullAndDeskResolve) {
  for (bool desk : {false, true}) {
    const auto c = load_config(GetParam(), desk);
    if (c.sweep) {
      for (double r : c.sweep->squeeze_r_series)
        for (std::size_t i = 0; i < c.sweep->values.size(); ++i) {
          const auto pc = sweep_point_config(c, i, r);
          EXPECT_NO_THROW(resolve(pc)) << GetParam() << " point " << i;
        }
    } else {
      EXPECT_NO_THROW(resolve(c)) << GetParam() << (desk ? " desk" : "");
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Shipped, Preset,
                         ::testing::Values("fig2", "fig3", "fig4", "fig5", "fig6", "fig8",
                                           "fig9-sweep"),
                         [](const auto& info) {
                           std::string s = info.param;
                           for (auto& ch : s)
                             if (ch == '-') ch = '_';
                           return s;
                         });
