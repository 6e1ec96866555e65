#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;  // stdout and stderr interleaved
};

Result cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + ATOMLASER_CLI_PATH + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Small 1D configuration, about twenty seconds per run.
const char* tiny_config = R"({
  "name": "tiny",
  "dimension": 1,
  "physics": {"mass_kg": 1.443e-25, "trap_frequency_rad_s": 250, "atom_number": 1e4,
              "scattering_length_m": 5e-9, "transverse_area_m2": 1.2e-11,
              "kick_wavenumber_per_m": 1.2e6, "rabi_frequency_rad_s": 10},
  "grid": {"points": [512]},
  "evolution": {"modes": ["semiclassical", "wigner"], "total_time_s": 0.02,
                "snapshot_interval_s": 0.005},
  "ensemble": {"trajectories": 4, "seed": 3, "checkpoint_every": 1},
  "desk": {"ensemble": {"trajectories": 2}}
})";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("atomlaser_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    config = dir / "tiny.json";
    std::ofstream(config) << tiny_config;
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir, config;
};

}  // namespace

TEST_F(Cli, DryRunPrintsDerivedQuantities) {
  const auto r = cli("run --config " + config.string() + " --dry-run");
  EXPECT_EQ(r.code, 0) << r.out;
  for (const char* key : {"mu (Thomas-Fermi)", "2 dE", "k_peak", "time step", "domain"})
    EXPECT_NE(r.out.find(key), std::string::npos) << key << "\n" << r.out;
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST_F(Cli, DryRunWorksForEveryPreset) {
  for (const char* p : {"fig2", "fig3", "fig4", "fig5", "fig6", "fig8"}) {
    EXPECT_EQ(cli(std::string("run --config ") + p + " --dry-run").code, 0) << p;
    EXPECT_EQ(cli(std::string("run --config ") + p + " --desk --dry-run").code, 0) << p;
  }
  EXPECT_EQ(cli("sweep --config fig9-sweep --desk --dry-run").code, 0);
}

TEST_F(Cli, TheoryCommand) {
  const auto r = cli("theory --config fig4 --json");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j.at("1d").at("chemical_potential_J").get<double>(), 1.1821956732167704e-29, 1e-40);
}

TEST_F(Cli, ValidationErrorsExitWithTwo) {
  EXPECT_EQ(cli("run --config does-not-exist").code, 2);
  std::ofstream(dir / "bad.json") << R"({"physics": {"mass_kg": -1}})";
  const auto r = cli("run --config " + (dir / "bad.json").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("\"exit_code\":2"), std::string::npos) << r.out;
  EXPECT_EQ(cli("run").code, 2);
  EXPECT_EQ(cli("run --config " + config.string() + " --dry-run", "ATOMLASER_WORKERS=zero").code, 2);
}

TEST_F(Cli, RunWritesArtifactsDeterministically) {
  const auto a = dir / "a", b = dir / "b";
  ASSERT_EQ(cli("run --config " + config.string() + " --out " + a.string() + " --workers 1").code, 0);
  const auto rb = cli("run --config " + config.string() + " --out " + b.string(), "ATOMLASER_WORKERS=2");
  ASSERT_EQ(rb.code, 0) << rb.out;
  for (const char* f : {"linewidth_semiclassical.csv", "linewidth_wigner.csv", "spectra_wigner.csv",
                        "spectra_wigner.bin", "linewidth.svg", "spectrum.svg", "metadata.json",
                        "config.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    if (std::string(f) != "metadata.json") EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto meta = nlohmann::json::parse(slurp(a / "metadata.json"));
  EXPECT_EQ(meta.at("status"), "ok");
  EXPECT_EQ(meta.at("seed"), 3);
  EXPECT_EQ(meta.at("workers"), 1);
  EXPECT_EQ(nlohmann::json::parse(slurp(b / "metadata.json")).at("workers"), 2);
  EXPECT_TRUE(meta.at("versions").contains("fftw"));
  EXPECT_GT(meta.at("wall_time_s").get<double>(), 0.0);
  const auto csv = slurp(a / "linewidth_wigner.csv");
  EXPECT_NE(csv.find("# config_hash: " + meta.at("config_hash").get<std::string>()), std::string::npos);
  EXPECT_NE(csv.find("# units:"), std::string::npos);
}

TEST_F(Cli, SeedOverrideChangesResults) {
  const auto a = dir / "a", b = dir / "b";
  ASSERT_EQ(cli("run --desk --no-plot --config " + config.string() + " --out " + a.string()).code, 0);
  ASSERT_EQ(cli("run --desk --no-plot --config " + config.string() + " --seed 9 --out " + b.string()).code,
            0);
  EXPECT_FALSE(fs::exists(a / "linewidth.svg"));
  EXPECT_NE(slurp(a / "spectra_wigner.csv"), slurp(b / "spectra_wigner.csv"));
}

TEST_F(Cli, StopAndResumeIsBitIdentical) {
  const auto whole = dir / "whole", part = dir / "part";
  ASSERT_EQ(cli("run --config " + config.string() + " --out " + whole.string()).code, 0);
  const auto r1 = cli("run --config " + config.string() + " --out " + part.string() + " --stop-after 1");
  ASSERT_EQ(r1.code, 0) << r1.out;
  EXPECT_EQ(nlohmann::json::parse(slurp(part / "metadata.json")).at("status"), "incomplete");
  EXPECT_TRUE(fs::exists(part / "checkpoint_wigner.bin"));
  const auto r2 = cli("resume --out " + part.string() + " --workers 2");
  ASSERT_EQ(r2.code, 0) << r2.out;
  for (const char* f : {"linewidth_wigner.csv", "spectra_wigner.csv", "spectra_wigner.bin"})
    EXPECT_EQ(slurp(whole / f), slurp(part / f)) << f;
}

TEST_F(Cli, ResumeRefusesTamperedConfig) {
  const auto part = dir / "part";
  ASSERT_EQ(cli("run --config " + config.string() + " --out " + part.string() + " --stop-after 1").code, 0);
  auto cfg = nlohmann::json::parse(slurp(part / "config.json"));
  cfg["physics"]["atom_number"] = 2e4;
  std::ofstream(part / "config.json") << cfg.dump(2);
  const auto r = cli("resume --out " + part.string());
  EXPECT_EQ(r.code, 2) << r.out;

  auto corrupt = slurp(part / "checkpoint_wigner.bin");
  corrupt[corrupt.size() / 2] ^= 0x10;
  cfg["physics"]["atom_number"] = 1e4;
  std::ofstream(part / "config.json") << cfg.dump(2);
  std::ofstream(part / "checkpoint_wigner.bin", std::ios::binary) << corrupt;
  EXPECT_EQ(cli("resume --out " + part.string()).code, 2);
}

TEST_F(Cli, FitFailureExitsWithFourAndKeepsData) {
  auto cfg = nlohmann::json::parse(tiny_config);
  cfg["physics"]["rabi_frequency_rad_s"] = 0.0;
  cfg["evolution"]["modes"] = {"semiclassical"};
  std::ofstream(dir / "dark.json") << cfg.dump();
  const auto out = dir / "dark";
  const auto r = cli("run --config " + (dir / "dark.json").string() + " --out " + out.string());
  EXPECT_EQ(r.code, 4) << r.out;
  EXPECT_TRUE(fs::exists(out / "linewidth_semiclassical.csv"));
  EXPECT_EQ(nlohmann::json::parse(slurp(out / "metadata.json")).at("status"), "fit_failure");
}
