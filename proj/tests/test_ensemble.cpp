#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "atomlaser/checkpoint.hpp"
#include "atomlaser/ensemble.hpp"

using namespace atomlaser;

namespace {

struct Fixture {
  PhysicalParams p;
  Grid g;
  GroundState gs;
  EnsembleSpec spec;
};

// Small 1D system: 128 points, a few oscillator times.
Fixture make(double rabi, Mode mode, std::size_t trajectories, double n = 1e3) {
  Fixture f;
  f.p.mass = 1.443e-25;
  f.p.trap_frequency = 250.0;
  f.p.set_scattering_length(5e-9);
  f.p.transverse_area = 1.2e-11;
  f.p.atom_number = n;
  const double l = OscillatorUnits(f.p).length;
  f.p.kick = 2.0 / l;
  f.p.rabi = rabi;
  f.g = Grid::line(128, 40 * l, -20 * l);
  f.gs = ground_state(f.p, f.g, n);
  f.p.detuning = resonant_detuning(f.p, f.g, f.gs);
  f.spec.trajectories = trajectories;
  f.spec.seed = 2024;
  f.spec.evolution.mode = mode;
  f.spec.evolution.time_step = 0.01 / 250.0;
  f.spec.evolution.total_time = 2.0 / 250.0;
  f.spec.evolution.snapshot_interval = 1.0 / 250.0;
  f.spec.analysis_times = {1.0 / 250.0, 2.0 / 250.0};
  return f;
}

SpectrumSeries run(const Fixture& f, unsigned workers = 1) {
  EnsembleOptions o;
  o.workers = workers;
  return run_ensemble(f.spec, f.p, f.g, f.gs, o);
}

void expect_identical(const SpectrumSeries& a, const SpectrumSeries& b) {
  ASSERT_EQ(a.times.size(), b.times.size());
  EXPECT_EQ(a.folded, b.folded);
  for (std::size_t t = 0; t < a.times.size(); ++t) {
    const auto fa = a.finalize(t), fb = b.finalize(t);
    EXPECT_EQ(fa.value, fb.value);
    EXPECT_EQ(fa.stderr, fb.stderr);
    EXPECT_EQ(fa.trapped_number, fb.trapped_number);
  }
}

// Two-sided normal quantile for a family-wise level spread over `bins` tests.
double bonferroni_z(double family_p, std::size_t bins) {
  const double target = family_p / static_cast<double>(bins);
  double lo = 0, hi = 10;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (std::erfc(mid / std::sqrt(2.0)) > target ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

TEST(CompensatedSum, RecoversLostDigits) {
  CompensatedSum s;
  s.add(1.0);
  for (int i = 0; i < 1000; ++i) s.add(1e-17);
  EXPECT_EQ(s.value(), 1.0 + 1e-14);  // correctly rounded
}

TEST(Ensemble, VacuumSpectrumIsZero) {
  auto f = make(0.0, Mode::wigner, 400);
  const auto s = run(f);
  const double z = bonferroni_z(0.0027, f.g.size());  // 3 sigma family-wise
  for (std::size_t t = 0; t < s.times.size(); ++t) {
    const auto fin = s.finalize(t);
    for (std::size_t b = 0; b < fin.value.size(); ++b)
      EXPECT_LT(std::abs(fin.value[b]), z * fin.stderr[b]) << "bin " << b;
    EXPECT_NEAR(fin.untrapped_number, 0.0, 1.0);
  }
}

TEST(Ensemble, SingleSemiclassicalTrajectoryMatchesPropagator) {
  auto f = make(30.0, Mode::semiclassical, 1);
  const auto s = run(f);
  std::vector<std::vector<double>> direct;
  evolve(f.gs.fields, f.p, f.g, f.spec.evolution, [&](const Snapshot& snap) {
    std::vector<double> v;
    for (auto c : snap.psi2_k) v.push_back(std::norm(c));
    direct.push_back(v);
  });
  ASSERT_EQ(direct.size(), 3u);
  EXPECT_EQ(s.finalize(0).value, direct[1]);
  EXPECT_EQ(s.finalize(1).value, direct[2]);
  for (double e : s.finalize(1).stderr) EXPECT_EQ(e, 0.0);
}

TEST(Ensemble, WorkerCountDoesNotChangeResults) {
  auto f = make(30.0, Mode::wigner, 12);
  const auto one = run(f, 1);
  expect_identical(one, run(f, 4));
  expect_identical(one, run(f, 3));
}

TEST(Ensemble, ResumeIsBitIdentical) {
  auto f = make(30.0, Mode::wigner, 10);
  const auto whole = run(f);
  SpectrumSeries part;
  EnsembleOptions o;
  o.max_new_trajectories = 4;
  run_ensemble(part, f.spec, f.p, f.g, f.gs, o);
  EXPECT_EQ(part.done(), 4u);
  auto restored = deserialize_checkpoint(serialize_checkpoint(part));
  o.max_new_trajectories = 0;
  o.workers = 2;
  run_ensemble(restored, f.spec, f.p, f.g, f.gs, o);
  expect_identical(whole, restored);
}

TEST(Ensemble, ResumeRefusesDifferentSeedOrGrid) {
  auto f = make(30.0, Mode::wigner, 4);
  SpectrumSeries part;
  EnsembleOptions o;
  o.max_new_trajectories = 1;
  run_ensemble(part, f.spec, f.p, f.g, f.gs, o);
  auto bad_seed = f.spec;
  bad_seed.seed = 7;
  auto copy = part;
  EXPECT_THROW(run_ensemble(copy, bad_seed, f.p, f.g, f.gs), CheckpointError);
  const Grid other = Grid::line(128, f.g.extent(0) * 1.1, f.g.origin(0));
  copy = part;
  EXPECT_THROW(run_ensemble(copy, f.spec, f.p, other, f.gs), CheckpointError);

  part.config_hash = "abc";
  EXPECT_THROW(check_resumable(part, "abd", f.spec.seed, f.g), CheckpointError);
  EXPECT_THROW(check_resumable(part, "abc", 8, f.g), CheckpointError);
  EXPECT_THROW(check_resumable(part, "abc", f.spec.seed, other), CheckpointError);
  EXPECT_NO_THROW(check_resumable(part, "abc", f.spec.seed, f.g));
}

TEST(Ensemble, DoublingTrajectoriesHalvesBinVariance) {
  // Spread of the per-bin mean over 10 seeds, at M and 2M trajectories.
  auto f = make(0.0, Mode::wigner, 8);
  f.spec.evolution.total_time = 0.2 / 250.0;
  f.spec.evolution.snapshot_interval = 0.1 / 250.0;
  f.spec.analysis_times = {0.2 / 250.0};
  auto spread = [&](std::size_t m) {
    f.spec.trajectories = m;
    std::vector<std::vector<double>> means;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      f.spec.seed = seed * 1000;
      means.push_back(run(f).finalize(0).value);
    }
    double total = 0;
    for (std::size_t b = 0; b < f.g.size(); ++b) {
      double mu = 0, var = 0;
      for (const auto& v : means) mu += v[b] / 10.0;
      for (const auto& v : means) var += (v[b] - mu) * (v[b] - mu) / 9.0;
      total += var;
    }
    return total;
  };
  const double ratio = spread(8) / spread(16);
  EXPECT_NEAR(ratio, 2.0, 0.4);
}

TEST(Ensemble, TotalNumberIsConsistent) {
  auto f = make(60.0, Mode::wigner, 32, 1e4);
  const auto s = run(f);
  for (std::size_t t = 0; t < s.times.size(); ++t) {
    const auto fin = s.finalize(t);
    EXPECT_GT(fin.untrapped_number, 10.0);
    EXPECT_NEAR(fin.untrapped_number + fin.trapped_number, 1e4, 0.005 * 1e4);
  }
}

TEST(Ensemble, RejectsAnalysisTimeOffTheSnapshotGrid) {
  auto f = make(30.0, Mode::wigner, 2);
  f.spec.analysis_times = {0.5 / 250.0};
  EXPECT_THROW(run(f), ParameterError);
  f.spec.analysis_times = {};
  EXPECT_THROW(run(f), ParameterError);
}

TEST(Checkpoint, RoundTripPreservesEverything) {
  auto f = make(30.0, Mode::wigner, 6);
  SpectrumSeries part;
  EnsembleOptions o;
  o.max_new_trajectories = 3;
  run_ensemble(part, f.spec, f.p, f.g, f.gs, o);
  part.config_hash = "0123456789abcdef";
  const auto path = std::filesystem::temp_directory_path() / "atomlaser_test_checkpoint.bin";
  save_checkpoint(path, part);
  const auto back = load_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.config_hash, part.config_hash);
  EXPECT_EQ(back.seed, part.seed);
  EXPECT_EQ(back.completed, part.completed);
  EXPECT_TRUE(back.grid == part.grid);
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(part));
}

TEST(Checkpoint, DetectsCorruption) {
  auto f = make(30.0, Mode::semiclassical, 1);
  auto s = run(f);
  auto bytes = serialize_checkpoint(s);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  EXPECT_THROW(deserialize_checkpoint(flipped), CheckpointError);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, 20)), CheckpointError);
  auto wrong_magic = bytes;
  wrong_magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(wrong_magic), CheckpointError);
  EXPECT_THROW(load_checkpoint("/nonexistent/checkpoint.bin"), CheckpointError);
}

TEST(Checkpoint, RejectsOtherVersions) {
  auto f = make(30.0, Mode::semiclassical, 1);
  auto bytes = serialize_checkpoint(run(f));
  std::string body = bytes.substr(0, bytes.size() - 8);
  const std::uint32_t v = checkpoint_version + 1;
  std::memcpy(body.data() + checkpoint_magic.size(), &v, sizeof v);
  const std::uint64_t sum = fnv1a(body);
  body.append(reinterpret_cast<const char*>(&sum), sizeof sum);
  EXPECT_THROW(deserialize_checkpoint(body), CheckpointError);
}

TEST(Checkpoint, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ull);
}
