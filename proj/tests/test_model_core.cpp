#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "atomlaser/grid.hpp"
#include "atomlaser/params.hpp"
#include "atomlaser/theory.hpp"

using namespace atomlaser;

namespace {

// Oracle values below were evaluated once with 40-digit arithmetic from the
// closed forms and frozen here.
constexpr double mu_fig4 = 1.1821956732167704191e-29;         // J
constexpr double delta_e_fig4 = 2.4922873115740738343e-33;    // J
constexpr double delta_e_fig8 = 1.1338826422899051423e-32;    // J
constexpr double delta_e_3d_fig4 = 1.5823724192188797956e-34; // J, finite-difference oracle
constexpr double k_peak_fig4 = 20154768.264990849382;         // 1/m, mu = 1.18e-29 J

PhysicalParams fig4() {
  PhysicalParams p;
  p.mass = 1.443e-25;
  p.trap_frequency = 250.0;
  p.set_scattering_length(1e-9);
  p.transverse_area = 1.2e-11;
  p.transverse_length = 3.46e-6;
  p.atom_number = 1e7;
  p.kick = 1e7;
  return p;
}

PhysicalParams fig8() {
  PhysicalParams p = fig4();
  p.trap_frequency = 2000.0;
  p.set_scattering_length(1e-8);
  return p;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// sqrt(N) dmu/dN by a fourth-order central difference.
double finite_difference_limit(const PhysicalParams& p, int d, double n) {
  const double h = 1e-3 * n;
  const double dmu = (-chemical_potential(p, d, n + 2 * h) + 8 * chemical_potential(p, d, n + h) -
                      8 * chemical_potential(p, d, n - h) + chemical_potential(p, d, n - 2 * h)) /
                     (12 * h);
  return std::sqrt(n) * dmu;
}

}  // namespace

TEST(PhysicalParams, ContactStrengthAndReduction) {
  auto p = fig4();
  const double u = 4 * pi * hbar * hbar * 1e-9 / 1.443e-25;
  EXPECT_DOUBLE_EQ(p.contact_strength(1e-9), u);
  EXPECT_DOUBLE_EQ(p.interaction(1, 1, 1), u / 1.2e-11);
  EXPECT_DOUBLE_EQ(p.interaction(1, 2, 2), u / 3.46e-6);
  EXPECT_DOUBLE_EQ(p.interaction(2, 2, 3), u);
}

TEST(PhysicalParams, ValidationRejectsBadInput) {
  auto p = fig4();
  p.mass = 0;
  EXPECT_THROW(p.validate(1), ParameterError);
  p = fig4();
  p.transverse_area.reset();
  EXPECT_THROW(p.validate(1), ParameterError);
  p = fig4();
  p.a12 = -1e-9;
  EXPECT_THROW(p.validate(1), ParameterError);
  p = fig4();
  p.kick_direction = {1.0, 1.0};
  EXPECT_THROW(p.validate(2), ParameterError);
  EXPECT_NO_THROW(fig4().validate(2));
}

TEST(OscillatorUnits, ScalesAreConsistent) {
  PhysicalParams p = fig4();
  OscillatorUnits u(p);
  EXPECT_NEAR(u.length, 1.7097590473514097e-6, 1e-18);
  EXPECT_DOUBLE_EQ(u.time, 1.0 / 250.0);
  EXPECT_NEAR(u.energy, hbar * 250.0, 1e-40);
  EXPECT_NEAR(u.interaction(p, 1, 1, 1), 4 * pi * 1e-9 * u.length / 1.2e-11, 1e-12);
}

TEST(Grid, FourierPairing) {
  for (auto g : {Grid::line(256, 3e-5, -1e-5), Grid::plane(64, {2e-5, 5e-5}, {-1e-5, -2e-5})}) {
    const int d = g.dimension();
    double lhs = g.volume_element() * g.k_volume_element();
    for (int a = 0; a < d; ++a) lhs *= static_cast<double>(g.points(a));
    EXPECT_NEAR(lhs, std::pow(2 * pi, d), 1e-12 * std::pow(2 * pi, d));
  }
}

TEST(Grid, MomentumLatticeSymmetric) {
  const auto g = Grid::line(64, 1.0, 0.0);
  const auto& k = g.k(0);
  EXPECT_EQ(k[0], 0.0);
  EXPECT_DOUBLE_EQ(k[32], -32 * g.k_spacing(0));
  for (std::size_t j = 1; j < 32; ++j) EXPECT_DOUBLE_EQ(k[j], -k[64 - j]);
  EXPECT_DOUBLE_EQ(g.k_max(0), pi / g.spacing(0));
}

TEST(Grid, RejectsNonPowerOfTwo) {
  EXPECT_THROW(Grid::line(100, 1.0, 0.0), ParameterError);
  EXPECT_THROW(Grid::line(64, 0.0, 0.0), ParameterError);
  EXPECT_THROW(Grid(3, {4, 4}, {1, 1}, {0, 0}), ParameterError);
}

TEST(ChemicalPotential, Fig4Oracle) {
  EXPECT_LT(rel(chemical_potential(fig4(), 1, 1e7), mu_fig4), 1e-12);
}

TEST(ChemicalPotential, OneDimensionalScaling) {
  auto p = fig4();
  EXPECT_NEAR(chemical_potential(p, 1, 8e6) / chemical_potential(p, 1, 1e6), 4.0, 1e-12);
}

TEST(ChemicalPotential, ZeroScatteringLength) {
  auto p = fig4();
  p.set_scattering_length(0.0);
  for (int d = 1; d <= 3; ++d) EXPECT_EQ(chemical_potential(p, d, 1e6), 0.0);
}

TEST(ChemicalPotential, RejectsBadInput) {
  EXPECT_THROW(chemical_potential(fig4(), 4, 1e6), ParameterError);
  EXPECT_THROW(chemical_potential(fig4(), 1, 0.0), ParameterError);
}

TEST(PhaseDiffusion, OneDimensionalOracle) {
  const auto p = fig4();
  EXPECT_LT(rel(phase_diffusion_limit(p, 1, 1e7), delta_e_fig4), 1e-12);
  EXPECT_LT(rel(phase_diffusion_limit(p, 1, 1e7), 2.0 / 3.0 * mu_fig4 / std::sqrt(1e7)), 1e-12);
}

TEST(PhaseDiffusion, TwoDimensionalOracle) {
  const auto p = fig8();
  EXPECT_LT(rel(phase_diffusion_limit(p, 2, 1e7), delta_e_fig8), 1e-12);
  EXPECT_EQ(phase_diffusion_limit(p, 2, 1e5), phase_diffusion_limit(p, 2, 1e7));
}

TEST(PhaseDiffusion, ThreeDimensionalOracle) {
  EXPECT_LT(rel(phase_diffusion_limit(fig4(), 3, 1e7), delta_e_3d_fig4), 1e-12);
}

class FiniteDifference : public ::testing::TestWithParam<int> {};

TEST_P(FiniteDifference, MatchesDerivativeOfChemicalPotential) {
  const int d = GetParam();
  const auto p = fig4();
  for (double lg = 4.0; lg <= 8.0 + 1e-9; lg += 0.25) {
    const double n = std::pow(10.0, lg);
    EXPECT_LT(rel(phase_diffusion_limit(p, d, n), finite_difference_limit(p, d, n)), 1e-6)
        << "d=" << d << " N=" << n;
  }
}

INSTANTIATE_TEST_SUITE_P(Dimensions, FiniteDifference, ::testing::Values(1, 2, 3));

TEST(PhaseDiffusion, ScalingExponents) {
  const auto p = fig4();
  const double s1 = std::log(phase_diffusion_limit(p, 1, 1e8) / phase_diffusion_limit(p, 1, 1e4)) /
                    std::log(1e4);
  const double s3 = std::log(phase_diffusion_limit(p, 3, 1e8) / phase_diffusion_limit(p, 3, 1e4)) /
                    std::log(1e4);
  EXPECT_NEAR(s1, 1.0 / 6.0, 1e-9);
  EXPECT_NEAR(s3, -0.1, 1e-9);
}

TEST(PeakMomentum, Oracles) {
  auto p = fig4();
  EXPECT_LT(rel(predicted_peak_momentum(p, 1.18e-29), k_peak_fig4), 1e-12);
  EXPECT_EQ(predicted_peak_momentum(p, 0.0), p.kick);
  p.kick = 0.0;
  EXPECT_NEAR(predicted_peak_momentum(p, 1e-30), std::sqrt(2 * p.mass * 1e-30) / hbar, 1e-3);
  EXPECT_THROW(predicted_peak_momentum(p, -1.0), ParameterError);
}

TEST(SqueezedStats, SqueezedVacuum) {
  const auto s = squeezed_number_stats({0.0, 0.0}, std::log(2.0), 0.0);
  EXPECT_NEAR(s.mean, 0.5625, 1e-14);
  EXPECT_NEAR(s.variance, 1.7578125, 1e-14);
}

TEST(SqueezedStats, LnTwoQuartersTheVariance) {
  const double n = 1e7;
  const auto s = squeezed_number_stats({std::sqrt(n), 0.0}, std::log(2.0), 0.0);
  EXPECT_NEAR(s.variance, n / 4 + 1.7578125, 1e-6);
  EXPECT_NEAR(squeezed_linewidth_factor(n, std::log(2.0), 0.0), 0.5, 1e-6);
}

TEST(SqueezedStats, ZeroSqueezingIsPoissonian) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int i = 0; i < 100; ++i) {
    const std::complex<double> a{u(rng), u(rng)};
    const auto s = squeezed_number_stats(a, 0.0, u(rng));
    EXPECT_EQ(s.mean, std::norm(a));
    EXPECT_EQ(s.variance, std::norm(a));
  }
}
