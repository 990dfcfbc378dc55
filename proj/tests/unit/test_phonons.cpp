#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <memory>
#include <random>

#include "qdm/error.hpp"
#include "qdm/phonons.hpp"
#include "qdm/units.hpp"
#include "qdm/wavefunctions.hpp"

using namespace qdm;

namespace {

const MaterialParams kMat{};

const AxialBasis& basis() {
  static const AxialBasis b = [] {
    PotentialSpec p;
    p.barrier_width = 7.532;
    return make_axial_basis(p);
  }();
  return b;
}

const SpectralTables& tables() {
  static const SpectralTables t =
      spectral_density_tables(basis(), kMat, SpectralTableOptions{30.0, 2000, 128, 2.0});
  return t;
}

double phi_average(PhononBranch b, double q, double theta) {
  // Trapezoid on a periodic integrand is spectrally accurate.
  const int n = 256;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    s += std::norm(coupling_prefactor(b, q, theta, 2.0 * units::pi * i / n, kMat));
  }
  return s * 2.0 * units::pi / n;
}

// Prefactors rebuilt from the material constants, in meV nm^{3/2}.
struct Prefactors {
  double dp, pe;
};
Prefactors prefactors(double q, double c) {
  const double to_native = 1.0 / (units::meV * std::pow(units::nm, 1.5));
  const double hb2r = units::si::hbar / (2.0 * kMat.density);
  const double qs = q * 1e9, cs = c * 1e3;
  const double dp = std::sqrt(hb2r * qs / cs) * kMat.deformation_potential * units::si::elementary_charge;
  const double pe = std::sqrt(hb2r / (cs * qs)) * kMat.piezo_constant * units::si::elementary_charge /
                    (units::si::vacuum_permittivity * kMat.eps_r);
  return {dp * to_native, pe * to_native};
}

}  // namespace

TEST(Coupling, AngularZeros) {
  const double q = 0.7;
  for (double phi : {0.0, 0.4, 2.0}) {
    const cplx la = coupling_prefactor(PhononBranch::LA, q, 0.0, phi, kMat);
    EXPECT_EQ(la.imag(), 0.0);
    EXPECT_NE(la.real(), 0.0);
    EXPECT_EQ(std::abs(coupling_prefactor(PhononBranch::TA1, q, 0.0, phi, kMat)), 0.0);
    EXPECT_EQ(std::abs(coupling_prefactor(PhononBranch::TA2, q, 0.0, phi, kMat)), 0.0);
  }
  EXPECT_THROW(coupling_prefactor(PhononBranch::LA, 0.0, 0.1, 0.0, kMat), ConfigError);
}

TEST(Coupling, PhiIntegralTA1) {
  for (double theta : {0.3, 0.9, 1.4, 2.5}) {
    const double q = 0.4;
    const auto pf = prefactors(q, kMat.sound_transverse);
    const double analytic = units::pi * pf.pe * pf.pe * std::pow(std::sin(2 * theta), 2);
    EXPECT_NEAR(phi_average(PhononBranch::TA1, q, theta), analytic, 1e-10 * analytic);
    EXPECT_NEAR(coupling_strength_phi_integrated(PhononChannel::TA1, q, theta, kMat), analytic,
                1e-10 * analytic);
  }
}

TEST(Coupling, PhiIntegralsMatchChannels) {
  for (double theta : {0.2, 1.1, 2.0}) {
    const double q = 1.3;
    const double la = coupling_strength_phi_integrated(PhononChannel::LA_DP, q, theta, kMat) +
                      coupling_strength_phi_integrated(PhononChannel::LA_PE, q, theta, kMat);
    EXPECT_NEAR(phi_average(PhononBranch::LA, q, theta), la, 1e-10 * la);
    const double ta2 = coupling_strength_phi_integrated(PhononChannel::TA2, q, theta, kMat);
    EXPECT_NEAR(phi_average(PhononBranch::TA2, q, theta), ta2, 1e-10 * ta2);
  }
}

TEST(Coupling, LongitudinalExpansion) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uq(0.05, 3.0), ut(0.0, units::pi), up(0.0, 2 * units::pi);
  for (int k = 0; k < 50; ++k) {
    const double q = uq(rng), th = ut(rng), ph = up(rng);
    const auto pf = prefactors(q, kMat.sound_longitudinal);
    const double ang = 1.5 * std::sin(2 * th) * std::sin(th) * std::sin(ph);
    const double expect = pf.dp * pf.dp + pf.pe * pf.pe * ang * ang;
    EXPECT_NEAR(std::norm(coupling_prefactor(PhononBranch::LA, q, th, ph, kMat)), expect,
                1e-10 * expect);
  }
}

TEST(FormFactor, ZeroWavevector) {
  const InPlaneGround ip{kMat.beta()};
  EXPECT_NEAR(std::abs(transition_form_factor(basis(), ip, 0, 0, 0.0, 0.0) - 1.0), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(transition_form_factor(basis(), ip, 1, 1, 0.0, 0.0) - 1.0), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(transition_form_factor(basis(), ip, 0, 1, 0.0, 0.0)), 0.0, 1e-10);
}

TEST(FormFactor, MirrorDotsHaveEqualModuli) {
  const InPlaneGround ip{kMat.beta()};
  for (double qz : {0.1, 0.5, 1.7}) {
    const cplx bb = transition_form_factor(basis(), ip, 0, 0, 0.2, qz);
    const cplx tt = transition_form_factor(basis(), ip, 1, 1, 0.2, qz);
    EXPECT_NEAR(std::abs(bb), std::abs(tt), 1e-10);
    // Opposite phases about the midpoint.
    EXPECT_NEAR(std::abs(bb - std::conj(tt)), 0.0, 1e-10);
  }
}

TEST(FormFactor, TableMatchesDirectQuadrature) {
  const InPlaneGround ip{kMat.beta()};
  const AxialFormFactorTable table(basis(), 4.0);
  const double d = kMat.dot_height + 7.532;
  std::vector<double> qs{units::pi / d, 0.0, 0.013, 1.234, 3.9};
  for (double qz : qs) {
    for (auto [n, m] : {std::pair{0, 0}, std::pair{0, 1}, std::pair{1, 1}}) {
      const cplx direct = transition_form_factor(basis(), ip, n, m, 0.0, qz);
      EXPECT_NEAR(std::abs(table(n, m, qz) - direct), 0.0, 1e-8) << qz << " " << n << m;
    }
  }
}

TEST(SpectralGridTest, LayoutAndLocate) {
  const SpectralGrid g(60.0, 1000, 2.0);
  const auto e = g.energies();
  EXPECT_EQ(e.front(), 0.0);
  EXPECT_EQ(e.back(), 60.0);
  EXPECT_EQ(g.knee(), 2.0);
  for (std::size_t i = 1; i < e.size(); ++i) EXPECT_GT(e[i], e[i - 1]);
  for (double x : {0.0, 1e-4, 1.9999, 2.0, 2.5, 33.3, 59.999}) {
    const std::size_t i = g.locate(x);
    EXPECT_LE(e[i], x);
    EXPECT_GT(e[i + 1], x);
  }
  EXPECT_THROW(SpectralGrid(10.0, 4, 2.0), ConfigError);
}

TEST(SpectralTablesTest, VanishAtZeroAndHermitian) {
  const auto& t = tables();
  for (const auto& ch : t.channels) EXPECT_EQ(ch[0].cwiseAbs().maxCoeff(), 0.0);
  double peak = 0.0;
  for (const auto& m : t.total) peak = std::max(peak, m(0, 0).real());
  // Piezoelectric branches vanish linearly, deformation potential faster.
  const double small = t.total_at(1e-4)(0, 0).real();
  EXPECT_LT(small, 1e-3 * peak);
  EXPECT_NEAR(t.total_at(1e-5)(0, 0).real() / small, 0.1, 0.02);
  for (const auto& m : t.total) {
    EXPECT_LT((m - m.adjoint()).cwiseAbs().maxCoeff(), 1e-14 * std::max(1e-300, peak));
    for (int mu = 0; mu < 4; ++mu) EXPECT_GE(m(mu, mu).real(), 0.0);
  }
}

TEST(SpectralTablesTest, GramMatrixPositive) {
  for (const auto& m : tables().total) {
    const Eigen::SelfAdjointEigenSolver<TransitionMatrix> es(m);
    EXPECT_GE(es.eigenvalues()(0), -1e-12 * m.trace().real());
  }
}

TEST(SpectralTablesTest, BranchOrdering) {
  const auto& t = tables();
  auto at = [&](PhononChannel c, double e) { return t.channel_at(c, e)(0, 0).real(); };
  for (double e : {0.02, 0.05, 0.1}) {
    EXPECT_GT(at(PhononChannel::TA1, e) + at(PhononChannel::TA2, e), at(PhononChannel::LA_DP, e));
  }
  const auto e = t.grid.energies();
  std::size_t ipk = 1;
  for (std::size_t i = 1; i < e.size(); ++i) {
    if (t.total[i](0, 0).real() > t.total[ipk](0, 0).real()) ipk = i;
  }
  for (auto c : {PhononChannel::LA_PE, PhononChannel::TA1, PhononChannel::TA2}) {
    EXPECT_GT(at(PhononChannel::LA_DP, e[ipk]), at(c, e[ipk]));
  }
}

TEST(SpectralTablesTest, ThetaQuadratureConverged) {
  const auto coarse = spectral_density_tables(basis(), kMat, SpectralTableOptions{6.0, 64, 64, 2.0});
  const auto fine = spectral_density_tables(basis(), kMat, SpectralTableOptions{6.0, 64, 128, 2.0});
  double peak = 0.0;
  for (const auto& m : fine.total) peak = std::max(peak, m.cwiseAbs().maxCoeff());
  for (std::size_t i = 0; i < fine.total.size(); ++i) {
    const double scale = std::max(fine.total[i].cwiseAbs().maxCoeff(), 1e-3 * peak);
    EXPECT_LT((coarse.total[i] - fine.total[i]).cwiseAbs().maxCoeff(), 1e-3 * scale) << i;
  }
}

TEST(SpectralTablesTest, InterpolationConverged) {
  const auto& a = tables();
  const auto b = spectral_density_tables(basis(), kMat, SpectralTableOptions{30.0, 4000, 128, 2.0});
  double peak = 0.0;
  for (const auto& m : b.total) peak = std::max(peak, m(0, 0).real());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(std::log(0.05), std::log(12.0));
  for (int k = 0; k < 200; ++k) {
    const double e = std::exp(u(rng));
    const double x = a.total_at(e)(0, 0).real(), y = b.total_at(e)(0, 0).real();
    // Deep tail values carry no weight in any rate.
    if (y < 1e-4 * peak) continue;
    EXPECT_LT(std::abs(x - y), 5e-3 * y) << e;
  }
}

TEST(SpectralTablesTest, RangeErrors) {
  EXPECT_THROW(tables().total_at(31.0), NumericError);
  EXPECT_THROW(tables().total_at(-1.0), NumericError);
}

TEST(Rates, BoseFunctionAtThermalEnergy) {
  const double temperature = 7.0;
  const double omega = units::kB * temperature / units::hbar;
  EXPECT_NEAR(bose_einstein(omega, temperature), 1.0 / (std::exp(1.0) - 1.0), 1e-12);
  EXPECT_NEAR(bose_einstein(omega, temperature), 0.58198, 1e-5);
}

TEST(Rates, DetailedBalance) {
  for (double temperature : {4.0, 10.0, 30.0}) {
    for (double e : {0.1, 1.0, 3.0}) {
      const double w = e / units::hbar;
      const cplx j = 0.37;
      const cplx down = thermal_rate(j, w, temperature);
      const cplx up = thermal_rate(j, -w, temperature);
      EXPECT_NEAR(up.real() / down.real(), std::exp(-e / (units::kB * temperature)), 1e-10);
    }
  }
}

TEST(Rates, ZeroTemperatureLimit) {
  const double w = 1.0 / units::hbar;
  EXPECT_NEAR(thermal_rate(0.2, w, 0.01).real(), 2.0 * units::pi * 0.2, 1e-12);
  EXPECT_NEAR(thermal_rate(0.2, -w, 0.01).real(), 0.0, 1e-300);
  EXPECT_THROW(rate_gamma(0.1, 0.1, w, 0.0), ConfigError);
  EXPECT_THROW(thermal_rate(0.1, 0.0, 10.0), NumericError);
}

TEST(Rates, ZeroFrequencyLimitIsContinuous) {
  const auto& t = tables();
  const double temperature = 10.0;
  const double e = 2e-4;
  const cplx near = thermal_rate(t.total_at(e)(0, 0), e / units::hbar, temperature);
  const cplx zero = thermal_rate_zero_frequency(t.zero_slope(0, 0), temperature);
  EXPECT_NEAR(near.real() / zero.real(), 1.0, 0.01);
  EXPECT_EQ(t.zero_slope(0, 1), cplx(0.0));
}

TEST(Correlation, SymmetryAndDecay) {
  const auto& t = tables();
  const auto e = t.grid.energies();
  std::vector<double> j(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) j[i] = t.total[i](0, 0).real();
  const std::vector<double> tau{0.0, 0.5, -0.5, 2.0, -2.0, 5.0, 8.0};
  const auto c = correlation_function(e, j, 10.0, tau);
  EXPECT_GT(c[0].real(), 0.0);
  EXPECT_EQ(c[0].imag(), 0.0);
  EXPECT_NEAR(std::abs(c[2] - std::conj(c[1])), 0.0, 1e-12 * std::abs(c[0]));
  EXPECT_NEAR(std::abs(c[4] - std::conj(c[3])), 0.0, 1e-12 * std::abs(c[0]));
  EXPECT_LT(std::norm(c[5]), 0.01 * std::norm(c[0]));
  EXPECT_LT(std::norm(c[6]), 0.01 * std::norm(c[0]));
}

TEST(Correlation, MatchesDirectQuadrature) {
  // Smooth synthetic spectral function on a fine uniform grid.
  std::vector<double> e, j;
  for (int i = 0; i <= 20000; ++i) {
    const double x = 20.0 * i / 20000.0;
    e.push_back(x);
    j.push_back(x * std::exp(-x * x / 2.0));
  }
  const double temperature = 10.0, kt = units::kB * temperature;
  for (double tau : {0.0, 0.3, 1.7}) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 1; i < e.size(); ++i) {
      for (std::size_t k : {i - 1, i}) {
        const double w = e[k] / units::hbar;
        const double dw = (e[i] - e[i - 1]) / units::hbar * 0.5;
        const double w2j = w * w * j[k];
        if (e[k] > 0.0) re += dw * std::cos(w * tau) * w2j / std::tanh(e[k] / (2 * kt));
        im -= dw * std::sin(w * tau) * w2j;
      }
    }
    const auto c = correlation_function(e, j, temperature, std::vector<double>{tau});
    EXPECT_NEAR(c[0].real(), re, 1e-5 * std::abs(re) + 1e-9);
    EXPECT_NEAR(c[0].imag(), im, 1e-5 * std::abs(re) + 1e-9);
  }
}
