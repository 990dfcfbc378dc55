#include "qdm/phonons.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qdm/error.hpp"
#include "qdm/units.hpp"

namespace qdm {
namespace {

using units::pi;

struct SiCoupling {
  double hbar_over_2rho;  // m^5 / s  (J s / (kg/m^3))
  double deformation;     // J
  double piezo;           // J/m, d_p e / (eps0 eps_r)
};

SiCoupling si_coupling(const MaterialParams& m) {
  return SiCoupling{
      units::si::hbar / (2.0 * m.density),
      m.deformation_potential * units::si::elementary_charge,
      m.piezo_constant * units::si::elementary_charge /
          (units::si::vacuum_permittivity * m.eps_r),
  };
}

double sound_speed(PhononChannel channel, const MaterialParams& m) {
  return (channel == PhononChannel::LA_DP || channel == PhononChannel::LA_PE)
             ? m.sound_longitudinal
             : m.sound_transverse;
}

// phi-integrated V|G|^2 in SI (J^2 m^3); q in 1/m, c in m/s.
double phi_integrated_si(PhononChannel channel, double q, double c, double theta,
                         const SiCoupling& k) {
  const double s = std::sin(theta);
  const double s2 = std::sin(2.0 * theta);
  const double ct = std::cos(theta);
  switch (channel) {
    case PhononChannel::LA_DP:
      return 2.0 * pi * k.hbar_over_2rho * q / c * k.deformation * k.deformation;
    case PhononChannel::LA_PE:
      return pi * 2.25 * k.hbar_over_2rho / (c * q) * k.piezo * k.piezo * s2 * s2 * s * s;
    case PhononChannel::TA1:
      return pi * k.hbar_over_2rho / (c * q) * k.piezo * k.piezo * s2 * s2;
    case PhononChannel::TA2: {
      const double a = 3.0 * ct * ct - 1.0;
      return pi * k.hbar_over_2rho / (c * q) * k.piezo * k.piezo * a * a * s * s;
    }
  }
  return 0.0;
}

// Contribution of one theta slice to I_mu,nu / hbar^2 per unit F*F, in 1/ps:
// (1/hbar^2) (2 pi)^-3 (omega^2 / c^3) sin(theta) Phi.
double channel_kernel(PhononChannel channel, double omega, double theta, const MaterialParams& m,
                      const SiCoupling& k) {
  const double c = sound_speed(channel, m) * 1e3;  // nm/ps -> m/s
  const double w = omega * 1e12;                   // 1/ps -> 1/s
  const double q = w / c;
  const double phi = phi_integrated_si(channel, q, c, theta, k);
  const double hb = units::si::hbar;
  return phi / (hb * hb) * w * w / (c * c * c) / (8.0 * pi * pi * pi) * std::sin(theta) * 1e-12;
}

constexpr std::array<PhononChannel, kChannelCount> kChannels{
    PhononChannel::LA_DP, PhononChannel::LA_PE, PhononChannel::TA1, PhononChannel::TA2};

}  // namespace

std::string_view to_string(PhononChannel channel) {
  switch (channel) {
    case PhononChannel::LA_DP: return "LA_DP";
    case PhononChannel::LA_PE: return "LA_PE";
    case PhononChannel::TA1: return "TA1";
    case PhononChannel::TA2: return "TA2";
  }
  return "?";
}

cplx coupling_prefactor(PhononBranch branch, double q, double theta, double phi,
                        const MaterialParams& material) {
  if (!(q > 0.0)) throw ConfigError("coupling_prefactor: q must be > 0");
  const auto k = si_coupling(material);
  const double q_si = q * 1e9;
  const double c = (branch == PhononBranch::LA ? material.sound_longitudinal
                                               : material.sound_transverse) * 1e3;
  const double pe = std::sqrt(k.hbar_over_2rho / (c * q_si)) * k.piezo;
  cplx g;
  switch (branch) {
    case PhononBranch::LA:
      g = cplx(std::sqrt(k.hbar_over_2rho * q_si / c) * k.deformation,
               -1.5 * pe * std::sin(2.0 * theta) * std::sin(theta) * std::sin(phi));
      break;
    case PhononBranch::TA1:
      g = cplx(0.0, -pe * std::sin(2.0 * theta) * std::cos(2.0 * phi));
      break;
    case PhononBranch::TA2:
      g = cplx(0.0, -pe * (3.0 * std::cos(theta) * std::cos(theta) - 1.0) * std::sin(theta) *
                        std::sin(2.0 * phi));
      break;
  }
  // J m^{3/2} -> meV nm^{3/2}
  return g / (units::meV * std::pow(units::nm, 1.5));
}

double coupling_strength_phi_integrated(PhononChannel channel, double q, double theta,
                                        const MaterialParams& material) {
  if (!(q > 0.0)) throw ConfigError("coupling_strength_phi_integrated: q must be > 0");
  const auto k = si_coupling(material);
  const double c = sound_speed(channel, material) * 1e3;
  const double v = phi_integrated_si(channel, q * 1e9, c, theta, k);
  return v / (units::meV * units::meV * units::nm * units::nm * units::nm);
}

cplx transition_form_factor(const AxialBasis& basis, const InPlaneGround& in_plane, int n, int m,
                            double q_rho, double q_z) {
  const auto& a = n == 0 ? basis.xi_bottom : basis.xi_top;
  const auto& b = m == 0 ? basis.xi_bottom : basis.xi_top;
  const double dz = basis.grid.spacing();
  cplx sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double z = basis.grid.z(i) - basis.midpoint;
    sum += std::polar(a[i] * b[i], q_z * z);
  }
  const double beta = in_plane.beta;
  return std::exp(-q_rho * q_rho / (4.0 * beta * beta)) * sum * dz;
}

AxialFormFactorTable::AxialFormFactorTable(const AxialBasis& basis, double q_max) {
  const auto& xb = basis.xi_bottom;
  const auto& xt = basis.xi_top;
  const std::size_t n = xb.size();
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) peak = std::max({peak, std::abs(xb[i]), std::abs(xt[i])});
  // Products below 1e-20 of the peak density do not register at double precision.
  std::size_t i0 = 0, i1 = n;
  while (i0 < n && std::max(std::abs(xb[i0]), std::abs(xt[i0])) < 1e-10 * peak) ++i0;
  while (i1 > i0 && std::max(std::abs(xb[i1 - 1]), std::abs(xt[i1 - 1])) < 1e-10 * peak) --i1;

  const double dz = basis.grid.spacing();
  const double z0 = basis.grid.z(i0) - basis.midpoint;
  const double reach = std::max(std::abs(z0), std::abs(basis.grid.z(i1 - 1) - basis.midpoint));
  // Phase advance per q step of at most 0.02 rad keeps 4-point interpolation near 1e-9.
  dq_ = 0.02 / std::max(reach, 1.0);
  const auto n_q = static_cast<std::size_t>(std::ceil(q_max / dq_)) + 3;
  q_max_ = dq_ * static_cast<double>(n_q - 1);

  std::vector<double> bb(i1 - i0), bt(i1 - i0), tt(i1 - i0);
  for (std::size_t i = i0; i < i1; ++i) {
    bb[i - i0] = xb[i] * xb[i] * dz;
    bt[i - i0] = xb[i] * xt[i] * dz;
    tt[i - i0] = xt[i] * xt[i] * dz;
  }
  for (auto& v : values_) v.resize(n_q);
  for (std::size_t k = 0; k < n_q; ++k) {
    const double q = dq_ * static_cast<double>(k);
    const cplx step = std::polar(1.0, q * dz);
    cplx phase = std::polar(1.0, q * z0);
    cplx sbb = 0.0, sbt = 0.0, stt = 0.0;
    for (std::size_t i = 0; i < bb.size(); ++i) {
      sbb += bb[i] * phase;
      sbt += bt[i] * phase;
      stt += tt[i] * phase;
      phase *= step;
      // Renormalize periodically against drift of the recursive phasor.
      if ((i & 255u) == 255u) phase = std::polar(1.0, q * (z0 + dz * static_cast<double>(i + 1)));
    }
    values_[0][k] = sbb;
    values_[1][k] = sbt;
    values_[2][k] = stt;
  }
}

cplx AxialFormFactorTable::operator()(int n, int m, double q_z) const {
  const int which = (n == 0 && m == 0) ? 0 : (n == 1 && m == 1) ? 2 : 1;
  const auto& v = values_[static_cast<std::size_t>(which)];
  const bool negative = q_z < 0.0;
  const double q = std::abs(q_z);
  if (q > q_max_ - 2.0 * dq_) {
    throw NumericError("axial form factor requested beyond tabulated q range");
  }
  const double x = q / dq_;
  const auto base = static_cast<long>(std::floor(x));
  const double t = x - static_cast<double>(base);
  auto at = [&](long k) { return k < 0 ? std::conj(v[static_cast<std::size_t>(-k)]) : v[static_cast<std::size_t>(k)]; };
  // 4-point Lagrange on nodes base-1 .. base+2.
  const double wm1 = -t * (t - 1.0) * (t - 2.0) / 6.0;
  const double w0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
  const double w1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
  const double w2 = (t + 1.0) * t * (t - 1.0) / 6.0;
  const cplx r = wm1 * at(base - 1) + w0 * at(base) + w1 * at(base + 1) + w2 * at(base + 2);
  return negative ? std::conj(r) : r;
}

SpectralGrid::SpectralGrid(double max_energy, std::size_t n_points, double knee) {
  if (!(max_energy > 0.0) || n_points < 16 || !(knee > 0.0)) {
    throw ConfigError("spectral grid: need max_energy > 0, n_points >= 16, knee > 0");
  }
  energies_.resize(n_points);
  knee_ = knee;
  if (max_energy <= 1.5 * knee) {
    n_linear_ = n_points;
    linear_step_ = max_energy / static_cast<double>(n_points - 1);
    for (std::size_t i = 0; i < n_points; ++i) energies_[i] = linear_step_ * static_cast<double>(i);
    log_ratio_ = 0.0;
    return;
  }
  n_linear_ = n_points / 2;
  linear_step_ = knee / static_cast<double>(n_linear_ - 1);
  for (std::size_t i = 0; i < n_linear_; ++i) energies_[i] = linear_step_ * static_cast<double>(i);
  const std::size_t n_log = n_points - n_linear_;
  log_ratio_ = std::log(max_energy / knee) / static_cast<double>(n_log);
  for (std::size_t j = 1; j <= n_log; ++j) {
    energies_[n_linear_ - 1 + j] = knee * std::exp(log_ratio_ * static_cast<double>(j));
  }
  energies_.back() = max_energy;
}

std::size_t SpectralGrid::locate(double e) const {
  const std::size_t last = energies_.size() - 2;
  std::size_t i;
  if (log_ratio_ == 0.0 || e <= energies_[n_linear_ - 1]) {
    i = static_cast<std::size_t>(std::max(0.0, std::floor(e / linear_step_)));
  } else {
    const double r = std::log(e / energies_[n_linear_ - 1]) / log_ratio_;
    i = n_linear_ - 1 + static_cast<std::size_t>(std::max(0.0, std::floor(r)));
  }
  i = std::min(i, last);
  while (i > 0 && energies_[i] > e) --i;
  while (i < last && energies_[i + 1] <= e) ++i;
  return i;
}

namespace {

TransitionMatrix interpolate(const SpectralGrid& grid, const std::vector<TransitionMatrix>& v,
                             double energy) {
  if (energy < 0.0) throw NumericError("spectral tables are indexed by non-negative energy");
  if (energy > grid.max_energy() * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "transition energy " << energy << " meV exceeds the spectral table range "
        << grid.max_energy() << " meV; increase omega_max";
    throw NumericError(msg.str());
  }
  const auto e = grid.energies();
  const std::size_t i = grid.locate(energy);
  const double t = std::clamp((energy - e[i]) / (e[i + 1] - e[i]), 0.0, 1.0);
  return (1.0 - t) * v[i] + t * v[i + 1];
}

}  // namespace

TransitionMatrix SpectralTables::total_at(double energy) const {
  return interpolate(grid, total, energy);
}

TransitionMatrix SpectralTables::channel_at(PhononChannel channel, double energy) const {
  return interpolate(grid, channels[static_cast<std::size_t>(channel)], energy);
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[static_cast<std::size_t>(i)] = -x;
    nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
}

SpectralTables spectral_density_tables(const AxialBasis& basis, const MaterialParams& material,
                                       const SpectralTableOptions& options) {
  material.validate();
  if (options.theta_nodes < 8) throw ConfigError("theta_nodes must be >= 8");
  SpectralTables tables;
  tables.grid = SpectralGrid(options.max_energy, options.n_points, options.knee);
  const auto energies = tables.grid.energies();
  const std::size_t n_e = energies.size();
  for (auto& c : tables.channels) c.assign(n_e, TransitionMatrix::Zero());
  tables.total.assign(n_e, TransitionMatrix::Zero());

  std::vector<double> x, w;
  gauss_legendre(options.theta_nodes, x, w);
  std::vector<double> theta(x.size()), wt(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    theta[i] = 0.5 * pi * (x[i] + 1.0);
    wt[i] = 0.5 * pi * w[i];
  }

  const double c_min = std::min(material.sound_longitudinal, material.sound_transverse);
  const double q_top = units::energy_to_omega(tables.grid.max_energy()) / c_min;
  const AxialFormFactorTable axial(basis, q_top * 1.001 + 1e-3);
  const InPlaneGround in_plane{material.beta()};
  const double inv4b2 = 1.0 / (4.0 * in_plane.beta * in_plane.beta);
  const auto k_si = si_coupling(material);

  for (std::size_t e = 1; e < n_e; ++e) {
    const double omega = units::energy_to_omega(energies[e]);
    for (const double c : {material.sound_longitudinal, material.sound_transverse}) {
      const double q = omega / c;
      for (std::size_t j = 0; j < theta.size(); ++j) {
        const double qz = q * std::cos(theta[j]);
        const double qr = q * std::sin(theta[j]);
        const double g = std::exp(-qr * qr * inv4b2);
        Eigen::Matrix<cplx, kTransitionCount, 1> f;
        f(0) = g * axial(0, 0, qz);
        f(1) = g * axial(0, 1, qz);
        f(2) = f(1);
        f(3) = g * axial(1, 1, qz);
        const TransitionMatrix outer = f.conjugate() * f.transpose();
        for (const auto ch : kChannels) {
          if (sound_speed(ch, material) != c) continue;
          const double kern = wt[j] * channel_kernel(ch, omega, theta[j], material, k_si);
          tables.channels[static_cast<std::size_t>(ch)][e] += kern * outer;
        }
      }
    }
    for (const auto& ch : tables.channels) tables.total[e] += ch[e];
  }

  // Small-omega limit: F_mu(0) = delta_{n m}, and only the piezoelectric
  // channels are linear in omega there.
  const double omega_probe = 1e-6;
  double slope = 0.0;
  for (const auto ch : {PhononChannel::LA_PE, PhononChannel::TA1, PhononChannel::TA2}) {
    for (std::size_t j = 0; j < theta.size(); ++j) {
      slope += wt[j] * channel_kernel(ch, omega_probe, theta[j], material, k_si) / omega_probe;
    }
  }
  for (int mu : {0, 3}) {
    for (int nu : {0, 3}) tables.zero_slope(mu, nu) = slope;
  }
  return tables;
}

double bose_einstein(double omega, double temperature) {
  return 1.0 / std::expm1(units::hbar * omega / (units::kB * temperature));
}

cplx rate_gamma(cplx j_plus, cplx j_minus, double omega, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("rate_gamma: temperature must be > 0");
  cplx g = 0.0;
  if (j_minus != 0.0) g += j_minus * bose_einstein(-omega, temperature);
  if (j_plus != 0.0) g += j_plus * (bose_einstein(omega, temperature) + 1.0);
  return 2.0 * pi * g;
}

cplx thermal_rate(cplx j_at_abs_omega, double omega, double temperature) {
  if (omega > 0.0) return rate_gamma(j_at_abs_omega, 0.0, omega, temperature);
  if (omega < 0.0) return rate_gamma(0.0, j_at_abs_omega, omega, temperature);
  throw NumericError("thermal_rate at omega = 0: use thermal_rate_zero_frequency");
}

cplx thermal_rate_zero_frequency(cplx zero_slope, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("rate: temperature must be > 0");
  return 2.0 * pi * units::kB * temperature / units::hbar * zero_slope;
}

namespace {

// Exact integral of the linear interpolant of f times exp(i tau x) over [x0, x1].
cplx filon_segment(double x0, double x1, double f0, double f1, double tau) {
  const double h = x1 - x0;
  if (std::abs(tau * h) < 1e-4) {
    return 0.5 * h * (f0 * std::polar(1.0, tau * x0) + f1 * std::polar(1.0, tau * x1));
  }
  const double s = (f1 - f0) / h;
  const cplx it(0.0, tau);
  auto antiderivative = [&](double x, double f) {
    return std::polar(1.0, tau * x) * (f / it + s / (tau * tau));
  };
  return antiderivative(x1, f1) - antiderivative(x0, f0);
}

}  // namespace

std::vector<cplx> correlation_function(std::span<const double> energies,
                                       std::span<const double> spectral, double temperature,
                                       std::span<const double> tau) {
  if (energies.size() != spectral.size() || energies.size() < 2) {
    throw ConfigError("correlation_function: energies and spectral sizes differ");
  }
  if (!(temperature > 0.0)) throw ConfigError("correlation_function: temperature must be > 0");
  const double kt = units::kB * temperature;
  const std::size_t n = energies.size();
  std::vector<double> omega(n), sym(n), anti(n);
  for (std::size_t i = 0; i < n; ++i) {
    omega[i] = units::energy_to_omega(energies[i]);
    const double w2j = omega[i] * omega[i] * spectral[i];
    anti[i] = w2j;
    sym[i] = energies[i] > 0.0 ? w2j / std::tanh(energies[i] / (2.0 * kt)) : 0.0;
  }
  std::vector<cplx> out;
  out.reserve(tau.size());
  for (const double t : tau) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      re += filon_segment(omega[i - 1], omega[i], sym[i - 1], sym[i], t).real();
      im -= filon_segment(omega[i - 1], omega[i], anti[i - 1], anti[i], t).imag();
    }
    out.emplace_back(re, im);
  }
  return out;
}

}  // namespace qdm
