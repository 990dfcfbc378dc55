#include "qdm/wavefunctions.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qdm/error.hpp"
#include "qdm/units.hpp"

namespace qdm {
namespace {

double overlap_length(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

double kinetic_hopping(const PotentialSpec& p, double dz) {
  return units::hbar2_over_2m0 / p.effective_mass / (dz * dz);
}

// y = H x with the same stencil the eigensolver diagonalizes.
std::vector<double> apply_hamiltonian(std::span<const double> x, std::span<const double> potential,
                                      double hop) {
  const std::size_t n = x.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = (2.0 * hop + potential[i]) * x[i];
    if (i > 0) v -= hop * x[i - 1];
    if (i + 1 < n) v -= hop * x[i + 1];
    y[i] = v;
  }
  return y;
}

// <a|H|b> with the kinetic part in difference form. Same value as
// <a, apply_hamiltonian(b)> but without the O(hop) cancellation.
double matrix_element(std::span<const double> a, std::span<const double> b,
                      std::span<const double> potential, double hop, double dz) {
  const std::size_t n = a.size();
  double kin = a[0] * b[0] + a[n - 1] * b[n - 1];  // hard walls
  double pot = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) kin += (a[i + 1] - a[i]) * (b[i + 1] - b[i]);
  for (std::size_t i = 0; i < n; ++i) pot += potential[i] * a[i] * b[i];
  return (hop * kin + pot) * dz;
}

}  // namespace

Grid PotentialSpec::grid() const {
  return Grid{-margin, 2.0 * dot_height + barrier_width + margin, n_points};
}

void PotentialSpec::validate() const {
  std::ostringstream why;
  if (!(well_depth > 0.0)) why << "well_depth must be > 0; ";
  if (!(dot_height > 0.0)) why << "dot_height must be > 0; ";
  if (!(barrier_width >= 0.0)) why << "barrier_width must be >= 0; ";
  if (!(effective_mass > 0.0)) why << "effective_mass must be > 0; ";
  if (!(margin >= 10.0)) why << "margin must be >= 10 nm; ";
  if (n_points < 1000) why << "n_points must be >= 1000; ";
  if (!why.str().empty()) throw ConfigError("invalid potential: " + why.str());
}

std::vector<double> PotentialSpec::sample() const {
  const Grid g = grid();
  const double dz = g.spacing();
  const double bottom0 = 0.0;
  const double bottom1 = dot_height;
  const double top0 = dot_height + barrier_width;
  const double top1 = 2.0 * dot_height + barrier_width;
  std::vector<double> u(g.n_points);
  for (std::size_t i = 0; i < g.n_points; ++i) {
    const double a = g.z(i) - 0.5 * dz;
    const double b = g.z(i) + 0.5 * dz;
    // Merge the wells when w = 0 so the shared edge is not counted twice.
    double inside = 0.0;
    if (barrier_width > 0.0) {
      inside = overlap_length(a, b, bottom0, bottom1) + overlap_length(a, b, top0, top1);
    } else {
      inside = overlap_length(a, b, bottom0, top1);
    }
    u[i] = well_depth * (1.0 - std::min(inside / dz, 1.0));
  }
  return u;
}

double inner_product(std::span<const double> a, std::span<const double> b, double dz) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s * dz;
}

AxialEigenstates solve_axial_eigenstates(const PotentialSpec& potential) {
  potential.validate();
  const Grid g = potential.grid();
  const std::size_t n = g.n_points;
  const double dz = g.spacing();
  const double hop = kinetic_hopping(potential, dz);
  const std::vector<double> u = potential.sample();

  std::vector<double> diag(n), off(n - 1, -hop);
  for (std::size_t i = 0; i < n; ++i) diag[i] = 2.0 * hop + u[i];

  lapack_int found = 0;
  std::vector<double> values(n);
  std::vector<double> vectors(n * 2);
  std::vector<lapack_int> support(4);
  const lapack_int info = LAPACKE_dstevr(
      LAPACK_COL_MAJOR, 'V', 'I', static_cast<lapack_int>(n), diag.data(), off.data(), 0.0, 0.0,
      1, 2, 0.0, &found, values.data(), vectors.data(), static_cast<lapack_int>(n),
      support.data());
  if (info != 0 || found != 2) {
    throw NumericError("tridiagonal eigensolve failed (info=" + std::to_string(info) + ")");
  }

  AxialEigenstates out;
  out.eps_plus = values[0];
  out.eps_minus = values[1];
  if (!(out.eps_minus < potential.well_depth)) {
    std::ostringstream msg;
    msg << "insufficient bound states: second level " << out.eps_minus
        << " meV is not below the barrier " << potential.well_depth << " meV";
    throw InsufficientBoundStates(msg.str());
  }

  const double norm = 1.0 / std::sqrt(dz);
  out.xi_plus.assign(vectors.begin(), vectors.begin() + static_cast<std::ptrdiff_t>(n));
  out.xi_minus.assign(vectors.begin() + static_cast<std::ptrdiff_t>(n), vectors.end());
  for (auto& v : out.xi_plus) v *= norm;
  for (auto& v : out.xi_minus) v *= norm;

  // Residual check guards against a silently unconverged inverse iteration.
  for (int k = 0; k < 2; ++k) {
    const auto& x = k == 0 ? out.xi_plus : out.xi_minus;
    const double e = k == 0 ? out.eps_plus : out.eps_minus;
    const auto hx = apply_hamiltonian(x, u, hop);
    double r2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) r2 += (hx[i] - e * x[i]) * (hx[i] - e * x[i]);
    const double residual = std::sqrt(r2 * dz);
    if (residual > 1e-6 * std::max(1.0, std::abs(e))) {
      std::ostringstream msg;
      msg << "axial eigenpair " << k << " not converged, residual norm " << residual;
      throw NumericError(msg.str());
    }
  }

  // Rayleigh quotients keep the splitting consistent with the tunnel element.
  out.eps_plus = matrix_element(out.xi_plus, out.xi_plus, u, hop, dz);
  out.eps_minus = matrix_element(out.xi_minus, out.xi_minus, u, hop, dz);

  // Sign convention: xi+ > 0 at the midpoint, xi- carries positive weight in the
  // bottom well.
  const double zmid = potential.midpoint();
  const auto imid = static_cast<std::size_t>(std::lround((zmid - g.z_min) / dz));
  if (out.xi_plus[imid] < 0.0) {
    for (auto& v : out.xi_plus) v = -v;
  }
  double bottom_weight = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (g.z(i) < zmid) bottom_weight += out.xi_minus[i];
  }
  if (bottom_weight < 0.0) {
    for (auto& v : out.xi_minus) v = -v;
  }
  return out;
}

LocalizedPair build_localized_basis(std::span<const double> xi_plus,
                                    std::span<const double> xi_minus) {
  if (xi_plus.size() != xi_minus.size()) {
    throw ConfigError("build_localized_basis: size mismatch");
  }
  const double s = 1.0 / std::sqrt(2.0);
  LocalizedPair out;
  out.xi_bottom.resize(xi_plus.size());
  out.xi_top.resize(xi_plus.size());
  for (std::size_t i = 0; i < xi_plus.size(); ++i) {
    out.xi_bottom[i] = s * (xi_plus[i] + xi_minus[i]);
    out.xi_top[i] = s * (xi_plus[i] - xi_minus[i]);
  }
  return out;
}

double tunnel_matrix_element(std::span<const double> xi_bottom, std::span<const double> xi_top,
                             const PotentialSpec& potential) {
  const Grid g = potential.grid();
  const double dz = g.spacing();
  const auto u = potential.sample();
  return matrix_element(xi_bottom, xi_top, u, kinetic_hopping(potential, dz), dz);
}

AxialBasis make_axial_basis(const PotentialSpec& potential) {
  auto states = solve_axial_eigenstates(potential);
  auto local = build_localized_basis(states.xi_plus, states.xi_minus);
  AxialBasis basis;
  basis.grid = potential.grid();
  basis.midpoint = potential.midpoint();
  basis.eps_plus = states.eps_plus;
  basis.eps_minus = states.eps_minus;
  basis.tunnel_coupling = tunnel_matrix_element(local.xi_bottom, local.xi_top, potential);
  basis.xi_plus = std::move(states.xi_plus);
  basis.xi_minus = std::move(states.xi_minus);
  basis.xi_bottom = std::move(local.xi_bottom);
  basis.xi_top = std::move(local.xi_top);
  return basis;
}

double barrier_width_for_tunnel_coupling(double target, const PotentialSpec& base, double w_lo,
                                         double w_hi, double rel_tol) {
  if (!(target > 0.0)) throw ConfigError("target tunnel coupling must be > 0");
  auto log_te = [&](double w) {
    PotentialSpec p = base;
    p.barrier_width = w;
    const auto s = solve_axial_eigenstates(p);
    return std::log(0.5 * (s.eps_minus - s.eps_plus));
  };
  const double goal = std::log(target);
  double f_lo = log_te(w_lo) - goal;
  double f_hi = log_te(w_hi) - goal;
  if (f_lo < 0.0 || f_hi > 0.0) {
    std::ostringstream msg;
    msg << "tunnel coupling " << target << " meV not bracketed by barrier widths [" << w_lo
        << ", " << w_hi << "] nm";
    throw ConfigError(msg.str());
  }
  // |t_e| decays monotonically with w.
  for (int it = 0; it < 200; ++it) {
    const double w = 0.5 * (w_lo + w_hi);
    const double f = log_te(w) - goal;
    if (std::abs(f) < rel_tol) return w;
    if (f > 0.0) {
      w_lo = w;
      f_lo = f;
    } else {
      w_hi = w;
      f_hi = f;
    }
    if (w_hi - w_lo < 1e-12) break;
  }
  return 0.5 * (w_lo + w_hi);
}

}  // namespace qdm
