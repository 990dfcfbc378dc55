#include "qdm/coulomb.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <sstream>

#include "qdm/error.hpp"
#include "qdm/units.hpp"

namespace qdm {

double axial_form_factor(std::span<const double> xi_i, std::span<const double> xi_j, double dz,
                         double q_rho) {
  const std::size_t n = xi_i.size();
  const double decay = std::exp(-q_rho * dz);
  // left[k] = sum_{l<=k} w_j[l] e^{-q (z_k - z_l)}, right[k] = sum_{l>k} ...
  std::vector<double> right(n, 0.0);
  for (std::size_t k = n - 1; k-- > 0;) {
    right[k] = decay * (xi_j[k + 1] * xi_j[k + 1] + right[k + 1]);
  }
  double left = 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    left = xi_j[k] * xi_j[k] + decay * left;
    sum += xi_i[k] * xi_i[k] * (left + right[k]);
  }
  return sum * dz * dz;
}

double coulomb_matrix_element(DotSite i, DotSite j, const AxialBasis& basis,
                              const InPlaneGround& in_plane, double eps_r) {
  if (!(eps_r > 0.0) || !(in_plane.beta > 0.0)) {
    throw ConfigError("coulomb_matrix_element: eps_r and beta must be positive");
  }
  const auto& xi_i = i == DotSite::Bottom ? basis.xi_bottom : basis.xi_top;
  const auto& xi_j = j == DotSite::Bottom ? basis.xi_bottom : basis.xi_top;
  const double dz = basis.grid.spacing();
  const double beta = in_plane.beta;

  // u = q / beta; the Gaussian is below 2e-22 at u = 10.
  auto integrand = [&](double u) {
    return axial_form_factor(xi_i, xi_j, dz, beta * u) * std::exp(-0.5 * u * u);
  };
  double error = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, 0.0, 10.0, 12, 1e-11, &error);
  if (!(error <= 1e-8 * std::abs(value))) {
    std::ostringstream msg;
    msg << "Coulomb quadrature did not converge: value " << value << ", error estimate " << error;
    throw NumericError(msg.str());
  }
  return units::coulomb_constant / eps_r * beta * value;
}

CoulombElements coulomb_elements(const AxialBasis& basis, const InPlaneGround& in_plane,
                                 double eps_r) {
  CoulombElements c;
  c.eps_r = eps_r;
  c.bottom_bottom = coulomb_matrix_element(DotSite::Bottom, DotSite::Bottom, basis, in_plane, eps_r);
  c.bottom_top = coulomb_matrix_element(DotSite::Bottom, DotSite::Top, basis, in_plane, eps_r);
  c.top_top = coulomb_matrix_element(DotSite::Top, DotSite::Top, basis, in_plane, eps_r);
  return c;
}

}  // namespace qdm
