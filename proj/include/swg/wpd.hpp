#pragma once

#include <Eigen/Core>
#include <cmath>

#include "swg/errors.hpp"
#include "swg/grid.hpp"

namespace swg {

// Wind power density at hub height via power-law shear extrapolation.
struct WpdConfig {
  double air_density = 1.225;       // kg m^-3
  double reference_height_m = 10.0;
  double target_height_m = 80.0;
  double shear_exponent = 1.0 / 7.0;

  void validate() const {
    if (!(air_density > 0.0) || !(reference_height_m > 0.0) ||
        !(target_height_m > 0.0) || !(shear_exponent > 0.0))
      throw config_error("WpdConfig: all parameters must be positive");
  }
};

// u = u_ref * (z / z_ref)^alpha
inline double extrapolate_wind(double u_ref, const WpdConfig& config = {}) {
  config.validate();
  if (!(u_ref >= 0.0)) throw data_error("extrapolate_wind: negative wind speed");
  return u_ref * std::pow(config.target_height_m / config.reference_height_m,
                          config.shear_exponent);
}

// WPD = 0.5 * rho * u^3, in W m^-2
inline double wind_power_density(double u, double air_density = 1.225) {
  if (!(air_density > 0.0))
    throw config_error("wind_power_density: air density must be positive");
  if (!(u >= 0.0)) throw data_error("wind_power_density: negative wind speed");
  return 0.5 * air_density * u * u * u;
}

// One WPD value per run at a site and month, in run order.
inline Eigen::VectorXd wpd_site_distribution(const EnsembleField& runs,
                                             Eigen::Index lat_index,
                                             Eigen::Index lon_index,
                                             Eigen::Index month_index,
                                             const WpdConfig& config = {}) {
  const GridSpec& spec = runs.spec();
  if (lat_index < 0 || lat_index >= spec.n_lat || lon_index < 0 ||
      lon_index >= spec.n_lon || month_index < 0 || month_index >= spec.n_time)
    throw config_error("wpd_site_distribution: index out of range");
  Eigen::VectorXd out(spec.n_real);
  for (Eigen::Index r = 0; r < spec.n_real; ++r)
    out[r] = wind_power_density(
        extrapolate_wind(runs(r, month_index, lat_index, lon_index), config),
        config.air_density);
  return out;
}

}  // namespace swg
