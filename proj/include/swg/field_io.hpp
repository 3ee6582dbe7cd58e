#pragma once

#include <filesystem>
#include <string>

#include "swg/grid.hpp"

namespace swg {

// Field container: one line of JSON (dimensions, coordinates, variable name,
// byte order, dtype) terminated by '\n', followed by the payload as
// little-endian float32 in (realization, time, lat, lon) row-major order.
void store_field(const EnsembleField& field, const std::filesystem::path& path,
                 const std::string& variable = "wind_speed");
EnsembleField load_field(const std::filesystem::path& path);

// GeoMask as CSV with header lat_index,lon_index,class,altitude_m.
void store_mask_csv(const GeoMask& mask, const std::filesystem::path& path);
GeoMask load_mask_csv(const std::filesystem::path& path, Eigen::Index n_lat,
                      Eigen::Index n_lon);

}  // namespace swg
