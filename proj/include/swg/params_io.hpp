#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "swg/latvar.hpp"
#include "swg/spectrum.hpp"
#include "swg/surrogate.hpp"
#include "swg/temporal.hpp"

namespace swg {

// Parameter tables are JSON documents keyed by module name and indexed by
// grid position; see the README for the exact schemas.

struct SiteRecord {
  Eigen::Index lat_index = 0;
  Eigen::Index lon_index = 0;
  SiteFitResult fit;
};

struct SiteTable {
  std::string sub_model = "FULL";  // FULL or G-AR
  int p_max = 0;
  double h_max = kTukeyHMax;
  std::vector<SiteRecord> sites;
};

struct BandRecord {
  Eigen::Index lat_index = 0;
  BandFitResult fit;
};

struct BandTable {
  std::string sub_model = "FULL";  // FULL or LAO
  std::vector<BandRecord> bands;
};

struct LatRecord {
  Eigen::Index lat_index = 0;  // the band being conditioned (>= 1)
  LatFitResult fit;
};

struct LatTable {
  std::string sub_model = "FULL";  // FULL or ARL
  int n_blocks = 10;
  std::vector<LatRecord> bands;
};

void store_site_table(const SiteTable& table, const std::filesystem::path& path);
SiteTable load_site_table(const std::filesystem::path& path);

void store_band_table(const BandTable& table, const std::filesystem::path& path);
BandTable load_band_table(const std::filesystem::path& path);

void store_lat_table(const LatTable& table, const std::filesystem::path& path);
LatTable load_lat_table(const std::filesystem::path& path);

// Assembles a generation bundle from the standard file layout of an output
// directory: smoothed_mean.swg, mask.csv, step{1,2,3}_params.json.
ModelBundle load_bundle(const std::filesystem::path& dir,
                        const std::filesystem::path& mask_path,
                        std::uint64_t rng_seed);

// Writes a fitted or truth bundle in the same layout.
void store_bundle(const ModelBundle& bundle, const std::filesystem::path& dir,
                  const std::filesystem::path& mask_path);

// FNV-1a of a file's bytes, as fixed-width hex.
std::string file_hash_hex(const std::filesystem::path& path);

}  // namespace swg
