#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "swg/surrogate.hpp"
#include "swg/wpd.hpp"

namespace swg {

// Pipeline configuration: a single JSON document, overridable with
// key=value pairs. Every run writes a manifest carrying the full config, its
// hash, the seed, and input file hashes, so outputs can be re-derived.
struct PipelineConfig {
  std::string input_field;
  std::string mask;
  std::string output_dir;
  int p_max = 3;
  std::string sub_model = "FULL";  // FULL | LAO | ARL | G-AR
  int n_blocks = 10;
  double lambda = 0.99;
  std::uint64_t seed = 1;
  int workers = 0;  // 0: hardware concurrency
  double h_max = kTukeyHMax;
  int taper_dilate_max = 2;
  int max_evals = 2000;

  void validate_common() const;
};

PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig default_config();
// Applies a "key=value" override; the value is parsed as JSON when possible,
// as a string otherwise.
void apply_override(PipelineConfig& config, const std::string& assignment);
std::string config_hash(const PipelineConfig& config);

// Step 1: ensemble statistics, mean smoothing, per-site transform/AR fits and
// order selection (Gaussian family when sub_model is G-AR). Writes mean.swg,
// smoothed_mean.swg, residuals.swg, step1_params.json and a manifest.
void run_step1(const PipelineConfig& config);

// Step 2: per-band evolutionary-spectrum fits on the step-1 residuals
// (no-altitude model when sub_model is LAO). Writes step2_params.json.
void run_step2(const PipelineConfig& config);

// Step 3: band-to-band coupling fits on the spectral coefficients extracted
// from the residuals (diagonal model when sub_model is ARL). Writes
// step3_params.json.
void run_step3(const PipelineConfig& config);

// Assembles the bundle from the fitted tables and generates surrogate runs.
std::filesystem::path run_generate(const PipelineConfig& config,
                                   Eigen::Index n_runs,
                                   const std::string& output_name = "surrogates.swg");

struct DiagnoseRequest {
  bool moments = true;            // per-site deviation moment z-maps
  bool contrasts = true;          // residual contrast variances
  int model_contrast_sims = 0;    // > 0: model-implied contrasts from the bundle
  std::optional<Eigen::Index> trend_begin;
  Eigen::Index trend_length = 0;
  bool gaussian_bic = false;      // per-site BIC delta vs the Gaussian baseline
};

std::vector<std::filesystem::path> run_diagnose(const PipelineConfig& config,
                                                const DiagnoseRequest& request);

// WPD table for one site: every run at one month, or all twelve months of a
// year starting at month_begin when year is true.
std::filesystem::path run_wpd(const PipelineConfig& config, Eigen::Index lat_index,
                              Eigen::Index lon_index, Eigen::Index month_begin,
                              bool year, const WpdConfig& wpd_config = {});

// Truth factory: writes the synthetic ensemble, the truth bundle tables, and
// the mask; the output directory is then a valid input for the fitting steps.
void run_synthetic(const PipelineConfig& config, const TruthConfig& truth_config);

}  // namespace swg
