// Pipeline driver: fits the three-step model, generates surrogate runs, and
// emits diagnostics and wind-power-density tables. Configuration lives in a
// JSON document, overridable per-run with --set key=value.

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "swg/errors.hpp"
#include "swg/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

swg::PipelineConfig resolve_config(const std::string& config_path,
                                   const std::vector<std::string>& overrides) {
  swg::PipelineConfig config =
      config_path.empty() ? swg::default_config() : swg::load_config(config_path);
  for (const std::string& assignment : overrides)
    swg::apply_override(config, assignment);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic wind generator pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "pipeline config JSON");
  app.add_option("--set", overrides, "override a config key, key=value");

  auto* step1 = app.add_subcommand("fit-step1",
                                   "per-site transform and AR fits, mean smoothing");
  auto* step2 = app.add_subcommand("fit-step2", "per-band evolutionary spectra");
  auto* step3 = app.add_subcommand("fit-step3", "band-to-band coupling");

  auto* gen = app.add_subcommand("generate", "generate surrogate runs");
  Eigen::Index n_runs = 5;
  std::string gen_output = "surrogates.swg";
  gen->add_option("--runs", n_runs, "number of surrogate runs")->required();
  gen->add_option("--output", gen_output, "output container name");

  auto* diag = app.add_subcommand("diagnose", "metric maps from fields and fits");
  swg::DiagnoseRequest request;
  long long trend_begin = -1;
  long long trend_length = 0;
  diag->add_flag("--moments,!--no-moments", request.moments,
                 "per-site moment z-maps");
  diag->add_flag("--contrasts,!--no-contrasts", request.contrasts,
                 "residual contrast variances");
  diag->add_option("--model-contrast-sims", request.model_contrast_sims,
                   "simulate model-implied contrasts with this many slices");
  diag->add_option("--trend-begin", trend_begin, "trend window start index");
  diag->add_option("--trend-length", trend_length, "trend window length");
  diag->add_flag("--gaussian-bic", request.gaussian_bic,
                 "per-site BIC delta against the Gaussian baseline");

  auto* wpd_cmd = app.add_subcommand("wpd", "wind power density table at a site");
  Eigen::Index lat_index = 0, lon_index = 0, month = 0;
  bool year = false;
  swg::WpdConfig wpd_config;
  wpd_cmd->add_option("--lat-index", lat_index, "latitude band index")->required();
  wpd_cmd->add_option("--lon-index", lon_index, "longitude index")->required();
  wpd_cmd->add_option("--month", month, "month index (window start with --year)")
      ->required();
  wpd_cmd->add_flag("--year", year, "emit all twelve months starting at --month");
  wpd_cmd->add_option("--air-density", wpd_config.air_density, "kg m^-3");
  wpd_cmd->add_option("--target-height", wpd_config.target_height_m, "m");
  wpd_cmd->add_option("--reference-height", wpd_config.reference_height_m, "m");
  wpd_cmd->add_option("--shear-exponent", wpd_config.shear_exponent, "power law");

  auto* synth = app.add_subcommand("synthetic", "generate a synthetic truth set");
  swg::TruthConfig truth;
  synth->add_option("--lat", truth.n_lat, "latitude bands");
  synth->add_option("--lon", truth.n_lon, "longitudes");
  synth->add_option("--time", truth.n_time, "time steps");
  synth->add_option("--runs", truth.n_real, "realizations");
  synth->add_option("--g-min", truth.g_min, "skewness ramp start");
  synth->add_option("--g-max", truth.g_max, "skewness ramp end");
  synth->add_option("--tail-weight", truth.h, "tail weight h");
  synth->add_option("--phi", truth.phi1, "AR(1) coefficient");
  synth->add_option("--land-fraction", truth.land_fraction, "land share per band");

  CLI11_PARSE(app, argc, argv);

  try {
    const swg::PipelineConfig config = resolve_config(config_path, overrides);
    if (step1->parsed()) {
      swg::run_step1(config);
    } else if (step2->parsed()) {
      swg::run_step2(config);
    } else if (step3->parsed()) {
      swg::run_step3(config);
    } else if (gen->parsed()) {
      const auto path = swg::run_generate(config, n_runs, gen_output);
      std::cout << path.string() << '\n';
    } else if (diag->parsed()) {
      if (trend_begin >= 0) {
        request.trend_begin = trend_begin;
        request.trend_length = trend_length;
      }
      for (const auto& path : swg::run_diagnose(config, request))
        std::cout << path.string() << '\n';
    } else if (wpd_cmd->parsed()) {
      const auto path =
          swg::run_wpd(config, lat_index, lon_index, month, year, wpd_config);
      std::cout << path.string() << '\n';
    } else if (synth->parsed()) {
      swg::run_synthetic(config, truth);
    }
  } catch (const swg::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const swg::data_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const swg::numeric_error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitOk;
}
