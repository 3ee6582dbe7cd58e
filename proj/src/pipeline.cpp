#include "swg/pipeline.hpp"

#include <Eigen/QR>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "swg/diagnostics.hpp"
#include "swg/field_io.hpp"
#include "swg/parallel.hpp"
#include "swg/params_io.hpp"
#include "swg/wpd.hpp"

namespace swg {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json config_to_json(const PipelineConfig& c) {
  json j;
  j["input_field"] = c.input_field;
  j["mask"] = c.mask;
  j["output_dir"] = c.output_dir;
  j["p_max"] = c.p_max;
  j["sub_model"] = c.sub_model;
  j["n_blocks"] = c.n_blocks;
  j["lambda"] = c.lambda;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["h_max"] = c.h_max;
  j["taper_dilate_max"] = c.taper_dilate_max;
  j["max_evals"] = c.max_evals;
  return j;
}

void config_from_json(const json& j, PipelineConfig& c) {
  c.input_field = j.value("input_field", c.input_field);
  c.mask = j.value("mask", c.mask);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.p_max = j.value("p_max", c.p_max);
  c.sub_model = j.value("sub_model", c.sub_model);
  c.n_blocks = j.value("n_blocks", c.n_blocks);
  c.lambda = j.value("lambda", c.lambda);
  c.seed = j.value("seed", c.seed);
  c.workers = j.value("workers", c.workers);
  c.h_max = j.value("h_max", c.h_max);
  c.taper_dilate_max = j.value("taper_dilate_max", c.taper_dilate_max);
  c.max_evals = j.value("max_evals", c.max_evals);
}

void require_file(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path))
    throw config_error("missing '" + path.string() + "' (" + hint + ")");
}

void write_manifest(const PipelineConfig& config, const std::string& command,
                    const std::vector<fs::path>& inputs,
                    const std::vector<std::string>& outputs) {
  json m;
  m["tool"] = "swg";
  m["command"] = command;
  m["config"] = config_to_json(config);
  m["config_hash"] = config_hash(config);
  m["seed"] = config.seed;
  json ins = json::array();
  for (const fs::path& p : inputs) {
    ins.push_back({{"path", p.string()},
                   {"bytes", fs::file_size(p)},
                   {"fnv1a64", file_hash_hex(p)}});
  }
  m["inputs"] = std::move(ins);
  m["outputs"] = outputs;
  const fs::path path = fs::path(config.output_dir) / (command + "_manifest.json");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw config_error("cannot write manifest '" + path.string() + "'");
  out << m.dump(2) << '\n';
}

SpectrumModel lon_model(const std::string& sub_model) {
  return sub_model == "LAO" ? SpectrumModel::no_altitude : SpectrumModel::full;
}

LatModel lat_model(const std::string& sub_model) {
  return sub_model == "ARL" ? LatModel::diagonal : LatModel::full;
}

// Residual stacks per band from the residual field, rows r-major over (r, k).
Eigen::MatrixXd band_stack(const EnsembleField& residuals, Eigen::Index band) {
  const GridSpec& spec = residuals.spec();
  Eigen::MatrixXd stack(spec.n_real * spec.n_time, spec.n_lon);
  for (Eigen::Index r = 0; r < spec.n_real; ++r)
    for (Eigen::Index k = 0; k < spec.n_time; ++k)
      stack.row(r * spec.n_time + k) =
          residuals.lon_row(r, k, band).matrix().transpose();
  return stack;
}

}  // namespace

void PipelineConfig::validate_common() const {
  if (output_dir.empty()) throw config_error("config: output_dir is required");
  if (p_max < 0) throw config_error("config: p_max must be >= 0");
  if (!(lambda > 0.0) || lambda > 1.0)
    throw config_error("config: lambda must lie in (0, 1]");
  if (n_blocks < 1) throw config_error("config: n_blocks must be >= 1");
  if (sub_model != "FULL" && sub_model != "LAO" && sub_model != "ARL" &&
      sub_model != "G-AR")
    throw config_error("config: sub_model must be FULL, LAO, ARL or G-AR");
  if (max_evals < 1) throw config_error("config: max_evals must be >= 1");
}

PipelineConfig default_config() { return PipelineConfig{}; }

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error(std::string("malformed config JSON: ") + e.what());
  }
  PipelineConfig c;
  config_from_json(j, c);
  return c;
}

void apply_override(PipelineConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw config_error("override must look like key=value: '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // plain string
  }
  json patch;
  patch[key] = value;
  json full = config_to_json(config);
  if (!full.contains(key)) throw config_error("unknown config key '" + key + "'");
  try {
    config_from_json(patch, config);
  } catch (const json::exception& e) {
    throw config_error("bad value for '" + key + "': " + e.what());
  }
}

std::string config_hash(const PipelineConfig& config) {
  const std::string dump = config_to_json(config).dump();
  std::uint64_t hash = 1469598103934665603ULL;
  for (const char ch : dump) {
    hash ^= static_cast<unsigned char>(ch);
    hash *= 1099511628211ULL;
  }
  std::ostringstream hex;
  hex << std::hex << hash;
  return hex.str();
}

void run_step1(const PipelineConfig& config) {
  config.validate_common();
  require_file(config.input_field, "input field container");
  fs::create_directories(config.output_dir);
  const fs::path out_dir(config.output_dir);

  const EnsembleField field = load_field(config.input_field);
  const GridSpec& spec = field.spec();
  if (spec.n_time <= config.p_max + 10)
    throw config_error("fit-step1: time axis too short for p_max");

  const EnsembleField mean = ensemble_mean(field);
  const EnsembleField devs = deviations(field, mean);
  const SmoothedMean smoothed = smooth_mean(mean, config.lambda);

  SiteFitOptions options;
  options.h_max = config.h_max;
  options.max_evals = config.max_evals;
  const bool gaussian = config.sub_model == "G-AR";

  const Eigen::Index n_sites = spec.n_lat * spec.n_lon;
  std::vector<SiteRecord> records(static_cast<std::size_t>(n_sites));
  const Eigen::Index k_res = spec.n_time - config.p_max;

  GridSpec res_spec = spec;
  res_spec.n_time = k_res;
  res_spec.time_labels.assign(spec.time_labels.begin() + config.p_max,
                              spec.time_labels.end());
  EnsembleField residuals(res_spec);

  parallel_for(n_sites, config.workers, [&](std::int64_t s) {
    const Eigen::Index m = s / spec.n_lon;
    const Eigen::Index n = s % spec.n_lon;
    const Eigen::MatrixXd series = devs.site_series_matrix(m, n);

    int best_p = 0;
    if (config.p_max > 0) {
      if (gaussian) {
        double best_bic = std::numeric_limits<double>::infinity();
        for (int p = 0; p <= config.p_max; ++p) {
          // common conditional sample keeps the BICs comparable
          Eigen::MatrixXd trimmed =
              series.rightCols(series.cols() - (config.p_max - p));
          const SiteFitResult fit = fit_site_gaussian(trimmed, p, options);
          if (fit.bic < best_bic) {
            best_bic = fit.bic;
            best_p = p;
          }
        }
      } else {
        best_p = select_order(series, config.p_max, options);
      }
    }
    const SiteFitResult fit = gaussian ? fit_site_gaussian(series, best_p, options)
                                       : fit_site(series, best_p, options);
    SiteRecord rec;
    rec.lat_index = m;
    rec.lon_index = n;
    rec.fit = fit;
    records[static_cast<std::size_t>(s)] = std::move(rec);

    const Eigen::MatrixXd res = site_residuals(series, fit);
    const Eigen::Index offset = res.cols() - k_res;  // keep the last k_res steps
    for (Eigen::Index r = 0; r < spec.n_real; ++r)
      for (Eigen::Index k = 0; k < k_res; ++k)
        residuals(r, k, m, n) = res(r, offset + k);
  });

  store_field(mean, out_dir / "mean.swg", "ensemble_mean");
  store_field(smoothed, out_dir / "smoothed_mean.swg", "smoothed_mean");
  store_field(residuals, out_dir / "residuals.swg", "residuals");

  SiteTable table;
  table.sub_model = gaussian ? "G-AR" : "FULL";
  table.p_max = config.p_max;
  table.h_max = config.h_max;
  table.sites = std::move(records);
  store_site_table(table, out_dir / "step1_params.json");

  write_manifest(config, "fit-step1", {config.input_field},
                 {"mean.swg", "smoothed_mean.swg", "residuals.swg",
                  "step1_params.json"});
}

void run_step2(const PipelineConfig& config) {
  config.validate_common();
  const fs::path out_dir(config.output_dir);
  require_file(out_dir / "residuals.swg", "produced by fit-step1; run it first");
  require_file(out_dir / "step1_params.json",
               "produced by fit-step1; run it first");
  require_file(config.mask, "surface mask CSV");

  const EnsembleField residuals = load_field(out_dir / "residuals.swg");
  const GridSpec& spec = residuals.spec();
  const GeoMask mask = load_mask_csv(config.mask, spec.n_lat, spec.n_lon);

  BandFitOptions options;
  options.max_evals = config.max_evals;
  options.taper_dilate_max = config.taper_dilate_max;
  const SpectrumModel model = lon_model(config.sub_model);

  std::vector<BandRecord> records(static_cast<std::size_t>(spec.n_lat));
  parallel_for(spec.n_lat, config.workers, [&](std::int64_t m) {
    const Eigen::MatrixXd stack = band_stack(residuals, m);
    BandRecord rec;
    rec.lat_index = m;
    rec.fit = fit_band(stack, mask, m, model, options);
    records[static_cast<std::size_t>(m)] = std::move(rec);
  });

  BandTable table;
  table.sub_model = model == SpectrumModel::no_altitude ? "LAO" : "FULL";
  table.bands = std::move(records);
  store_band_table(table, out_dir / "step2_params.json");

  write_manifest(config, "fit-step2",
                 {out_dir / "residuals.swg", out_dir / "step1_params.json",
                  config.mask},
                 {"step2_params.json"});
}

void run_step3(const PipelineConfig& config) {
  config.validate_common();
  const fs::path out_dir(config.output_dir);
  require_file(out_dir / "residuals.swg", "produced by fit-step1; run it first");
  require_file(out_dir / "step2_params.json",
               "produced by fit-step2; run it first");
  require_file(config.mask, "surface mask CSV");

  const EnsembleField residuals = load_field(out_dir / "residuals.swg");
  const GridSpec& spec = residuals.spec();
  if (spec.n_lat < 2)
    throw config_error("fit-step3: need at least two latitude bands");
  const GeoMask mask = load_mask_csv(config.mask, spec.n_lat, spec.n_lon);
  const BandTable band_table = load_band_table(out_dir / "step2_params.json");
  if (static_cast<Eigen::Index>(band_table.bands.size()) != spec.n_lat)
    throw data_error("fit-step3: step2 table does not cover the grid");

  // whiten: solve the band synthesis for the packed spectral coefficients
  std::vector<Eigen::MatrixXd> stacks(static_cast<std::size_t>(spec.n_lat));
  parallel_for(spec.n_lat, config.workers, [&](std::int64_t m) {
    const BandSpectrumParams& params =
        band_table.bands[static_cast<std::size_t>(m)].fit.params;
    const Eigen::MatrixXd synth =
        synthesis_matrix(build_spectrum(params, mask, m));
    const Eigen::MatrixXd stack = band_stack(residuals, m);
    // least-squares inversion, robust to taper-induced rank loss
    stacks[static_cast<std::size_t>(m)] =
        synth.colPivHouseholderQr().solve(stack.transpose()).transpose();
  });

  LatFitOptions options;
  options.max_evals = std::min(config.max_evals, 1200);
  const LatModel model = lat_model(config.sub_model);
  const std::vector<LatFitResult> fits =
      fit_lat(stacks, spec.n_time, spec.n_real, model, config.n_blocks, options);

  LatTable table;
  table.sub_model = model == LatModel::diagonal ? "ARL" : "FULL";
  table.n_blocks = config.n_blocks;
  for (Eigen::Index m = 1; m < spec.n_lat; ++m) {
    LatRecord rec;
    rec.lat_index = m;
    rec.fit = fits[static_cast<std::size_t>(m - 1)];
    table.bands.push_back(std::move(rec));
  }
  store_lat_table(table, out_dir / "step3_params.json");

  write_manifest(config, "fit-step3",
                 {out_dir / "residuals.swg", out_dir / "step2_params.json",
                  config.mask},
                 {"step3_params.json"});
}

std::filesystem::path run_generate(const PipelineConfig& config,
                                   Eigen::Index n_runs,
                                   const std::string& output_name) {
  config.validate_common();
  const fs::path out_dir(config.output_dir);
  require_file(out_dir / "step1_params.json",
               "produced by fit-step1; run it first");
  require_file(out_dir / "step2_params.json",
               "produced by fit-step2; run it first");
  require_file(out_dir / "step3_params.json",
               "produced by fit-step3; run it first");
  require_file(config.mask, "surface mask CSV");

  const ModelBundle bundle = load_bundle(out_dir, config.mask, config.seed);
  const EnsembleField runs = generate(bundle, n_runs, config.workers);
  const fs::path out_path = out_dir / output_name;
  store_field(runs, out_path, "wind_speed");

  write_manifest(config, "generate",
                 {out_dir / "step1_params.json", out_dir / "step2_params.json",
                  out_dir / "step3_params.json", out_dir / "smoothed_mean.swg",
                  config.mask},
                 {output_name});
  return out_path;
}

std::vector<std::filesystem::path> run_diagnose(const PipelineConfig& config,
                                                const DiagnoseRequest& request) {
  config.validate_common();
  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  std::vector<fs::path> inputs;

  if (request.moments || request.trend_begin || request.gaussian_bic) {
    require_file(config.input_field, "input field container");
    inputs.push_back(config.input_field);
    const EnsembleField field = load_field(config.input_field);
    const EnsembleField devs = deviations(field, ensemble_mean(field));
    const GridSpec& spec = field.spec();

    if (request.moments) {
      MetricMap z_skew, z_kurt;
      z_skew.values.setZero(spec.n_lat, spec.n_lon);
      z_kurt.values.setZero(spec.n_lat, spec.n_lon);
      for (Eigen::Index m = 0; m < spec.n_lat; ++m)
        for (Eigen::Index n = 0; n < spec.n_lon; ++n) {
          const MomentTest t = moment_tests(devs.site_series(0, m, n));
          z_skew.values(m, n) = t.z_skewness;
          z_kurt.values(m, n) = t.z_kurtosis;
        }
      store_metric_csv(z_skew, out_dir / "moments_zskew.csv");
      store_metric_csv(z_kurt, out_dir / "moments_zkurt.csv");
      written.push_back(out_dir / "moments_zskew.csv");
      written.push_back(out_dir / "moments_zkurt.csv");
    }

    if (request.trend_begin) {
      const auto maps =
          near_future_trend(field, *request.trend_begin, request.trend_length);
      for (std::size_t r = 0; r < maps.size(); ++r) {
        const fs::path path =
            out_dir / ("trend_run" + std::to_string(r) + ".csv");
        store_metric_csv(maps[r], path);
        written.push_back(path);
      }
    }

    if (request.gaussian_bic) {
      SiteFitOptions options;
      options.h_max = config.h_max;
      options.max_evals = config.max_evals;
      MetricMap delta;
      delta.values.setZero(spec.n_lat, spec.n_lon);
      const Eigen::Index n_sites = spec.n_lat * spec.n_lon;
      std::vector<double> cell(static_cast<std::size_t>(n_sites));
      parallel_for(n_sites, config.workers, [&](std::int64_t s) {
        const Eigen::MatrixXd series =
            devs.site_series_matrix(s / spec.n_lon, s % spec.n_lon);
        cell[static_cast<std::size_t>(s)] =
            bic_delta_gaussian(series, config.p_max, options);
      });
      for (Eigen::Index s = 0; s < n_sites; ++s)
        delta.values(s / spec.n_lon, s % spec.n_lon) =
            cell[static_cast<std::size_t>(s)];
      store_metric_csv(delta, out_dir / "bic_delta_gaussian.csv");
      written.push_back(out_dir / "bic_delta_gaussian.csv");
    }
  }

  if (request.contrasts) {
    require_file(out_dir / "residuals.swg", "produced by fit-step1; run it first");
    inputs.push_back(out_dir / "residuals.swg");
    const EnsembleField residuals = load_field(out_dir / "residuals.swg");
    const auto [ew, ns] = contrast_variances(residuals);
    store_metric_csv(ew, out_dir / "contrast_ew.csv");
    store_metric_csv(ns, out_dir / "contrast_ns.csv");
    written.push_back(out_dir / "contrast_ew.csv");
    written.push_back(out_dir / "contrast_ns.csv");
    // the east-west map has no missing cells, so it also ships as a container
    store_field(metric_map_field(ew, residuals.spec()),
                out_dir / "contrast_ew.swg", "contrast_ew");
    written.push_back(out_dir / "contrast_ew.swg");
  }

  if (request.model_contrast_sims > 0) {
    require_file(config.mask, "surface mask CSV");
    const ModelBundle bundle = load_bundle(out_dir, config.mask, config.seed);
    const auto [ew, ns] = model_contrast_variances(
        bundle, request.model_contrast_sims, config.seed + 1);
    store_metric_csv(ew, out_dir / "model_contrast_ew.csv");
    store_metric_csv(ns, out_dir / "model_contrast_ns.csv");
    written.push_back(out_dir / "model_contrast_ew.csv");
    written.push_back(out_dir / "model_contrast_ns.csv");
  }

  std::vector<std::string> names;
  names.reserve(written.size());
  for (const fs::path& p : written) names.push_back(p.filename().string());
  write_manifest(config, "diagnose", inputs, names);
  return written;
}

std::filesystem::path run_wpd(const PipelineConfig& config, Eigen::Index lat_index,
                              Eigen::Index lon_index, Eigen::Index month_begin,
                              bool year, const WpdConfig& wpd_config) {
  config.validate_common();
  require_file(config.input_field, "input field container");
  fs::create_directories(config.output_dir);
  const EnsembleField field = load_field(config.input_field);

  const Eigen::Index n_months = year ? 12 : 1;
  if (month_begin < 0 || month_begin + n_months > field.spec().n_time)
    throw config_error("wpd: month window outside the time axis");

  const fs::path path = fs::path(config.output_dir) / "wpd.csv";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw config_error("wpd: cannot open '" + path.string() + "'");
  out << "run_id,month,wpd\n";
  out.precision(17);
  for (Eigen::Index offset = 0; offset < n_months; ++offset) {
    const Eigen::Index month = month_begin + offset;
    const Eigen::VectorXd values =
        wpd_site_distribution(field, lat_index, lon_index, month, wpd_config);
    for (Eigen::Index r = 0; r < values.size(); ++r)
      out << r << ',' << field.spec().time_labels[static_cast<std::size_t>(month)]
          << ',' << values[r] << '\n';
  }
  out.close();

  write_manifest(config, "wpd", {config.input_field}, {"wpd.csv"});
  return path;
}

void run_synthetic(const PipelineConfig& config, const TruthConfig& truth_config) {
  config.validate_common();
  fs::create_directories(config.output_dir);
  const fs::path out_dir(config.output_dir);

  TruthConfig tc = truth_config;
  tc.seed = config.seed;
  const SyntheticTruth truth = generate_synthetic_truth(tc, config.workers);

  store_field(truth.field, out_dir / "truth_field.swg", "wind_speed");
  const fs::path mask_path =
      config.mask.empty() ? out_dir / "mask.csv" : fs::path(config.mask);
  const fs::path truth_dir = out_dir / "truth_bundle";
  store_bundle(truth.bundle, truth_dir, mask_path);

  write_manifest(config, "synthetic", {},
                 {"truth_field.swg", "mask.csv", "truth_bundle"});
}

}  // namespace swg
