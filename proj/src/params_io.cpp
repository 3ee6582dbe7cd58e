#include "swg/params_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "swg/field_io.hpp"

namespace swg {

namespace {

using nlohmann::json;

json load_json(const std::filesystem::path& path, const char* who) {
  std::ifstream in(path);
  if (!in)
    throw config_error(std::string(who) + ": cannot open '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw data_error(std::string(who) + ": malformed JSON in '" + path.string() +
                     "': " + e.what());
  }
  return doc;
}

void dump_json(const json& doc, const std::filesystem::path& path, const char* who) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw config_error(std::string(who) + ": cannot open '" + path.string() + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw data_error(std::string(who) + ": write failed");
}

void require_module(const json& doc, const std::string& module, const char* who) {
  if (!doc.contains("module") || doc["module"] != module)
    throw data_error(std::string(who) + ": document is not a '" + module +
                     "' table");
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

std::vector<double> to_std(const Eigen::Vector3d& v) {
  return {v.data(), v.data() + 3};
}

Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void store_site_table(const SiteTable& table, const std::filesystem::path& path) {
  json doc;
  doc["module"] = "tgh_ar";
  doc["sub_model"] = table.sub_model;
  doc["p_max"] = table.p_max;
  doc["h_max"] = table.h_max;
  json sites = json::array();
  for (const SiteRecord& rec : table.sites) {
    json s;
    s["lat_index"] = rec.lat_index;
    s["lon_index"] = rec.lon_index;
    s["xi"] = rec.fit.tukey.xi;
    s["omega"] = rec.fit.tukey.omega;
    s["g"] = rec.fit.tukey.g;
    s["h"] = rec.fit.tukey.h;
    s["p"] = rec.fit.temporal.p;
    s["phi"] = to_std(rec.fit.temporal.phi);
    s["innovation_sd"] = rec.fit.temporal.innovation_sd;
    s["loglik"] = rec.fit.loglik;
    s["bic"] = rec.fit.bic;
    s["n_obs"] = rec.fit.n_obs;
    s["n_params"] = rec.fit.n_params;
    sites.push_back(std::move(s));
  }
  doc["sites"] = std::move(sites);
  dump_json(doc, path, "store_site_table");
}

SiteTable load_site_table(const std::filesystem::path& path) {
  const json doc = load_json(path, "load_site_table");
  require_module(doc, "tgh_ar", "load_site_table");
  SiteTable table;
  table.sub_model = doc.value("sub_model", "FULL");
  table.p_max = doc.value("p_max", 0);
  table.h_max = doc.value("h_max", kTukeyHMax);
  for (const json& s : doc.at("sites")) {
    SiteRecord rec;
    rec.lat_index = s.at("lat_index").get<Eigen::Index>();
    rec.lon_index = s.at("lon_index").get<Eigen::Index>();
    rec.fit.tukey.xi = s.at("xi").get<double>();
    rec.fit.tukey.omega = s.at("omega").get<double>();
    rec.fit.tukey.g = s.at("g").get<double>();
    rec.fit.tukey.h = s.at("h").get<double>();
    rec.fit.temporal.p = s.at("p").get<int>();
    rec.fit.temporal.phi = from_std(s.at("phi").get<std::vector<double>>());
    rec.fit.temporal.innovation_sd = s.at("innovation_sd").get<double>();
    rec.fit.loglik = s.at("loglik").get<double>();
    rec.fit.bic = s.at("bic").get<double>();
    rec.fit.n_obs = s.at("n_obs").get<Eigen::Index>();
    rec.fit.n_params = s.at("n_params").get<int>();
    rec.fit.tukey.validate(table.h_max);
    rec.fit.temporal.validate();
    table.sites.push_back(std::move(rec));
  }
  return table;
}

void store_band_table(const BandTable& table, const std::filesystem::path& path) {
  json doc;
  doc["module"] = "lon_spectrum";
  doc["sub_model"] = table.sub_model;
  json bands = json::array();
  for (const BandRecord& rec : table.bands) {
    json b;
    b["lat_index"] = rec.lat_index;
    b["beta_variance"] = to_std(rec.fit.params.beta_variance);
    b["beta_inverse_range"] = to_std(rec.fit.params.beta_inverse_range);
    b["beta_smoothness"] = to_std(rec.fit.params.beta_smoothness);
    b["gamma_variance"] = rec.fit.params.gamma_variance;
    b["gamma_inverse_range"] = rec.fit.params.gamma_inverse_range;
    b["gamma_smoothness"] = rec.fit.params.gamma_smoothness;
    b["taper_dilate"] = rec.fit.params.taper_dilate;
    b["taper_halfwidth"] = rec.fit.params.taper_halfwidth;
    b["loglik"] = rec.fit.loglik;
    b["n_replicates"] = rec.fit.n_replicates;
    bands.push_back(std::move(b));
  }
  doc["bands"] = std::move(bands);
  dump_json(doc, path, "store_band_table");
}

BandTable load_band_table(const std::filesystem::path& path) {
  const json doc = load_json(path, "load_band_table");
  require_module(doc, "lon_spectrum", "load_band_table");
  BandTable table;
  table.sub_model = doc.value("sub_model", "FULL");
  for (const json& b : doc.at("bands")) {
    BandRecord rec;
    rec.lat_index = b.at("lat_index").get<Eigen::Index>();
    const auto bv = b.at("beta_variance").get<std::vector<double>>();
    const auto br = b.at("beta_inverse_range").get<std::vector<double>>();
    const auto bs = b.at("beta_smoothness").get<std::vector<double>>();
    if (bv.size() != 3 || br.size() != 3 || bs.size() != 3)
      throw data_error("load_band_table: beta arrays must have length 3");
    for (int j = 0; j < 3; ++j) {
      rec.fit.params.beta_variance[j] = bv[static_cast<std::size_t>(j)];
      rec.fit.params.beta_inverse_range[j] = br[static_cast<std::size_t>(j)];
      rec.fit.params.beta_smoothness[j] = bs[static_cast<std::size_t>(j)];
    }
    rec.fit.params.gamma_variance = b.at("gamma_variance").get<double>();
    rec.fit.params.gamma_inverse_range = b.at("gamma_inverse_range").get<double>();
    rec.fit.params.gamma_smoothness = b.at("gamma_smoothness").get<double>();
    rec.fit.params.taper_dilate = b.at("taper_dilate").get<int>();
    rec.fit.params.taper_halfwidth = b.at("taper_halfwidth").get<double>();
    rec.fit.loglik = b.at("loglik").get<double>();
    rec.fit.n_replicates = b.at("n_replicates").get<Eigen::Index>();
    rec.fit.model = table.sub_model == "LAO" ? SpectrumModel::no_altitude
                                             : SpectrumModel::full;
    rec.fit.params.validate();
    table.bands.push_back(std::move(rec));
  }
  return table;
}

void store_lat_table(const LatTable& table, const std::filesystem::path& path) {
  json doc;
  doc["module"] = "lat_var";
  doc["sub_model"] = table.sub_model;
  doc["n_blocks"] = table.n_blocks;
  json bands = json::array();
  for (const LatRecord& rec : table.bands) {
    json b;
    b["lat_index"] = rec.lat_index;
    b["a"] = rec.fit.averaged.a;
    b["b"] = rec.fit.averaged.b;
    b["zeta"] = rec.fit.averaged.zeta;
    b["eta"] = rec.fit.averaged.eta;
    b["loglik"] = rec.fit.loglik;
    json blocks = json::array();
    for (const LatVarParams& p : rec.fit.per_block)
      blocks.push_back({{"a", p.a}, {"b", p.b}, {"zeta", p.zeta}, {"eta", p.eta}});
    b["per_block_estimates"] = std::move(blocks);
    bands.push_back(std::move(b));
  }
  doc["bands"] = std::move(bands);
  dump_json(doc, path, "store_lat_table");
}

LatTable load_lat_table(const std::filesystem::path& path) {
  const json doc = load_json(path, "load_lat_table");
  require_module(doc, "lat_var", "load_lat_table");
  LatTable table;
  table.sub_model = doc.value("sub_model", "FULL");
  table.n_blocks = doc.value("n_blocks", 10);
  for (const json& b : doc.at("bands")) {
    LatRecord rec;
    rec.lat_index = b.at("lat_index").get<Eigen::Index>();
    rec.fit.averaged.a = b.at("a").get<double>();
    rec.fit.averaged.b = b.at("b").get<double>();
    rec.fit.averaged.zeta = b.at("zeta").get<double>();
    rec.fit.averaged.eta = b.at("eta").get<double>();
    rec.fit.loglik = b.at("loglik").get<double>();
    for (const json& blk : b.at("per_block_estimates")) {
      LatVarParams p;
      p.a = blk.at("a").get<double>();
      p.b = blk.at("b").get<double>();
      p.zeta = blk.at("zeta").get<double>();
      p.eta = blk.at("eta").get<double>();
      rec.fit.per_block.push_back(p);
    }
    rec.fit.averaged.validate();
    table.bands.push_back(std::move(rec));
  }
  return table;
}

ModelBundle load_bundle(const std::filesystem::path& dir,
                        const std::filesystem::path& mask_path,
                        std::uint64_t rng_seed) {
  const auto mean_path = dir / "smoothed_mean.swg";
  if (!std::filesystem::exists(mean_path))
    throw config_error("load_bundle: missing smoothed_mean.swg in '" +
                       dir.string() + "' (run fit-step1 first)");
  ModelBundle bundle;
  bundle.smoothed_mean = load_field(mean_path);
  bundle.grid = bundle.smoothed_mean.spec();
  bundle.mask = load_mask_csv(mask_path, bundle.grid.n_lat, bundle.grid.n_lon);
  bundle.rng_seed = rng_seed;

  const SiteTable site_table = load_site_table(dir / "step1_params.json");
  if (static_cast<Eigen::Index>(site_table.sites.size()) !=
      bundle.grid.n_lat * bundle.grid.n_lon)
    throw data_error("load_bundle: site table does not cover the grid");
  bundle.sites.resize(site_table.sites.size());
  std::vector<bool> seen_site(site_table.sites.size(), false);
  for (const SiteRecord& rec : site_table.sites) {
    if (rec.lat_index < 0 || rec.lat_index >= bundle.grid.n_lat ||
        rec.lon_index < 0 || rec.lon_index >= bundle.grid.n_lon)
      throw data_error("load_bundle: site index out of range");
    const auto flat =
        static_cast<std::size_t>(rec.lat_index * bundle.grid.n_lon + rec.lon_index);
    if (seen_site[flat]) throw data_error("load_bundle: duplicate site record");
    seen_site[flat] = true;
    bundle.sites[flat] = SiteParams{rec.fit.tukey, rec.fit.temporal};
  }

  const BandTable band_table = load_band_table(dir / "step2_params.json");
  if (static_cast<Eigen::Index>(band_table.bands.size()) != bundle.grid.n_lat)
    throw data_error("load_bundle: band table does not cover the grid");
  bundle.bands.resize(band_table.bands.size());
  std::vector<bool> seen_band(band_table.bands.size(), false);
  for (const BandRecord& rec : band_table.bands) {
    if (rec.lat_index < 0 || rec.lat_index >= bundle.grid.n_lat)
      throw data_error("load_bundle: band index out of range");
    const auto flat = static_cast<std::size_t>(rec.lat_index);
    if (seen_band[flat]) throw data_error("load_bundle: duplicate band record");
    seen_band[flat] = true;
    bundle.bands[flat] = rec.fit.params;
  }

  const LatTable lat_table = load_lat_table(dir / "step3_params.json");
  if (static_cast<Eigen::Index>(lat_table.bands.size()) != bundle.grid.n_lat - 1)
    throw data_error("load_bundle: coupling table does not cover the grid");
  bundle.lat_coupling.resize(lat_table.bands.size());
  std::vector<bool> seen_lat(lat_table.bands.size(), false);
  for (const LatRecord& rec : lat_table.bands) {
    if (rec.lat_index < 1 || rec.lat_index >= bundle.grid.n_lat)
      throw data_error("load_bundle: coupling index out of range");
    const auto flat = static_cast<std::size_t>(rec.lat_index - 1);
    if (seen_lat[flat]) throw data_error("load_bundle: duplicate coupling record");
    seen_lat[flat] = true;
    bundle.lat_coupling[flat] = rec.fit.averaged;
  }

  bundle.validate();
  return bundle;
}

void store_bundle(const ModelBundle& bundle, const std::filesystem::path& dir,
                  const std::filesystem::path& mask_path) {
  bundle.validate();
  std::filesystem::create_directories(dir);
  store_field(bundle.smoothed_mean, dir / "smoothed_mean.swg", "smoothed_mean");
  store_mask_csv(bundle.mask, mask_path);

  SiteTable site_table;
  for (Eigen::Index m = 0; m < bundle.grid.n_lat; ++m)
    for (Eigen::Index n = 0; n < bundle.grid.n_lon; ++n) {
      SiteRecord rec;
      rec.lat_index = m;
      rec.lon_index = n;
      rec.fit.tukey = bundle.site(m, n).tukey;
      rec.fit.temporal = bundle.site(m, n).temporal;
      rec.fit.n_params = 4 + rec.fit.temporal.p + 1;
      site_table.p_max = std::max(site_table.p_max, rec.fit.temporal.p);
      site_table.sites.push_back(std::move(rec));
    }
  store_site_table(site_table, dir / "step1_params.json");

  BandTable band_table;
  for (Eigen::Index m = 0; m < bundle.grid.n_lat; ++m) {
    BandRecord rec;
    rec.lat_index = m;
    rec.fit.params = bundle.bands[static_cast<std::size_t>(m)];
    band_table.bands.push_back(std::move(rec));
  }
  store_band_table(band_table, dir / "step2_params.json");

  LatTable lat_table;
  lat_table.n_blocks = 1;
  for (Eigen::Index m = 1; m < bundle.grid.n_lat; ++m) {
    LatRecord rec;
    rec.lat_index = m;
    rec.fit.averaged = bundle.lat_coupling[static_cast<std::size_t>(m - 1)];
    rec.fit.per_block = {rec.fit.averaged};
    lat_table.bands.push_back(std::move(rec));
  }
  store_lat_table(lat_table, dir / "step3_params.json");
}

std::string file_hash_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("file_hash_hex: cannot open '" + path.string() + "'");
  std::uint64_t hash = 1469598103934665603ULL;  // FNV-1a offset basis
  char buffer[65536];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 1099511628211ULL;
    }
    if (got < static_cast<std::streamsize>(sizeof(buffer))) break;
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << hash;
  return hex.str();
}

}  // namespace swg
