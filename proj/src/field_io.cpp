#include "swg/field_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace swg {

namespace {

using nlohmann::json;

void put_le_float(std::vector<char>& buf, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  buf.push_back(static_cast<char>(bits & 0xff));
  buf.push_back(static_cast<char>((bits >> 8) & 0xff));
  buf.push_back(static_cast<char>((bits >> 16) & 0xff));
  buf.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float get_le_float(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

json header_json(const GridSpec& spec, const std::string& variable) {
  json h;
  h["format"] = "swg-field";
  h["version"] = 1;
  h["variable"] = variable;
  h["byte_order"] = "little";
  h["dtype"] = "float32";
  h["n_real"] = spec.n_real;
  h["n_time"] = spec.n_time;
  h["n_lat"] = spec.n_lat;
  h["n_lon"] = spec.n_lon;
  h["lat_deg"] = std::vector<double>(spec.lat_deg.data(),
                                     spec.lat_deg.data() + spec.lat_deg.size());
  h["lon_deg"] = std::vector<double>(spec.lon_deg.data(),
                                     spec.lon_deg.data() + spec.lon_deg.size());
  h["time_labels"] = spec.time_labels;
  return h;
}

GridSpec spec_from_header(const json& h) {
  for (const char* key :
       {"format", "version", "variable", "byte_order", "dtype", "n_real", "n_time",
        "n_lat", "n_lon", "lat_deg", "lon_deg", "time_labels"})
    if (!h.contains(key))
      throw data_error(std::string("field header: missing key '") + key + "'");
  if (h["format"] != "swg-field") throw data_error("field header: unknown format tag");
  if (h["version"] != 1) throw data_error("field header: unsupported version");
  if (h["byte_order"] != "little") throw data_error("field header: unsupported byte order");
  if (h["dtype"] != "float32") throw data_error("field header: unsupported dtype");

  GridSpec spec;
  spec.n_real = h["n_real"].get<Eigen::Index>();
  spec.n_time = h["n_time"].get<Eigen::Index>();
  spec.n_lat = h["n_lat"].get<Eigen::Index>();
  spec.n_lon = h["n_lon"].get<Eigen::Index>();
  const auto lat = h["lat_deg"].get<std::vector<double>>();
  const auto lon = h["lon_deg"].get<std::vector<double>>();
  spec.lat_deg = Eigen::Map<const Eigen::VectorXd>(lat.data(),
                                                   static_cast<Eigen::Index>(lat.size()));
  spec.lon_deg = Eigen::Map<const Eigen::VectorXd>(lon.data(),
                                                   static_cast<Eigen::Index>(lon.size()));
  spec.time_labels = h["time_labels"].get<std::vector<std::string>>();
  spec.validate();
  return spec;
}

}  // namespace

void store_field(const EnsembleField& field, const std::filesystem::path& path,
                 const std::string& variable) {
  field.spec().validate();
  field.validate_finite();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("store_field: cannot open '" + path.string() + "'");

  const std::string header = header_json(field.spec(), variable).dump();
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.put('\n');

  const Eigen::Index count = field.values().size();
  std::vector<char> buf;
  buf.reserve(static_cast<std::size_t>(std::min<Eigen::Index>(count, 1 << 20)) * 4);
  for (Eigen::Index i = 0; i < count; ++i) {
    put_le_float(buf, static_cast<float>(field.values()[i]));
    if (buf.size() >= (1u << 22)) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  if (!buf.empty()) out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw data_error("store_field: write failed for '" + path.string() + "'");
}

EnsembleField load_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("load_field: cannot open '" + path.string() + "'");

  std::string header_line;
  if (!std::getline(in, header_line))
    throw data_error("load_field: missing header line");
  json h;
  try {
    h = json::parse(header_line);
  } catch (const json::exception& e) {
    throw data_error(std::string("load_field: malformed header: ") + e.what());
  }
  const GridSpec spec = spec_from_header(h);
  const Eigen::Index count = spec.cells();

  std::vector<unsigned char> payload(static_cast<std::size_t>(count) * 4);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size()));
  if (in.gcount() != static_cast<std::streamsize>(payload.size()))
    throw data_error("load_field: truncated payload in '" + path.string() + "'");
  char probe;
  if (in.read(&probe, 1), in.gcount() != 0)
    throw data_error("load_field: trailing bytes after payload");

  Eigen::ArrayXd values(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    const float v = get_le_float(payload.data() + static_cast<std::size_t>(i) * 4);
    if (!std::isfinite(v)) throw data_error("load_field: non-finite value in payload");
    values[i] = static_cast<double>(v);
  }
  return EnsembleField(spec, std::move(values));
}

void store_mask_csv(const GeoMask& mask, const std::filesystem::path& path) {
  mask.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("store_mask_csv: cannot open '" + path.string() + "'");
  out << "lat_index,lon_index,class,altitude_m\n";
  out.precision(17);
  for (Eigen::Index m = 0; m < mask.n_lat(); ++m)
    for (Eigen::Index n = 0; n < mask.n_lon(); ++n)
      out << m << ',' << n << ',' << to_string(mask.cls(m, n)) << ','
          << mask.altitude(m, n) << '\n';
  if (!out) throw data_error("store_mask_csv: write failed");
}

GeoMask load_mask_csv(const std::filesystem::path& path, Eigen::Index n_lat,
                      Eigen::Index n_lon) {
  std::ifstream in(path);
  if (!in) throw data_error("load_mask_csv: cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("lat_index,lon_index,class,altitude_m", 0) != 0)
    throw data_error("load_mask_csv: missing or unexpected header");

  GeoMask mask(n_lat, n_lon);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen(n_lat, n_lon);
  seen.setConstant(false);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string m_s, n_s, cls_s, alt_s;
    if (!std::getline(row, m_s, ',') || !std::getline(row, n_s, ',') ||
        !std::getline(row, cls_s, ',') || !std::getline(row, alt_s))
      throw data_error("load_mask_csv: malformed row '" + line + "'");
    const Eigen::Index m = std::stoll(m_s);
    const Eigen::Index n = std::stoll(n_s);
    if (m < 0 || m >= n_lat || n < 0 || n >= n_lon)
      throw data_error("load_mask_csv: index out of range in row '" + line + "'");
    mask.set(m, n, surface_class_from_string(cls_s), std::stod(alt_s));
    seen(m, n) = true;
  }
  if (!seen.all()) throw data_error("load_mask_csv: incomplete mask");
  mask.validate();
  return mask;
}

}  // namespace swg
