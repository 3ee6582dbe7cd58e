#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "swg/errors.hpp"
#include "swg/field_io.hpp"
#include "swg/grid.hpp"
#include "swg/rng.hpp"

using namespace swg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("swg_io_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

// Payload is float32, so round-trip fixtures carry float-representable values.
EnsembleField float_valued_field(const GridSpec& spec, std::uint64_t seed) {
  EnsembleField f(spec);
  CounterRng rng(seed, 17);
  for (Eigen::Index i = 0; i < f.values().size(); ++i)
    f.values()[i] = static_cast<double>(static_cast<float>(rng.next_normal() * 10.0));
  return f;
}

}  // namespace

TEST_CASE("field container round trip is bit exact") {
  TempDir tmp;
  const fs::path file = tmp.path / "field.swg";
  const GridSpec spec = GridSpec::uniform(4, 8, 12, 3);
  const EnsembleField f = float_valued_field(spec, 11);
  store_field(f, file, "wind_speed");
  const EnsembleField g = load_field(file);
  REQUIRE(g.values().size() == f.values().size());
  CHECK((g.values() == f.values()).all());
  CHECK(g.spec().same_geometry(f.spec()));
  CHECK(g.spec().n_real == f.spec().n_real);

  // store(load(x)) reproduces the file bytes exactly
  const fs::path file2 = tmp.path / "field2.swg";
  store_field(g, file2, "wind_speed");
  std::ifstream a(file, std::ios::binary), b(file2, std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
  const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
  CHECK(bytes_a == bytes_b);
}

TEST_CASE("field container rejects structural problems") {
  TempDir tmp;
  const fs::path file = tmp.path / "field.swg";
  const EnsembleField f = float_valued_field(GridSpec::uniform(2, 4, 3, 2), 12);
  store_field(f, file);

  SUBCASE("zero dimension in header") {
    std::ifstream in(file, std::ios::binary);
    std::string header;
    std::getline(in, header);
    const auto pos = header.find("\"n_lon\":4");
    REQUIRE(pos != std::string::npos);
    header.replace(pos, 9, "\"n_lon\":0");
    std::ofstream out(tmp.path / "bad.swg", std::ios::binary);
    out << header << '\n';
    CHECK_THROWS_AS(load_field(tmp.path / "bad.swg"), data_error);
  }

  SUBCASE("truncated payload") {
    const auto size = fs::file_size(file);
    fs::resize_file(file, size - 5);
    CHECK_THROWS_AS(load_field(file), data_error);
  }

  SUBCASE("trailing bytes") {
    std::ofstream out(file, std::ios::binary | std::ios::app);
    out << "xx";
    out.close();
    CHECK_THROWS_AS(load_field(file), data_error);
  }

  SUBCASE("malformed header") {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << "{not json\n";
    out.close();
    CHECK_THROWS_AS(load_field(file), data_error);
  }

  SUBCASE("missing key") {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << "{\"format\":\"swg-field\"}\n";
    out.close();
    CHECK_THROWS_AS(load_field(file), data_error);
  }
}

TEST_CASE("mask CSV round trip") {
  TempDir tmp;
  Eigen::MatrixXd alt(3, 4);
  alt.setZero();
  alt(1, 1) = 450.0;
  alt(1, 2) = 1800.0;
  alt(2, 3) = -30.0;
  const GeoMask mask = GeoMask::from_altitude(alt);
  const fs::path file = tmp.path / "mask.csv";
  store_mask_csv(mask, file);
  const GeoMask loaded = load_mask_csv(file, 3, 4);
  for (Eigen::Index m = 0; m < 3; ++m)
    for (Eigen::Index n = 0; n < 4; ++n) {
      CHECK(loaded.cls(m, n) == mask.cls(m, n));
      CHECK(loaded.altitude(m, n) == mask.altitude(m, n));
    }
}

TEST_CASE("mask CSV rejects incomplete tables") {
  TempDir tmp;
  const fs::path file = tmp.path / "mask.csv";
  {
    std::ofstream out(file);
    out << "lat_index,lon_index,class,altitude_m\n";
    out << "0,0,ocean,0\n";  // 2x2 mask needs four rows
  }
  CHECK_THROWS_AS(load_mask_csv(file, 2, 2), data_error);
}
