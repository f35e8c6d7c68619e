#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cfreg/io.hpp"
#include "support.hpp"

using namespace cfreg;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "cfreg_io_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string error_of(const std::string& content) {
  try {
    parse_cloud(content, "mem");
  } catch (const FormatError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("ascii PLY fixture with extra properties and elements") {
  const auto c = read_cloud(test::fixture("grid9_ascii.ply"));
  REQUIRE(c.size() == 9);
  CHECK(c[0] == Point3(0, 0, 0));
  CHECK((c[8] - Point3(0.2, 0.2, 0.0)).norm() < 1e-7);
}

TEST_CASE("xyz with comments, blank lines and commas") {
  const auto c = read_cloud(test::fixture("tetra.xyz"));
  REQUIRE(c.size() == 4);
  CHECK(c[3] == Point3(0, 0, 1));
}

TEST_CASE("binary and ascii round trips are exact") {
  const auto cloud = test::random_cloud(100000, 3, 7.0);
  for (auto fmt : {CloudFormat::ply_binary_le, CloudFormat::ply_ascii, CloudFormat::xyz}) {
    const auto path = temp_file("round." + std::to_string(int(fmt)));
    write_cloud(cloud, path, fmt);
    CHECK(read_cloud(path) == cloud);
  }
}

TEST_CASE("empty clouds") {
  const auto path = temp_file("empty.ply");
  write_cloud({}, path, CloudFormat::ply_binary_le);
  CHECK(read_cloud(path).empty());
  CHECK(parse_cloud("").empty());
}

TEST_CASE("format from extension") {
  CHECK(format_from_extension("a.ply") == CloudFormat::ply_binary_le);
  CHECK(format_from_extension("a.xyz") == CloudFormat::xyz);
  CHECK(format_from_extension("a.txt") == CloudFormat::xyz);
}

TEST_CASE("distinct, located errors") {
  CHECK_THROWS_AS(read_cloud(temp_file("does_not_exist.ply")), IoError);
  const auto truncated = [] {
    try {
      read_cloud(test::fixture("truncated_binary.ply"));
    } catch (const FormatError& e) {
      return std::string(e.what());
    }
    return std::string();
  }();
  CHECK(truncated.find("truncated") != std::string::npos);
  CHECK(truncated.find("byte") != std::string::npos);

  const auto bad = [] {
    try {
      read_cloud(test::fixture("bad_count.xyz"));
    } catch (const FormatError& e) {
      return std::string(e.what());
    }
    return std::string();
  }();
  CHECK(bad.find("line 2") != std::string::npos);

  const std::string header =
      "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
      "property float z\nend_header\n";
  CHECK(error_of(header + "0 0 0\n").find("truncated") != std::string::npos);
  CHECK(error_of(header + "0 0 0\n1 1 1\n2 2 2\n").find("count mismatch") != std::string::npos);
  CHECK(error_of(header + "0 0 0\n1 x 1\n") != "");
  CHECK(error_of("ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n") != "");
  CHECK(error_of("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n") != "");
  CHECK(error_of("ply\nformat ascii 1.0\nelement vertex 1\n") != "");
}

TEST_CASE("PLY property types are converted") {
  std::string ply =
      "ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty short x\n"
      "property uint y\nproperty float z\nproperty list uchar int idx\nend_header\n";
  const std::int16_t x = -3;
  const std::uint32_t y = 70000;
  const float z = 0.5f;
  const std::uint8_t n = 2;
  const std::int32_t idx[2] = {1, 2};
  ply.append(reinterpret_cast<const char*>(&x), 2);
  ply.append(reinterpret_cast<const char*>(&y), 4);
  ply.append(reinterpret_cast<const char*>(&z), 4);
  ply.append(reinterpret_cast<const char*>(&n), 1);
  ply.append(reinterpret_cast<const char*>(idx), 8);
  const auto c = parse_cloud(ply);
  REQUIRE(c.size() == 1);
  CHECK(c[0] == Point3(-3, 70000, 0.5));
}

TEST_CASE("transform text round trip") {
  const auto t = test::random_transform(5);
  const auto back = parse_transform(format_transform(t));
  CHECK(back.matrix() == t.matrix());
  const auto path = temp_file("t.txt");
  write_transform(t, path);
  CHECK(read_transform(path).matrix() == t.matrix());
  CHECK_THROWS_AS(parse_transform("1 0 0"), FormatError);
}

TEST_CASE("diagnostics are valid JSON") {
  RegistrationResult r;
  r.algorithm = "cf";
  r.weight_sum = 3.5;
  const auto j = nlohmann::json::parse(diagnostics_json(r));
  CHECK(j["algorithm"] == "cf");
  CHECK(j["weight_sum"] == 3.5);
}

TEST_CASE("descriptor and normal CSV shapes") {
  const auto cloud = test::random_cloud(20, 2);
  const auto n = estimate_normals(cloud, 5);
  const auto d = compute_fpfh(cloud, n, 5);
  std::ostringstream nc, dc;
  write_normals_csv(nc, cloud, n);
  write_descriptors_csv(dc, d);
  std::istringstream ns(nc.str()), ds(dc.str());
  std::string line;
  std::size_t lines = 0;
  std::getline(ds, line);
  CHECK(line.starts_with("alpha_0,"));
  CHECK(std::count(line.begin(), line.end(), ',') == kDescriptorSize - 1);
  while (std::getline(ds, line)) ++lines;
  CHECK(lines == 20);
  lines = 0;
  while (std::getline(ns, line)) ++lines;
  CHECK(lines == 21);
}
