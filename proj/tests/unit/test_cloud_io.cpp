#include <doctest.h>

#include <cmath>
#include <limits>

#include "test_util.hpp"
#include "tomo/cloud_io.hpp"
#include "tomo/errors.hpp"

using namespace tomo;

namespace {

PointCloud sample_cloud() {
  return PointCloud({{0.0, 0.0, 0.0}, {1.5, -2.25, 0.125}, {3.0, 4.0, -1.0}, {0.1f, 0.2f, 0.3f}});
}

}  // namespace

TEST_CASE("cloud bounds cover every point") {
  const auto c = sample_cloud();
  CHECK(c.size() == 4);
  CHECK(c.bounds().min.x == 0.0);
  CHECK(c.bounds().min.y == -2.25);
  CHECK(c.bounds().min.z == -1.0);
  CHECK(c.bounds().max.x == 3.0);
  CHECK(c.bounds().max.y == 4.0);
  CHECK(c.bounds().max.z == doctest::Approx(0.3f));
}

TEST_CASE("constructing a cloud with NaN throws") {
  CHECK_THROWS_AS(PointCloud({{0.0, std::nan(""), 0.0}}), InvalidArgument);
  CHECK_THROWS_AS(PointCloud({{std::numeric_limits<double>::infinity(), 0.0, 0.0}}), InvalidArgument);
}

TEST_CASE("every format round-trips the sample cloud") {
  TempDir dir;
  const auto c = sample_cloud();
  for (auto fmt : {CloudFormat::pcd_ascii, CloudFormat::pcd_binary, CloudFormat::ply_ascii, CloudFormat::xyz_text}) {
    CAPTURE(to_string(fmt));
    const auto path = dir / ("cloud." + std::string(to_string(fmt)));
    save_cloud(c, path, fmt);
    const auto back = load_cloud(path, fmt);
    REQUIRE(back.size() == c.size());
    for (std::size_t n = 0; n < c.size(); ++n) {
      // binary PCD is float32; the sample values are float-exact
      CHECK(back.points()[n].x == static_cast<float>(c.points()[n].x));
      CHECK(back.points()[n].y == static_cast<float>(c.points()[n].y));
      CHECK(back.points()[n].z == static_cast<float>(c.points()[n].z));
    }
  }
}

TEST_CASE("format names and extensions") {
  CHECK(parse_cloud_format("pcd_binary") == CloudFormat::pcd_binary);
  CHECK(parse_cloud_format("xyz_text") == CloudFormat::xyz_text);
  CHECK_THROWS_AS(parse_cloud_format("las"), InvalidArgument);
  CHECK(format_from_extension("a/b.pcd") == CloudFormat::pcd_binary);
  CHECK(format_from_extension("b.ply") == CloudFormat::ply_ascii);
  CHECK(format_from_extension("b.txt") == CloudFormat::xyz_text);
}

TEST_CASE("non-finite rows are dropped and counted") {
  TempDir dir;
  write_file(dir / "c.xyz", "0 0 0\nnan 1 1\n1 2 3\n4 inf 5\n");
  const auto c = load_cloud(dir / "c.xyz", CloudFormat::xyz_text);
  CHECK(c.size() == 2);
  CHECK(c.dropped_invalid() == 2);
}

TEST_CASE("extra PCD fields are skipped") {
  TempDir dir;
  write_file(dir / "c.pcd",
             "VERSION 0.7\nFIELDS intensity x y z\nSIZE 4 4 4 4\nTYPE F F F F\nCOUNT 1 1 1 1\nWIDTH 2\nHEIGHT 1\n"
             "POINTS 2\nDATA ascii\n9 1 2 3\n8 4 5 6\n");
  const auto c = load_cloud(dir / "c.pcd", CloudFormat::pcd_ascii);
  REQUIRE(c.size() == 2);
  CHECK(c.points()[1].x == 4.0);
  CHECK(c.points()[1].z == 6.0);
}

TEST_CASE("PLY with extra vertex properties and a face element") {
  TempDir dir;
  write_file(dir / "c.ply",
             "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n"
             "property uchar red\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n"
             "1 2 3 255\n4 5 6 0\n");
  const auto c = load_cloud(dir / "c.ply", CloudFormat::ply_ascii);
  REQUIRE(c.size() == 2);
  CHECK(c.points()[0].y == 2.0);
}

TEST_CASE("malformed inputs raise FormatError") {
  TempDir dir;
  write_file(dir / "empty.xyz", "");
  CHECK_THROWS_AS(load_cloud(dir / "empty.xyz", CloudFormat::xyz_text), FormatError);
  write_file(dir / "short.xyz", "1 2\n");
  CHECK_THROWS_AS(load_cloud(dir / "short.xyz", CloudFormat::xyz_text), FormatError);
  write_file(dir / "word.xyz", "1 2 abc\n");
  CHECK_THROWS_AS(load_cloud(dir / "word.xyz", CloudFormat::xyz_text), FormatError);
  write_file(dir / "nox.pcd", "FIELDS a b c\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\nPOINTS 1\nDATA ascii\n1 2 3\n");
  CHECK_THROWS_AS(load_cloud(dir / "nox.pcd", CloudFormat::pcd_ascii), FormatError);
  write_file(dir / "trunc.pcd", "FIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\nPOINTS 3\nDATA binary\nabcd");
  CHECK_THROWS_AS(load_cloud(dir / "trunc.pcd", CloudFormat::pcd_binary), FormatError);
  write_file(dir / "bad.ply", "not a ply\n");
  CHECK_THROWS_AS(load_cloud(dir / "bad.ply", CloudFormat::ply_ascii), FormatError);
  write_file(dir / "allnan.xyz", "nan 0 0\n");
  CHECK_THROWS_AS(load_cloud(dir / "allnan.xyz", CloudFormat::xyz_text), FormatError);
}

TEST_CASE("missing file raises IoError") {
  TempDir dir;
  CHECK_THROWS_AS(load_cloud(dir / "absent.pcd", CloudFormat::pcd_binary), IoError);
}
