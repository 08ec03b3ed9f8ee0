#include <array>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "rgbd/imagery.hpp"

using namespace rgbd;

namespace {

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string pgm16(int w, int h, const std::vector<uint16_t>& mm) {
  std::string s = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n65535\n";
  for (uint16_t v : mm) {
    s.push_back(static_cast<char>(v >> 8));
    s.push_back(static_cast<char>(v & 0xff));
  }
  return s;
}

}  // namespace

TEST_CASE("load_depth converts millimeters and flags the zero sentinel") {
  std::string path = test::scratch_path("depth") + ".pgm";
  write_bytes(path, pgm16(2, 1, {1500, 0}));
  DepthMap d = load_depth(path);
  CHECK(d.width == 2);
  CHECK(d.height == 1);
  CHECK(d.valid[0] == 1);
  CHECK(d.values[0] == doctest::Approx(1.5));
  CHECK(d.valid[1] == 0);
}

TEST_CASE("depth round-trip preserves values to 1 mm") {
  std::mt19937_64 rng(11);
  DepthMap d = test::random_depth_map(37, 23, rng);
  std::string path = test::scratch_path("depth_rt") + ".pgm";
  save_depth(d, path);
  DepthMap back = load_depth(path);
  REQUIRE(back.width == d.width);
  for (size_t i = 0; i < d.pixel_count(); ++i) {
    CHECK(back.valid[i] == d.valid[i]);
    if (d.valid[i]) CHECK(std::abs(back.values[i] - d.values[i]) <= 0.0005 + 1e-12);
  }
}

TEST_CASE("load_depth rejects malformed input") {
  std::string path = test::scratch_path("bad") + ".pgm";
  SUBCASE("wrong magic") {
    write_bytes(path, "P2\n2 1\n65535\n....");
    CHECK_THROWS_AS(load_depth(path), DataError);
  }
  SUBCASE("unsupported maxval") {
    write_bytes(path, "P5\n2 1\n255\nab");
    CHECK_THROWS_AS(load_depth(path), DataError);
  }
  SUBCASE("truncated payload") {
    std::string s = pgm16(4, 4, std::vector<uint16_t>(16, 100));
    s.resize(s.size() - 5);
    write_bytes(path, s);
    CHECK_THROWS_AS(load_depth(path), DataError);
  }
  SUBCASE("garbage header") {
    write_bytes(path, "P5\nxx yy\n65535\n");
    CHECK_THROWS_AS(load_depth(path), DataError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_depth(path + ".nope"), DataError); }
}

TEST_CASE("scale_to_bytes endpoints, midpoint, constants, invalids") {
  PropertyMap m = PropertyMap::create(3, 1, MapKind::Other);
  m.values = {2, 4, 6};
  m.valid = {1, 1, 1};
  ByteMap b = scale_to_bytes(m);
  CHECK(b.values[0] == 0);
  CHECK(b.values[1] == 128);
  CHECK(b.values[2] == 255);

  SUBCASE("constant map maps to 128") {
    PropertyMap c = PropertyMap::create(2, 2, MapKind::Other);
    c.values = {7, 7, 7, 7};
    c.valid = {1, 1, 1, 0};
    ByteMap cb = scale_to_bytes(c);
    CHECK(cb.values[0] == 128);
    CHECK(cb.values[1] == 128);
    CHECK(cb.values[2] == 128);
    CHECK(cb.values[3] == 0);  // invalid pixel
  }
  SUBCASE("zero valid pixels is an error") {
    PropertyMap none = PropertyMap::create(2, 2, MapKind::Other);
    CHECK_THROWS_AS(scale_to_bytes(none), DataError);
  }
  SUBCASE("explicit range clamps and fixes the mapping") {
    ByteMap e = scale_to_bytes(m, ScaleRange{0.0, 8.0});
    CHECK(e.values[0] == 64);   // 2/8
    CHECK(e.values[1] == 128);  // 4/8
    CHECK(e.values[2] == 191);  // 6/8 -> 191.25 rounds down
    ByteMap clamped = scale_to_bytes(m, ScaleRange{3.0, 5.0});
    CHECK(clamped.values[0] == 0);
    CHECK(clamped.values[2] == 255);
  }
}

TEST_CASE("scale_to_bytes is monotone and hits 0/255 on random maps") {
  std::mt19937_64 rng(5);
  for (int iter = 0; iter < 20; ++iter) {
    PropertyMap m = test::random_property_map(24, 18, rng);
    if (m.valid_count() < 2) continue;
    ByteMap b = scale_to_bytes(m);
    uint8_t lo = 255, hi = 0;
    for (size_t i = 0; i < m.pixel_count(); ++i) {
      if (!m.valid[i]) continue;
      lo = std::min(lo, b.values[i]);
      hi = std::max(hi, b.values[i]);
      for (size_t j = i + 1; j < m.pixel_count(); ++j) {
        if (!m.valid[j]) continue;
        if (m.values[i] <= m.values[j]) CHECK(b.values[i] <= b.values[j]);
      }
    }
    CHECK(lo == 0);
    CHECK(hi == 255);
  }
}

TEST_CASE("scale_to_bytes applied twice moves each byte at most 1") {
  std::mt19937_64 rng(6);
  PropertyMap m = test::random_property_map(32, 20, rng);
  ByteMap once = scale_to_bytes(m);
  PropertyMap reinterpreted = PropertyMap::create(m.width, m.height, MapKind::Other);
  reinterpreted.valid = m.valid;
  for (size_t i = 0; i < m.pixel_count(); ++i) reinterpreted.values[i] = once.values[i];
  ByteMap twice = scale_to_bytes(reinterpreted);
  for (size_t i = 0; i < m.pixel_count(); ++i)
    if (m.valid[i]) CHECK(std::abs(int(once.values[i]) - int(twice.values[i])) <= 1);
}

TEST_CASE("replicate_channels copies the channel three times") {
  ByteMap b = ByteMap::create(4, 3, 1);
  for (size_t i = 0; i < b.values.size(); ++i) b.values[i] = static_cast<uint8_t>(17 * i);
  ByteMap r = replicate_channels(b);
  REQUIRE(r.channels == 3);
  std::array<size_t, 256> hist_in{}, hist_c2{};
  for (size_t i = 0; i < b.values.size(); ++i) {
    CHECK(r.values[3 * i] == b.values[i]);
    CHECK(r.values[3 * i] == r.values[3 * i + 1]);
    CHECK(r.values[3 * i] == r.values[3 * i + 2]);
    hist_in[b.values[i]]++;
    hist_c2[r.values[3 * i + 2]]++;
  }
  CHECK(hist_in == hist_c2);
  CHECK_THROWS_AS(replicate_channels(r), DataError);
}

TEST_CASE("property map file round-trip with validity sidecar") {
  std::mt19937_64 rng(9);
  PropertyMap m = test::random_property_map(16, 12, rng);
  m.kind = MapKind::Other;
  std::string path = test::scratch_path("pmap") + ".pmap";
  save_property_map(m, path);
  PropertyMap back = load_property_map(path);
  CHECK(back.kind == m.kind);
  REQUIRE(back.width == m.width);
  for (size_t i = 0; i < m.pixel_count(); ++i) {
    CHECK(back.valid[i] == m.valid[i]);
    if (m.valid[i])
      CHECK(back.values[i] == doctest::Approx(m.values[i]).epsilon(1e-6));  // f32 on disk
  }
  SUBCASE("missing sidecar is an error") {
    std::filesystem::remove(path + ".mask.pgm");
    CHECK_THROWS_AS(load_property_map(path), DataError);
  }
}

TEST_CASE("color image round-trip is lossless") {
  ColorImage c = ColorImage::create(9, 7);
  std::mt19937_64 rng(13);
  for (auto& v : c.rgb) v = static_cast<uint8_t>(rng());
  std::string path = test::scratch_path("color") + ".ppm";
  save_color(c, path);
  ColorImage back = load_color(path);
  CHECK(back.rgb == c.rgb);
}

TEST_CASE("property map construction enforces kind ranges") {
  PropertyMap angle = PropertyMap::create(1, 1, MapKind::Angle);
  angle.values[0] = 200.0;
  angle.valid[0] = 1;
  CHECK_THROWS_AS(angle.validate(), DataError);

  PropertyMap height = PropertyMap::create(1, 1, MapKind::Height);
  height.values[0] = -0.5;
  height.valid[0] = 1;
  CHECK_THROWS_AS(height.validate(), DataError);

  PropertyMap contour = PropertyMap::create(1, 1, MapKind::Contour);
  contour.values[0] = 1.5;
  contour.valid[0] = 1;
  CHECK_THROWS_AS(contour.validate(), DataError);

  // invalid pixels are unconstrained
  PropertyMap ok = PropertyMap::create(1, 1, MapKind::Angle);
  ok.values[0] = 999.0;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("depth map invariants") {
  DepthMap d = DepthMap::create(2, 1);
  d.values = {0.0, 1.0};
  d.valid = {1, 1};
  CHECK_THROWS_AS(d.validate(), DataError);  // valid pixel with zero depth
  d.valid = {0, 1};
  CHECK_NOTHROW(d.validate());
}
