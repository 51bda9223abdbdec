#include "pyra/volume.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "doctest.h"

using namespace pyra;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("linear layout is x fastest, then y, z, c") {
  Vol v(3, 4, 5, 2);
  double n = 0;
  for (std::size_t c = 0; c < v.C; ++c)
    for (std::size_t z = 0; z < v.D; ++z)
      for (std::size_t y = 0; y < v.H; ++y)
        for (std::size_t x = 0; x < v.W; ++x) v.at(x, y, z, c) = n++;
  for (std::size_t i = 0; i < v.size(); ++i)
    CHECK(v.data[i] == static_cast<double>(i));
  CHECK(v.offset(1, 2, 3, 1) == 1 + 3 * (2 + 4 * (3 + 5 * 1)));
}

TEST_CASE("zero dimensions are rejected") {
  CHECK_THROWS_AS(Vol(0, 1, 1, 1), ShapeError);
  CHECK_THROWS_AS(Vol(1, 1, 0, 1), ShapeError);
  CHECK_THROWS_AS(Vol(1, 1, 1, 0), ShapeError);
  CHECK_THROWS_AS(LabelVolume(1, 0, 1, 2), ShapeError);
  CHECK_THROWS_AS(LabelVolume(1, 1, 1, 0), ShapeError);
}

TEST_CASE("plane views address the right voxels") {
  Vol v(3, 4, 5, 2);
  for (std::size_t i = 0; i < v.size(); ++i) v.data[i] = static_cast<double>(i);

  for (std::size_t t = 0; t < v.W; ++t) {
    auto p = plane(v, Axis::X, t);
    REQUIRE(p.A == v.H);
    REQUIRE(p.B == v.D);
    for (std::size_t c = 0; c < v.C; ++c)
      for (std::size_t b = 0; b < p.B; ++b)
        for (std::size_t a = 0; a < p.A; ++a)
          CHECK(p.at(a, b, c) == v.at(t, a, b, c));
  }
  for (std::size_t t = 0; t < v.H; ++t) {
    auto p = plane(v, Axis::Y, t);
    REQUIRE(p.A == v.W);
    REQUIRE(p.B == v.D);
    for (std::size_t c = 0; c < v.C; ++c)
      for (std::size_t b = 0; b < p.B; ++b)
        for (std::size_t a = 0; a < p.A; ++a)
          CHECK(p.at(a, b, c) == v.at(a, t, b, c));
  }
  for (std::size_t t = 0; t < v.D; ++t) {
    auto p = plane(v, Axis::Z, t);
    REQUIRE(p.A == v.W);
    REQUIRE(p.B == v.H);
    for (std::size_t c = 0; c < v.C; ++c)
      for (std::size_t b = 0; b < p.B; ++b)
        for (std::size_t a = 0; a < p.A; ++a)
          CHECK(p.at(a, b, c) == v.at(a, b, t, c));
  }
  CHECK_THROWS_AS(plane(v, Axis::X, v.W), ShapeError);
}

TEST_CASE("plane views are writable") {
  Vol v(3, 4, 5, 1);
  auto p = plane(v, Axis::Y, 2);
  p.at(1, 3, 0) = 7.5;
  CHECK(v.at(1, 2, 3, 0) == 7.5);
}

TEST_CASE("flip moves voxels and is an involution") {
  Vol v(3, 4, 5, 2);
  for (std::size_t i = 0; i < v.size(); ++i) v.data[i] = static_cast<double>(i);
  for (Axis ax : {Axis::X, Axis::Y, Axis::Z}) {
    Vol f = flip(v, ax);
    CHECK(f.at(0, 0, 0, 0) ==
          v.at(ax == Axis::X ? v.W - 1 : 0, ax == Axis::Y ? v.H - 1 : 0,
               ax == Axis::Z ? v.D - 1 : 0, 0));
    Vol ff = flip(f, ax);
    CHECK(ff.data == v.data);
  }

  LabelVolume l(3, 4, 5, 3);
  for (std::size_t i = 0; i < l.size(); ++i)
    l.labels[i] = static_cast<std::uint8_t>(i % 3);
  LabelVolume lf = flip(flip(l, Axis::Z), Axis::Z);
  CHECK(lf.labels == l.labels);
}

TEST_CASE("plane views compose with flips") {
  Vol v(3, 4, 5, 2);
  for (std::size_t i = 0; i < v.size(); ++i) v.data[i] = static_cast<double>(i);
  const Vol f = flip(v, Axis::Z);
  for (std::size_t k = 0; k < v.D; ++k) {
    const auto a = plane(f, Axis::Z, k);
    const auto b = plane(v, Axis::Z, v.D - 1 - k);
    for (std::size_t c = 0; c < a.C; ++c)
      for (std::size_t bb = 0; bb < a.B; ++bb)
        for (std::size_t aa = 0; aa < a.A; ++aa)
          CHECK(a.at(aa, bb, c) == b.at(aa, bb, c));
  }
}

TEST_CASE("rotate_z by zero is the identity") {
  Vol v(4, 5, 2, 2);
  for (std::size_t i = 0; i < v.size(); ++i)
    v.data[i] = std::sin(0.37 * static_cast<double>(i));
  Vol r = rotate_z(v, 0.0, Interp::Bilinear);
  for (std::size_t i = 0; i < v.size(); ++i)
    CHECK(r.data[i] == doctest::Approx(v.data[i]).epsilon(1e-14));
  Vol rn = rotate_z(v, 0.0, Interp::Nearest);
  CHECK(rn.data == v.data);
}

TEST_CASE("rotate_z by pi maps an impulse to its mirror") {
  Vol v(7, 7, 1, 1);
  v.at(1, 2, 0, 0) = 1.0;
  Vol r = rotate_z(v, std::numbers::pi, Interp::Nearest);
  CHECK(r.at(5, 4, 0, 0) == 1.0);
  Vol rb = rotate_z(v, std::numbers::pi, Interp::Bilinear);
  CHECK(rb.at(5, 4, 0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("nearest rotation never invents values") {
  Vol v(6, 5, 2, 1);
  std::set<double> allowed = {0.0};
  for (std::size_t i = 0; i < v.size(); ++i) {
    v.data[i] = static_cast<double>((i * 7) % 5);
    allowed.insert(v.data[i]);
  }
  Vol r = rotate_z(v, 1.234, Interp::Nearest);
  for (double d : r.data) CHECK(allowed.count(d) == 1);

  LabelVolume l(6, 5, 2, 4);
  for (std::size_t i = 0; i < l.size(); ++i)
    l.labels[i] = static_cast<std::uint8_t>((i * 3) % 4);
  LabelVolume lr = rotate_z(l, 1.234);
  for (auto lab : lr.labels) CHECK(lab < 4);
}

TEST_CASE("rotation of labels matches nearest rotation of their volume") {
  LabelVolume l(5, 6, 2, 3);
  for (std::size_t i = 0; i < l.size(); ++i)
    l.labels[i] = static_cast<std::uint8_t>((i * 5) % 3);
  Vol v(5, 6, 2, 1);
  for (std::size_t i = 0; i < l.size(); ++i)
    v.data[i] = static_cast<double>(l.labels[i]);
  const double angle = 0.77;
  LabelVolume lr = rotate_z(l, angle);
  Vol vr = rotate_z(v, angle, Interp::Nearest);
  for (std::size_t i = 0; i < l.size(); ++i)
    CHECK(static_cast<double>(lr.labels[i]) == vr.data[i]);
}

TEST_CASE("f64 volume round-trips through VOL1") {
  Vol v(3, 2, 2, 2);
  for (std::size_t i = 0; i < v.size(); ++i)
    v.data[i] = std::cos(static_cast<double>(i)) * 1e10;
  v.data[0] = -0.0;
  v.data[1] = 1e-300;
  const std::string path = temp_path("pyra_test_roundtrip.vol");
  write_vol(path, v);
  Vol r = read_vol(path);
  REQUIRE(r.same_shape(v));
  CHECK(std::memcmp(r.data.data(), v.data.data(),
                    v.size() * sizeof(double)) == 0);
  CHECK(std::signbit(r.data[0]));
  std::remove(path.c_str());
}

TEST_CASE("label volume round-trips through VOL1") {
  LabelVolume l(4, 3, 2, 5);
  for (std::size_t i = 0; i < l.size(); ++i)
    l.labels[i] = static_cast<std::uint8_t>(i % 5);
  const std::string path = temp_path("pyra_test_roundtrip.lab");
  write_labels(path, l);
  LabelVolume r = read_labels(path);
  CHECK(r.W == l.W);
  CHECK(r.H == l.H);
  CHECK(r.D == l.D);
  CHECK(r.num_classes == 5);
  CHECK(r.labels == l.labels);
  std::remove(path.c_str());
}

TEST_CASE("malformed VOL1 files are rejected with DataError") {
  const std::string path = temp_path("pyra_test_bad.vol");

  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_vol(temp_path("pyra_no_such_file.vol")), DataError);
  }
  SUBCASE("bad magic") {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE" << std::string(64, '\0');
    os.close();
    CHECK_THROWS_AS(read_vol(path), DataError);
  }
  SUBCASE("truncated payload") {
    Vol v(3, 3, 3, 1);
    write_vol(path, v);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 5);
    CHECK_THROWS_AS(read_vol(path), DataError);
  }
  SUBCASE("trailing bytes") {
    Vol v(2, 2, 2, 1);
    write_vol(path, v);
    std::ofstream os(path, std::ios::binary | std::ios::app);
    os << 'x';
    os.close();
    CHECK_THROWS_AS(read_vol(path), DataError);
  }
  SUBCASE("dtype mismatch") {
    LabelVolume l(2, 2, 2, 2);
    write_labels(path, l);
    CHECK_THROWS_AS(read_vol(path), DataError);
    Vol v(2, 2, 2, 1);
    write_vol(path, v);
    CHECK_THROWS_AS(read_labels(path), DataError);
  }
  SUBCASE("label out of range") {
    LabelVolume l(2, 2, 2, 4);
    l.labels[3] = 3;
    write_labels(path, l);
    // Rewrite the num_classes field (right after magic, version, dtype and
    // the four u32 dims) down to 3 so the stored label 3 becomes invalid.
    std::fstream fs(path, std::ios::binary | std::ios::in | std::ios::out);
    fs.seekp(4 + 1 + 1 + 16);
    const char three[4] = {3, 0, 0, 0};
    fs.write(three, 4);
    fs.close();
    CHECK_THROWS_AS(read_labels(path), DataError);
  }
  std::remove(path.c_str());
}

TEST_CASE("volume arithmetic checks shapes") {
  Vol a(2, 2, 2, 1), b(2, 2, 2, 2);
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(multiply(a, b), ShapeError);
  Vol c(2, 2, 2, 1);
  fill(c, 2.0);
  fill(a, 3.0);
  Vol s = add(a, c);
  CHECK(s.at(1, 1, 1, 0) == 5.0);
  Vol m = multiply(a, c);
  CHECK(m.at(0, 0, 0, 0) == 6.0);
  scale(m, 0.5);
  CHECK(m.at(0, 0, 0, 0) == 3.0);
}
