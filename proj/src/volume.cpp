#include "pyra/volume.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "pyra/detail/bytes.hpp"

namespace pyra {

LabelVolume flip(const LabelVolume& v, Axis axis) {
  LabelVolume out(v.W, v.H, v.D, v.num_classes);
  for (std::size_t z = 0; z < v.D; ++z)
    for (std::size_t y = 0; y < v.H; ++y)
      for (std::size_t x = 0; x < v.W; ++x) {
        std::size_t sx = axis == Axis::X ? v.W - 1 - x : x;
        std::size_t sy = axis == Axis::Y ? v.H - 1 - y : y;
        std::size_t sz = axis == Axis::Z ? v.D - 1 - z : z;
        out.at(x, y, z) = v.at(sx, sy, sz);
      }
  return out;
}

namespace {

// Inverse mapping for a rotation by `angle` about the slice center.
struct ZRot {
  double cx, cy, cosa, sina;
  ZRot(std::size_t W, std::size_t H, double angle)
      : cx((static_cast<double>(W) - 1.0) / 2.0),
        cy((static_cast<double>(H) - 1.0) / 2.0),
        cosa(std::cos(angle)),
        sina(std::sin(angle)) {}
  void source(std::size_t x, std::size_t y, double& sx, double& sy) const {
    const double dx = static_cast<double>(x) - cx;
    const double dy = static_cast<double>(y) - cy;
    sx = cx + cosa * dx + sina * dy;
    sy = cy - sina * dx + cosa * dy;
  }
};

double sample_or_zero(const Vol& v, long x, long y, std::size_t z,
                      std::size_t c) {
  if (x < 0 || y < 0 || x >= static_cast<long>(v.W) ||
      y >= static_cast<long>(v.H))
    return 0.0;
  return v.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), z, c);
}

}  // namespace

Vol rotate_z(const Vol& v, double angle, Interp interp) {
  Vol out(v.W, v.H, v.D, v.C);
  const ZRot rot(v.W, v.H, angle);
  for (std::size_t c = 0; c < v.C; ++c)
    for (std::size_t z = 0; z < v.D; ++z)
      for (std::size_t y = 0; y < v.H; ++y)
        for (std::size_t x = 0; x < v.W; ++x) {
          double sx, sy;
          rot.source(x, y, sx, sy);
          if (interp == Interp::Nearest) {
            const long nx = static_cast<long>(std::floor(sx + 0.5));
            const long ny = static_cast<long>(std::floor(sy + 0.5));
            out.at(x, y, z, c) = sample_or_zero(v, nx, ny, z, c);
          } else {
            const long x0 = static_cast<long>(std::floor(sx));
            const long y0 = static_cast<long>(std::floor(sy));
            const double fx = sx - static_cast<double>(x0);
            const double fy = sy - static_cast<double>(y0);
            const double v00 = sample_or_zero(v, x0, y0, z, c);
            const double v10 = sample_or_zero(v, x0 + 1, y0, z, c);
            const double v01 = sample_or_zero(v, x0, y0 + 1, z, c);
            const double v11 = sample_or_zero(v, x0 + 1, y0 + 1, z, c);
            out.at(x, y, z, c) = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) +
                                 fy * ((1.0 - fx) * v01 + fx * v11);
          }
        }
  return out;
}

LabelVolume rotate_z(const LabelVolume& v, double angle) {
  LabelVolume out(v.W, v.H, v.D, v.num_classes);
  const ZRot rot(v.W, v.H, angle);
  for (std::size_t z = 0; z < v.D; ++z)
    for (std::size_t y = 0; y < v.H; ++y)
      for (std::size_t x = 0; x < v.W; ++x) {
        double sx, sy;
        rot.source(x, y, sx, sy);
        const long nx = static_cast<long>(std::floor(sx + 0.5));
        const long ny = static_cast<long>(std::floor(sy + 0.5));
        std::uint8_t lab = 0;
        if (nx >= 0 && ny >= 0 && nx < static_cast<long>(v.W) &&
            ny < static_cast<long>(v.H))
          lab = v.at(static_cast<std::size_t>(nx),
                     static_cast<std::size_t>(ny), z);
        out.at(x, y, z) = lab;
      }
  return out;
}

namespace {

using detail::get_u32;
using detail::put_u32;

constexpr char kMagic[4] = {'P', 'V', 'O', 'L'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 1;
constexpr std::uint8_t kDtypeLabels = 2;

std::uint8_t read_header(std::istream& is, const std::string& path,
                         std::uint32_t dims[4]) {
  char magic[4];
  if (!is.read(magic, 4)) throw DataError(path + ": truncated header reading magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw DataError(path + ": bad magic (not a VOL1 file)");
  const std::uint8_t version =
      detail::get_u8(is, path + ": truncated header reading version");
  const std::uint8_t dtype =
      detail::get_u8(is, path + ": truncated header reading dtype");
  if (version != kVersion)
    throw DataError(path + ": unsupported version " +
                    std::to_string(static_cast<unsigned>(version)));
  const char* names[4] = {"W", "H", "D", "C"};
  for (int i = 0; i < 4; ++i) {
    dims[i] = get_u32(is, path + ": truncated header reading dim " + names[i]);
    if (dims[i] == 0)
      throw DataError(path + ": dim " + names[i] + " is zero");
  }
  return dtype;
}

void expect_eof(std::istream& is, const std::string& path) {
  char extra;
  if (is.get(extra))
    throw DataError(path + ": data length mismatch (trailing bytes after payload)");
}

}  // namespace

Vol read_vol(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": cannot open file");
  std::uint32_t dims[4];
  const std::uint8_t dtype = read_header(is, path, dims);
  if (dtype != kDtypeF64)
    throw DataError(path + ": dtype " + std::to_string(dtype) +
                    " is not an f64 volume");
  Vol v(dims[0], dims[1], dims[2], dims[3]);
  detail::get_f64_array(is, v.data.data(), v.data.size(),
                        path + ": data length mismatch (file shorter than dims imply)");
  expect_eof(is, path);
  return v;
}

void write_vol(const std::string& path, const Vol& v) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open file for writing");
  os.write(kMagic, 4);
  os.put(static_cast<char>(kVersion));
  os.put(static_cast<char>(kDtypeF64));
  put_u32(os, static_cast<std::uint32_t>(v.W));
  put_u32(os, static_cast<std::uint32_t>(v.H));
  put_u32(os, static_cast<std::uint32_t>(v.D));
  put_u32(os, static_cast<std::uint32_t>(v.C));
  detail::put_f64_array(os, v.data.data(), v.data.size());
  if (!os) throw DataError(path + ": write failed");
}

LabelVolume read_labels(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": cannot open file");
  std::uint32_t dims[4];
  const std::uint8_t dtype = read_header(is, path, dims);
  if (dtype != kDtypeLabels)
    throw DataError(path + ": dtype " + std::to_string(dtype) +
                    " is not a label volume");
  if (dims[3] != 1)
    throw DataError(path + ": dim C must be 1 for a label volume");
  const std::uint32_t classes =
      get_u32(is, path + ": truncated header reading num_classes");
  if (classes == 0) throw DataError(path + ": num_classes is zero");
  LabelVolume v(dims[0], dims[1], dims[2], classes);
  if (!is.read(reinterpret_cast<char*>(v.labels.data()),
               static_cast<std::streamsize>(v.labels.size())))
    throw DataError(path + ": data length mismatch (file shorter than dims imply)");
  expect_eof(is, path);
  for (std::uint8_t lab : v.labels)
    if (lab >= classes)
      throw DataError(path + ": label " + std::to_string(lab) +
                      " out of range for num_classes " + std::to_string(classes));
  return v;
}

void write_labels(const std::string& path, const LabelVolume& v) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open file for writing");
  os.write(kMagic, 4);
  os.put(static_cast<char>(kVersion));
  os.put(static_cast<char>(kDtypeLabels));
  put_u32(os, static_cast<std::uint32_t>(v.W));
  put_u32(os, static_cast<std::uint32_t>(v.H));
  put_u32(os, static_cast<std::uint32_t>(v.D));
  put_u32(os, 1);
  put_u32(os, v.num_classes);
  os.write(reinterpret_cast<const char*>(v.labels.data()),
           static_cast<std::streamsize>(v.labels.size()));
  if (!os) throw DataError(path + ": write failed");
}

}  // namespace pyra
