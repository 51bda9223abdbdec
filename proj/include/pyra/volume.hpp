#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include "pyra/error.hpp"

namespace pyra {

// Dense 4-D volume, linear layout: x fastest, then y, z, c.
// offset(x,y,z,c) = x + W*(y + H*(z + D*c))
template <class T>
struct VolT {
  std::size_t W = 0, H = 0, D = 0, C = 0;
  std::vector<T> data;

  VolT() = default;
  VolT(std::size_t w, std::size_t h, std::size_t d, std::size_t c)
      : W(w), H(h), D(d), C(c), data(w * h * d * c, T(0)) {
    if (w == 0 || h == 0 || d == 0 || c == 0)
      throw ShapeError("volume dimensions must be >= 1");
  }

  std::size_t size() const { return W * H * D * C; }
  std::size_t voxels() const { return W * H * D; }

  std::size_t offset(std::size_t x, std::size_t y, std::size_t z,
                     std::size_t c) const {
    return x + W * (y + H * (z + D * c));
  }
  T& at(std::size_t x, std::size_t y, std::size_t z, std::size_t c) {
    return data[offset(x, y, z, c)];
  }
  const T& at(std::size_t x, std::size_t y, std::size_t z,
              std::size_t c) const {
    return data[offset(x, y, z, c)];
  }

  bool same_shape(const VolT& o) const {
    return W == o.W && H == o.H && D == o.D && C == o.C;
  }
};

using Vol = VolT<double>;

struct LabelVolume {
  std::size_t W = 0, H = 0, D = 0;
  std::uint32_t num_classes = 0;
  std::vector<std::uint8_t> labels;

  LabelVolume() = default;
  LabelVolume(std::size_t w, std::size_t h, std::size_t d,
              std::uint32_t classes)
      : W(w), H(h), D(d), num_classes(classes), labels(w * h * d, 0) {
    if (w == 0 || h == 0 || d == 0)
      throw ShapeError("label volume dimensions must be >= 1");
    if (classes == 0) throw ShapeError("num_classes must be >= 1");
  }

  std::size_t size() const { return W * H * D; }
  std::size_t offset(std::size_t x, std::size_t y, std::size_t z) const {
    return x + W * (y + H * z);
  }
  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t z) {
    return labels[offset(x, y, z)];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t z) const {
    return labels[offset(x, y, z)];
  }
};

enum class Axis { X, Y, Z };

inline std::size_t axis_extent(std::size_t W, std::size_t H, std::size_t D,
                               Axis axis) {
  switch (axis) {
    case Axis::X: return W;
    case Axis::Y: return H;
    default: return D;
  }
}

// Strided view of one plane of a volume: the two free axes (a, b) plus
// channels. The (a, b) mapping per sweep axis is x->(y,z), y->(x,z),
// z->(x,y); a is always the faster-varying free axis.
template <class T>
struct PlaneView {
  T* base = nullptr;
  std::size_t A = 0, B = 0, C = 0;
  std::size_t sa = 0, sb = 0, sc = 0;

  T& at(std::size_t a, std::size_t b, std::size_t c) const {
    return base[a * sa + b * sb + c * sc];
  }

  operator PlaneView<const T>() const
    requires(!std::is_const_v<T>)
  {
    return {base, A, B, C, sa, sb, sc};
  }
};

// A plane with its own dense storage (a fastest, then b, then c); used for
// gate scratch buffers where no backing volume exists.
template <class T>
struct PlaneBuf {
  std::size_t A = 0, B = 0, C = 0;
  std::vector<T> v;

  PlaneBuf() = default;
  PlaneBuf(std::size_t a, std::size_t b, std::size_t c)
      : A(a), B(b), C(c), v(a * b * c, T(0)) {}

  PlaneView<T> view() {
    return PlaneView<T>{v.data(), A, B, C, 1, A, A * B};
  }
  PlaneView<const T> view() const {
    return PlaneView<const T>{v.data(), A, B, C, 1, A, A * B};
  }
  PlaneView<const T> cview() const { return view(); }
  void zero() { std::fill(v.begin(), v.end(), T(0)); }
};

template <class T>
PlaneView<T> plane(VolT<T>& v, Axis axis, std::size_t index) {
  const std::size_t ext = axis_extent(v.W, v.H, v.D, axis);
  if (index >= ext) throw ShapeError("plane index out of range");
  PlaneView<T> p;
  p.C = v.C;
  p.sc = v.W * v.H * v.D;
  switch (axis) {
    case Axis::X:
      p.base = v.data.data() + index;
      p.A = v.H; p.B = v.D;
      p.sa = v.W; p.sb = v.W * v.H;
      break;
    case Axis::Y:
      p.base = v.data.data() + index * v.W;
      p.A = v.W; p.B = v.D;
      p.sa = 1; p.sb = v.W * v.H;
      break;
    case Axis::Z:
      p.base = v.data.data() + index * v.W * v.H;
      p.A = v.W; p.B = v.H;
      p.sa = 1; p.sb = v.W;
      break;
  }
  return p;
}

template <class T>
PlaneView<const T> plane(const VolT<T>& v, Axis axis, std::size_t index) {
  return plane(const_cast<VolT<T>&>(v), axis, index);
}

template <class T>
VolT<T> flip(const VolT<T>& v, Axis axis) {
  VolT<T> out(v.W, v.H, v.D, v.C);
  for (std::size_t c = 0; c < v.C; ++c)
    for (std::size_t z = 0; z < v.D; ++z)
      for (std::size_t y = 0; y < v.H; ++y)
        for (std::size_t x = 0; x < v.W; ++x) {
          std::size_t sx = axis == Axis::X ? v.W - 1 - x : x;
          std::size_t sy = axis == Axis::Y ? v.H - 1 - y : y;
          std::size_t sz = axis == Axis::Z ? v.D - 1 - z : z;
          out.at(x, y, z, c) = v.at(sx, sy, sz, c);
        }
  return out;
}

LabelVolume flip(const LabelVolume& v, Axis axis);

enum class Interp { Bilinear, Nearest };

// Rotates every z-slice about its center ((W-1)/2, (H-1)/2); samples that
// fall outside the slice read as zero. Nearest mode never invents values,
// so it is the one used for label volumes.
Vol rotate_z(const Vol& v, double angle, Interp interp);
LabelVolume rotate_z(const LabelVolume& v, double angle);

template <class T>
void fill(VolT<T>& v, T value) {
  std::fill(v.data.begin(), v.data.end(), value);
}

template <class T, class F>
void map_inplace(VolT<T>& v, F&& f) {
  for (auto& e : v.data) e = f(e);
}

template <class T>
VolT<T> add(const VolT<T>& a, const VolT<T>& b) {
  if (!a.same_shape(b)) throw ShapeError("add: shape mismatch");
  VolT<T> out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

template <class T>
VolT<T> multiply(const VolT<T>& a, const VolT<T>& b) {
  if (!a.same_shape(b)) throw ShapeError("multiply: shape mismatch");
  VolT<T> out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

template <class T>
void scale(VolT<T>& v, T s) {
  for (auto& e : v.data) e *= s;
}

// VOL1 container. Header: magic "PVOL", version u8, dtype u8
// (1 = f64, 2 = u8 labels), dims W,H,D,C as u32 little-endian; dtype 2
// carries a u32 num_classes between the dims and the payload.
Vol read_vol(const std::string& path);
void write_vol(const std::string& path, const Vol& v);
LabelVolume read_labels(const std::string& path);
void write_labels(const std::string& path, const LabelVolume& v);

}  // namespace pyra
