#pragma once

#include <cstddef>
#include <vector>

#include "pyra/volume.hpp"

namespace pyra {

// Centered 2-D filter bank. Weight (da, db, ci, o) lives at
// ((o*kh + da)*kw + db)*cin + ci; da offsets the plane's a axis, db the b
// axis.
template <class T>
struct KernelT {
  std::size_t kh = 0, kw = 0, cin = 0, cout = 0;
  std::vector<T> w;

  KernelT() = default;
  KernelT(std::size_t kh_, std::size_t kw_, std::size_t cin_,
          std::size_t cout_)
      : kh(kh_), kw(kw_), cin(cin_), cout(cout_),
        w(kh_ * kw_ * cin_ * cout_, T(0)) {
    if (kh == 0 || kw == 0 || kh % 2 == 0 || kw % 2 == 0)
      throw ShapeError("kernel extents must be odd and >= 1");
    if (cin == 0 || cout == 0)
      throw ShapeError("kernel channel counts must be >= 1");
  }

  std::size_t size() const { return w.size(); }
  std::size_t index(std::size_t da, std::size_t db, std::size_t ci,
                    std::size_t o) const {
    return ((o * kh + da) * kw + db) * cin + ci;
  }
  T& at(std::size_t da, std::size_t db, std::size_t ci, std::size_t o) {
    return w[index(da, db, ci, o)];
  }
  const T& at(std::size_t da, std::size_t db, std::size_t ci,
              std::size_t o) const {
    return w[index(da, db, ci, o)];
  }
};

using Kernel = KernelT<double>;

// Stride-1 "same" convolution with zero padding:
//   out(a,b,o) = sum_{da,db,ci} in(a+da-kh/2, b+db-kw/2, ci) * k(da,db,ci,o)
//              + bias(o)
// `bias` may be null. With `accumulate` the sum is added onto the existing
// contents of `out` (used for the recurrent term of the C-LSTM gates).
// Each output element is computed by exactly one worker with a fixed inner
// summation order, so the result does not depend on the thread count.
template <class T>
void conv_forward(PlaneView<const T> in, const KernelT<T>& k, const T* bias,
                  PlaneView<T> out, bool accumulate = false);

// Adjoints of conv_forward (bias excluded from the input path):
//   din(a,b,ci)     = sum_{da,db,o} dout(a+kh/2-da, b+kw/2-db, o) * k(da,db,ci,o)
//   dk(da,db,ci,o) += sum_{a,b} in(a+da-kh/2, b+db-kw/2, ci) * dout(a,b,o)
//   dbias(o)       += sum_{a,b} dout(a,b,o)
// conv_backward_kernel always accumulates; callers zero dk/dbias up front.
// It is parallelized over kernel elements, each of which sums its pixels in
// a fixed order, so gradients too are thread-count independent.
void conv_backward_input(PlaneView<const double> dout, const Kernel& k,
                         PlaneView<double> din, bool accumulate = false);
void conv_backward_kernel(PlaneView<const double> in,
                          PlaneView<const double> dout, Kernel& dk,
                          double* dbias);

}  // namespace pyra
