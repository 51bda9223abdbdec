#include "pyra/conv2d.hpp"

#include "pyra/parallel.hpp"

namespace pyra {

template <class T>
void conv_forward(PlaneView<const T> in, const KernelT<T>& k, const T* bias,
                  PlaneView<T> out, bool accumulate) {
  if (in.C != k.cin) throw ShapeError("conv_forward: input channel mismatch");
  if (out.C != k.cout) throw ShapeError("conv_forward: output channel mismatch");
  if (out.A != in.A || out.B != in.B)
    throw ShapeError("conv_forward: spatial shape mismatch");
  const long A = static_cast<long>(in.A), B = static_cast<long>(in.B);
  const long ra = static_cast<long>(k.kh / 2), rb = static_cast<long>(k.kw / 2);
  parallel_for(in.A * in.B, [&](std::size_t begin, std::size_t end) {
    for (std::size_t pix = begin; pix < end; ++pix) {
      const long a = static_cast<long>(pix % in.A);
      const long b = static_cast<long>(pix / in.A);
      const long da0 = ra - a > 0 ? ra - a : 0;
      const long da1 = static_cast<long>(k.kh) < A + ra - a
                           ? static_cast<long>(k.kh) : A + ra - a;
      const long db0 = rb - b > 0 ? rb - b : 0;
      const long db1 = static_cast<long>(k.kw) < B + rb - b
                           ? static_cast<long>(k.kw) : B + rb - b;
      for (std::size_t o = 0; o < k.cout; ++o) {
        T sum = bias ? bias[o] : T(0);
        for (long da = da0; da < da1; ++da) {
          const long ia = a + da - ra;
          for (long db = db0; db < db1; ++db) {
            const long ib = b + db - rb;
            const T* wrow = k.w.data() +
                k.index(static_cast<std::size_t>(da),
                        static_cast<std::size_t>(db), 0, o);
            for (std::size_t ci = 0; ci < k.cin; ++ci)
              sum += in.at(static_cast<std::size_t>(ia),
                           static_cast<std::size_t>(ib), ci) * wrow[ci];
          }
        }
        if (accumulate)
          out.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b), o) += sum;
        else
          out.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b), o) = sum;
      }
    }
  });
}

template void conv_forward<double>(PlaneView<const double>,
                                   const KernelT<double>&, const double*,
                                   PlaneView<double>, bool);
template void conv_forward<float>(PlaneView<const float>,
                                  const KernelT<float>&, const float*,
                                  PlaneView<float>, bool);

void conv_backward_input(PlaneView<const double> dout, const Kernel& k,
                         PlaneView<double> din, bool accumulate) {
  if (din.C != k.cin) throw ShapeError("conv_backward_input: input channel mismatch");
  if (dout.C != k.cout) throw ShapeError("conv_backward_input: output channel mismatch");
  if (dout.A != din.A || dout.B != din.B)
    throw ShapeError("conv_backward_input: spatial shape mismatch");
  const long A = static_cast<long>(din.A), B = static_cast<long>(din.B);
  const long ra = static_cast<long>(k.kh / 2), rb = static_cast<long>(k.kw / 2);
  parallel_for(din.A * din.B, [&](std::size_t begin, std::size_t end) {
    for (std::size_t pix = begin; pix < end; ++pix) {
      const long a = static_cast<long>(pix % din.A);
      const long b = static_cast<long>(pix / din.A);
      for (std::size_t ci = 0; ci < k.cin; ++ci) {
        double sum = 0.0;
        for (std::size_t da = 0; da < k.kh; ++da) {
          const long oa = a + ra - static_cast<long>(da);
          if (oa < 0 || oa >= A) continue;
          for (std::size_t db = 0; db < k.kw; ++db) {
            const long ob = b + rb - static_cast<long>(db);
            if (ob < 0 || ob >= B) continue;
            for (std::size_t o = 0; o < k.cout; ++o)
              sum += dout.at(static_cast<std::size_t>(oa),
                             static_cast<std::size_t>(ob), o) *
                     k.at(da, db, ci, o);
          }
        }
        if (accumulate)
          din.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b), ci) += sum;
        else
          din.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b), ci) = sum;
      }
    }
  });
}

void conv_backward_kernel(PlaneView<const double> in,
                          PlaneView<const double> dout, Kernel& dk,
                          double* dbias) {
  if (in.C != dk.cin) throw ShapeError("conv_backward_kernel: input channel mismatch");
  if (dout.C != dk.cout) throw ShapeError("conv_backward_kernel: output channel mismatch");
  if (dout.A != in.A || dout.B != in.B)
    throw ShapeError("conv_backward_kernel: spatial shape mismatch");
  const long A = static_cast<long>(in.A), B = static_cast<long>(in.B);
  const long ra = static_cast<long>(dk.kh / 2), rb = static_cast<long>(dk.kw / 2);
  // One worker owns one kernel element and scans the pixels in a fixed
  // order; no partial sums ever cross threads.
  parallel_for(dk.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const std::size_t ci = idx % dk.cin;
      std::size_t rest = idx / dk.cin;
      const std::size_t db = rest % dk.kw;
      rest /= dk.kw;
      const std::size_t da = rest % dk.kh;
      const std::size_t o = rest / dk.kh;
      const long sa = static_cast<long>(da) - ra;
      const long sb = static_cast<long>(db) - rb;
      const long a0 = sa < 0 ? -sa : 0;
      const long a1 = A - sa < A ? A - sa : A;
      const long b0 = sb < 0 ? -sb : 0;
      const long b1 = B - sb < B ? B - sb : B;
      double sum = 0.0;
      for (long b = b0; b < b1; ++b)
        for (long a = a0; a < a1; ++a)
          sum += in.at(static_cast<std::size_t>(a + sa),
                       static_cast<std::size_t>(b + sb), ci) *
                 dout.at(static_cast<std::size_t>(a),
                         static_cast<std::size_t>(b), o);
      dk.w[idx] += sum;
    }
  });
  if (dbias) {
    for (std::size_t o = 0; o < dk.cout; ++o) {
      double sum = 0.0;
      for (std::size_t b = 0; b < dout.B; ++b)
        for (std::size_t a = 0; a < dout.A; ++a)
          sum += dout.at(a, b, o);
      dbias[o] += sum;
    }
  }
}

}  // namespace pyra
