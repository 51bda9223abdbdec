#include "pyra/clstm.hpp"

#include <cmath>
#include <utility>

#include "pyra/parallel.hpp"

namespace pyra {

namespace {

template <class T>
T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

template <class T>
void check_sweep_shapes(const VolT<T>& x, const ClstmParamsT<T>& p) {
  if (x.C != p.in_channels())
    throw ShapeError("sweep: input channels do not match parameters");
}

}  // namespace

template <class T>
void sweep_forward(const VolT<T>& x, const ClstmParamsT<T>& p, Direction d,
                   VolT<T>& h_sum, bool accumulate) {
  check_sweep_shapes(x, p);
  const std::size_t O = p.out_channels();
  if (h_sum.W != x.W || h_sum.H != x.H || h_sum.D != x.D || h_sum.C != O)
    throw ShapeError("sweep_forward: output shape mismatch");
  const std::size_t ext = axis_extent(x.W, x.H, x.D, d.axis);
  const auto probe = plane(x, d.axis, 0);
  const std::size_t A = probe.A, B = probe.B;

  PlaneBuf<T> gi(A, B, O), gf(A, B, O), gc(A, B, O), go(A, B, O);
  PlaneBuf<T> h_prev(A, B, O), c_prev(A, B, O), c_cur(A, B, O);

  for (std::size_t t = 0; t < ext; ++t) {
    const std::size_t idx = d.sign > 0 ? t : ext - 1 - t;
    const auto xa = plane(x, d.axis, idx);
    conv_forward<T>(xa, p.xi, p.bi.data(), gi.view(), false);
    conv_forward<T>(xa, p.xf, p.bf.data(), gf.view(), false);
    conv_forward<T>(xa, p.xc, p.bc.data(), gc.view(), false);
    conv_forward<T>(xa, p.xo, p.bo.data(), go.view(), false);
    if (t > 0) {
      conv_forward<T>(h_prev.cview(), p.hi, nullptr, gi.view(), true);
      conv_forward<T>(h_prev.cview(), p.hf, nullptr, gf.view(), true);
      conv_forward<T>(h_prev.cview(), p.hc, nullptr, gc.view(), true);
      conv_forward<T>(h_prev.cview(), p.ho, nullptr, go.view(), true);
    }
    auto out = plane(h_sum, d.axis, idx);
    const bool first = t == 0;
    parallel_for(A * B, [&](std::size_t begin, std::size_t end) {
      for (std::size_t pix = begin; pix < end; ++pix) {
        const std::size_t a = pix % A, b = pix / A;
        for (std::size_t o = 0; o < O; ++o) {
          const std::size_t e = pix + A * B * o;
          const T iv = sigmoid(gi.v[e]);
          const T fv = sigmoid(gf.v[e]);
          const T cc = std::tanh(gc.v[e]);
          const T ov = sigmoid(go.v[e]);
          const T cp = first ? T(0) : c_prev.v[e];
          const T cv = iv * cc + fv * cp;
          c_cur.v[e] = cv;
          const T hv = ov * std::tanh(cv);
          h_prev.v[e] = hv;  // becomes h_{t-1} of the next plane
          if (accumulate)
            out.at(a, b, o) += hv;
          else
            out.at(a, b, o) = hv;
        }
      }
    });
    std::swap(c_prev, c_cur);
  }
}

template void sweep_forward<double>(const VolT<double>&,
                                    const ClstmParamsT<double>&, Direction,
                                    VolT<double>&, bool);
template void sweep_forward<float>(const VolT<float>&,
                                   const ClstmParamsT<float>&, Direction,
                                   VolT<float>&, bool);

SweepCache sweep_forward_cached(const Vol& x, const ClstmParams& p,
                                Direction d) {
  check_sweep_shapes(x, p);
  const std::size_t O = p.out_channels();
  SweepCache cache{Vol(x.W, x.H, x.D, O), Vol(x.W, x.H, x.D, O),
                   Vol(x.W, x.H, x.D, O), Vol(x.W, x.H, x.D, O),
                   Vol(x.W, x.H, x.D, O), Vol(x.W, x.H, x.D, O)};
  const std::size_t ext = axis_extent(x.W, x.H, x.D, d.axis);
  const auto probe = plane(x, d.axis, 0);
  const std::size_t A = probe.A, B = probe.B;

  for (std::size_t t = 0; t < ext; ++t) {
    const std::size_t idx = d.sign > 0 ? t : ext - 1 - t;
    const std::size_t prev = d.sign > 0 ? idx - 1 : idx + 1;
    const bool first = t == 0;
    const auto xa = plane(x, d.axis, idx);
    auto iv = plane(cache.i, d.axis, idx);
    auto fv = plane(cache.f, d.axis, idx);
    auto cv = plane(cache.cand, d.axis, idx);
    auto ov = plane(cache.o, d.axis, idx);
    conv_forward<double>(xa, p.xi, p.bi.data(), iv, false);
    conv_forward<double>(xa, p.xf, p.bf.data(), fv, false);
    conv_forward<double>(xa, p.xc, p.bc.data(), cv, false);
    conv_forward<double>(xa, p.xo, p.bo.data(), ov, false);
    if (!first) {
      const auto hp = plane(std::as_const(cache).h, d.axis, prev);
      conv_forward<double>(hp, p.hi, nullptr, iv, true);
      conv_forward<double>(hp, p.hf, nullptr, fv, true);
      conv_forward<double>(hp, p.hc, nullptr, cv, true);
      conv_forward<double>(hp, p.ho, nullptr, ov, true);
    }
    auto cell = plane(cache.c, d.axis, idx);
    auto hv = plane(cache.h, d.axis, idx);
    const auto cell_prev =
        first ? PlaneView<const double>{} : plane(std::as_const(cache).c, d.axis, prev);
    parallel_for(A * B, [&](std::size_t begin, std::size_t end) {
      for (std::size_t pix = begin; pix < end; ++pix) {
        const std::size_t a = pix % A, b = pix / A;
        for (std::size_t o = 0; o < O; ++o) {
          const double ig = sigmoid(iv.at(a, b, o));
          const double fg = sigmoid(fv.at(a, b, o));
          const double cc = std::tanh(cv.at(a, b, o));
          const double og = sigmoid(ov.at(a, b, o));
          iv.at(a, b, o) = ig;
          fv.at(a, b, o) = fg;
          cv.at(a, b, o) = cc;
          ov.at(a, b, o) = og;
          const double cp = first ? 0.0 : cell_prev.at(a, b, o);
          const double cval = ig * cc + fg * cp;
          cell.at(a, b, o) = cval;
          hv.at(a, b, o) = og * std::tanh(cval);
        }
      }
    });
  }
  return cache;
}

void sweep_backward(const Vol& x, const SweepCache& cache,
                    const ClstmParams& p, Direction d, const Vol& dh,
                    Vol& dx, ClstmParams& dp) {
  check_sweep_shapes(x, p);
  const std::size_t O = p.out_channels();
  if (dh.W != x.W || dh.H != x.H || dh.D != x.D || dh.C != O)
    throw ShapeError("sweep_backward: dh shape mismatch");
  if (!dx.same_shape(x)) throw ShapeError("sweep_backward: dx shape mismatch");
  if (cache.h.C != O || cache.h.W != x.W || cache.h.H != x.H ||
      cache.h.D != x.D)
    throw ShapeError("sweep_backward: cache shape mismatch");
  const std::size_t ext = axis_extent(x.W, x.H, x.D, d.axis);
  const auto probe = plane(x, d.axis, 0);
  const std::size_t A = probe.A, B = probe.B;

  PlaneBuf<double> dpi(A, B, O), dpf(A, B, O), dpc(A, B, O), dpo(A, B, O);
  PlaneBuf<double> dh_carry(A, B, O), dc_carry(A, B, O);

  for (std::size_t tt = ext; tt-- > 0;) {
    const std::size_t idx = d.sign > 0 ? tt : ext - 1 - tt;
    const std::size_t prev = d.sign > 0 ? idx - 1 : idx + 1;
    const bool first = tt == 0;
    const auto ig = plane(cache.i, d.axis, idx);
    const auto fg = plane(cache.f, d.axis, idx);
    const auto cc = plane(cache.cand, d.axis, idx);
    const auto og = plane(cache.o, d.axis, idx);
    const auto cell = plane(cache.c, d.axis, idx);
    const auto dh_ext = plane(dh, d.axis, idx);
    const auto cell_prev =
        first ? PlaneView<const double>{} : plane(cache.c, d.axis, prev);
    parallel_for(A * B, [&](std::size_t begin, std::size_t end) {
      for (std::size_t pix = begin; pix < end; ++pix) {
        const std::size_t a = pix % A, b = pix / A;
        for (std::size_t o = 0; o < O; ++o) {
          const std::size_t e = pix + A * B * o;
          const double dht = dh_ext.at(a, b, o) + dh_carry.v[e];
          const double ov = og.at(a, b, o);
          const double tc = std::tanh(cell.at(a, b, o));
          const double iv = ig.at(a, b, o);
          const double fv = fg.at(a, b, o);
          const double cv = cc.at(a, b, o);
          dpo.v[e] = dht * tc * ov * (1.0 - ov);
          const double dc = dht * ov * (1.0 - tc * tc) + dc_carry.v[e];
          dpc.v[e] = dc * iv * (1.0 - cv * cv);
          dpi.v[e] = dc * cv * iv * (1.0 - iv);
          const double cp = first ? 0.0 : cell_prev.at(a, b, o);
          dpf.v[e] = dc * cp * fv * (1.0 - fv);
          dc_carry.v[e] = dc * fv;
        }
      }
    });
    auto dxp = plane(dx, d.axis, idx);
    conv_backward_input(dpi.cview(), p.xi, dxp, true);
    conv_backward_input(dpf.cview(), p.xf, dxp, true);
    conv_backward_input(dpc.cview(), p.xc, dxp, true);
    conv_backward_input(dpo.cview(), p.xo, dxp, true);
    const auto xa = plane(x, d.axis, idx);
    conv_backward_kernel(xa, dpi.cview(), dp.xi, dp.bi.data());
    conv_backward_kernel(xa, dpf.cview(), dp.xf, dp.bf.data());
    conv_backward_kernel(xa, dpc.cview(), dp.xc, dp.bc.data());
    conv_backward_kernel(xa, dpo.cview(), dp.xo, dp.bo.data());
    if (!first) {
      conv_backward_input(dpi.cview(), p.hi, dh_carry.view(), false);
      conv_backward_input(dpf.cview(), p.hf, dh_carry.view(), true);
      conv_backward_input(dpc.cview(), p.hc, dh_carry.view(), true);
      conv_backward_input(dpo.cview(), p.ho, dh_carry.view(), true);
      const auto hp = plane(cache.h, d.axis, prev);
      conv_backward_kernel(hp, dpi.cview(), dp.hi, nullptr);
      conv_backward_kernel(hp, dpf.cview(), dp.hf, nullptr);
      conv_backward_kernel(hp, dpc.cview(), dp.hc, nullptr);
      conv_backward_kernel(hp, dpo.cview(), dp.ho, nullptr);
    }
  }
}

}  // namespace pyra
