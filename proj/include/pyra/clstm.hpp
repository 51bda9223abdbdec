#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "pyra/conv2d.hpp"
#include "pyra/volume.hpp"

namespace pyra {

struct Direction {
  Axis axis;
  int sign;  // +1 or -1
};

// The six sweep directions, in the fixed order used for parameter layout
// and checkpoints.
inline constexpr std::array<Direction, 6> kDirections = {{
    {Axis::Z, +1}, {Axis::Z, -1},
    {Axis::Y, +1}, {Axis::Y, -1},
    {Axis::X, +1}, {Axis::X, -1},
}};

// Parameters of one directional convolutional LSTM: four input kernels
// (C -> O), four recurrent kernels (O -> O), four gate biases. Declaration
// order here is the serialization order.
template <class T>
struct ClstmParamsT {
  KernelT<T> xi, xf, xc, xo;
  KernelT<T> hi, hf, hc, ho;
  std::vector<T> bi, bf, bc, bo;

  ClstmParamsT() = default;
  ClstmParamsT(std::size_t in_ch, std::size_t out_ch, std::size_t filter)
      : xi(filter, filter, in_ch, out_ch), xf(filter, filter, in_ch, out_ch),
        xc(filter, filter, in_ch, out_ch), xo(filter, filter, in_ch, out_ch),
        hi(filter, filter, out_ch, out_ch), hf(filter, filter, out_ch, out_ch),
        hc(filter, filter, out_ch, out_ch), ho(filter, filter, out_ch, out_ch),
        bi(out_ch, T(0)), bf(out_ch, T(0)), bc(out_ch, T(0)),
        bo(out_ch, T(0)) {}

  std::size_t in_channels() const { return xi.cin; }
  std::size_t out_channels() const { return xi.cout; }
  std::size_t filter() const { return xi.kh; }
  std::size_t param_count() const {
    return 4 * xi.size() + 4 * hi.size() + 4 * bi.size();
  }

  template <class F>
  void for_each_param(F&& f) {
    for (auto* k : {&xi, &xf, &xc, &xo, &hi, &hf, &hc, &ho})
      for (auto& w : k->w) f(w);
    for (auto* b : {&bi, &bf, &bc, &bo})
      for (auto& w : *b) f(w);
  }
  template <class F>
  void for_each_param(F&& f) const {
    for (const auto* k : {&xi, &xf, &xc, &xo, &hi, &hf, &hc, &ho})
      for (const auto& w : k->w) f(w);
    for (const auto* b : {&bi, &bf, &bc, &bo})
      for (const auto& w : *b) f(w);
  }
};

using ClstmParams = ClstmParamsT<double>;

// Activations retained for backpropagation: gate and cell volumes for every
// plane of the sweep, in original volume coordinates.
struct SweepCache {
  Vol i, f, cand, c, o, h;
};

// One directional sweep (inference form). Planes are visited in traversal
// order along d; each plane's gates read the previous plane's h and c, both
// zero at the first plane. The plane's sweep output is written (or, with
// `accumulate`, added) into h_sum at the plane's original coordinates, so
// the six sweeps of a pyramid layer can share one output volume.
template <class T>
void sweep_forward(const VolT<T>& x, const ClstmParamsT<T>& p, Direction d,
                   VolT<T>& h_sum, bool accumulate);

// Training form: also fills a SweepCache for sweep_backward.
SweepCache sweep_forward_cached(const Vol& x, const ClstmParams& p,
                                Direction d);

// Exact reverse-mode of the sweep. Adds the gradient w.r.t. x into dx and
// the parameter gradients into dp; callers zero both before the first call.
void sweep_backward(const Vol& x, const SweepCache& cache,
                    const ClstmParams& p, Direction d, const Vol& dh,
                    Vol& dx, ClstmParams& dp);

}  // namespace pyra
