#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "pyra/clstm.hpp"
#include "pyra/volume.hpp"

namespace pyra {

// Six directional C-LSTMs whose outputs are summed elementwise.
template <class T>
struct PyramidLayerT {
  std::array<ClstmParamsT<T>, 6> dirs;  // indexed parallel to kDirections

  PyramidLayerT() = default;
  PyramidLayerT(std::size_t in_ch, std::size_t out_ch, std::size_t filter) {
    dirs.fill(ClstmParamsT<T>(in_ch, out_ch, filter));
  }

  std::size_t in_channels() const { return dirs[0].in_channels(); }
  std::size_t out_channels() const { return dirs[0].out_channels(); }
  std::size_t filter() const { return dirs[0].filter(); }
  std::size_t param_count() const { return 6 * dirs[0].param_count(); }

  template <class F>
  void for_each_param(F&& f) {
    for (auto& d : dirs) d.for_each_param(f);
  }
  template <class F>
  void for_each_param(F&& f) const {
    for (const auto& d : dirs) d.for_each_param(f);
  }
};

enum class Activation : std::uint8_t { Tanh = 1, Softmax = 2 };

// Per-voxel channel mixing: z = W a + b applied at every voxel, then tanh
// or channel softmax. W(o, i) lives at w[o*in_units + i].
template <class T>
struct FcLayerT {
  std::size_t in_units = 0, out_units = 0;
  Activation act = Activation::Tanh;
  std::vector<T> w, b;

  FcLayerT() = default;
  FcLayerT(std::size_t in, std::size_t out, Activation a)
      : in_units(in), out_units(out), act(a), w(in * out, T(0)),
        b(out, T(0)) {
    if (in == 0 || out == 0) throw ShapeError("fc layer units must be >= 1");
  }

  std::size_t param_count() const { return w.size() + b.size(); }

  template <class F>
  void for_each_param(F&& f) {
    for (auto& v : w) f(v);
    for (auto& v : b) f(v);
  }
  template <class F>
  void for_each_param(F&& f) const {
    for (const auto& v : w) f(v);
    for (const auto& v : b) f(v);
  }
};

template <class T>
using LayerT = std::variant<PyramidLayerT<T>, FcLayerT<T>>;

template <class T>
struct NetworkT {
  std::vector<LayerT<T>> layers;

  void add_pyramid(std::size_t in_ch, std::size_t out_ch, std::size_t filter) {
    layers.emplace_back(PyramidLayerT<T>(in_ch, out_ch, filter));
  }
  void add_fc(std::size_t in, std::size_t out, Activation a) {
    layers.emplace_back(FcLayerT<T>(in, out, a));
  }

  template <class F>
  void for_each_param(F&& f) {
    for (auto& l : layers)
      std::visit([&](auto& layer) { layer.for_each_param(f); }, l);
  }
  template <class F>
  void for_each_param(F&& f) const {
    for (const auto& l : layers)
      std::visit([&](const auto& layer) { layer.for_each_param(f); }, l);
  }
};

using PyramidLayer = PyramidLayerT<double>;
using FcLayer = FcLayerT<double>;
using Layer = LayerT<double>;
using Network = NetworkT<double>;

template <class T>
std::size_t layer_in_channels(const LayerT<T>& l) {
  return std::visit(
      [](const auto& layer) -> std::size_t {
        using L = std::decay_t<decltype(layer)>;
        if constexpr (std::is_same_v<L, PyramidLayerT<T>>)
          return layer.in_channels();
        else
          return layer.in_units;
      },
      l);
}

template <class T>
std::size_t layer_out_channels(const LayerT<T>& l) {
  return std::visit(
      [](const auto& layer) -> std::size_t {
        using L = std::decay_t<decltype(layer)>;
        if constexpr (std::is_same_v<L, PyramidLayerT<T>>)
          return layer.out_channels();
        else
          return layer.out_units;
      },
      l);
}

template <class T>
std::size_t param_count(const NetworkT<T>& net) {
  std::size_t n = 0;
  for (const auto& l : net.layers)
    n += std::visit([](const auto& layer) { return layer.param_count(); }, l);
  return n;
}

// Checks channel chaining and that the network ends in a softmax layer.
void validate_network(const Network& net, std::size_t input_channels);

// Fills every weight and bias i.i.d. uniform on (-0.1, 0.1) from the seed's
// "init" substream; the same seed always yields the same network.
void init_uniform(Network& net, std::uint64_t seed);

// Parameter addresses in declaration order (the serialization order); the
// optimizer walks parameters and gradients through these.
std::vector<double*> collect_params(Network& net);
std::vector<const double*> collect_params(const Network& net);

NetworkT<float> to_float(const Network& net);

template <class T>
void fc_forward(const VolT<T>& x, const FcLayerT<T>& fc, VolT<T>& out);

// Gradient of an FC layer given its input x, output y, and dE/dy; the
// softmax (or tanh) derivative is applied inside. dx is overwritten; dfc is
// accumulated into.
void fc_backward(const Vol& x, const FcLayer& fc, const Vol& y,
                 const Vol& dout, Vol& dx, FcLayer& dfc);

template <class T>
VolT<T> pyramid_forward(const VolT<T>& x, const PyramidLayerT<T>& layer);

template <class T>
VolT<T> network_forward(const VolT<T>& x, const NetworkT<T>& net);

struct NetworkCache {
  std::vector<Vol> acts;                    // acts[0] = input, then one per layer
  std::vector<std::vector<SweepCache>> sweeps;  // six per pyramid layer, else empty
};

Vol network_forward_cached(const Vol& x, const Network& net,
                           NetworkCache& cache);

// Reverse-mode pass; dprob is dE/d(output probabilities). Returns gradients
// shaped exactly like the network.
Network network_backward(const Network& net, const NetworkCache& cache,
                         const Vol& dprob);

struct OptimizerState {
  std::vector<double> mse, momentum;
  double eps = 1e-5;
  double rho_mse = 0.9;
  double rho_m = 0.9;
};

OptimizerState make_optimizer_state(const Network& net);

struct Checkpoint {
  Network net;
  OptimizerState opt;
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;
};

// PNET container: magic "PNET", version u8, layer descriptors, parameters
// as little-endian f64 in declaration order, optimizer hyperparameters and
// state (mse block, then momentum block), then epoch and seed as u64.
void save_checkpoint(const std::string& path, const Network& net,
                     const OptimizerState& opt, std::uint64_t epoch,
                     std::uint64_t seed);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pyra
