#include "pyra/pyramid_net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "pyra/detail/bytes.hpp"
#include "pyra/parallel.hpp"
#include "pyra/rng.hpp"

namespace pyra {

void validate_network(const Network& net, std::size_t input_channels) {
  if (net.layers.empty()) throw ConfigError("network has no layers");
  std::size_t ch = input_channels;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const std::size_t in = layer_in_channels(net.layers[k]);
    if (in != ch)
      throw ConfigError("layer " + std::to_string(k) + " expects " +
                        std::to_string(in) + " channels but receives " +
                        std::to_string(ch));
    ch = layer_out_channels(net.layers[k]);
  }
  const auto* last = std::get_if<FcLayer>(&net.layers.back());
  if (!last || last->act != Activation::Softmax)
    throw ConfigError("network must end in a softmax layer");
}

void init_uniform(Network& net, std::uint64_t seed) {
  Rng rng = substream(seed, "init");
  net.for_each_param([&](double& w) { w = rng.uniform(-0.1, 0.1); });
}

std::vector<double*> collect_params(Network& net) {
  std::vector<double*> out;
  out.reserve(param_count(net));
  net.for_each_param([&](double& w) { out.push_back(&w); });
  return out;
}

std::vector<const double*> collect_params(const Network& net) {
  std::vector<const double*> out;
  out.reserve(param_count(net));
  net.for_each_param([&](const double& w) { out.push_back(&w); });
  return out;
}

NetworkT<float> to_float(const Network& net) {
  NetworkT<float> out;
  for (const auto& l : net.layers) {
    if (const auto* p = std::get_if<PyramidLayer>(&l)) {
      PyramidLayerT<float> fl(p->in_channels(), p->out_channels(), p->filter());
      for (std::size_t d = 0; d < 6; ++d) {
        const auto& src = p->dirs[d];
        auto& dst = fl.dirs[d];
        auto cast = [](const std::vector<double>& a, std::vector<float>& b) {
          for (std::size_t i = 0; i < a.size(); ++i)
            b[i] = static_cast<float>(a[i]);
        };
        cast(src.xi.w, dst.xi.w); cast(src.xf.w, dst.xf.w);
        cast(src.xc.w, dst.xc.w); cast(src.xo.w, dst.xo.w);
        cast(src.hi.w, dst.hi.w); cast(src.hf.w, dst.hf.w);
        cast(src.hc.w, dst.hc.w); cast(src.ho.w, dst.ho.w);
        cast(src.bi, dst.bi); cast(src.bf, dst.bf);
        cast(src.bc, dst.bc); cast(src.bo, dst.bo);
      }
      out.layers.emplace_back(std::move(fl));
    } else {
      const auto& fc = std::get<FcLayer>(l);
      FcLayerT<float> ff(fc.in_units, fc.out_units, fc.act);
      for (std::size_t i = 0; i < fc.w.size(); ++i)
        ff.w[i] = static_cast<float>(fc.w[i]);
      for (std::size_t i = 0; i < fc.b.size(); ++i)
        ff.b[i] = static_cast<float>(fc.b[i]);
      out.layers.emplace_back(std::move(ff));
    }
  }
  return out;
}

template <class T>
void fc_forward(const VolT<T>& x, const FcLayerT<T>& fc, VolT<T>& out) {
  if (x.C != fc.in_units) throw ShapeError("fc_forward: channel mismatch");
  if (out.W != x.W || out.H != x.H || out.D != x.D || out.C != fc.out_units)
    throw ShapeError("fc_forward: output shape mismatch");
  const std::size_t V = x.voxels();
  const std::size_t in = fc.in_units, nout = fc.out_units;
  parallel_for(V, [&](std::size_t begin, std::size_t end) {
    std::vector<T> z(nout);
    for (std::size_t v = begin; v < end; ++v) {
      for (std::size_t o = 0; o < nout; ++o) {
        T s = fc.b[o];
        const T* wrow = fc.w.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) s += wrow[i] * x.data[v + V * i];
        z[o] = s;
      }
      if (fc.act == Activation::Tanh) {
        for (std::size_t o = 0; o < nout; ++o)
          out.data[v + V * o] = std::tanh(z[o]);
      } else {
        T m = z[0];
        for (std::size_t o = 1; o < nout; ++o) m = z[o] > m ? z[o] : m;
        T sum = T(0);
        for (std::size_t o = 0; o < nout; ++o) {
          z[o] = std::exp(z[o] - m);
          sum += z[o];
        }
        for (std::size_t o = 0; o < nout; ++o) out.data[v + V * o] = z[o] / sum;
      }
    }
  });
}

template void fc_forward<double>(const VolT<double>&, const FcLayerT<double>&,
                                 VolT<double>&);
template void fc_forward<float>(const VolT<float>&, const FcLayerT<float>&,
                                VolT<float>&);

void fc_backward(const Vol& x, const FcLayer& fc, const Vol& y,
                 const Vol& dout, Vol& dx, FcLayer& dfc) {
  if (x.C != fc.in_units || y.C != fc.out_units || !y.same_shape(dout) ||
      !dx.same_shape(x) || y.voxels() != x.voxels())
    throw ShapeError("fc_backward: shape mismatch");
  if (dfc.in_units != fc.in_units || dfc.out_units != fc.out_units)
    throw ShapeError("fc_backward: gradient shape mismatch");
  const std::size_t V = x.voxels();
  const std::size_t in = fc.in_units, nout = fc.out_units;

  // Pre-activation gradient, with the tanh/softmax derivative folded in.
  Vol dz(y.W, y.H, y.D, y.C);
  parallel_for(V, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      if (fc.act == Activation::Tanh) {
        for (std::size_t o = 0; o < nout; ++o) {
          const double yo = y.data[v + V * o];
          dz.data[v + V * o] = dout.data[v + V * o] * (1.0 - yo * yo);
        }
      } else {
        double s = 0.0;
        for (std::size_t o = 0; o < nout; ++o)
          s += dout.data[v + V * o] * y.data[v + V * o];
        for (std::size_t o = 0; o < nout; ++o) {
          const double yo = y.data[v + V * o];
          dz.data[v + V * o] = yo * (dout.data[v + V * o] - s);
        }
      }
    }
  });

  // One weight per worker, summing voxels in a fixed order.
  parallel_for(in * nout, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const std::size_t o = idx / in, i = idx % in;
      double sum = 0.0;
      for (std::size_t v = 0; v < V; ++v)
        sum += dz.data[v + V * o] * x.data[v + V * i];
      dfc.w[idx] += sum;
    }
  });
  for (std::size_t o = 0; o < nout; ++o) {
    double sum = 0.0;
    for (std::size_t v = 0; v < V; ++v) sum += dz.data[v + V * o];
    dfc.b[o] += sum;
  }

  parallel_for(V, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v)
      for (std::size_t i = 0; i < in; ++i) {
        double sum = 0.0;
        for (std::size_t o = 0; o < nout; ++o)
          sum += dz.data[v + V * o] * fc.w[o * in + i];
        dx.data[v + V * i] = sum;
      }
  });
}

template <class T>
VolT<T> pyramid_forward(const VolT<T>& x, const PyramidLayerT<T>& layer) {
  VolT<T> h(x.W, x.H, x.D, layer.out_channels());
  for (std::size_t d = 0; d < kDirections.size(); ++d)
    sweep_forward<T>(x, layer.dirs[d], kDirections[d], h, d > 0);
  return h;
}

template VolT<double> pyramid_forward<double>(const VolT<double>&,
                                              const PyramidLayerT<double>&);
template VolT<float> pyramid_forward<float>(const VolT<float>&,
                                            const PyramidLayerT<float>&);

template <class T>
VolT<T> network_forward(const VolT<T>& x, const NetworkT<T>& net) {
  VolT<T> cur = x;
  for (const auto& l : net.layers) {
    VolT<T> next = std::visit(
        [&](const auto& layer) -> VolT<T> {
          using L = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<L, PyramidLayerT<T>>) {
            return pyramid_forward<T>(cur, layer);
          } else {
            VolT<T> out(cur.W, cur.H, cur.D, layer.out_units);
            fc_forward<T>(cur, layer, out);
            return out;
          }
        },
        l);
    cur = std::move(next);
  }
  return cur;
}

template VolT<double> network_forward<double>(const VolT<double>&,
                                              const NetworkT<double>&);
template VolT<float> network_forward<float>(const VolT<float>&,
                                            const NetworkT<float>&);

Vol network_forward_cached(const Vol& x, const Network& net,
                           NetworkCache& cache) {
  cache.acts.clear();
  cache.sweeps.clear();
  cache.acts.reserve(net.layers.size() + 1);
  cache.sweeps.resize(net.layers.size());
  cache.acts.push_back(x);
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const Vol& in = cache.acts.back();
    if (const auto* p = std::get_if<PyramidLayer>(&net.layers[k])) {
      Vol h(in.W, in.H, in.D, p->out_channels());
      auto& sweeps = cache.sweeps[k];
      sweeps.reserve(6);
      for (std::size_t d = 0; d < kDirections.size(); ++d) {
        sweeps.push_back(sweep_forward_cached(in, p->dirs[d], kDirections[d]));
        const Vol& hd = sweeps.back().h;
        for (std::size_t i = 0; i < h.data.size(); ++i)
          h.data[i] += hd.data[i];
      }
      cache.acts.push_back(std::move(h));
    } else {
      const auto& fc = std::get<FcLayer>(net.layers[k]);
      Vol out(in.W, in.H, in.D, fc.out_units);
      fc_forward<double>(in, fc, out);
      cache.acts.push_back(std::move(out));
    }
  }
  return cache.acts.back();
}

namespace {

Network zeros_like(const Network& net) {
  Network out;
  for (const auto& l : net.layers) {
    if (const auto* p = std::get_if<PyramidLayer>(&l))
      out.add_pyramid(p->in_channels(), p->out_channels(), p->filter());
    else {
      const auto& fc = std::get<FcLayer>(l);
      out.add_fc(fc.in_units, fc.out_units, fc.act);
    }
  }
  return out;
}

}  // namespace

Network network_backward(const Network& net, const NetworkCache& cache,
                         const Vol& dprob) {
  if (cache.acts.size() != net.layers.size() + 1 ||
      cache.sweeps.size() != net.layers.size())
    throw ShapeError("network_backward: cache does not match network");
  Network grads = zeros_like(net);
  Vol grad = dprob;
  for (std::size_t k = net.layers.size(); k-- > 0;) {
    const Vol& in = cache.acts[k];
    const Vol& out = cache.acts[k + 1];
    if (!grad.same_shape(out))
      throw ShapeError("network_backward: gradient shape mismatch");
    Vol dx(in.W, in.H, in.D, in.C);
    if (const auto* p = std::get_if<PyramidLayer>(&net.layers[k])) {
      auto& gp = std::get<PyramidLayer>(grads.layers[k]);
      for (std::size_t d = 0; d < kDirections.size(); ++d)
        sweep_backward(in, cache.sweeps[k][d], p->dirs[d], kDirections[d],
                       grad, dx, gp.dirs[d]);
    } else {
      const auto& fc = std::get<FcLayer>(net.layers[k]);
      auto& gfc = std::get<FcLayer>(grads.layers[k]);
      fc_backward(in, fc, out, grad, dx, gfc);
    }
    grad = std::move(dx);
  }
  return grads;
}

OptimizerState make_optimizer_state(const Network& net) {
  OptimizerState opt;
  const std::size_t n = param_count(net);
  opt.mse.assign(n, 0.0);
  opt.momentum.assign(n, 0.0);
  return opt;
}

namespace {

constexpr char kNetMagic[4] = {'P', 'N', 'E', 'T'};
constexpr std::uint8_t kNetVersion = 1;
constexpr std::uint8_t kLayerPyramid = 1;
constexpr std::uint8_t kLayerFc = 2;

}  // namespace

void save_checkpoint(const std::string& path, const Network& net,
                     const OptimizerState& opt, std::uint64_t epoch,
                     std::uint64_t seed) {
  const std::size_t n = param_count(net);
  if (opt.mse.size() != n || opt.momentum.size() != n)
    throw ShapeError("save_checkpoint: optimizer state size mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open file for writing");
  os.write(kNetMagic, 4);
  detail::put_u8(os, kNetVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& l : net.layers) {
    if (const auto* p = std::get_if<PyramidLayer>(&l)) {
      detail::put_u8(os, kLayerPyramid);
      detail::put_u32(os, static_cast<std::uint32_t>(p->in_channels()));
      detail::put_u32(os, static_cast<std::uint32_t>(p->out_channels()));
      detail::put_u32(os, static_cast<std::uint32_t>(p->filter()));
    } else {
      const auto& fc = std::get<FcLayer>(l);
      detail::put_u8(os, kLayerFc);
      detail::put_u32(os, static_cast<std::uint32_t>(fc.in_units));
      detail::put_u32(os, static_cast<std::uint32_t>(fc.out_units));
      detail::put_u8(os, static_cast<std::uint8_t>(fc.act));
    }
  }
  net.for_each_param([&](const double& w) { detail::put_f64(os, w); });
  detail::put_f64(os, opt.eps);
  detail::put_f64(os, opt.rho_mse);
  detail::put_f64(os, opt.rho_m);
  detail::put_f64_array(os, opt.mse.data(), opt.mse.size());
  detail::put_f64_array(os, opt.momentum.data(), opt.momentum.size());
  detail::put_u64(os, epoch);
  detail::put_u64(os, seed);
  if (!os) throw DataError(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": cannot open file");
  char magic[4];
  if (!is.read(magic, 4)) throw DataError(path + ": truncated reading magic");
  if (std::memcmp(magic, kNetMagic, 4) != 0)
    throw DataError(path + ": bad magic (not a PNET checkpoint)");
  const std::uint8_t version = detail::get_u8(is, path + ": truncated reading version");
  if (version != kNetVersion)
    throw DataError(path + ": unsupported version " +
                    std::to_string(static_cast<unsigned>(version)));
  const std::uint32_t nlayers =
      detail::get_u32(is, path + ": truncated reading layer count");
  Checkpoint ck;
  for (std::uint32_t k = 0; k < nlayers; ++k) {
    const std::string ctx = path + ": truncated reading layer " + std::to_string(k);
    const std::uint8_t type = detail::get_u8(is, ctx);
    if (type == kLayerPyramid) {
      const std::uint32_t in = detail::get_u32(is, ctx);
      const std::uint32_t out = detail::get_u32(is, ctx);
      const std::uint32_t filter = detail::get_u32(is, ctx);
      if (in == 0 || out == 0 || filter == 0 || filter % 2 == 0)
        throw DataError(path + ": invalid pyramid layer descriptor");
      ck.net.add_pyramid(in, out, filter);
    } else if (type == kLayerFc) {
      const std::uint32_t in = detail::get_u32(is, ctx);
      const std::uint32_t out = detail::get_u32(is, ctx);
      const std::uint8_t act = detail::get_u8(is, ctx);
      if (in == 0 || out == 0 ||
          (act != static_cast<std::uint8_t>(Activation::Tanh) &&
           act != static_cast<std::uint8_t>(Activation::Softmax)))
        throw DataError(path + ": invalid fc layer descriptor");
      ck.net.add_fc(in, out, static_cast<Activation>(act));
    } else {
      throw DataError(path + ": unknown layer type " +
                      std::to_string(static_cast<unsigned>(type)));
    }
  }
  const std::string pctx = path + ": truncated reading parameters";
  ck.net.for_each_param([&](double& w) { w = detail::get_f64(is, pctx); });
  const std::size_t n = param_count(ck.net);
  const std::string octx = path + ": truncated reading optimizer state";
  ck.opt.eps = detail::get_f64(is, octx);
  ck.opt.rho_mse = detail::get_f64(is, octx);
  ck.opt.rho_m = detail::get_f64(is, octx);
  ck.opt.mse.resize(n);
  ck.opt.momentum.resize(n);
  detail::get_f64_array(is, ck.opt.mse.data(), n, octx);
  detail::get_f64_array(is, ck.opt.momentum.data(), n, octx);
  ck.epoch = detail::get_u64(is, path + ": truncated reading epoch");
  ck.seed = detail::get_u64(is, path + ": truncated reading seed");
  char extra;
  if (is.get(extra))
    throw DataError(path + ": trailing bytes after checkpoint payload");
  return ck;
}

}  // namespace pyra
