#include "pyra/datapipe.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include "pyra/parallel.hpp"

namespace pyra {

Vol normalize_slices(const Vol& v) {
  Vol out(v.W, v.H, v.D, v.C);
  const std::size_t n = v.W * v.H;
  parallel_for(v.D * v.C, 1, [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      const double* in = v.data.data() + s * n;
      double* dst = out.data.data() + s * n;
      double lo = in[0], hi = in[0], sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sum += in[i];
        lo = in[i] < lo ? in[i] : lo;
        hi = in[i] > hi ? in[i] : hi;
      }
      if (lo == hi) {
        std::memset(dst, 0, n * sizeof(double));
        continue;
      }
      const double mean = sum / static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = in[i] - mean;
        ss += d * d;
      }
      const double inv_sd = 1.0 / std::sqrt(ss / static_cast<double>(n));
      for (std::size_t i = 0; i < n; ++i) dst[i] = (in[i] - mean) * inv_sd;
    }
  });
  return out;
}

namespace {

constexpr int kGaussRadius = 15;  // 31 taps
constexpr double kGaussSigma = 5.0;

std::vector<double> gauss_taps() {
  std::vector<double> t(2 * kGaussRadius + 1);
  double sum = 0.0;
  for (int i = -kGaussRadius; i <= kGaussRadius; ++i) {
    t[i + kGaussRadius] =
        std::exp(-0.5 * static_cast<double>(i * i) / (kGaussSigma * kGaussSigma));
    sum += t[i + kGaussRadius];
  }
  for (auto& x : t) x /= sum;
  return t;
}

inline std::size_t clamp_idx(long i, std::size_t n) {
  if (i < 0) return 0;
  if (i >= static_cast<long>(n)) return n - 1;
  return static_cast<std::size_t>(i);
}

}  // namespace

Vol gaussian_subtract(const Vol& v) {
  const std::vector<double> taps = gauss_taps();
  Vol out(v.W, v.H, v.D, v.C);
  const std::size_t n = v.W * v.H;
  parallel_for(v.D * v.C, 1, [&](std::size_t begin, std::size_t end) {
    std::vector<double> tmp(n);
    for (std::size_t s = begin; s < end; ++s) {
      const double* in = v.data.data() + s * n;
      double* dst = out.data.data() + s * n;
      for (std::size_t y = 0; y < v.H; ++y)
        for (std::size_t x = 0; x < v.W; ++x) {
          double acc = 0.0;
          for (int j = -kGaussRadius; j <= kGaussRadius; ++j)
            acc += taps[j + kGaussRadius] *
                   in[clamp_idx(static_cast<long>(x) + j, v.W) + v.W * y];
          tmp[x + v.W * y] = acc;
        }
      for (std::size_t y = 0; y < v.H; ++y)
        for (std::size_t x = 0; x < v.W; ++x) {
          double acc = 0.0;
          for (int j = -kGaussRadius; j <= kGaussRadius; ++j)
            acc += taps[j + kGaussRadius] *
                   tmp[x + v.W * clamp_idx(static_cast<long>(y) + j, v.H)];
          dst[x + v.W * y] = in[x + v.W * y] - acc;
        }
    }
  });
  return out;
}

namespace {

constexpr std::size_t kClaheBins = 256;
constexpr std::size_t kClaheTile = 16;
constexpr double kClaheClip = 2.0;

struct TileGrid {
  std::size_t tiles_x = 1, tiles_y = 1;
  std::vector<std::size_t> x0, x1, y0, y1;  // [start, end) per tile
  std::vector<double> cx, cy;               // tile centers

  TileGrid(std::size_t W, std::size_t H) {
    if (W >= kClaheTile && H >= kClaheTile) {
      tiles_x = (W + kClaheTile - 1) / kClaheTile;
      tiles_y = (H + kClaheTile - 1) / kClaheTile;
    }
    for (std::size_t t = 0; t < tiles_x; ++t) {
      const std::size_t a = tiles_x == 1 ? 0 : t * kClaheTile;
      const std::size_t b = tiles_x == 1 ? W : std::min(W, (t + 1) * kClaheTile);
      x0.push_back(a);
      x1.push_back(b);
      cx.push_back((static_cast<double>(a) + static_cast<double>(b) - 1.0) / 2.0);
    }
    for (std::size_t t = 0; t < tiles_y; ++t) {
      const std::size_t a = tiles_y == 1 ? 0 : t * kClaheTile;
      const std::size_t b = tiles_y == 1 ? H : std::min(H, (t + 1) * kClaheTile);
      y0.push_back(a);
      y1.push_back(b);
      cy.push_back((static_cast<double>(a) + static_cast<double>(b) - 1.0) / 2.0);
    }
  }
};

// Finds the two neighboring tile centers along one axis and the blend
// weight toward the upper one; pixels outside the first/last center clamp.
void locate(const std::vector<double>& centers, double pos, std::size_t& lo,
            std::size_t& hi, double& w) {
  if (pos <= centers.front()) {
    lo = hi = 0;
    w = 0.0;
    return;
  }
  if (pos >= centers.back()) {
    lo = hi = centers.size() - 1;
    w = 0.0;
    return;
  }
  std::size_t t = 0;
  while (centers[t + 1] < pos) ++t;
  lo = t;
  hi = t + 1;
  w = (pos - centers[lo]) / (centers[hi] - centers[lo]);
}

}  // namespace

Vol clahe(const Vol& v) {
  Vol out(v.W, v.H, v.D, v.C);
  const std::size_t n = v.W * v.H;
  const TileGrid grid(v.W, v.H);
  parallel_for(v.D * v.C, 1, [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> bin(n);
    for (std::size_t s = begin; s < end; ++s) {
      const double* in = v.data.data() + s * n;
      double* dst = out.data.data() + s * n;
      double lo = in[0], hi = in[0];
      for (std::size_t i = 0; i < n; ++i) {
        lo = in[i] < lo ? in[i] : lo;
        hi = in[i] > hi ? in[i] : hi;
      }
      const double range = hi - lo;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t b = 0;
        if (range > 0.0) {
          b = static_cast<std::size_t>((in[i] - lo) / range *
                                       static_cast<double>(kClaheBins));
          if (b >= kClaheBins) b = kClaheBins - 1;
        }
        bin[i] = b;
      }
      // Clipped CDF mapping per tile: map[b] = cdf[b] / tile pixel count.
      std::vector<std::vector<double>> maps(grid.tiles_x * grid.tiles_y);
      for (std::size_t ty = 0; ty < grid.tiles_y; ++ty)
        for (std::size_t tx = 0; tx < grid.tiles_x; ++tx) {
          std::vector<double> h(kClaheBins, 0.0);
          for (std::size_t y = grid.y0[ty]; y < grid.y1[ty]; ++y)
            for (std::size_t x = grid.x0[tx]; x < grid.x1[tx]; ++x)
              h[bin[x + v.W * y]] += 1.0;
          const double count =
              static_cast<double>((grid.x1[tx] - grid.x0[tx]) *
                                  (grid.y1[ty] - grid.y0[ty]));
          const double clip = kClaheClip * count / static_cast<double>(kClaheBins);
          double excess = 0.0;
          for (auto& c : h)
            if (c > clip) {
              excess += c - clip;
              c = clip;
            }
          const double share = excess / static_cast<double>(kClaheBins);
          double cdf = 0.0;
          auto& m = maps[tx + grid.tiles_x * ty];
          m.resize(kClaheBins);
          for (std::size_t b = 0; b < kClaheBins; ++b) {
            cdf += h[b] + share;
            m[b] = cdf / count;
          }
        }
      for (std::size_t y = 0; y < v.H; ++y) {
        std::size_t ty0, ty1;
        double wy;
        locate(grid.cy, static_cast<double>(y), ty0, ty1, wy);
        for (std::size_t x = 0; x < v.W; ++x) {
          std::size_t tx0, tx1;
          double wx;
          locate(grid.cx, static_cast<double>(x), tx0, tx1, wx);
          const std::size_t b = bin[x + v.W * y];
          const double m00 = maps[tx0 + grid.tiles_x * ty0][b];
          const double m10 = maps[tx1 + grid.tiles_x * ty0][b];
          const double m01 = maps[tx0 + grid.tiles_x * ty1][b];
          const double m11 = maps[tx1 + grid.tiles_x * ty1][b];
          dst[x + v.W * y] = (1.0 - wy) * ((1.0 - wx) * m00 + wx * m10) +
                             wy * ((1.0 - wx) * m01 + wx * m11);
        }
      }
    }
  });
  return out;
}

Vol assemble_channels(const std::vector<Vol>& raw,
                      const std::vector<ModalityConfig>& cfg) {
  if (raw.empty()) throw ConfigError("assemble_channels: no modalities");
  if (raw.size() != cfg.size())
    throw ConfigError("assemble_channels: modality/config count mismatch");
  std::size_t total = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].W != raw[0].W || raw[i].H != raw[0].H || raw[i].D != raw[0].D)
      throw ShapeError("assemble_channels: modality dims mismatch");
    total += ((cfg[i].use_original ? 1u : 0u) +
              (cfg[i].use_preprocessed ? 1u : 0u)) * raw[i].C;
  }
  if (total == 0) throw ConfigError("assemble_channels: no channels enabled");
  Vol out(raw[0].W, raw[0].H, raw[0].D, total);
  const std::size_t V = out.voxels();
  std::size_t ch = 0;
  auto append = [&](const Vol& v) {
    std::memcpy(out.data.data() + V * ch, v.data.data(),
                v.data.size() * sizeof(double));
    ch += v.C;
  };
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (cfg[i].use_original) append(normalize_slices(raw[i]));
    if (cfg[i].use_preprocessed)
      append(normalize_slices(clahe(gaussian_subtract(raw[i]))));
  }
  return out;
}

SubVolumeSample sample_subvolume(const Vol& source, const LabelVolume& target,
                                 std::size_t sw, std::size_t sh,
                                 std::size_t sd, Rng& rng,
                                 const AugmentFlags& aug) {
  if (target.W != source.W || target.H != source.H || target.D != source.D)
    throw ShapeError("sample_subvolume: source/target dims mismatch");
  if (sw == 0 || sh == 0 || sd == 0 || sw > source.W || sh > source.H ||
      sd > source.D)
    throw ConfigError("sample_subvolume: sub-volume does not fit in the data");
  SubVolumeSample s;
  s.ox = rng.uniform_int(source.W - sw + 1);
  s.oy = rng.uniform_int(source.H - sh + 1);
  s.oz = rng.uniform_int(source.D - sd + 1);
  s.input = Vol(sw, sh, sd, source.C);
  s.target = LabelVolume(sw, sh, sd, target.num_classes);
  for (std::size_t c = 0; c < source.C; ++c)
    for (std::size_t z = 0; z < sd; ++z)
      for (std::size_t y = 0; y < sh; ++y)
        for (std::size_t x = 0; x < sw; ++x)
          s.input.at(x, y, z, c) = source.at(s.ox + x, s.oy + y, s.oz + z, c);
  for (std::size_t z = 0; z < sd; ++z)
    for (std::size_t y = 0; y < sh; ++y)
      for (std::size_t x = 0; x < sw; ++x)
        s.target.at(x, y, z) = target.at(s.ox + x, s.oy + y, s.oz + z);
  const Axis axes[3] = {Axis::X, Axis::Y, Axis::Z};
  const bool enabled[3] = {aug.flip_x, aug.flip_y, aug.flip_z};
  bool* record[3] = {&s.flipped_x, &s.flipped_y, &s.flipped_z};
  for (int i = 0; i < 3; ++i) {
    if (!enabled[i]) continue;
    if (!rng.bernoulli(0.5)) continue;
    *record[i] = true;
    s.input = flip(s.input, axes[i]);
    s.target = flip(s.target, axes[i]);
  }
  if (aug.rotate_z) {
    s.rotated = true;
    s.angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    s.input = rotate_z(s.input, s.angle, Interp::Bilinear);
    s.target = rotate_z(s.target, s.angle);
  }
  return s;
}

Vol stitch(const std::vector<TilePrediction>& tiles, std::size_t W,
           std::size_t H, std::size_t D, double sigma_frac) {
  if (tiles.empty()) throw DataError("stitch: no tile predictions");
  if (!(sigma_frac > 0.0)) throw ConfigError("stitch: sigma fraction must be > 0");
  const std::size_t C = tiles[0].prob.C;
  Vol acc(W, H, D, C);
  std::vector<double> wsum(W * H * D, 0.0);
  auto window = [&](std::size_t extent) {
    std::vector<double> w(extent);
    const double center = (static_cast<double>(extent) - 1.0) / 2.0;
    const double sigma = sigma_frac * static_cast<double>(extent);
    for (std::size_t i = 0; i < extent; ++i) {
      const double d = (static_cast<double>(i) - center) / sigma;
      w[i] = std::exp(-0.5 * d * d);
    }
    return w;
  };
  for (const auto& t : tiles) {
    const Vol& p = t.prob;
    if (p.C != C) throw ShapeError("stitch: tile channel count mismatch");
    if (t.ox + p.W > W || t.oy + p.H > H || t.oz + p.D > D)
      throw ShapeError("stitch: tile exceeds output bounds");
    const auto gx = window(p.W), gy = window(p.H), gz = window(p.D);
    const std::size_t V = W * H * D, tV = p.voxels();
    parallel_for(tV, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t x = i % p.W;
        const std::size_t y = (i / p.W) % p.H;
        const std::size_t z = i / (p.W * p.H);
        const double w = gx[x] * gy[y] * gz[z];
        const std::size_t g = (t.ox + x) + W * ((t.oy + y) + H * (t.oz + z));
        wsum[g] += w;
        for (std::size_t c = 0; c < C; ++c)
          acc.data[g + V * c] += w * p.data[i + tV * c];
      }
    });
  }
  const std::size_t V = W * H * D;
  for (std::size_t g = 0; g < V; ++g)
    if (wsum[g] == 0.0) {
      const std::size_t x = g % W, y = (g / W) % H, z = g / (W * H);
      throw DataError("stitch: voxel (" + std::to_string(x) + "," +
                      std::to_string(y) + "," + std::to_string(z) +
                      ") not covered by any tile");
    }
  parallel_for(V, [&](std::size_t begin, std::size_t end) {
    for (std::size_t g = begin; g < end; ++g)
      for (std::size_t c = 0; c < C; ++c) acc.data[g + V * c] /= wsum[g];
  });
  return acc;
}

std::vector<std::size_t> tile_origins(std::size_t extent, std::size_t tile,
                                      double overlap) {
  if (tile == 0 || tile > extent)
    throw ShapeError("tile_origins: tile must be in [1, extent]");
  if (!(overlap >= 0.0 && overlap < 1.0))
    throw ConfigError("tile_origins: overlap fraction must be in [0, 1)");
  auto stride = static_cast<std::size_t>(static_cast<double>(tile) * (1.0 - overlap));
  if (stride == 0) stride = 1;
  std::vector<std::size_t> out;
  for (std::size_t o = 0;; o += stride) {
    if (o + tile >= extent) {
      out.push_back(extent - tile);
      break;
    }
    out.push_back(o);
  }
  return out;
}

}  // namespace pyra
