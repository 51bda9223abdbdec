#include "pyra/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

namespace pyra {

SegmentationPair make_segmentation_pair(LabelVolume predicted,
                                        LabelVolume reference,
                                        Spacing spacing) {
  if (predicted.W != reference.W || predicted.H != reference.H ||
      predicted.D != reference.D)
    throw ShapeError("segmentation pair: dims mismatch");
  if (predicted.num_classes != reference.num_classes)
    throw ShapeError("segmentation pair: num_classes mismatch");
  return {std::move(predicted), std::move(reference), spacing};
}

namespace {

struct MaskCounts {
  std::size_t a = 0, b = 0, both = 0;
};

MaskCounts mask_counts(const SegmentationPair& p, std::uint8_t k) {
  MaskCounts m;
  for (std::size_t i = 0; i < p.predicted.labels.size(); ++i) {
    const bool in_a = p.predicted.labels[i] == k;
    const bool in_b = p.reference.labels[i] == k;
    m.a += in_a;
    m.b += in_b;
    m.both += in_a && in_b;
  }
  return m;
}

struct Voxel {
  std::size_t x, y, z;
};

// Mask voxels with at least one 6-neighbor outside the mask (treating the
// volume border as outside).
std::vector<Voxel> boundary_voxels(const LabelVolume& v, std::uint8_t k) {
  std::vector<Voxel> out;
  auto in_mask = [&](long x, long y, long z) {
    if (x < 0 || y < 0 || z < 0 || x >= static_cast<long>(v.W) ||
        y >= static_cast<long>(v.H) || z >= static_cast<long>(v.D))
      return false;
    return v.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                static_cast<std::size_t>(z)) == k;
  };
  for (std::size_t z = 0; z < v.D; ++z)
    for (std::size_t y = 0; y < v.H; ++y)
      for (std::size_t x = 0; x < v.W; ++x) {
        if (v.at(x, y, z) != k) continue;
        const long xl = static_cast<long>(x), yl = static_cast<long>(y),
                   zl = static_cast<long>(z);
        if (!in_mask(xl - 1, yl, zl) || !in_mask(xl + 1, yl, zl) ||
            !in_mask(xl, yl - 1, zl) || !in_mask(xl, yl + 1, zl) ||
            !in_mask(xl, yl, zl - 1) || !in_mask(xl, yl, zl + 1))
          out.push_back({x, y, z});
      }
  return out;
}

double nearest_rank_p95(std::vector<double>& d) {
  std::sort(d.begin(), d.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(d.size())));
  return d[rank == 0 ? 0 : rank - 1];
}

double directed_p95(const std::vector<Voxel>& from,
                    const std::vector<Voxel>& to, const Spacing& s) {
  std::vector<double> dist;
  dist.reserve(from.size());
  for (const auto& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : to) {
      const double dx = (static_cast<double>(a.x) - static_cast<double>(b.x)) * s.sx;
      const double dy = (static_cast<double>(a.y) - static_cast<double>(b.y)) * s.sy;
      const double dz = (static_cast<double>(a.z) - static_cast<double>(b.z)) * s.sz;
      const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
      best = d < best ? d : best;
    }
    dist.push_back(best);
  }
  return nearest_rank_p95(dist);
}

// Connected-component labels over the foreground (label != 0); 0 marks
// background. Flood fill in scan order, so labeling is deterministic.
std::vector<std::uint32_t> components(const LabelVolume& v, Connectivity conn,
                                      std::uint32_t& count) {
  const std::size_t n = v.size();
  std::vector<std::uint32_t> comp(n, 0);
  std::vector<std::size_t> stack;
  count = 0;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (v.labels[seed] == 0 || comp[seed] != 0) continue;
    ++count;
    comp[seed] = count;
    stack.assign(1, seed);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const std::size_t x = i % v.W;
      const std::size_t y = (i / v.W) % v.H;
      const std::size_t z = i / (v.W * v.H);
      auto visit = [&](std::size_t j) {
        if (v.labels[j] != 0 && comp[j] == 0) {
          comp[j] = count;
          stack.push_back(j);
        }
      };
      if (x > 0) visit(i - 1);
      if (x + 1 < v.W) visit(i + 1);
      if (y > 0) visit(i - v.W);
      if (y + 1 < v.H) visit(i + v.W);
      if (conn == Connectivity::Volume6) {
        if (z > 0) visit(i - v.W * v.H);
        if (z + 1 < v.D) visit(i + v.W * v.H);
      }
    }
  }
  return comp;
}

inline double pairs_of(std::size_t n) {
  return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
}

}  // namespace

double dice(const SegmentationPair& pair, std::uint8_t k) {
  const MaskCounts m = mask_counts(pair, k);
  if (m.a + m.b == 0) return 1.0;
  return 2.0 * static_cast<double>(m.both) / static_cast<double>(m.a + m.b);
}

std::optional<double> hausdorff95(const SegmentationPair& pair,
                                  std::uint8_t k) {
  const auto ba = boundary_voxels(pair.predicted, k);
  const auto bb = boundary_voxels(pair.reference, k);
  if (ba.empty() || bb.empty()) return std::nullopt;
  const double ab = directed_p95(ba, bb, pair.spacing);
  const double ba_ = directed_p95(bb, ba, pair.spacing);
  return ab > ba_ ? ab : ba_;
}

std::optional<double> avd(const SegmentationPair& pair, std::uint8_t k) {
  const MaskCounts m = mask_counts(pair, k);
  if (m.b == 0) return std::nullopt;
  const double a = static_cast<double>(m.a), b = static_cast<double>(m.b);
  return 100.0 * std::abs(a - b) / b;
}

double pixel_error(const SegmentationPair& pair, std::uint8_t k) {
  const MaskCounts m = mask_counts(pair, k);
  const std::size_t tp = m.both, fp = m.a - m.both, fn = m.b - m.both;
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return 0.0;
  return 1.0 - 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double rand_error(const SegmentationPair& pair, Connectivity conn) {
  std::uint32_t np = 0, nr = 0;
  const auto cp = components(pair.predicted, conn, np);
  const auto cr = components(pair.reference, conn, nr);
  std::vector<std::size_t> sp(np + 1, 0), sr(nr + 1, 0);
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> joint;
  for (std::size_t i = 0; i < cp.size(); ++i) {
    if (cp[i]) ++sp[cp[i]];
    if (cr[i]) ++sr[cr[i]];
    if (cp[i] && cr[i]) ++joint[{cp[i], cr[i]}];
  }
  double same_p = 0.0, same_r = 0.0, tp = 0.0;
  for (std::uint32_t i = 1; i <= np; ++i) same_p += pairs_of(sp[i]);
  for (std::uint32_t j = 1; j <= nr; ++j) same_r += pairs_of(sr[j]);
  for (const auto& [key, n] : joint) tp += pairs_of(n);
  const double fp = same_p - tp, fn = same_r - tp;
  const double denom = 2.0 * tp + fp + fn;
  if (denom == 0.0) return 0.0;
  return 1.0 - 2.0 * tp / denom;
}

LabelVolume argmax_labels(const Vol& prob) {
  if (prob.C > 255) throw ShapeError("argmax_labels: more than 255 classes");
  LabelVolume out(prob.W, prob.H, prob.D,
                  static_cast<std::uint32_t>(prob.C));
  const std::size_t V = prob.voxels();
  for (std::size_t v = 0; v < V; ++v) {
    std::size_t best = 0;
    double best_val = prob.data[v];
    for (std::size_t k = 1; k < prob.C; ++k) {
      const double val = prob.data[v + V * k];
      if (val > best_val) {
        best_val = val;
        best = k;
      }
    }
    out.labels[v] = static_cast<std::uint8_t>(best);
  }
  return out;
}

}  // namespace pyra
