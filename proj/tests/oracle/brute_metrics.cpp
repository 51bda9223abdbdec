#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracle.hpp"

namespace pyra::oracle {

namespace {

bool in_mask(const LabelVolume& v, long x, long y, long z, std::uint8_t k) {
  if (x < 0 || y < 0 || z < 0 || x >= static_cast<long>(v.W) ||
      y >= static_cast<long>(v.H) || z >= static_cast<long>(v.D))
    return false;
  return v.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
              static_cast<std::size_t>(z)) == k;
}

struct Pt {
  long x, y, z;
};

std::vector<Pt> surface(const LabelVolume& v, std::uint8_t k) {
  std::vector<Pt> out;
  for (long z = 0; z < static_cast<long>(v.D); ++z)
    for (long y = 0; y < static_cast<long>(v.H); ++y)
      for (long x = 0; x < static_cast<long>(v.W); ++x) {
        if (!in_mask(v, x, y, z, k)) continue;
        const bool interior = in_mask(v, x - 1, y, z, k) &&
                              in_mask(v, x + 1, y, z, k) &&
                              in_mask(v, x, y - 1, z, k) &&
                              in_mask(v, x, y + 1, z, k) &&
                              in_mask(v, x, y, z - 1, k) &&
                              in_mask(v, x, y, z + 1, k);
        if (!interior) out.push_back({x, y, z});
      }
  return out;
}

double p95_nearest_rank(std::vector<double> d) {
  std::sort(d.begin(), d.end());
  std::size_t rank =
      static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(d.size())));
  if (rank < 1) rank = 1;
  return d[rank - 1];
}

}  // namespace

std::optional<double> brute_hausdorff95(const LabelVolume& predicted,
                                        const LabelVolume& reference,
                                        std::uint8_t k, const Spacing& s) {
  const auto sa = surface(predicted, k);
  const auto sb = surface(reference, k);
  if (sa.empty() || sb.empty()) return std::nullopt;
  // Full distance matrix, then row/column minima.
  std::vector<std::vector<double>> dist(sa.size(),
                                        std::vector<double>(sb.size()));
  for (std::size_t i = 0; i < sa.size(); ++i)
    for (std::size_t j = 0; j < sb.size(); ++j) {
      const double dx = static_cast<double>(sa[i].x - sb[j].x) * s.sx;
      const double dy = static_cast<double>(sa[i].y - sb[j].y) * s.sy;
      const double dz = static_cast<double>(sa[i].z - sb[j].z) * s.sz;
      dist[i][j] = std::sqrt(dx * dx + dy * dy + dz * dz);
    }
  std::vector<double> dab(sa.size()), dba(sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i)
    dab[i] = *std::min_element(dist[i].begin(), dist[i].end());
  for (std::size_t j = 0; j < sb.size(); ++j) {
    double best = dist[0][j];
    for (std::size_t i = 1; i < sa.size(); ++i)
      best = std::min(best, dist[i][j]);
    dba[j] = best;
  }
  return std::max(p95_nearest_rank(dab), p95_nearest_rank(dba));
}

namespace {

// Union-find component labels over the foreground, 0 = background.
std::vector<std::size_t> uf_components(const LabelVolume& v,
                                       Connectivity conn) {
  const std::size_t n = v.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  auto unite = [&](std::size_t a, std::size_t b) {
    parent[find(a)] = find(b);
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (v.labels[i] == 0) continue;
    const std::size_t x = i % v.W;
    const std::size_t y = (i / v.W) % v.H;
    const std::size_t z = i / (v.W * v.H);
    if (x + 1 < v.W && v.labels[i + 1]) unite(i, i + 1);
    if (y + 1 < v.H && v.labels[i + v.W]) unite(i, i + v.W);
    if (conn == Connectivity::Volume6 && z + 1 < v.D &&
        v.labels[i + v.W * v.H])
      unite(i, i + v.W * v.H);
  }
  std::vector<std::size_t> comp(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (v.labels[i] != 0) comp[i] = find(i) + 1;
  return comp;
}

}  // namespace

double brute_rand_error(const LabelVolume& predicted,
                        const LabelVolume& reference, Connectivity conn) {
  const auto cp = uf_components(predicted, conn);
  const auto cr = uf_components(reference, conn);
  const std::size_t n = cp.size();
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool same_p = cp[i] != 0 && cp[i] == cp[j];
      const bool same_r = cr[i] != 0 && cr[i] == cr[j];
      if (same_p && same_r) tp += 1.0;
      else if (same_p) fp += 1.0;
      else if (same_r) fn += 1.0;
    }
  const double denom = 2.0 * tp + fp + fn;
  if (denom == 0.0) return 0.0;
  return 1.0 - 2.0 * tp / denom;
}

}  // namespace pyra::oracle
