#pragma once

#include <cstddef>
#include <vector>

#include "pyra/rng.hpp"
#include "pyra/volume.hpp"

namespace pyra {

struct ModalityConfig {
  bool use_original = true;
  bool use_preprocessed = false;
};

struct AugmentFlags {
  bool rotate_z = false;
  bool flip_x = false;
  bool flip_y = false;
  bool flip_z = false;
};

// A training crop plus the record of how it was produced; input and target
// always undergo the same geometric transform.
struct SubVolumeSample {
  Vol input;
  LabelVolume target;
  std::size_t ox = 0, oy = 0, oz = 0;
  bool flipped_x = false, flipped_y = false, flipped_z = false;
  bool rotated = false;
  double angle = 0.0;
};

// Rescales every z-slice of every channel to mean 0, variance 1
// (population); constant slices become all-zero.
Vol normalize_slices(const Vol& v);

// Per z-slice high-pass: subtracts a 31x31, sigma = 5 Gaussian smoothing
// (separable taps, edge replication at borders).
Vol gaussian_subtract(const Vol& v);

// Contrast-limited adaptive histogram equalization per z-slice: 256 bins
// over the slice range, 16x16-pixel tiles (edge tiles may be smaller), clip
// limit 2.0x the uniform bin count with one-shot uniform redistribution,
// bilinear interpolation of the per-tile CDF mappings. Output lies in [0,1].
Vol clahe(const Vol& v);

// One channel-assembled network input: per modality, the original and/or the
// preprocessed (gaussian_subtract then clahe) image, each normalized per
// slice. raw and cfg run parallel; every raw volume must share dims.
Vol assemble_channels(const std::vector<Vol>& raw,
                      const std::vector<ModalityConfig>& cfg);

// Uniform-origin crop of `dims`, then each enabled flip with probability
// 1/2, then (if enabled) a z-rotation by an angle uniform in [0, 2pi) —
// bilinear for the input, nearest for the labels. Draw order is fixed:
// origin x, y, z, then flips in x, y, z order, then the angle.
SubVolumeSample sample_subvolume(const Vol& source, const LabelVolume& target,
                                 std::size_t sw, std::size_t sh,
                                 std::size_t sd, Rng& rng,
                                 const AugmentFlags& aug);

struct TilePrediction {
  Vol prob;
  std::size_t ox = 0, oy = 0, oz = 0;
};

// Blends overlapping tile predictions with a separable Gaussian window
// centered in each tile (per-axis sigma = sigma_frac x extent):
// output = sum(window * prob) / sum(window). Every voxel of the full volume
// must be covered by at least one tile.
Vol stitch(const std::vector<TilePrediction>& tiles, std::size_t W,
           std::size_t H, std::size_t D, double sigma_frac = 0.25);

// Tile start offsets along one axis: stride = tile x (1 - overlap), last
// tile flush with the end so the axis is fully covered.
std::vector<std::size_t> tile_origins(std::size_t extent, std::size_t tile,
                                      double overlap);

}  // namespace pyra
