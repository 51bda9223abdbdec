#pragma once

#include <cstdint>
#include <optional>

#include "pyra/volume.hpp"

namespace pyra {

struct Spacing {
  double sx = 1.0, sy = 1.0, sz = 1.0;  // mm per voxel
};

struct SegmentationPair {
  LabelVolume predicted;
  LabelVolume reference;
  Spacing spacing;
};

// Throws unless dims and num_classes agree.
SegmentationPair make_segmentation_pair(LabelVolume predicted,
                                        LabelVolume reference,
                                        Spacing spacing = {});

// 2|A and B| / (|A| + |B|) for the class-k masks; 1 when both masks are
// empty.
double dice(const SegmentationPair& pair, std::uint8_t k);

// Symmetric 95th-percentile boundary distance for class k, in mm. Boundary
// voxels are mask voxels with a 6-neighbor outside the mask (or outside the
// volume); each directed distance set takes the nearest-rank 95th
// percentile; the result is the larger direction. Empty when either mask is
// empty.
std::optional<double> hausdorff95(const SegmentationPair& pair,
                                  std::uint8_t k);

// 100 * ||A| - |B|| / |B| (percent, reference-normalized); empty when the
// reference mask is empty.
std::optional<double> avd(const SegmentationPair& pair, std::uint8_t k);

// 1 - F1 of voxel classification for class k; 0 when both masks are empty.
double pixel_error(const SegmentationPair& pair, std::uint8_t k);

enum class Connectivity {
  Volume6,  // components span slices (6-neighborhood)
  Slice4,   // components stay within each z-slice (4-neighborhood)
};

// 1 - F-score over unordered voxel pairs, where a pair is positive when
// both voxels lie in the same connected component of the foreground
// (label != 0). 0 when neither segmentation has any same-component pair.
double rand_error(const SegmentationPair& pair,
                  Connectivity conn = Connectivity::Volume6);

// Per-voxel argmax over channels; ties break toward the lower class index.
LabelVolume argmax_labels(const Vol& prob);

}  // namespace pyra
