#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "adpf/attention.hpp"
#include "adpf/tensor.hpp"

namespace adpf {

struct CropConfig {
  double threshold_frac = 0.5;  // binarize at this fraction of the map maximum
  std::size_t min_box = 4;      // minimum box side, pixels
  std::size_t patch_size = 64;  // crops are resampled to patch_size x patch_size

  /// Throws SpecInvalid when the invariants do not hold.
  void validate() const;
};

struct Box {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t area() const { return height * width; }
  bool contains(std::size_t y, std::size_t x) const {
    return y >= top && y < top + height && x >= left && x < left + width;
  }
  bool intersects(const Box& o) const {
    return top < o.top + o.height && o.top < top + height && left < o.left + o.width &&
           o.left < left + width;
  }
  bool operator==(const Box&) const = default;
};

struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;  // row-major, 0 or 1

  bool at(std::size_t y, std::size_t x) const { return bits[y * width + x] != 0; }
  std::size_t count() const;
};

/// Ordered crops, most informative first.
struct PatchSet {
  std::vector<Tensor> patches;       // each [C x patch_size x patch_size]
  std::vector<Box> boxes;            // in source-image pixels
  std::vector<std::size_t> heads;    // head index behind each rank
  std::size_t source_height = 0;
  std::size_t source_width = 0;

  std::size_t size() const { return patches.size(); }
};

/// Maps in rank order (scale non-increasing, ties by head index).
std::vector<Tensor> rank_maps(const RankedAttentionSet& set);

/// map >= threshold_frac * max(map). Throws DegenerateMap if max(map) <= 0.
Mask binarize_map(const Tensor& map, const CropConfig& cfg);

/// Bounding box of the largest 4-connected component, grown symmetrically
/// to at least min_box per side and kept inside the mask bounds.
Box largest_component_box(const Mask& mask, const CropConfig& cfg);

/// [C x H x W] region of `image`, values copied (no graph history).
Tensor crop(const Tensor& image, const Box& box);

/// Per ranked map: upsample to the image size, binarize, box, crop and
/// resample. A degenerate map aborts the whole extraction.
PatchSet extract_patches(const Tensor& image, const RankedAttentionSet& set, const CropConfig& cfg);

}  // namespace adpf
