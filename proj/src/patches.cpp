#include "adpf/patches.hpp"

#include <algorithm>
#include <deque>
#include <string>

#include "adpf/errors.hpp"
#include "adpf/layers.hpp"

namespace adpf {

namespace {

// Grows [start, start+len) to at least min_len, centred, then slides it
// back inside [0, limit).
void grow_axis(std::size_t& start, std::size_t& len, std::size_t min_len, std::size_t limit) {
  if (len < min_len) {
    const std::size_t extra = min_len - len;
    const std::size_t before = std::min(start, extra / 2);
    start -= before;
    len = min_len;
  }
  if (len > limit) {
    start = 0;
    len = limit;
  } else if (start + len > limit) {
    start = limit - len;
  }
}

}  // namespace

void CropConfig::validate() const {
  if (!(threshold_frac > 0.0 && threshold_frac < 1.0)) {
    throw SpecInvalid("crop.threshold_frac must lie in (0, 1)");
  }
  if (min_box < 1) throw SpecInvalid("crop.min_box must be >= 1");
  if (patch_size < 1) throw SpecInvalid("crop.patch_size must be >= 1");
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::vector<Tensor> rank_maps(const RankedAttentionSet& set) {
  std::vector<Tensor> out;
  out.reserve(set.size());
  for (std::size_t r = 0; r < set.size(); ++r) out.push_back(set.ranked(r));
  return out;
}

Mask binarize_map(const Tensor& map, const CropConfig& cfg) {
  if (map.rank() != 3 || map.dim(0) != 1) {
    throw ShapeMismatch("binarize_map expects 1 x H x W, got " + shape_str(map.shape()));
  }
  auto v = map.values();
  const double peak = *std::max_element(v.begin(), v.end());
  if (!(peak > 0.0)) {
    throw DegenerateMap("attention map maximum is " + std::to_string(peak));
  }
  const double cut = cfg.threshold_frac * peak;
  Mask mask{map.dim(1), map.dim(2), std::vector<std::uint8_t>(v.size())};
  for (std::size_t i = 0; i < v.size(); ++i) mask.bits[i] = v[i] >= cut ? 1 : 0;
  return mask;
}

Box largest_component_box(const Mask& mask, const CropConfig& cfg) {
  const std::size_t H = mask.height, W = mask.width;
  std::vector<std::uint8_t> seen(H * W, 0);
  std::size_t best_size = 0;
  Box best;
  std::deque<std::size_t> queue;
  // Row-major scan: the first component found at a given size has the
  // smallest (top, left) seed, but box order is what breaks ties.
  for (std::size_t start = 0; start < H * W; ++start) {
    if (!mask.bits[start] || seen[start]) continue;
    std::size_t size = 0;
    std::size_t y0 = H, x0 = W, y1 = 0, x1 = 0;
    queue.push_back(start);
    seen[start] = 1;
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      ++size;
      const std::size_t y = p / W, x = p % W;
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      auto visit = [&](std::size_t q) {
        if (mask.bits[q] && !seen[q]) {
          seen[q] = 1;
          queue.push_back(q);
        }
      };
      if (y > 0) visit(p - W);
      if (y + 1 < H) visit(p + W);
      if (x > 0) visit(p - 1);
      if (x + 1 < W) visit(p + 1);
    }
    const Box box{y0, x0, y1 - y0 + 1, x1 - x0 + 1};
    const bool better = size > best_size ||
                        (size == best_size && std::pair(box.top, box.left) <
                                                  std::pair(best.top, best.left));
    if (better) {
      best_size = size;
      best = box;
    }
  }
  if (best_size == 0) throw DegenerateMap("mask has no set pixel");
  grow_axis(best.top, best.height, cfg.min_box, H);
  grow_axis(best.left, best.width, cfg.min_box, W);
  return best;
}

Tensor crop(const Tensor& image, const Box& box) {
  if (image.rank() != 3 || box.top + box.height > image.dim(1) ||
      box.left + box.width > image.dim(2) || box.area() == 0) {
    throw ShapeMismatch("crop box outside image " + shape_str(image.shape()));
  }
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  auto v = image.values();
  std::vector<double> out;
  out.reserve(C * box.area());
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = box.top; y < box.top + box.height; ++y)
      for (std::size_t x = box.left; x < box.left + box.width; ++x) out.push_back(v[(c * H + y) * W + x]);
  return Tensor({C, box.height, box.width}, std::move(out));
}

PatchSet extract_patches(const Tensor& image, const RankedAttentionSet& set, const CropConfig& cfg) {
  cfg.validate();
  if (image.rank() != 3) throw ShapeMismatch("extract_patches expects C x H x W image");
  const std::size_t H = image.dim(1), W = image.dim(2);
  PatchSet out;
  out.source_height = H;
  out.source_width = W;
  for (std::size_t r = 0; r < set.size(); ++r) {
    const Tensor& map = set.ranked(r);
    if (map.rank() != 3 || map.dim(1) > H || map.dim(2) > W) {
      throw ShapeMismatch("attention map " + shape_str(map.shape()) + " larger than image " +
                          shape_str(image.shape()));
    }
    const Tensor up = bilinear_resize(map.detach(), H, W);
    Mask mask;
    try {
      mask = binarize_map(up, cfg);
    } catch (const DegenerateMap& e) {
      throw DegenerateMap("rank " + std::to_string(r + 1) + " (head " +
                          std::to_string(set.order[r]) + "): " + e.what());
    }
    const Box box = largest_component_box(mask, cfg);
    out.patches.push_back(bilinear_resize(crop(image.detach(), box), cfg.patch_size, cfg.patch_size));
    out.boxes.push_back(box);
    out.heads.push_back(set.order[r]);
  }
  return out;
}

}  // namespace adpf
