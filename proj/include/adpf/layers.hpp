#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "adpf/checkpoint.hpp"
#include "adpf/random.hpp"
#include "adpf/tensor.hpp"

namespace adpf {

/// Cross-correlation layer over a single C x H x W image.
struct Conv2D {
  Tensor weight;  // [out_ch x in_ch x k x k]
  Tensor bias;    // [out_ch]
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t kernel() const { return weight.dim(2); }
};

struct FullyConnected {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]

  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }
};

/// Weights and bias uniform in +-sqrt(1/fan_in), gradient tracking on.
Conv2D make_conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, Rng& rng,
                   std::size_t stride = 1, std::size_t padding = 0);
FullyConnected make_fully_connected(std::size_t in, std::size_t out, Rng& rng);

/// floor((in + 2*pad - k) / stride) + 1
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

Tensor conv2d(const Conv2D& layer, const Tensor& x);
/// Flattens x and applies W.x + b.
Tensor fully_connected(const FullyConnected& layer, const Tensor& x);

/// Window max; ties resolve to the first element in row-major order.
Tensor maxpool2d(const Tensor& x, std::size_t k, std::size_t stride);
/// [C x H x W] -> [C], per-channel spatial maximum.
Tensor global_maxpool(const Tensor& x);

Tensor concat_channels(const std::vector<Tensor>& xs);
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t end);

/// Corner-aligned bilinear resampling of every channel of [C x h x w] to
/// [C x H x W].
Tensor bilinear_resize(const Tensor& x, std::size_t height, std::size_t width);

void append_parameters(std::vector<NamedTensor>& out, const std::string& prefix,
                       const Conv2D& layer);
void append_parameters(std::vector<NamedTensor>& out, const std::string& prefix,
                       const FullyConnected& layer);

}  // namespace adpf
