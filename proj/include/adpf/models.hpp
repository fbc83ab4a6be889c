#pragma once

#include <cstddef>
#include <vector>

#include "adpf/attention.hpp"
#include "adpf/checkpoint.hpp"
#include "adpf/layers.hpp"
#include "adpf/patches.hpp"
#include "adpf/random.hpp"
#include "adpf/tensor.hpp"

namespace adpf {

/// 3x3 same-padding conv, ReLU, then optional 2x2 max pool.
struct ConvBlock {
  Conv2D conv;
  bool pool = false;
};

ConvBlock make_conv_block(std::size_t in_ch, std::size_t out_ch, bool pool, Rng& rng);
Tensor conv_block_forward(const ConvBlock& block, const Tensor& x);

struct AttentionNetConfig {
  std::size_t in_channels = 1;
  std::size_t input_size = 32;
  std::vector<std::size_t> backbone = {16, 40};  // widths; each block pools
  std::size_t heads = 5;
  std::size_t ratio = 4;
  std::size_t classes = 62;
  bool positive_values = true;
};

/// Backbone -> RMHHA -> FC over the concatenated weighted maps.
class AttentionNet {
 public:
  struct Output {
    Tensor logits;  // [classes]
    RankedAttentionSet atts;
  };

  /// Throws ChannelSplitError when heads does not divide the backbone width.
  AttentionNet(const AttentionNetConfig& config, Rng& rng);

  Output forward(const Tensor& image) const;

  const AttentionNetConfig& config() const { return config_; }
  std::size_t feature_channels() const { return config_.backbone.back(); }
  std::size_t feature_size() const { return feature_size_; }
  const std::vector<HybridAttentionHead>& heads() const { return heads_; }

  std::vector<NamedTensor> parameters() const;
  /// Toggles gradient tracking on every parameter.
  void set_trainable(bool on);

 private:
  AttentionNetConfig config_;
  std::vector<ConvBlock> backbone_;
  std::vector<HybridAttentionHead> heads_;
  FullyConnected head_fc_;
  std::size_t feature_size_ = 0;
};

struct FusionNetConfig {
  std::size_t in_channels = 1;
  std::size_t input_size = 32;
  std::size_t patches = 5;        // n; the main stream has n + 1 blocks
  std::size_t main_channels = 8;
  std::size_t stem_channels = 4;
  std::size_t patch_size = 16;
  std::size_t min_pool_size = 4;  // a block pools only while the result stays >= this
  std::size_t classes = 62;
};

/// Main stream B_0..B_n over the image; the patch of rank r (1-based)
/// passes a two-conv stem and is concatenated onto the stream right before
/// block B_r, so better-ranked patches traverse more blocks.
class FusionNet {
 public:
  struct Output {
    Tensor logits;                       // [classes]
    std::vector<std::size_t> fused_channels;  // channel count after each fusion
  };

  FusionNet(const FusionNetConfig& config, Rng& rng);

  /// Throws PatchCountMismatch unless patches.size() == config().patches.
  Output forward(const Tensor& image, const PatchSet& patches) const;

  const FusionNetConfig& config() const { return config_; }
  /// Main-stream block index each rank fuses before (index 0 = rank 1).
  const std::vector<std::size_t>& fuse_points() const { return fuse_points_; }
  /// Blocks traversed after fusion, per rank; strictly decreasing.
  std::vector<std::size_t> path_lengths() const;
  /// Spatial extent entering each main block.
  const std::vector<std::size_t>& block_input_sizes() const { return block_sizes_; }

  std::vector<NamedTensor> parameters() const;
  void set_trainable(bool on);

 private:
  struct Stem {
    ConvBlock first;
    ConvBlock second;
    std::size_t pool = 1;  // final max-pool window matching the fuse point
  };

  FusionNetConfig config_;
  std::vector<ConvBlock> main_;
  std::vector<Stem> stems_;
  std::vector<std::size_t> fuse_points_;
  std::vector<std::size_t> block_sizes_;
  FullyConnected head_fc_;
};

}  // namespace adpf
