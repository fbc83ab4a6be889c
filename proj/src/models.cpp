#include "adpf/models.hpp"

#include <string>

#include "adpf/errors.hpp"
#include "adpf/ops.hpp"

namespace adpf {

ConvBlock make_conv_block(std::size_t in_ch, std::size_t out_ch, bool pool, Rng& rng) {
  return ConvBlock{make_conv2d(in_ch, out_ch, 3, rng, 1, 1), pool};
}

Tensor conv_block_forward(const ConvBlock& block, const Tensor& x) {
  Tensor y = relu(conv2d(block.conv, x));
  return block.pool ? maxpool2d(y, 2, 2) : y;
}

namespace {

void set_all(const std::vector<NamedTensor>& params, bool on) {
  for (auto p : params) p.tensor.set_requires_grad(on);
}

}  // namespace

AttentionNet::AttentionNet(const AttentionNetConfig& config, Rng& rng) : config_(config) {
  if (config_.backbone.empty()) throw SpecInvalid("AttentionNet needs at least one backbone block");
  if (config_.classes < 2) throw SpecInvalid("AttentionNet needs at least two classes");
  const std::size_t c_head = attention_head_count_check(config_.heads, config_.backbone.back());

  std::size_t size = config_.input_size;
  std::size_t in_ch = config_.in_channels;
  for (std::size_t width : config_.backbone) {
    if (size < 2) throw ShapeMismatch("input too small for the backbone depth");
    backbone_.push_back(make_conv_block(in_ch, width, true, rng));
    in_ch = width;
    size /= 2;
  }
  feature_size_ = size;

  HeadShape shape = default_head_shape(c_head, size, size, config_.ratio);
  shape.positive_values = config_.positive_values;
  for (std::size_t i = 0; i < config_.heads; ++i) heads_.push_back(make_head(shape, rng));
  head_fc_ = make_fully_connected(config_.heads * size * size, config_.classes, rng);
}

AttentionNet::Output AttentionNet::forward(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != config_.in_channels ||
      image.dim(1) != config_.input_size || image.dim(2) != config_.input_size) {
    throw ShapeMismatch("AttentionNet expects " + std::to_string(config_.in_channels) + "x" +
                        std::to_string(config_.input_size) + "x" +
                        std::to_string(config_.input_size) + ", got " + shape_str(image.shape()));
  }
  Tensor x = image;
  for (const auto& block : backbone_) x = conv_block_forward(block, x);
  Output out;
  out.atts = rmhha_forward(heads_, x);
  out.logits = fully_connected(head_fc_, concat0(out.atts.maps));
  return out;
}

std::vector<NamedTensor> AttentionNet::parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < backbone_.size(); ++i) {
    append_parameters(out, "backbone." + std::to_string(i), backbone_[i].conv);
  }
  for (std::size_t i = 0; i < heads_.size(); ++i) {
    append_parameters(out, "head." + std::to_string(i), heads_[i]);
  }
  append_parameters(out, "fc", head_fc_);
  return out;
}

void AttentionNet::set_trainable(bool on) { set_all(parameters(), on); }

FusionNet::FusionNet(const FusionNetConfig& config, Rng& rng) : config_(config) {
  if (config_.classes < 2) throw SpecInvalid("FusionNet needs at least two classes");
  const std::size_t n = config_.patches;

  std::size_t size = config_.input_size;
  std::size_t channels = config_.main_channels;
  for (std::size_t b = 0; b <= n; ++b) {
    block_sizes_.push_back(size);
    const bool pool = size / 2 >= config_.min_pool_size;
    if (b == 0) {
      main_.push_back(make_conv_block(config_.in_channels, channels, pool, rng));
    } else {
      channels += config_.stem_channels;
      main_.push_back(make_conv_block(channels, channels, pool, rng));
    }
    if (pool) size /= 2;
  }

  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t block = r + 1;
    const std::size_t target = block_sizes_[block];
    if (config_.patch_size < target || config_.patch_size % target != 0) {
      throw ShapeMismatch("patch size " + std::to_string(config_.patch_size) +
                          " cannot pool down to fuse size " + std::to_string(target));
    }
    Stem stem;
    stem.first = make_conv_block(config_.in_channels, config_.stem_channels, false, rng);
    stem.second = make_conv_block(config_.stem_channels, config_.stem_channels, false, rng);
    stem.pool = config_.patch_size / target;
    stems_.push_back(std::move(stem));
    fuse_points_.push_back(block);
  }
  const auto lengths = path_lengths();
  for (std::size_t r = 1; r < lengths.size(); ++r) {
    if (lengths[r] >= lengths[r - 1]) throw Error("fusion path lengths must strictly decrease");
  }
  head_fc_ = make_fully_connected(channels, config_.classes, rng);
}

std::vector<std::size_t> FusionNet::path_lengths() const {
  std::vector<std::size_t> out;
  for (auto point : fuse_points_) out.push_back(main_.size() - point);
  return out;
}

FusionNet::Output FusionNet::forward(const Tensor& image, const PatchSet& patches) const {
  if (patches.size() != config_.patches) {
    throw PatchCountMismatch("FusionNet built for " + std::to_string(config_.patches) +
                             " patches, got " + std::to_string(patches.size()));
  }
  if (image.rank() != 3 || image.dim(0) != config_.in_channels ||
      image.dim(1) != config_.input_size || image.dim(2) != config_.input_size) {
    throw ShapeMismatch("FusionNet expects a " + std::to_string(config_.input_size) +
                        " pixel image, got " + shape_str(image.shape()));
  }
  Output out;
  Tensor x = conv_block_forward(main_[0], image);
  for (std::size_t b = 1; b < main_.size(); ++b) {
    const std::size_t r = b - 1;
    const Stem& stem = stems_[r];
    Tensor p = conv_block_forward(stem.second, conv_block_forward(stem.first, patches.patches[r]));
    if (stem.pool > 1) p = maxpool2d(p, stem.pool, stem.pool);
    x = concat_channels({x, p});
    out.fused_channels.push_back(x.dim(0));
    x = conv_block_forward(main_[b], x);
  }
  out.logits = fully_connected(head_fc_, global_maxpool(x));
  return out;
}

std::vector<NamedTensor> FusionNet::parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t b = 0; b < main_.size(); ++b) {
    append_parameters(out, "main." + std::to_string(b), main_[b].conv);
  }
  for (std::size_t r = 0; r < stems_.size(); ++r) {
    append_parameters(out, "stem." + std::to_string(r) + ".0", stems_[r].first.conv);
    append_parameters(out, "stem." + std::to_string(r) + ".1", stems_[r].second.conv);
  }
  append_parameters(out, "fc", head_fc_);
  return out;
}

void FusionNet::set_trainable(bool on) { set_all(parameters(), on); }

}  // namespace adpf
