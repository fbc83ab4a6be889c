#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "adpf/checkpoint.hpp"
#include "adpf/layers.hpp"
#include "adpf/random.hpp"
#include "adpf/tensor.hpp"

namespace adpf {

/// Query/key/value projections plus learnable relative-offset embeddings for
/// a fixed h x w feature grid. rel_w row (dx + w - 1) embeds column offset
/// dx in [-(w-1), w-1]; rel_h likewise for row offsets.
struct SelfAttentionParams {
  Conv2D proj_q;
  Conv2D proj_k;
  Conv2D proj_v;
  Tensor rel_w;  // [(2w-1) x c_K]
  Tensor rel_h;  // [(2h-1) x c_K]
  std::size_t height = 0;
  std::size_t width = 0;
  // Softplus on the projected values, making every output map strictly positive.
  bool positive_values = false;

  std::size_t key_channels() const { return proj_k.out_channels(); }
  std::size_t value_channels() const { return proj_v.out_channels(); }
};

/// Squeeze-excitation style gate: 1x1 conv to c_V channels, global max
/// pool, and a two-layer bottleneck with sigmoid output.
struct ChannelAttentionParams {
  Conv2D proj_z;
  FullyConnected fc1;  // c_V -> c_V / ratio
  FullyConnected fc2;  // c_V / ratio -> c_V
  std::size_t ratio = 1;
};

struct HybridAttentionHead {
  SelfAttentionParams sa;
  ChannelAttentionParams ca;
  Tensor scale;  // learnable ranking weight, rank 0
};

struct HeadShape {
  std::size_t in_channels = 0;   // c_head
  std::size_t qk_channels = 0;   // c_Q == c_K
  std::size_t v_channels = 0;    // c_V
  std::size_t ratio = 4;         // channel-attention bottleneck reduction
  std::size_t height = 0;
  std::size_t width = 0;
  bool positive_values = false;
};

/// Defaults from the head width: c_Q = c_K = c_V = c_head / 2.
HeadShape default_head_shape(std::size_t c_head, std::size_t height, std::size_t width,
                             std::size_t ratio = 4);

/// Fresh head with seeded uniform init and scale a = 1.
HybridAttentionHead make_head(const HeadShape& shape, Rng& rng);

/// n maps of one attention layer together with their ranking.
struct RankedAttentionSet {
  std::vector<Tensor> hybrid;  // HA_i, each [1 x h x w]
  std::vector<Tensor> maps;    // HA_i * a_i
  std::vector<double> scales;  // a_i
  std::vector<std::size_t> order;  // head indices, most informative first

  std::size_t size() const { return maps.size(); }
  /// Map of rank r (0-based).
  const Tensor& ranked(std::size_t r) const { return maps[order[r]]; }
};

/// Head indices sorted by scale, non-increasing; ties keep ascending index.
std::vector<std::size_t> rank_order(const std::vector<double>& scales);

struct RelativeLogits {
  Tensor m_h;  // [hw x hw]
  Tensor m_w;  // [hw x hw]
};

/// m_h[i,j] = q_i . rel_h[j_y - i_y], m_w[i,j] = q_i . rel_w[j_x - i_x] over
/// row-major pixel indices i = i_y * w + i_x.
RelativeLogits relative_logits(const Tensor& q_flat, const Tensor& rel_w, const Tensor& rel_h,
                               std::size_t h, std::size_t w);

/// softmax((Q'K'^T + m_h + m_w) / sqrt(c_K)) V, returned as [c_V x h x w].
Tensor self_attention(const SelfAttentionParams& p, const Tensor& x);

/// sigmoid(FC2(relu(FC1(relu(maxpool(conv1x1(z))))))) -> [c_V].
Tensor channel_weights(const ChannelAttentionParams& p, const Tensor& z);

/// Sum_c sa[c] * w[c] -> [1 x h x w].
Tensor hybrid_attention(const Tensor& sa_maps, const Tensor& w_ca);

/// One head on its own channel slice: hybrid map before scaling.
Tensor head_forward(const HybridAttentionHead& head, const Tensor& x);

/// Channel count per head; throws ChannelSplitError unless heads >= 1 and
/// heads divides channels.
std::size_t attention_head_count_check(std::size_t heads, std::size_t channels);

/// Head i consumes channels [i*c_head, (i+1)*c_head) of x.
RankedAttentionSet rmhha_forward(const std::vector<HybridAttentionHead>& heads, const Tensor& x);

void append_parameters(std::vector<NamedTensor>& out, const std::string& prefix,
                       const HybridAttentionHead& head);

}  // namespace adpf
