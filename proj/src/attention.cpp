#include "adpf/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adpf/errors.hpp"
#include "adpf/ops.hpp"

namespace adpf {

using detail::Node;
using detail::parent_grad;
using detail::parent_tracks;

namespace {

Tensor uniform_leaf(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.mutable_values()) v = rng.uniform(-bound, bound);
  t.set_requires_grad(true);
  return t;
}

// out[i,j] = q_i . rel[index[i*N + j]] for an N x N pixel grid.
Tensor offset_logits(const char* name, const Tensor& q, const Tensor& rel,
                     std::vector<std::size_t> index) {
  const std::size_t N = q.dim(0), C = q.dim(1), L = rel.dim(0);
  // Project every query onto every offset embedding once, then gather.
  std::vector<double> proj(N * L, 0.0);
  kernels::gemm_acc_bt(q.values(), rel.values(), proj, N, C, L);
  std::vector<double> out(N * N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) out[i * N + j] = proj[i * L + index[i * N + j]];

  return detail::make_result(
      name, {N, N}, std::move(out), {q, rel}, [index = std::move(index), N, C, L](Node& self) {
        std::vector<double> gproj(N * L, 0.0);
        for (std::size_t i = 0; i < N; ++i)
          for (std::size_t j = 0; j < N; ++j) gproj[i * L + index[i * N + j]] += self.grad[i * N + j];
        if (parent_tracks(self, 0)) {
          kernels::gemm_acc(gproj, self.parents[1]->data, parent_grad(self, 0), N, L, C);
        }
        if (parent_tracks(self, 1)) {
          kernels::gemm_acc_at(gproj, self.parents[0]->data, parent_grad(self, 1), N, L, C);
        }
      });
}

// [c x h x w] -> [hw x c]
Tensor pixels_by_channel(const Tensor& t) {
  return transpose(reshape(t, {t.dim(0), t.dim(1) * t.dim(2)}));
}

}  // namespace

HeadShape default_head_shape(std::size_t c_head, std::size_t height, std::size_t width,
                             std::size_t ratio) {
  HeadShape s;
  s.in_channels = c_head;
  s.qk_channels = std::max<std::size_t>(1, c_head / 2);
  s.v_channels = std::max<std::size_t>(1, c_head / 2);
  s.ratio = ratio;
  s.height = height;
  s.width = width;
  return s;
}

HybridAttentionHead make_head(const HeadShape& s, Rng& rng) {
  if (s.ratio == 0 || s.v_channels % s.ratio != 0) {
    throw ShapeMismatch("bottleneck ratio " + std::to_string(s.ratio) + " does not divide c_V = " +
                        std::to_string(s.v_channels));
  }
  if (s.height == 0 || s.width == 0 || s.in_channels == 0) {
    throw ShapeMismatch("attention head needs a non-empty grid and input channels");
  }
  HybridAttentionHead head;
  head.sa.proj_q = make_conv2d(s.in_channels, s.qk_channels, 1, rng);
  head.sa.proj_k = make_conv2d(s.in_channels, s.qk_channels, 1, rng);
  head.sa.proj_v = make_conv2d(s.in_channels, s.v_channels, 1, rng);
  // Nonnegative values on nonnegative features start every map above zero.
  for (double& w : head.sa.proj_v.weight.mutable_values()) w = std::fabs(w);
  for (double& b : head.sa.proj_v.bias.mutable_values()) b = 0.0;
  const double rel_bound = std::sqrt(1.0 / static_cast<double>(s.qk_channels));
  head.sa.rel_w = uniform_leaf({2 * s.width - 1, s.qk_channels}, rel_bound, rng);
  head.sa.rel_h = uniform_leaf({2 * s.height - 1, s.qk_channels}, rel_bound, rng);
  head.sa.height = s.height;
  head.sa.width = s.width;
  head.sa.positive_values = s.positive_values;

  head.ca.proj_z = make_conv2d(s.in_channels, s.v_channels, 1, rng);
  head.ca.fc1 = make_fully_connected(s.v_channels, s.v_channels / s.ratio, rng);
  head.ca.fc2 = make_fully_connected(s.v_channels / s.ratio, s.v_channels, rng);
  head.ca.ratio = s.ratio;

  head.scale = Tensor::scalar(1.0);
  head.scale.set_requires_grad(true);
  return head;
}

std::vector<std::size_t> rank_order(const std::vector<double>& scales) {
  std::vector<std::size_t> order(scales.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scales[a] > scales[b]; });
  return order;
}

RelativeLogits relative_logits(const Tensor& q_flat, const Tensor& rel_w, const Tensor& rel_h,
                               std::size_t h, std::size_t w) {
  const std::size_t N = h * w;
  if (q_flat.rank() != 2 || q_flat.dim(0) != N) {
    throw ShapeMismatch("relative_logits: query rows " + shape_str(q_flat.shape()) +
                        " for a " + std::to_string(h) + "x" + std::to_string(w) + " grid");
  }
  const std::size_t C = q_flat.dim(1);
  if (rel_w.rank() != 2 || rel_w.dim(0) != 2 * w - 1 || rel_w.dim(1) != C ||
      rel_h.rank() != 2 || rel_h.dim(0) != 2 * h - 1 || rel_h.dim(1) != C) {
    throw ShapeMismatch("relative embeddings " + shape_str(rel_w.shape()) + "/" +
                        shape_str(rel_h.shape()) + " do not fit grid " + std::to_string(h) + "x" +
                        std::to_string(w) + " with " + std::to_string(C) + " key channels");
  }
  std::vector<std::size_t> idx_h(N * N), idx_w(N * N);
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t iy = i / w, ix = i % w;
    for (std::size_t j = 0; j < N; ++j) {
      const std::size_t jy = j / w, jx = j % w;
      idx_h[i * N + j] = jy + (h - 1) - iy;
      idx_w[i * N + j] = jx + (w - 1) - ix;
    }
  }
  return {offset_logits("rel_logits_h", q_flat, rel_h, std::move(idx_h)),
          offset_logits("rel_logits_w", q_flat, rel_w, std::move(idx_w))};
}

Tensor self_attention(const SelfAttentionParams& p, const Tensor& x) {
  if (x.rank() != 3 || x.dim(1) != p.height || x.dim(2) != p.width) {
    throw ShapeMismatch("self_attention built for " + std::to_string(p.height) + "x" +
                        std::to_string(p.width) + ", got " + shape_str(x.shape()));
  }
  const std::size_t h = p.height, w = p.width;
  const Tensor q = pixels_by_channel(conv2d(p.proj_q, x));
  const Tensor k = pixels_by_channel(conv2d(p.proj_k, x));
  Tensor v = pixels_by_channel(conv2d(p.proj_v, x));
  if (p.positive_values) v = relu(v) + log(exp(scale(abs(v), -1.0)) + Tensor::scalar(1.0));
  if (q.dim(1) != k.dim(1)) throw ShapeMismatch("c_Q must equal c_K");

  const auto rel = relative_logits(q, p.rel_w, p.rel_h, h, w);
  const Tensor logits = matmul(q, transpose(k)) + rel.m_h + rel.m_w;
  const Tensor weights = softmax(scale(logits, 1.0 / std::sqrt(static_cast<double>(k.dim(1)))), 1);
  const Tensor out = matmul(weights, v);  // [hw x c_V]
  return reshape(transpose(out), {v.dim(1), h, w});
}

Tensor channel_weights(const ChannelAttentionParams& p, const Tensor& z) {
  const Tensor ca = conv2d(p.proj_z, z);
  const Tensor pooled = relu(global_maxpool(ca));
  const Tensor hidden = relu(fully_connected(p.fc1, pooled));
  return sigmoid(fully_connected(p.fc2, hidden));
}

Tensor hybrid_attention(const Tensor& sa_maps, const Tensor& w_ca) {
  if (sa_maps.rank() != 3 || w_ca.numel() != sa_maps.dim(0)) {
    throw ShapeMismatch("hybrid_attention of " + shape_str(sa_maps.shape()) + " with weights " +
                        shape_str(w_ca.shape()));
  }
  const std::size_t c = sa_maps.dim(0), h = sa_maps.dim(1), w = sa_maps.dim(2);
  const Tensor flat = reshape(sa_maps, {c, h * w});
  return reshape(matmul(reshape(w_ca, {1, c}), flat), {1, h, w});
}

Tensor head_forward(const HybridAttentionHead& head, const Tensor& x) {
  const Tensor sa = self_attention(head.sa, x);
  const Tensor w = channel_weights(head.ca, x);
  return hybrid_attention(sa, w);
}

std::size_t attention_head_count_check(std::size_t heads, std::size_t channels) {
  if (heads == 0 || channels % heads != 0) {
    throw ChannelSplitError(std::to_string(heads) + " heads cannot split " +
                            std::to_string(channels) + " channels evenly");
  }
  return channels / heads;
}

RankedAttentionSet rmhha_forward(const std::vector<HybridAttentionHead>& heads, const Tensor& x) {
  if (x.rank() != 3) throw ShapeMismatch("rmhha_forward expects C x H x W, got " + shape_str(x.shape()));
  const std::size_t c_head = attention_head_count_check(heads.size(), x.dim(0));
  RankedAttentionSet set;
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const Tensor slice = slice_channels(x, i * c_head, (i + 1) * c_head);
    Tensor ha = head_forward(heads[i], slice);
    set.maps.push_back(mul(ha, heads[i].scale));
    set.hybrid.push_back(std::move(ha));
    set.scales.push_back(heads[i].scale.item());
  }
  set.order = rank_order(set.scales);
  return set;
}

void append_parameters(std::vector<NamedTensor>& out, const std::string& prefix,
                       const HybridAttentionHead& head) {
  append_parameters(out, prefix + ".sa.q", head.sa.proj_q);
  append_parameters(out, prefix + ".sa.k", head.sa.proj_k);
  append_parameters(out, prefix + ".sa.v", head.sa.proj_v);
  out.push_back({prefix + ".sa.rel_w", head.sa.rel_w});
  out.push_back({prefix + ".sa.rel_h", head.sa.rel_h});
  append_parameters(out, prefix + ".ca.z", head.ca.proj_z);
  append_parameters(out, prefix + ".ca.fc1", head.ca.fc1);
  append_parameters(out, prefix + ".ca.fc2", head.ca.fc2);
  out.push_back({prefix + ".scale", head.scale});
}

}  // namespace adpf
