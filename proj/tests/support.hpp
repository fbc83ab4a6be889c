#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "adpf/attention.hpp"
#include "adpf/layers.hpp"
#include "adpf/ops.hpp"
#include "adpf/random.hpp"
#include "adpf/tensor.hpp"

namespace adpf::testing {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool tracked = false) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  Tensor t(shape, std::move(v));
  if (tracked) t.set_requires_grad(true);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
};

// Compares backward() against central differences at `probes` random
// coordinates drawn across all inputs; error is |ad - fd| / max(1, |fd|).
inline GradCheckResult grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                                  std::vector<Tensor> inputs, Rng& rng, std::size_t probes = 20,
                                  double eps = 1e-5) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  const Tensor loss = fn(inputs);
  backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());

  std::size_t total = 0;
  for (const auto& t : inputs) total += t.numel();
  GradCheckResult res;
  NoGradGuard no_grad;
  for (std::size_t p = 0; p < probes; ++p) {
    std::size_t flat = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(total) - 1));
    std::size_t which = 0;
    while (flat >= inputs[which].numel()) flat -= inputs[which++].numel();
    auto v = inputs[which].mutable_values();
    const double orig = v[flat];
    v[flat] = orig + eps;
    const double up = fn(inputs).item();
    v[flat] = orig - eps;
    const double down = fn(inputs).item();
    v[flat] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic[which][flat];
    const double denom = std::max(1.0, std::fabs(numeric));
    res.max_rel_error = std::max(res.max_rel_error, std::fabs(a - numeric) / denom);
    ++res.probes;
  }
  return res;
}

// ---- brute-force oracles -------------------------------------------------

inline std::vector<double> oracle_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  std::vector<double> out(m * p, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t t = 0; t < k; ++t) out[i * p + j] += a[i * k + t] * b[t * p + j];
  return out;
}

inline std::vector<double> oracle_conv2d(const Conv2D& layer, const Tensor& x) {
  const std::size_t oc = layer.out_channels(), ic = layer.in_channels(), k = layer.kernel();
  const std::size_t H = x.dim(1), W = x.dim(2), s = layer.stride, pad = layer.padding;
  const std::size_t oh = (H + 2 * pad - k) / s + 1, ow = (W + 2 * pad - k) / s + 1;
  std::vector<double> out(oc * oh * ow);
  for (std::size_t o = 0; o < oc; ++o)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        double acc = layer.bias[o];
        for (std::size_t c = 0; c < ic; ++c)
          for (std::size_t dy = 0; dy < k; ++dy)
            for (std::size_t dx = 0; dx < k; ++dx) {
              const long iy = static_cast<long>(y * s + dy) - static_cast<long>(pad);
              const long ix = static_cast<long>(xx * s + dx) - static_cast<long>(pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
              acc += layer.weight[((o * ic + c) * k + dy) * k + dx] * x[(c * H + iy) * W + ix];
            }
        out[(o * oh + y) * ow + xx] = acc;
      }
  return out;
}

inline std::vector<double> oracle_maxpool(const Tensor& x, std::size_t k, std::size_t s) {
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::size_t oh = (H - k) / s + 1, ow = (W - k) / s + 1;
  std::vector<double> out;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        double m = -INFINITY;
        for (std::size_t dy = 0; dy < k; ++dy)
          for (std::size_t dx = 0; dx < k; ++dx) m = std::max(m, x[(c * H + y * s + dy) * W + xx * s + dx]);
        out.push_back(m);
      }
  return out;
}

// 1x1 conv at one pixel.
inline std::vector<double> oracle_project(const Conv2D& p, const Tensor& x, std::size_t pix) {
  const std::size_t ic = p.in_channels(), hw = x.dim(1) * x.dim(2);
  std::vector<double> out(p.out_channels());
  for (std::size_t o = 0; o < out.size(); ++o) {
    double acc = p.bias[o];
    for (std::size_t c = 0; c < ic; ++c) acc += p.weight[o * ic + c] * x[c * hw + pix];
    out[o] = acc;
  }
  return out;
}

// Per-query loop over every key with explicit offsets into the relative
// embeddings.
inline std::vector<double> oracle_self_attention(const SelfAttentionParams& p, const Tensor& x) {
  const std::size_t h = p.height, w = p.width, hw = h * w;
  const std::size_t cK = p.key_channels(), cV = p.value_channels();
  std::vector<std::vector<double>> q(hw), k(hw), v(hw);
  for (std::size_t i = 0; i < hw; ++i) {
    q[i] = oracle_project(p.proj_q, x, i);
    k[i] = oracle_project(p.proj_k, x, i);
    v[i] = oracle_project(p.proj_v, x, i);
    if (p.positive_values) {
      for (auto& e : v[i]) e = std::max(e, 0.0) + std::log1p(std::exp(-std::fabs(e)));
    }
  }
  std::vector<double> out(cV * hw, 0.0);
  for (std::size_t iy = 0; iy < h; ++iy)
    for (std::size_t ix = 0; ix < w; ++ix) {
      const std::size_t i = iy * w + ix;
      std::vector<double> logit(hw);
      for (std::size_t jy = 0; jy < h; ++jy)
        for (std::size_t jx = 0; jx < w; ++jx) {
          const std::size_t j = jy * w + jx;
          const std::size_t rw = jx + w - 1 - ix, rh = jy + h - 1 - iy;
          double l = 0.0;
          for (std::size_t c = 0; c < cK; ++c) {
            l += q[i][c] * k[j][c] + q[i][c] * p.rel_w[rw * cK + c] + q[i][c] * p.rel_h[rh * cK + c];
          }
          logit[j] = l / std::sqrt(static_cast<double>(cK));
        }
      const double mx = *std::max_element(logit.begin(), logit.end());
      double z = 0.0;
      for (auto& l : logit) z += (l = std::exp(l - mx));
      for (std::size_t j = 0; j < hw; ++j)
        for (std::size_t c = 0; c < cV; ++c) out[c * hw + i] += logit[j] / z * v[j][c];
    }
  return out;
}

inline double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// conv1x1 -> global max -> relu -> fc1 -> relu -> fc2 -> sigmoid, one stage at a time.
inline std::vector<double> oracle_channel_weights(const ChannelAttentionParams& p, const Tensor& z) {
  const std::size_t hw = z.dim(1) * z.dim(2);
  std::vector<double> pooled(p.proj_z.out_channels(), -INFINITY);
  for (std::size_t pix = 0; pix < hw; ++pix) {
    const auto proj = oracle_project(p.proj_z, z, pix);
    for (std::size_t c = 0; c < proj.size(); ++c) pooled[c] = std::max(pooled[c], proj[c]);
  }
  for (auto& v : pooled) v = std::max(v, 0.0);
  auto dense = [](const FullyConnected& fc, const std::vector<double>& in) {
    std::vector<double> out(fc.out_features());
    for (std::size_t o = 0; o < out.size(); ++o) {
      double acc = fc.bias[o];
      for (std::size_t i = 0; i < in.size(); ++i) acc += fc.weight[o * in.size() + i] * in[i];
      out[o] = acc;
    }
    return out;
  };
  auto hidden = dense(p.fc1, pooled);
  for (auto& v : hidden) v = std::max(v, 0.0);
  auto out = dense(p.fc2, hidden);
  for (auto& v : out) v = sigmoid_scalar(v);
  return out;
}

// Pair loop over n1 < n2, doubled at the end.
inline double oracle_diversity(const std::vector<Tensor>& maps) {
  double s = 0.0;
  for (std::size_t a = 0; a < maps.size(); ++a)
    for (std::size_t b = a + 1; b < maps.size(); ++b)
      for (std::size_t i = 0; i < maps[a].numel(); ++i) s += maps[a][i] * maps[b][i];
  return 2.0 * s;
}

// Corner-aligned: output pixel y samples source row y * (h-1)/(H-1).
inline std::vector<double> oracle_bilinear(const Tensor& x, std::size_t H, std::size_t W) {
  const std::size_t C = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<double> out;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t xx = 0; xx < W; ++xx) {
        const double sy = H > 1 ? static_cast<double>(y) * (h - 1) / (H - 1) : 0.0;
        const double sx = W > 1 ? static_cast<double>(xx) * (w - 1) / (W - 1) : 0.0;
        const std::size_t y0 = static_cast<std::size_t>(std::floor(sy));
        const std::size_t x0 = static_cast<std::size_t>(std::floor(sx));
        const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
        const double fy = sy - y0, fx = sx - x0;
        auto at = [&](std::size_t yy, std::size_t xi) { return x[(c * h + yy) * w + xi]; };
        out.push_back((1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
                      fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1)));
      }
  return out;
}

inline Tensor as_tensor(const Shape& shape, std::vector<double> v) { return Tensor(shape, std::move(v)); }

}  // namespace adpf::testing
