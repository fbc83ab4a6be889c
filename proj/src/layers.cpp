#include "adpf/layers.hpp"

#include <cmath>

#include "adpf/errors.hpp"
#include "adpf/ops.hpp"

namespace adpf {

using detail::Node;
using detail::parent_grad;
using detail::parent_tracks;

namespace {

Tensor uniform_param(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.mutable_values()) v = rng.uniform(-bound, bound);
  t.set_requires_grad(true);
  return t;
}

void require_chw(const Tensor& x, const char* what) {
  if (x.rank() != 3) {
    throw ShapeMismatch(std::string(what) + " expects C x H x W, got " + shape_str(x.shape()));
  }
}

}  // namespace

Conv2D make_conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, Rng& rng,
                   std::size_t stride, std::size_t padding) {
  const double bound = std::sqrt(1.0 / static_cast<double>(in_ch * kernel * kernel));
  Conv2D layer;
  layer.weight = uniform_param({out_ch, in_ch, kernel, kernel}, bound, rng);
  layer.bias = uniform_param({out_ch}, bound, rng);
  layer.stride = stride;
  layer.padding = padding;
  return layer;
}

FullyConnected make_fully_connected(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  FullyConnected layer;
  layer.weight = uniform_param({out, in}, bound, rng);
  layer.bias = uniform_param({out}, bound, rng);
  return layer;
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
  if (in + 2 * padding < kernel || stride == 0) {
    throw ShapeMismatch("extent " + std::to_string(in) + " with padding " +
                        std::to_string(padding) + " is smaller than kernel " +
                        std::to_string(kernel));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

Tensor conv2d(const Conv2D& layer, const Tensor& x) {
  require_chw(x, "conv2d");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (C != layer.in_channels()) {
    throw ShapeMismatch("conv2d layer takes " + std::to_string(layer.in_channels()) +
                        " channels, input has " + std::to_string(C));
  }
  const std::size_t K = layer.kernel(), S = layer.stride, P = layer.padding;
  const std::size_t OC = layer.out_channels();
  const std::size_t Ho = conv_output_extent(H, K, S, P);
  const std::size_t Wo = conv_output_extent(W, K, S, P);
  const std::size_t rows = C * K * K;
  const std::size_t cols_n = Ho * Wo;

  // im2col: cols[(c,ky,kx), (oy,ox)]
  std::vector<double> cols(rows * cols_n, 0.0);
  auto xv = x.values();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ky = 0; ky < K; ++ky) {
      for (std::size_t kx = 0; kx < K; ++kx) {
        double* row = cols.data() + ((c * K + ky) * K + kx) * cols_n;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * S + ky) - static_cast<std::ptrdiff_t>(P);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * S + kx) - static_cast<std::ptrdiff_t>(P);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
            row[oy * Wo + ox] = xv[(c * H + iy) * W + ix];
          }
        }
      }
    }
  }

  std::vector<double> out(OC * cols_n, 0.0);
  auto bv = layer.bias.values();
  for (std::size_t o = 0; o < OC; ++o) {
    std::fill(out.begin() + o * cols_n, out.begin() + (o + 1) * cols_n, bv[o]);
  }
  kernels::gemm_acc(layer.weight.values(), cols, out, OC, rows, cols_n);

  return detail::make_result(
      "conv2d", {OC, Ho, Wo}, std::move(out), {x, layer.weight, layer.bias},
      [cols = std::move(cols), C, H, W, K, S, P, OC, Ho, Wo, rows, cols_n](Node& self) {
        const auto& g = self.grad;
        if (parent_tracks(self, 1)) {
          kernels::gemm_acc_bt(g, cols, parent_grad(self, 1), OC, cols_n, rows);
        }
        if (parent_tracks(self, 2)) {
          auto& gb = parent_grad(self, 2);
          for (std::size_t o = 0; o < OC; ++o) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols_n; ++j) s += g[o * cols_n + j];
            gb[o] += s;
          }
        }
        if (parent_tracks(self, 0)) {
          std::vector<double> dcols(rows * cols_n, 0.0);
          kernels::gemm_acc_at(self.parents[1]->data, g, dcols, OC, rows, cols_n);
          auto& gx = parent_grad(self, 0);
          for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t ky = 0; ky < K; ++ky) {
              for (std::size_t kx = 0; kx < K; ++kx) {
                const double* row = dcols.data() + ((c * K + ky) * K + kx) * cols_n;
                for (std::size_t oy = 0; oy < Ho; ++oy) {
                  const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * S + ky) - static_cast<std::ptrdiff_t>(P);
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                  for (std::size_t ox = 0; ox < Wo; ++ox) {
                    const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * S + kx) - static_cast<std::ptrdiff_t>(P);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                    gx[(c * H + iy) * W + ix] += row[oy * Wo + ox];
                  }
                }
              }
            }
          }
        }
      });
}

Tensor fully_connected(const FullyConnected& layer, const Tensor& x) {
  const std::size_t in = layer.in_features(), out_n = layer.out_features();
  if (x.numel() != in) {
    throw ShapeMismatch("fully_connected takes " + std::to_string(in) + " features, got " +
                        shape_str(x.shape()));
  }
  std::vector<double> out(layer.bias.values().begin(), layer.bias.values().end());
  kernels::gemm_acc_bt(x.values(), layer.weight.values(), out, 1, in, out_n);
  return detail::make_result(
      "fully_connected", {out_n}, std::move(out), {x, layer.weight, layer.bias},
      [in, out_n](Node& self) {
        const auto& g = self.grad;
        if (parent_tracks(self, 0)) {
          kernels::gemm_acc(g, self.parents[1]->data, parent_grad(self, 0), 1, out_n, in);
        }
        if (parent_tracks(self, 1)) {
          kernels::gemm_acc_at(g, self.parents[0]->data, parent_grad(self, 1), 1, out_n, in);
        }
        if (parent_tracks(self, 2)) {
          auto& gb = parent_grad(self, 2);
          for (std::size_t o = 0; o < out_n; ++o) gb[o] += g[o];
        }
      });
}

Tensor maxpool2d(const Tensor& x, std::size_t k, std::size_t stride) {
  require_chw(x, "maxpool2d");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (H < k || W < k || k == 0) {
    throw ShapeMismatch("maxpool2d window " + std::to_string(k) + " exceeds " + shape_str(x.shape()));
  }
  const std::size_t Ho = conv_output_extent(H, k, stride, 0);
  const std::size_t Wo = conv_output_extent(W, k, stride, 0);
  auto xv = x.values();
  std::vector<double> out(C * Ho * Wo);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        std::size_t best = (c * H + oy * stride) * W + ox * stride;
        for (std::size_t dy = 0; dy < k; ++dy) {
          for (std::size_t dx = 0; dx < k; ++dx) {
            const std::size_t idx = (c * H + oy * stride + dy) * W + ox * stride + dx;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        const std::size_t o = (c * Ho + oy) * Wo + ox;
        out[o] = xv[best];
        argmax[o] = best;
      }
    }
  }
  return detail::make_result("maxpool2d", {C, Ho, Wo}, std::move(out), {x},
                             [argmax = std::move(argmax)](Node& self) {
                               auto& gx = parent_grad(self, 0);
                               for (std::size_t o = 0; o < argmax.size(); ++o) {
                                 gx[argmax[o]] += self.grad[o];
                               }
                             });
}

Tensor global_maxpool(const Tensor& x) {
  require_chw(x, "global_maxpool");
  const std::size_t C = x.dim(0), plane = x.dim(1) * x.dim(2);
  if (plane == 0) throw ShapeMismatch("global_maxpool over an empty plane");
  auto xv = x.values();
  std::vector<double> out(C);
  std::vector<std::size_t> argmax(C);
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t best = c * plane;
    for (std::size_t i = 1; i < plane; ++i) {
      if (xv[c * plane + i] > xv[best]) best = c * plane + i;
    }
    out[c] = xv[best];
    argmax[c] = best;
  }
  return detail::make_result("global_maxpool", {C}, std::move(out), {x},
                             [argmax = std::move(argmax)](Node& self) {
                               auto& gx = parent_grad(self, 0);
                               for (std::size_t c = 0; c < argmax.size(); ++c) {
                                 gx[argmax[c]] += self.grad[c];
                               }
                             });
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeMismatch("concat_channels of zero tensors");
  for (const auto& x : xs) {
    require_chw(x, "concat_channels");
    if (x.dim(1) != xs.front().dim(1) || x.dim(2) != xs.front().dim(2)) {
      throw ShapeMismatch("concat_channels spatial sizes differ: " + shape_str(xs.front().shape()) +
                          " vs " + shape_str(x.shape()));
    }
  }
  return concat0(xs);
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t end) {
  require_chw(x, "slice_channels");
  return slice0(x, begin, end);
}

Tensor bilinear_resize(const Tensor& x, std::size_t height, std::size_t width) {
  require_chw(x, "bilinear_resize");
  const std::size_t C = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h == 0 || w == 0 || height == 0 || width == 0) {
    throw ShapeMismatch("bilinear_resize with an empty extent");
  }
  // Corner alignment: output pixel i samples source coordinate i*(h-1)/(H-1).
  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  auto taps = [](std::size_t src, std::size_t dst) {
    std::vector<Tap> out(dst);
    for (std::size_t i = 0; i < dst; ++i) {
      const double pos = dst > 1 ? static_cast<double>(i) * static_cast<double>(src - 1) /
                                       static_cast<double>(dst - 1)
                                 : 0.0;
      std::size_t lo = static_cast<std::size_t>(std::floor(pos));
      if (lo > src - 1) lo = src - 1;
      const std::size_t hi = std::min(lo + 1, src - 1);
      out[i] = {lo, hi, pos - static_cast<double>(lo)};
    }
    return out;
  };
  auto ty = taps(h, height);
  auto tx = taps(w, width);
  auto xv = x.values();
  std::vector<double> out(C * height * width);
  for (std::size_t c = 0; c < C; ++c) {
    const double* src = xv.data() + c * h * w;
    for (std::size_t i = 0; i < height; ++i) {
      const auto& a = ty[i];
      for (std::size_t j = 0; j < width; ++j) {
        const auto& b = tx[j];
        const double top = src[a.lo * w + b.lo] * (1.0 - b.frac) + src[a.lo * w + b.hi] * b.frac;
        const double bot = src[a.hi * w + b.lo] * (1.0 - b.frac) + src[a.hi * w + b.hi] * b.frac;
        out[(c * height + i) * width + j] = top * (1.0 - a.frac) + bot * a.frac;
      }
    }
  }
  return detail::make_result(
      "bilinear_resize", {C, height, width}, std::move(out), {x},
      [ty = std::move(ty), tx = std::move(tx), C, h, w, height, width](Node& self) {
        auto& gx = parent_grad(self, 0);
        for (std::size_t c = 0; c < C; ++c) {
          double* dst = gx.data() + c * h * w;
          for (std::size_t i = 0; i < height; ++i) {
            const auto& a = ty[i];
            for (std::size_t j = 0; j < width; ++j) {
              const auto& b = tx[j];
              const double g = self.grad[(c * height + i) * width + j];
              dst[a.lo * w + b.lo] += g * (1.0 - a.frac) * (1.0 - b.frac);
              dst[a.lo * w + b.hi] += g * (1.0 - a.frac) * b.frac;
              dst[a.hi * w + b.lo] += g * a.frac * (1.0 - b.frac);
              dst[a.hi * w + b.hi] += g * a.frac * b.frac;
            }
          }
        }
      });
}

void append_parameters(std::vector<NamedTensor>& out, const std::string& prefix,
                       const Conv2D& layer) {
  out.push_back({prefix + ".weight", layer.weight});
  out.push_back({prefix + ".bias", layer.bias});
}

void append_parameters(std::vector<NamedTensor>& out, const std::string& prefix,
                       const FullyConnected& layer) {
  out.push_back({prefix + ".weight", layer.weight});
  out.push_back({prefix + ".bias", layer.bias});
}

}  // namespace adpf
