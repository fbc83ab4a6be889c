#include "adpf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adpf/errors.hpp"

namespace adpf {

using detail::Node;
using detail::parent_grad;
using detail::parent_tracks;

namespace kernels {

void gemm_acc(std::span<const double> a, std::span<const double> b, std::span<double> out,
              std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    double* out_row = out.data() + i * p;
    const double* a_row = a.data() + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = a_row[kk];
      if (av == 0.0) continue;
      const double* b_row = b.data() + kk * p;
      for (std::size_t j = 0; j < p; ++j) out_row[j] += av * b_row[j];
    }
  }
}

void gemm_acc_bt(std::span<const double> a, std::span<const double> b, std::span<double> out,
                 std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a.data() + i * k;
    for (std::size_t j = 0; j < p; ++j) {
      const double* b_row = b.data() + j * k;
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += a_row[kk] * b_row[kk];
      out[i * p + j] += acc;
    }
  }
}

void gemm_acc_at(std::span<const double> a, std::span<const double> b, std::span<double> out,
                 std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a.data() + i * k;
    const double* b_row = b.data() + i * p;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = a_row[kk];
      if (av == 0.0) continue;
      double* out_row = out.data() + kk * p;
      for (std::size_t j = 0; j < p; ++j) out_row[j] += av * b_row[j];
    }
  }
}

}  // namespace kernels

namespace {

bool is_binary(ElementwiseKind kind) {
  switch (kind) {
    case ElementwiseKind::add:
    case ElementwiseKind::sub:
    case ElementwiseKind::mul:
    case ElementwiseKind::div:
      return true;
    default:
      return false;
  }
}

const char* kind_name(ElementwiseKind kind) {
  switch (kind) {
    case ElementwiseKind::add: return "add";
    case ElementwiseKind::sub: return "sub";
    case ElementwiseKind::mul: return "mul";
    case ElementwiseKind::div: return "div";
    case ElementwiseKind::max0: return "max0";
    case ElementwiseKind::sigmoid: return "sigmoid";
    case ElementwiseKind::exp: return "exp";
    case ElementwiseKind::log: return "log";
    case ElementwiseKind::abs: return "abs";
    case ElementwiseKind::scale: return "scale";
  }
  return "?";
}

Tensor binary(ElementwiseKind kind, const Tensor& a, const Tensor& b) {
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();
  if (a.shape() != b.shape() && na != 1 && nb != 1) {
    throw ShapeMismatch(std::string(kind_name(kind)) + " of " + shape_str(a.shape()) + " and " +
                        shape_str(b.shape()));
  }
  // Broadcast result takes the shape of the larger operand.
  const Shape out_shape = (na >= nb && !(na == 1 && b.rank() > a.rank())) ? a.shape() : b.shape();
  const std::size_t n = std::max(na, nb);
  const std::size_t sa = na == 1 ? 0 : 1;
  const std::size_t sb = nb == 1 ? 0 : 1;
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(n);
  switch (kind) {
    case ElementwiseKind::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i * sa] + bv[i * sb];
      break;
    case ElementwiseKind::sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i * sa] - bv[i * sb];
      break;
    case ElementwiseKind::mul:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i * sa] * bv[i * sb];
      break;
    case ElementwiseKind::div:
      for (std::size_t i = 0; i < n; ++i) {
        if (bv[i * sb] == 0.0) throw DomainError("division by zero");
        out[i] = av[i * sa] / bv[i * sb];
      }
      break;
    default:
      throw Error("not a binary elementwise kind");
  }
  return detail::make_result(
      kind_name(kind), out_shape, std::move(out), {a, b}, [kind, n, sa, sb](Node& self) {
        const auto& g = self.grad;
        const auto& av = self.parents[0]->data;
        const auto& bv = self.parents[1]->data;
        if (parent_tracks(self, 0)) {
          auto& ga = parent_grad(self, 0);
          for (std::size_t i = 0; i < n; ++i) {
            double d = 0.0;
            switch (kind) {
              case ElementwiseKind::add:
              case ElementwiseKind::sub: d = g[i]; break;
              case ElementwiseKind::mul: d = g[i] * bv[i * sb]; break;
              case ElementwiseKind::div: d = g[i] / bv[i * sb]; break;
              default: break;
            }
            ga[i * sa] += d;
          }
        }
        if (parent_tracks(self, 1)) {
          auto& gb = parent_grad(self, 1);
          for (std::size_t i = 0; i < n; ++i) {
            double d = 0.0;
            switch (kind) {
              case ElementwiseKind::add: d = g[i]; break;
              case ElementwiseKind::sub: d = -g[i]; break;
              case ElementwiseKind::mul: d = g[i] * av[i * sa]; break;
              case ElementwiseKind::div: {
                const double bi = bv[i * sb];
                d = -g[i] * av[i * sa] / (bi * bi);
                break;
              }
              default: break;
            }
            gb[i * sb] += d;
          }
        }
      });
}

}  // namespace

Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor& b) {
  if (!is_binary(kind)) {
    throw Error(std::string(kind_name(kind)) + " is unary; use the single-operand overload");
  }
  return binary(kind, a, b);
}

Tensor elementwise(ElementwiseKind kind, const Tensor& a, double factor) {
  if (is_binary(kind)) {
    throw Error(std::string(kind_name(kind)) + " needs two operands");
  }
  auto av = a.values();
  const std::size_t n = av.size();
  std::vector<double> out(n);
  switch (kind) {
    case ElementwiseKind::max0:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
      break;
    case ElementwiseKind::sigmoid:
      for (std::size_t i = 0; i < n; ++i) {
        // Split by sign so exp never overflows.
        out[i] = av[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-av[i]))
                              : std::exp(av[i]) / (1.0 + std::exp(av[i]));
      }
      break;
    case ElementwiseKind::exp:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(av[i]);
      break;
    case ElementwiseKind::log:
      for (std::size_t i = 0; i < n; ++i) {
        if (!(av[i] > 0.0)) throw DomainError("log of non-positive value " + std::to_string(av[i]));
        out[i] = std::log(av[i]);
      }
      break;
    case ElementwiseKind::abs:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::fabs(av[i]);
      break;
    case ElementwiseKind::scale:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * factor;
      break;
    default:
      break;
  }
  return detail::make_result(
      kind_name(kind), a.shape(), std::move(out), {a}, [kind, n, factor](Node& self) {
        const auto& g = self.grad;
        const auto& x = self.parents[0]->data;
        const auto& y = self.data;
        auto& gx = parent_grad(self, 0);
        switch (kind) {
          case ElementwiseKind::max0:
            for (std::size_t i = 0; i < n; ++i) gx[i] += x[i] > 0.0 ? g[i] : 0.0;
            break;
          case ElementwiseKind::sigmoid:
            for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
            break;
          case ElementwiseKind::exp:
            for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * y[i];
            break;
          case ElementwiseKind::log:
            for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] / x[i];
            break;
          case ElementwiseKind::abs:
            for (std::size_t i = 0; i < n; ++i) {
              gx[i] += x[i] > 0.0 ? g[i] : (x[i] < 0.0 ? -g[i] : 0.0);
            }
            break;
          case ElementwiseKind::scale:
            for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * factor;
            break;
          default:
            break;
        }
      });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(ElementwiseKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(ElementwiseKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(ElementwiseKind::mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(ElementwiseKind::div, a, b); }
Tensor relu(const Tensor& a) { return elementwise(ElementwiseKind::max0, a); }
Tensor sigmoid(const Tensor& a) { return elementwise(ElementwiseKind::sigmoid, a); }
Tensor exp(const Tensor& a) { return elementwise(ElementwiseKind::exp, a); }
Tensor log(const Tensor& a) { return elementwise(ElementwiseKind::log, a); }
Tensor abs(const Tensor& a) { return elementwise(ElementwiseKind::abs, a); }
Tensor scale(const Tensor& a, double factor) {
  return elementwise(ElementwiseKind::scale, a, factor);
}

Tensor floor_at(const Tensor& a, double floor) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::max(av[i], floor);
  return detail::make_result("floor_at", a.shape(), std::move(out), {a}, [floor](Node& self) {
    const auto& x = self.parents[0]->data;
    auto& gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > floor) gx[i] += self.grad[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeMismatch("matmul of " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  std::vector<double> out(m * p, 0.0);
  kernels::gemm_acc(a.values(), b.values(), out, m, k, p);
  return detail::make_result("matmul", {m, p}, std::move(out), {a, b}, [m, k, p](Node& self) {
    if (parent_tracks(self, 0)) {
      // dA = dC . B^T
      kernels::gemm_acc_bt(self.grad, self.parents[1]->data, parent_grad(self, 0), m, p, k);
    }
    if (parent_tracks(self, 1)) {
      // dB = A^T . dC
      kernels::gemm_acc_at(self.parents[0]->data, self.grad, parent_grad(self, 1), m, k, p);
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeMismatch("transpose needs rank 2, got " + shape_str(a.shape()));
  const std::size_t r = a.dim(0), c = a.dim(1);
  auto av = a.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return detail::make_result("transpose", {c, r}, std::move(out), {a}, [r, c](Node& self) {
    auto& ga = parent_grad(self, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeMismatch("reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return detail::make_result("reshape", std::move(shape), std::move(out), {a}, [](Node& self) {
    auto& ga = parent_grad(self, 0);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor softmax(const Tensor& t, std::size_t axis) {
  if (axis >= t.rank()) {
    throw ShapeMismatch("softmax axis " + std::to_string(axis) + " for " + shape_str(t.shape()));
  }
  std::size_t outer = 1, inner = 1;
  const std::size_t len = t.dim(axis);
  for (std::size_t i = 0; i < axis; ++i) outer *= t.dim(i);
  for (std::size_t i = axis + 1; i < t.rank(); ++i) inner *= t.dim(i);
  auto x = t.values();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = x[base];
      for (std::size_t l = 1; l < len; ++l) mx = std::max(mx, x[base + l * inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < len; ++l) {
        const double e = std::exp(x[base + l * inner] - mx);
        out[base + l * inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < len; ++l) out[base + l * inner] /= z;
    }
  }
  return detail::make_result(
      "softmax", t.shape(), std::move(out), {t}, [outer, inner, len](Node& self) {
        const auto& y = self.data;
        const auto& g = self.grad;
        auto& gx = parent_grad(self, 0);
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            double dot = 0.0;
            for (std::size_t l = 0; l < len; ++l) dot += g[base + l * inner] * y[base + l * inner];
            for (std::size_t l = 0; l < len; ++l) {
              const std::size_t idx = base + l * inner;
              gx[idx] += y[idx] * (g[idx] - dot);
            }
          }
        }
      });
}

Tensor sum(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v;
  return detail::make_result("sum", {}, {s}, {t}, [](Node& self) {
    auto& gx = parent_grad(self, 0);
    for (auto& v : gx) v += self.grad[0];
  });
}

Tensor mean(const Tensor& t) {
  if (t.numel() == 0) throw EmptyInput("mean of an empty tensor");
  return scale(sum(t), 1.0 / static_cast<double>(t.numel()));
}

Tensor weighted_sum(const Tensor& a, std::span<const double> weights) {
  if (weights.size() != a.numel()) {
    throw ShapeMismatch("weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                        shape_str(a.shape()));
  }
  double s = 0.0;
  auto av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * weights[i];
  std::vector<double> w(weights.begin(), weights.end());
  return detail::make_result("weighted_sum", {}, {s}, {a}, [w = std::move(w)](Node& self) {
    auto& gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < w.size(); ++i) gx[i] += self.grad[0] * w[i];
  });
}

Tensor concat0(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat of zero tensors");
  auto trailing = [](const Tensor& t) {
    return t.rank() == 0 ? Shape{} : Shape(t.shape().begin() + 1, t.shape().end());
  };
  const Shape tail = trailing(parts.front());
  std::size_t lead = 0;
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (trailing(p) != tail) {
      throw ShapeMismatch("concat of " + shape_str(parts.front().shape()) + " and " +
                          shape_str(p.shape()));
    }
    lead += p.rank() == 0 ? 1 : p.dim(0);
    offsets.push_back(out.size());
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  Shape shape{lead};
  shape.insert(shape.end(), tail.begin(), tail.end());
  return detail::make_result("concat", std::move(shape), std::move(out), parts,
                             [offsets = std::move(offsets)](Node& self) {
                               for (std::size_t i = 0; i < self.parents.size(); ++i) {
                                 if (!parent_tracks(self, i)) continue;
                                 auto& gp = parent_grad(self, i);
                                 for (std::size_t j = 0; j < gp.size(); ++j) {
                                   gp[j] += self.grad[offsets[i] + j];
                                 }
                               }
                             });
}

Tensor slice0(const Tensor& t, std::size_t begin, std::size_t end) {
  if (t.rank() == 0 || begin >= end || end > t.dim(0)) {
    throw ShapeMismatch("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                        shape_str(t.shape()));
  }
  const std::size_t row = t.numel() / t.dim(0);
  Shape shape = t.shape();
  shape[0] = end - begin;
  auto tv = t.values();
  std::vector<double> out(tv.begin() + begin * row, tv.begin() + end * row);
  const std::size_t offset = begin * row;
  return detail::make_result("slice", std::move(shape), std::move(out), {t},
                             [offset](Node& self) {
                               auto& gx = parent_grad(self, 0);
                               for (std::size_t j = 0; j < self.grad.size(); ++j) {
                                 gx[offset + j] += self.grad[j];
                               }
                             });
}

}  // namespace adpf
