#include "neurmap/diff/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace neurmap::diff {

using detail::make_result;
using detail::Node;

namespace {

template <typename T>
bool is_scalar(const BasicTensor<T>& t) {
  return t.rank() == 0;
}

template <typename T>
void check_binary(const char* op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (!a.defined() || !b.defined()) {
    throw std::invalid_argument(std::string(op) + ": undefined operand");
  }
  if (a.shape() != b.shape() && !is_scalar(a) && !is_scalar(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

// Pointwise unary op; `deriv(x, y)` gives dy/dx from input and output.
template <typename T, typename F, typename D>
BasicTensor<T> unary(const char* op, const BasicTensor<T>& a, F f, D deriv) {
  const auto x = a.values();
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  auto pa = a.node();
  return make_result<T>(op, a.shape(), std::move(y), {a}, [pa, deriv](const Node<T>& out) {
    if (!pa->requires_grad) return;
    auto& g = pa->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += out.grad[i] * deriv(pa->value[i], out.value[i]);
    }
  });
}

template <typename T>
void accumulate_binary_grad(Node<T>& parent, const std::vector<T>& upstream,
                            const std::vector<T>* factor, T sign) {
  if (!parent.requires_grad) return;
  auto& g = parent.ensure_grad();
  if (g.size() == 1 && upstream.size() != 1) {
    T s = 0;
    for (std::size_t i = 0; i < upstream.size(); ++i) {
      s += upstream[i] * (factor ? (*factor)[factor->size() == 1 ? 0 : i] : T(1));
    }
    g[0] += sign * s;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    T f = factor ? (*factor)[factor->size() == 1 ? 0 : i] : T(1);
    g[i] += sign * upstream[upstream.size() == 1 ? 0 : i] * f;
  }
}

template <typename T, typename F>
std::vector<T> binary_values(const BasicTensor<T>& a, const BasicTensor<T>& b, F f,
                             Shape& out_shape) {
  const auto x = a.values();
  const auto y = b.values();
  out_shape = is_scalar(a) ? b.shape() : a.shape();
  std::vector<T> r(shape_numel(out_shape));
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = f(x[x.size() == 1 ? 0 : i], y[y.size() == 1 ? 0 : i]);
  }
  return r;
}

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  check_binary("add", a, b);
  Shape shape;
  auto r = binary_values(a, b, [](T x, T y) { return x + y; }, shape);
  auto pa = a.node(), pb = b.node();
  return make_result<T>("add", shape, std::move(r),
                        {a, b}, [pa, pb](const Node<T>& out) {
                          accumulate_binary_grad<T>(*pa, out.grad, nullptr, T(1));
                          accumulate_binary_grad<T>(*pb, out.grad, nullptr, T(1));
                        });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  check_binary("sub", a, b);
  Shape shape;
  auto r = binary_values(a, b, [](T x, T y) { return x - y; }, shape);
  auto pa = a.node(), pb = b.node();
  return make_result<T>("sub", shape, std::move(r),
                        {a, b}, [pa, pb](const Node<T>& out) {
                          accumulate_binary_grad<T>(*pa, out.grad, nullptr, T(1));
                          accumulate_binary_grad<T>(*pb, out.grad, nullptr, T(-1));
                        });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  check_binary("mul", a, b);
  Shape shape;
  auto r = binary_values(a, b, [](T x, T y) { return x * y; }, shape);
  auto pa = a.node(), pb = b.node();
  return make_result<T>("mul", shape, std::move(r),
                        {a, b}, [pa, pb](const Node<T>& out) {
                          accumulate_binary_grad<T>(*pa, out.grad, &pb->value, T(1));
                          accumulate_binary_grad<T>(*pb, out.grad, &pa->value, T(1));
                        });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
  return unary<T>("scale", a, [factor](T x) { return x * factor; },
                  [factor](T, T) { return factor; });
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& a, T offset) {
  return unary<T>("add_scalar", a, [offset](T x) { return x + offset; },
                  [](T, T) { return T(1); });
}

template <typename T>
BasicTensor<T> neg(const BasicTensor<T>& a) {
  return unary<T>("neg", a, [](T x) { return -x; }, [](T, T) { return T(-1); });
}

template <typename T>
BasicTensor<T> abs(const BasicTensor<T>& a) {
  return unary<T>("abs", a, [](T x) { return std::abs(x); },
                  [](T x, T) { return x > 0 ? T(1) : (x < 0 ? T(-1) : T(0)); });
}

template <typename T>
BasicTensor<T> square(const BasicTensor<T>& a) {
  return unary<T>("square", a, [](T x) { return x * x; }, [](T x, T) { return 2 * x; });
}

template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& a) {
  return unary<T>("tanh", a, [](T x) { return std::tanh(x); },
                  [](T, T y) { return T(1) - y * y; });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& a) {
  return unary<T>("sigmoid", a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
                  [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& a, T slope) {
  return unary<T>("leaky_relu", a, [slope](T x) { return x > 0 ? x : slope * x; },
                  [slope](T x, T) { return x > 0 ? T(1) : slope; });
}

template <typename T>
BasicTensor<T> clamp(const BasicTensor<T>& a, T lo, T hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  return unary<T>("clamp", a, [lo, hi](T x) { return x < lo ? lo : (x > hi ? hi : x); },
                  [lo, hi](T x, T) { return (x > lo && x < hi) ? T(1) : T(0); });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& a) {
  if (a.numel() == 0) throw std::invalid_argument("sum: empty tensor");
  double s = 0;
  for (T x : a.values()) s += x;
  auto pa = a.node();
  return make_result<T>("sum", Shape{}, {static_cast<T>(s)}, {a}, [pa](const Node<T>& out) {
    if (!pa->requires_grad) return;
    auto& g = pa->ensure_grad();
    for (auto& gi : g) gi += out.grad[0];
  });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& a) {
  if (!a.defined() || a.numel() == 0) throw std::invalid_argument("mean: empty tensor");
  double s = 0;
  for (T x : a.values()) s += x;
  const T inv = T(1) / static_cast<T>(a.numel());
  auto pa = a.node();
  const T m = static_cast<T>(s / static_cast<double>(a.numel()));
  return make_result<T>("mean", Shape{}, {m}, {a}, [pa, inv](const Node<T>& out) {
    if (!pa->requires_grad) return;
    auto& g = pa->ensure_grad();
    const T d = out.grad[0] * inv;
    for (auto& gi : g) gi += d;
  });
}

template <typename T>
BasicTensor<T> slice(const BasicTensor<T>& a, std::size_t axis, std::size_t begin,
                     std::size_t end) {
  if (axis >= a.rank() || begin >= end || end > a.dim(axis)) {
    throw std::invalid_argument("slice: bad range on shape " + shape_str(a.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= a.dim(i);
  for (std::size_t i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
  const std::size_t n = a.dim(axis), len = end - begin;
  Shape shape = a.shape();
  shape[axis] = len;
  std::vector<T> out(outer * len * inner);
  const auto x = a.values();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < len; ++k) {
      const T* src = x.data() + (o * n + begin + k) * inner;
      std::copy(src, src + inner, out.data() + (o * len + k) * inner);
    }
  }
  auto pa = a.node();
  return make_result<T>("slice", shape, std::move(out), {a},
                        [pa, outer, inner, n, len, begin](const Node<T>& res) {
                          if (!pa->requires_grad) return;
                          auto& g = pa->ensure_grad();
                          for (std::size_t o = 0; o < outer; ++o) {
                            for (std::size_t k = 0; k < len; ++k) {
                              const T* src = res.grad.data() + (o * len + k) * inner;
                              T* dst = g.data() + (o * n + begin + k) * inner;
                              for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
                            }
                          }
                        });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw std::invalid_argument("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  auto pa = a.node();
  return make_result<T>("reshape", std::move(shape),
                        std::vector<T>(a.values().begin(), a.values().end()), {a},
                        [pa](const Node<T>& out) {
                          if (!pa->requires_grad) return;
                          auto& g = pa->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
                        });
}

template <typename T>
BasicTensor<T> tile_channels(const BasicTensor<T>& v, std::size_t h, std::size_t w) {
  if (v.rank() != 1) throw std::invalid_argument("tile_channels: expected a [c] vector");
  const std::size_t c = v.dim(0), hw = h * w;
  std::vector<T> out(c * hw);
  for (std::size_t k = 0; k < c; ++k) {
    std::fill(out.begin() + k * hw, out.begin() + (k + 1) * hw, v.values()[k]);
  }
  auto pv = v.node();
  return make_result<T>("tile_channels", Shape{c, h, w}, std::move(out), {v},
                        [pv, c, hw](const Node<T>& res) {
                          if (!pv->requires_grad) return;
                          auto& g = pv->ensure_grad();
                          for (std::size_t k = 0; k < c; ++k) {
                            T s = 0;
                            for (std::size_t i = 0; i < hw; ++i) s += res.grad[k * hw + i];
                            g[k] += s;
                          }
                        });
}

template <typename T>
BasicTensor<T> spatial_mean(const BasicTensor<T>& a) {
  if (a.rank() != 3 || a.numel() == 0) {
    throw std::invalid_argument("spatial_mean: expected a nonempty [c,h,w] tensor");
  }
  const std::size_t c = a.dim(0), hw = a.dim(1) * a.dim(2);
  const T inv = T(1) / static_cast<T>(hw);
  std::vector<T> out(c);
  for (std::size_t k = 0; k < c; ++k) {
    double s = 0;
    for (std::size_t i = 0; i < hw; ++i) s += a.values()[k * hw + i];
    out[k] = static_cast<T>(s / static_cast<double>(hw));
  }
  auto pa = a.node();
  return make_result<T>("spatial_mean", Shape{c}, std::move(out), {a},
                        [pa, c, hw, inv](const Node<T>& res) {
                          if (!pa->requires_grad) return;
                          auto& g = pa->ensure_grad();
                          for (std::size_t k = 0; k < c; ++k) {
                            for (std::size_t i = 0; i < hw; ++i) g[k * hw + i] += res.grad[k] * inv;
                          }
                        });
}

template <typename T>
BasicTensor<T> upsample2x(const BasicTensor<T>& a) {
  if (a.rank() != 3) throw std::invalid_argument("upsample2x: expected [c,h,w]");
  const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2);
  const std::size_t h2 = 2 * h, w2 = 2 * w;
  std::vector<T> out(c * h2 * w2);
  const auto x = a.values();
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < h2; ++y) {
      for (std::size_t xx = 0; xx < w2; ++xx) {
        out[(k * h2 + y) * w2 + xx] = x[(k * h + y / 2) * w + xx / 2];
      }
    }
  }
  auto pa = a.node();
  return make_result<T>("upsample2x", Shape{c, h2, w2}, std::move(out), {a},
                        [pa, c, h, w](const Node<T>& res) {
                          if (!pa->requires_grad) return;
                          auto& g = pa->ensure_grad();
                          const std::size_t h2 = 2 * h, w2 = 2 * w;
                          for (std::size_t k = 0; k < c; ++k) {
                            for (std::size_t y = 0; y < h2; ++y) {
                              for (std::size_t xx = 0; xx < w2; ++xx) {
                                g[(k * h + y / 2) * w + xx / 2] += res.grad[(k * h2 + y) * w2 + xx];
                              }
                            }
                          }
                        });
}

template <typename T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Shape shape = parts.front().shape();
  if (shape.empty()) throw std::invalid_argument("concat: rank-0 input");
  std::size_t total = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    Shape rest(p.shape().begin() + 1, p.shape().end());
    if (p.rank() != shape.size() || rest != Shape(shape.begin() + 1, shape.end())) {
      throw std::invalid_argument("concat: incompatible shape " + shape_str(p.shape()));
    }
    offsets.push_back(total);
    total += p.numel();
  }
  shape[0] = 0;
  for (const auto& p : parts) shape[0] += p.dim(0);
  std::vector<T> out;
  out.reserve(total);
  std::vector<typename BasicTensor<T>::NodePtr> nodes;
  for (const auto& p : parts) {
    out.insert(out.end(), p.values().begin(), p.values().end());
    nodes.push_back(p.node());
  }
  return make_result<T>("concat", shape, std::move(out), parts,
                        [nodes, offsets](const Node<T>& res) {
                          for (std::size_t i = 0; i < nodes.size(); ++i) {
                            if (!nodes[i]->requires_grad) continue;
                            auto& g = nodes[i]->ensure_grad();
                            for (std::size_t j = 0; j < g.size(); ++j) g[j] += res.grad[offsets[i] + j];
                          }
                        });
}

#define NEURMAP_INSTANTIATE_OPS(T)                                                         \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);               \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);               \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);               \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                                 \
  template BasicTensor<T> add_scalar(const BasicTensor<T>&, T);                            \
  template BasicTensor<T> neg(const BasicTensor<T>&);                                      \
  template BasicTensor<T> abs(const BasicTensor<T>&);                                      \
  template BasicTensor<T> square(const BasicTensor<T>&);                                   \
  template BasicTensor<T> tanh(const BasicTensor<T>&);                                     \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                  \
  template BasicTensor<T> leaky_relu(const BasicTensor<T>&, T);                            \
  template BasicTensor<T> clamp(const BasicTensor<T>&, T, T);                              \
  template BasicTensor<T> mean(const BasicTensor<T>&);                                     \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                      \
  template BasicTensor<T> slice(const BasicTensor<T>&, std::size_t, std::size_t, std::size_t); \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                           \
  template BasicTensor<T> tile_channels(const BasicTensor<T>&, std::size_t, std::size_t);  \
  template BasicTensor<T> spatial_mean(const BasicTensor<T>&);                             \
  template BasicTensor<T> upsample2x(const BasicTensor<T>&);                               \
  template BasicTensor<T> concat(const std::vector<BasicTensor<T>>&);

NEURMAP_INSTANTIATE_OPS(float)
NEURMAP_INSTANTIATE_OPS(double)

}  // namespace neurmap::diff
