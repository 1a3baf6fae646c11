#include "neurmap/blur/reblur.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <type_traits>

namespace neurmap::blur {

using diff::BasicTensor;
using diff::Shape;
using diff::detail::Node;

namespace {

// float paths accumulate in double, double paths in long double.
template <typename T>
using Acc = std::conditional_t<std::is_same_v<T, float>, double, long double>;

template <typename A>
struct Tap {
  std::size_t x0, x1, y0, y1;
  A fx, fy;
  bool inside_x, inside_y;  // false where the coordinate was clamped
};

template <typename A>
Tap<A> locate(A sx, A sy, std::size_t h, std::size_t w) {
  const A xmax = static_cast<A>(w - 1), ymax = static_cast<A>(h - 1);
  Tap<A> t;
  t.inside_x = sx >= 0 && sx <= xmax;
  t.inside_y = sy >= 0 && sy <= ymax;
  const A cx = sx < 0 ? A(0) : (sx > xmax ? xmax : sx);
  const A cy = sy < 0 ? A(0) : (sy > ymax ? ymax : sy);
  t.x0 = static_cast<std::size_t>(std::floor(cx));
  t.y0 = static_cast<std::size_t>(std::floor(cy));
  t.x1 = std::min(t.x0 + 1, w - 1);
  t.y1 = std::min(t.y0 + 1, h - 1);
  t.fx = cx - static_cast<A>(t.x0);
  t.fy = cy - static_cast<A>(t.y0);
  return t;
}

template <typename A, typename T>
A sample(const T* plane, std::size_t w, const Tap<A>& t) {
  const A i00 = plane[t.y0 * w + t.x0], i01 = plane[t.y0 * w + t.x1];
  const A i10 = plane[t.y1 * w + t.x0], i11 = plane[t.y1 * w + t.x1];
  return (1 - t.fy) * ((1 - t.fx) * i00 + t.fx * i01) + t.fy * ((1 - t.fx) * i10 + t.fx * i11);
}

// Adds `g` times the bilinear weights of tap `t` into `plane`, and returns
// the partial derivatives of the sample w.r.t. the sample coordinates.
template <typename A, typename T>
std::pair<A, A> scatter_and_slope(const T* plane, A* dplane, std::size_t w, const Tap<A>& t, A g) {
  if (dplane) {
    dplane[t.y0 * w + t.x0] += g * (1 - t.fy) * (1 - t.fx);
    dplane[t.y0 * w + t.x1] += g * (1 - t.fy) * t.fx;
    dplane[t.y1 * w + t.x0] += g * t.fy * (1 - t.fx);
    dplane[t.y1 * w + t.x1] += g * t.fy * t.fx;
  }
  const A i00 = plane[t.y0 * w + t.x0], i01 = plane[t.y0 * w + t.x1];
  const A i10 = plane[t.y1 * w + t.x0], i11 = plane[t.y1 * w + t.x1];
  const A dsx = t.inside_x ? (1 - t.fy) * (i01 - i00) + t.fy * (i11 - i10) : A(0);
  const A dsy = t.inside_y ? (1 - t.fx) * (i10 - i00) + t.fx * (i11 - i01) : A(0);
  return {dsx, dsy};
}

template <typename T>
void check_image_motion(const char* op, const BasicTensor<T>& image,
                        const BasicTensor<T>& motion) {
  if (image.rank() != 3) {
    throw std::invalid_argument(std::string(op) + ": image must be [c,h,w], got " +
                                diff::shape_str(image.shape()));
  }
  if (motion.rank() != 3 || motion.dim(0) != 2 || motion.dim(1) != image.dim(1) ||
      motion.dim(2) != image.dim(2)) {
    throw std::invalid_argument(std::string(op) + ": motion " + diff::shape_str(motion.shape()) +
                                " does not match image resolution " +
                                diff::shape_str(image.shape()));
  }
}

// Shared kernel for warp (one step, factor 1) and reblur (n steps).
template <typename T>
BasicTensor<T> average_warps(const char* op, const BasicTensor<T>& image,
                             const BasicTensor<T>& motion, std::vector<double> factors) {
  using A = Acc<T>;
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2), HW = H * W;
  const A count = static_cast<A>(factors.size());
  const T* img = image.values().data();
  const T* mot = motion.values().data();

  std::vector<A> acc(C * HW, A(0));
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const std::size_t p = y * W + x;
      const A u = mot[p], v = mot[HW + p];
      for (double f : factors) {
        const auto tap = locate<A>(static_cast<A>(x) + static_cast<A>(f) * u,
                                   static_cast<A>(y) + static_cast<A>(f) * v, H, W);
        for (std::size_t c = 0; c < C; ++c) acc[c * HW + p] += sample<A>(img + c * HW, W, tap);
      }
    }
  }
  std::vector<T> out(C * HW);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(acc[i] / count);

  auto pi = image.node(), pm = motion.node();
  return diff::detail::make_result<T>(
      op, image.shape(), std::move(out), {image, motion},
      [pi, pm, factors, C, H, W](const Node<T>& res) {
        const std::size_t HW = H * W;
        const A inv_n = A(1) / static_cast<A>(factors.size());
        std::vector<A> dimg(pi->requires_grad ? C * HW : 0, A(0));
        std::vector<A> dmot(pm->requires_grad ? 2 * HW : 0, A(0));
        const T* img = pi->value.data();
        const T* mot = pm->value.data();
        for (std::size_t y = 0; y < H; ++y) {
          for (std::size_t x = 0; x < W; ++x) {
            const std::size_t p = y * W + x;
            const A u = mot[p], v = mot[HW + p];
            for (double f : factors) {
              const auto tap = locate<A>(static_cast<A>(x) + static_cast<A>(f) * u,
                                         static_cast<A>(y) + static_cast<A>(f) * v, H, W);
              A du = 0, dv = 0;
              for (std::size_t c = 0; c < C; ++c) {
                const A g = static_cast<A>(res.grad[c * HW + p]) * inv_n;
                auto [sx, sy] = scatter_and_slope<A>(img + c * HW,
                                                     dimg.empty() ? nullptr : dimg.data() + c * HW,
                                                     W, tap, g);
                du += g * sx;
                dv += g * sy;
              }
              if (!dmot.empty()) {
                dmot[p] += static_cast<A>(f) * du;
                dmot[HW + p] += static_cast<A>(f) * dv;
              }
            }
          }
        }
        if (!dimg.empty()) {
          auto& g = pi->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += static_cast<T>(dimg[i]);
        }
        if (!dmot.empty()) {
          auto& g = pm->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += static_cast<T>(dmot[i]);
        }
      });
}

std::vector<double> step_factors(int n_steps) {
  std::vector<double> f(static_cast<std::size_t>(n_steps));
  for (int n = 0; n < n_steps; ++n) f[n] = static_cast<double>(n) / (n_steps - 1) - 0.5;
  return f;
}

}  // namespace

template <typename T>
BasicTensor<T> warp(const BasicTensor<T>& image, const BasicTensor<T>& offsets) {
  check_image_motion("warp", image, offsets);
  return average_warps("warp", image, offsets, {1.0});
}

template <typename T>
BasicTensor<T> reblur(const BasicTensor<T>& sharp, const MotionMap<T>& motion, int n_steps) {
  if (n_steps < 2) throw std::invalid_argument("reblur: n_steps must be >= 2");
  check_image_motion("reblur", sharp, motion.field);
  return average_warps("reblur", sharp, motion.field, step_factors(n_steps));
}

LineKernel line_kernel(std::pair<double, double> m, int n_steps) {
  if (n_steps < 2) throw std::invalid_argument("line_kernel: n_steps must be >= 2");
  const auto factors = step_factors(n_steps);
  LineKernel k;
  k.radius = static_cast<int>(std::ceil(std::max(std::abs(m.first), std::abs(m.second)) / 2)) + 1;
  const int side = 2 * k.radius + 1;
  k.taps.assign(static_cast<std::size_t>(side * side), 0.0);
  auto add = [&](int dy, int dx, double wgt) {
    k.taps[static_cast<std::size_t>((dy + k.radius) * side + dx + k.radius)] += wgt;
  };
  for (double f : factors) {
    const double ox = f * m.first, oy = f * m.second;
    const int x0 = static_cast<int>(std::floor(ox)), y0 = static_cast<int>(std::floor(oy));
    const double fx = ox - x0, fy = oy - y0;
    add(y0, x0, (1 - fy) * (1 - fx));
    add(y0, x0 + 1, (1 - fy) * fx);
    add(y0 + 1, x0, fy * (1 - fx));
    add(y0 + 1, x0 + 1, fy * fx);
  }
  double total = 0;
  for (double t : k.taps) total += t;
  for (double& t : k.taps) t /= total;
  return k;
}

template <typename T>
BasicTensor<T> line_kernel_oracle(const BasicTensor<T>& sharp, std::pair<double, double> m,
                                  int n_steps) {
  if (sharp.rank() != 3) throw std::invalid_argument("line_kernel_oracle: expected [c,h,w]");
  const auto k = line_kernel(m, n_steps);
  const long C = static_cast<long>(sharp.dim(0)), H = static_cast<long>(sharp.dim(1)),
             W = static_cast<long>(sharp.dim(2));
  const auto s = sharp.values();
  std::vector<T> out(s.size());
  for (long c = 0; c < C; ++c) {
    for (long y = 0; y < H; ++y) {
      for (long x = 0; x < W; ++x) {
        long double acc = 0;
        for (int dy = -k.radius; dy <= k.radius; ++dy) {
          for (int dx = -k.radius; dx <= k.radius; ++dx) {
            const double wgt = k.at(dy, dx);
            if (wgt == 0) continue;
            const long yy = std::clamp<long>(y + dy, 0, H - 1);
            const long xx = std::clamp<long>(x + dx, 0, W - 1);
            acc += wgt * static_cast<long double>(s[(c * H + yy) * W + xx]);
          }
        }
        out[(c * H + y) * W + x] = static_cast<T>(acc);
      }
    }
  }
  return BasicTensor<T>(sharp.shape(), std::move(out));
}

template BasicTensor<float> warp(const BasicTensor<float>&, const BasicTensor<float>&);
template BasicTensor<double> warp(const BasicTensor<double>&, const BasicTensor<double>&);
template BasicTensor<float> reblur(const BasicTensor<float>&, const MotionMap<float>&, int);
template BasicTensor<double> reblur(const BasicTensor<double>&, const MotionMap<double>&, int);
template BasicTensor<float> line_kernel_oracle(const BasicTensor<float>&,
                                               std::pair<double, double>, int);
template BasicTensor<double> line_kernel_oracle(const BasicTensor<double>&,
                                                std::pair<double, double>, int);

}  // namespace neurmap::blur
