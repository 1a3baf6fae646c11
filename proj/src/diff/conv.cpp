#include <Eigen/Core>
#include <memory>
#include <stdexcept>

#include "neurmap/diff/ops.hpp"

namespace neurmap::diff {

using detail::make_result;
using detail::Node;

namespace {

struct ConvGeometry {
  std::size_t c_in, h, w, c_out, k, stride, pad, ho, wo;
  std::size_t rows() const { return c_in * k * k; }
  std::size_t cols() const { return ho * wo; }
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const std::size_t P = g.cols();
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = col + ((c * g.k + ky) * g.k + kx) * P;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          T* dst = row + oy * g.wo;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(dst, dst + g.wo, T(0));
            continue;
          }
          const T* src = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* dx) {
  const std::size_t P = g.cols();
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((c * g.k + ky) * g.k + kx) * P;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* dst = dx + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          const T* src = row + oy * g.wo;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, std::size_t stride, std::size_t pad) {
  if (input.rank() != 3) {
    throw std::invalid_argument("conv2d: input must be [c,h,w], got " + shape_str(input.shape()));
  }
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw std::invalid_argument("conv2d: weight must be [c_out,c_in,k,k], got " +
                                shape_str(weight.shape()));
  }
  if (weight.dim(1) != input.dim(0)) {
    throw std::invalid_argument("conv2d: input has " + std::to_string(input.dim(0)) +
                                " channels but weight " + shape_str(weight.shape()) + " expects " +
                                std::to_string(weight.dim(1)));
  }
  if (weight.dim(2) % 2 == 0) throw std::invalid_argument("conv2d: kernel size must be odd");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), weight.dim(0), weight.dim(2),
                 stride,       pad,          0,            0};
  if (g.h + 2 * pad < g.k || g.w + 2 * pad < g.k) {
    throw std::invalid_argument("conv2d: input " + shape_str(input.shape()) +
                                " smaller than kernel");
  }
  g.ho = (g.h + 2 * pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * pad - g.k) / stride + 1;
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != g.c_out)) {
    throw std::invalid_argument("conv2d: bias shape " + shape_str(bias.shape()) +
                                " does not match " + std::to_string(g.c_out) + " outputs");
  }

  const std::size_t K = g.rows(), P = g.cols();
  auto col = std::make_shared<std::vector<T>>(K * P);
  im2col(input.values().data(), g, col->data());

  std::vector<T> out(g.c_out * P);
  Eigen::Map<const RowMat<T>> W(weight.values().data(), g.c_out, K);
  Eigen::Map<const RowMat<T>> C(col->data(), K, P);
  Eigen::Map<RowMat<T>> O(out.data(), g.c_out, P);
  O.noalias() = W * C;
  if (has_bias) {
    for (std::size_t o = 0; o < g.c_out; ++o) O.row(o).array() += bias.values()[o];
  }

  std::vector<BasicTensor<T>> parents{input, weight};
  if (has_bias) parents.push_back(bias);
  auto px = input.node(), pw = weight.node();
  auto pb = has_bias ? bias.node() : nullptr;
  return make_result<T>(
      "conv2d", Shape{g.c_out, g.ho, g.wo}, std::move(out), std::move(parents),
      [px, pw, pb, col, g](const Node<T>& res) {
        const std::size_t K = g.rows(), P = g.cols();
        Eigen::Map<const RowMat<T>> dO(res.grad.data(), g.c_out, P);
        if (pw->requires_grad) {
          Eigen::Map<const RowMat<T>> C(col->data(), K, P);
          Eigen::Map<RowMat<T>> dW(pw->ensure_grad().data(), g.c_out, K);
          dW.noalias() += dO * C.transpose();
        }
        if (pb && pb->requires_grad) {
          auto& db = pb->ensure_grad();
          // plain loop: Eigen's reduction peels by address alignment, which
          // would make the summation order depend on the allocator
          for (std::size_t o = 0; o < g.c_out; ++o) {
            T s = 0;
            for (std::size_t p = 0; p < P; ++p) s += res.grad[o * P + p];
            db[o] += s;
          }
        }
        if (px->requires_grad) {
          Eigen::Map<const RowMat<T>> W(pw->value.data(), g.c_out, K);
          std::vector<T> dcol(K * P);
          Eigen::Map<RowMat<T>> dC(dcol.data(), K, P);
          dC.noalias() = W.transpose() * dO;
          col2im_add(dcol.data(), g, px->ensure_grad().data());
        }
      });
}

template BasicTensor<float> conv2d(const BasicTensor<float>&, const BasicTensor<float>&,
                                   const BasicTensor<float>&, std::size_t, std::size_t);
template BasicTensor<double> conv2d(const BasicTensor<double>&, const BasicTensor<double>&,
                                    const BasicTensor<double>&, std::size_t, std::size_t);

}  // namespace neurmap::diff
