#pragma once

#include <cstddef>

#include "neurmap/diff/tensor.hpp"

namespace neurmap::diff {

// Binary ops require equal shapes; a rank-0 operand broadcasts.
template <typename T> BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T> BasicTensor<T> scale(const BasicTensor<T>& a, T factor);
template <typename T> BasicTensor<T> add_scalar(const BasicTensor<T>& a, T offset);
template <typename T> BasicTensor<T> neg(const BasicTensor<T>& a);
template <typename T> BasicTensor<T> abs(const BasicTensor<T>& a);
template <typename T> BasicTensor<T> square(const BasicTensor<T>& a);
template <typename T> BasicTensor<T> tanh(const BasicTensor<T>& a);
template <typename T> BasicTensor<T> sigmoid(const BasicTensor<T>& a);
template <typename T> BasicTensor<T> leaky_relu(const BasicTensor<T>& a, T slope);
/// Gradient passes where lo < a < hi and is zero elsewhere.
template <typename T> BasicTensor<T> clamp(const BasicTensor<T>& a, T lo, T hi);

/// Arithmetic mean over all elements, rank-0 result.
template <typename T> BasicTensor<T> mean(const BasicTensor<T>& a);
template <typename T> BasicTensor<T> sum(const BasicTensor<T>& a);

/// Half-open range [begin, end) along one axis.
template <typename T>
BasicTensor<T> slice(const BasicTensor<T>& a, std::size_t axis, std::size_t begin,
                     std::size_t end);

template <typename T> BasicTensor<T> reshape(const BasicTensor<T>& a, Shape shape);

/// Repeats a [c] vector over an h x w grid, giving [c,h,w].
template <typename T>
BasicTensor<T> tile_channels(const BasicTensor<T>& v, std::size_t h, std::size_t w);

/// Mean over the spatial axes of a [c,h,w] tensor, giving [c].
template <typename T> BasicTensor<T> spatial_mean(const BasicTensor<T>& a);

/// Zero-padded 2-D cross-correlation.
///   input  [c_in, h, w]
///   weight [c_out, c_in, k, k], k odd
///   bias   [c_out] or undefined
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, std::size_t stride, std::size_t pad);

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      std::size_t stride, std::size_t pad) {
  return conv2d(input, weight, BasicTensor<T>{}, stride, pad);
}

/// Nearest-neighbour 2x upsampling of a [c,h,w] tensor.
template <typename T> BasicTensor<T> upsample2x(const BasicTensor<T>& a);

/// Concatenation along axis 0 (channels for [c,h,w]).
template <typename T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& parts);

}  // namespace neurmap::diff
