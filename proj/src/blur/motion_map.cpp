#include "neurmap/blur/motion_map.hpp"

#include <cmath>
#include <stdexcept>

#include "neurmap/diff/ops.hpp"

namespace neurmap::blur {

template <typename T>
MotionMap<T>::MotionMap(diff::BasicTensor<T> f, double bound) : field(std::move(f)), alpha(bound) {
  if (!field.defined() || field.rank() != 3 || field.dim(0) != 2) {
    throw std::invalid_argument("motion map: expected a [2,h,w] field");
  }
}

template <typename T>
MotionMap<T> MotionMap<T>::zeros(std::size_t h, std::size_t w, double bound) {
  return MotionMap(diff::BasicTensor<T>(diff::Shape{2, h, w}), bound);
}

template <typename T>
MotionMap<T> MotionMap<T>::uniform(std::size_t h, std::size_t w, T u, T v, double bound) {
  std::vector<T> vals(2 * h * w);
  std::fill(vals.begin(), vals.begin() + h * w, u);
  std::fill(vals.begin() + h * w, vals.end(), v);
  return MotionMap(diff::BasicTensor<T>(diff::Shape{2, h, w}, std::move(vals)), bound);
}

template <typename T>
double MotionMap<T>::max_abs_component() const {
  double m = 0;
  for (T x : field.values()) m = std::max(m, static_cast<double>(std::abs(x)));
  return m;
}

template <typename T>
MotionMap<T> relative_motion(const MotionMap<T>& m_blurry, const MotionMap<T>& m_deblurred) {
  if (m_blurry.field.shape() != m_deblurred.field.shape()) {
    throw std::invalid_argument("relative_motion: resolution mismatch " +
                                diff::shape_str(m_blurry.field.shape()) + " vs " +
                                diff::shape_str(m_deblurred.field.shape()));
  }
  return MotionMap<T>(diff::sub(m_blurry.field, m_deblurred.field),
                      m_blurry.alpha + m_deblurred.alpha);
}

template struct MotionMap<float>;
template struct MotionMap<double>;
template MotionMap<float> relative_motion(const MotionMap<float>&, const MotionMap<float>&);
template MotionMap<double> relative_motion(const MotionMap<double>&, const MotionMap<double>&);

}  // namespace neurmap::blur
