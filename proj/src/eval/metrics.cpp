#include "neurmap/eval/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace neurmap::eval {

namespace {

void require_images(const char* op, const diff::Tensor& a, const diff::Tensor& b) {
  if (a.rank() != 3 || a.dim(0) != 3) {
    throw std::invalid_argument(std::string(op) + ": expected [3,h,w], got " + diff::shape_str(a.shape()));
  }
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + diff::shape_str(a.shape()) + " vs " +
                                diff::shape_str(b.shape()));
  }
}

void require_fields(const char* op, const diff::Tensor& a, const diff::Tensor& b) {
  if (a.rank() != 3 || a.dim(0) != 2) {
    throw std::invalid_argument(std::string(op) + ": expected [2,h,w], got " + diff::shape_str(a.shape()));
  }
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": resolution mismatch " + diff::shape_str(a.shape()) +
                                " vs " + diff::shape_str(b.shape()));
  }
}

// Valid-mode separable filter of an h*w image.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                 const std::vector<double>& taps) {
  const std::size_t k = taps.size(), oh = h - k + 1, ow = w - k + 1;
  std::vector<double> rows(h * ow, 0.0), out(oh * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0;
      for (std::size_t i = 0; i < k; ++i) s += taps[i] * img[y * w + x + i];
      rows[y * ow + x] = s;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0;
      for (std::size_t i = 0; i < k; ++i) s += taps[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace

double psnr(const diff::Tensor& a, const diff::Tensor& b) {
  require_images("psnr", a, b);
  const auto va = a.values(), vb = b.values();
  double se = 0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = double(va[i]) - double(vb[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(va.size());
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

std::vector<double> luma(const diff::Tensor& image) {
  const std::size_t n = image.dim(1) * image.dim(2);
  const auto v = image.values();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = 0.299 * v[i] + 0.587 * v[n + i] + 0.114 * v[2 * n + i];
  return y;
}

std::vector<double> gaussian_taps(int window, double sigma) {
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("ssim: window must be odd and positive");
  if (!(sigma > 0)) throw std::invalid_argument("ssim: sigma must be > 0");
  std::vector<double> t(static_cast<std::size_t>(window));
  const int r = window / 2;
  double s = 0;
  for (int i = -r; i <= r; ++i) s += t[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2 * sigma * sigma));
  for (auto& x : t) x /= s;
  return t;
}

double ssim(const diff::Tensor& a, const diff::Tensor& b, const SsimOptions& opt) {
  require_images("ssim", a, b);
  const std::size_t h = a.dim(1), w = a.dim(2), k = static_cast<std::size_t>(opt.window);
  if (h < k || w < k) {
    throw std::invalid_argument("ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                                " is smaller than the " + std::to_string(k) + "-tap window");
  }
  const auto taps = gaussian_taps(opt.window, opt.sigma);
  const auto x = luma(a), y = luma(b);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, h, w, taps), my = filter_valid(y, h, w, taps);
  const auto sxx = filter_valid(xx, h, w, taps), syy = filter_valid(yy, h, w, taps),
             sxy = filter_valid(xy, h, w, taps);
  const double c1 = opt.k1 * opt.k1, c2 = opt.k2 * opt.k2;
  double total = 0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
    total += ((2 * (mx[i] * my[i]) + c1) * (2 * cxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

double motion_mse(const diff::Tensor& pred, const diff::Tensor& gt) {
  require_fields("motion_mse", pred, gt);
  const auto p = pred.values(), g = gt.values();
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = double(p[i]) - double(g[i]);
    s += d * d;
  }
  return s / static_cast<double>(p.size());
}

double motion_mse_sign_invariant(const diff::Tensor& pred, const diff::Tensor& gt) {
  require_fields("motion_mse_sign_invariant", pred, gt);
  const auto p = pred.values(), g = gt.values();
  const std::size_t n = p.size() / 2;
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double du = double(p[i]) - g[i], dv = double(p[n + i]) - g[n + i];
    const double su = double(p[i]) + g[i], sv = double(p[n + i]) + g[n + i];
    s += std::min(du * du + dv * dv, su * su + sv * sv);
  }
  return s / static_cast<double>(2 * n);
}

double mean_magnitude(const diff::Tensor& field) {
  if (field.rank() != 3 || field.dim(0) != 2)
    throw std::invalid_argument("mean_magnitude: expected [2,h,w], got " + diff::shape_str(field.shape()));
  const auto v = field.values();
  const std::size_t n = v.size() / 2;
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += std::hypot(double(v[i]), double(v[n + i]));
  return s / static_cast<double>(n);
}

}  // namespace neurmap::eval
