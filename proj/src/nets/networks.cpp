#include "neurmap/nets/networks.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "neurmap/blur/synth.hpp"
#include "neurmap/diff/ops.hpp"

namespace neurmap::nets {

using diff::BasicTensor;
using diff::Shape;

void ArchConfig::validate() const {
  if (levels < 1) throw std::invalid_argument("arch: levels must be >= 1");
  if (base_channels < 4) throw std::invalid_argument("arch: base_channels must be >= 4");
  if (!(alpha > 0)) throw std::invalid_argument("arch: alpha must be > 0");
  if (patch_levels < 1) throw std::invalid_argument("arch: patch_levels must be >= 1");
}

const char* role_name(Role r) {
  switch (r) {
    case Role::Deblur: return "D";
    case Role::Motion: return "M";
    case Role::Discriminator: return "N";
  }
  return "?";
}

Role role_from_name(const std::string& name) {
  if (name == "D") return Role::Deblur;
  if (name == "M") return Role::Motion;
  if (name == "N") return Role::Discriminator;
  throw std::invalid_argument("unknown network role " + name);
}

int receptive_field(const ArchConfig& arch) { return (1 << (arch.patch_levels + 2)) - 1; }

std::pair<std::size_t, std::size_t> bottleneck_size(const ArchConfig& arch, std::size_t h, std::size_t w) {
  return {h >> arch.levels, w >> arch.levels};
}

namespace {

int level_channels(const ArchConfig& a, int l) { return a.base_channels * (l + 1); }
int disc_channels(const ArchConfig& a, int l) { return a.base_channels << l; }

class Initializer {
 public:
  Initializer(diff::ParameterSet<float>& p, std::uint64_t seed) : p_(p), rng_(seed) {}

  void conv(const std::string& name, int c_in, int c_out, bool zero = false) {
    const std::size_t k = 3;
    const double fan_in = c_in * 9.0, fan_out = c_out * 9.0;
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<float> w(static_cast<std::size_t>(c_out * c_in) * k * k, 0.f);
    if (!zero) {
      for (auto& x : w) x = static_cast<float>(bound * d(rng_));
    }
    BasicTensor<float> wt(Shape{std::size_t(c_out), std::size_t(c_in), k, k}, std::move(w));
    BasicTensor<float> bt(Shape{std::size_t(c_out)});
    wt.set_requires_grad(true);
    bt.set_requires_grad(true);
    p_.add(name + ".w", std::move(wt));
    p_.add(name + ".b", std::move(bt));
  }

 private:
  diff::ParameterSet<float>& p_;
  std::mt19937_64 rng_;
};

template <typename T>
BasicTensor<T> conv(const NetParams<T>& net, const std::string& name, const BasicTensor<T>& x,
                    std::size_t stride = 1) {
  return diff::conv2d(x, net.params.get(name + ".w"), net.params.get(name + ".b"), stride, 1);
}

template <typename T>
BasicTensor<T> act(const NetParams<T>& net, const BasicTensor<T>& x) {
  return diff::leaky_relu(x, static_cast<T>(net.arch.leaky_slope));
}

void check_image(const char* op, const ArchConfig& arch, const Shape& s) {
  if (s.size() != 3 || s[0] != 3) {
    throw std::invalid_argument(std::string(op) + ": expected a [3,h,w] image, got " + diff::shape_str(s));
  }
  const std::size_t m = std::size_t{1} << arch.levels;
  if (s[1] % m || s[2] % m) {
    const std::size_t ph = (s[1] + m - 1) / m * m, pw = (s[2] + m - 1) / m * m;
    throw std::invalid_argument(std::string(op) + ": " + std::to_string(s[1]) + "x" + std::to_string(s[2]) +
                                " is not divisible by " + std::to_string(m) + "; pad to " +
                                std::to_string(ph) + "x" + std::to_string(pw));
  }
}

// Shared trunk of D and M: stride-2 encoder, nearest-upsampling decoder with
// additive skips, one full-resolution refinement conv, then the linear head.
template <typename T>
BasicTensor<T> encoder_decoder(const NetParams<T>& net, const BasicTensor<T>& x) {
  const int L = net.arch.levels;
  std::vector<BasicTensor<T>> skips;
  auto h = act(net, conv(net, "stem", x));
  for (int l = 1; l <= L; ++l) {
    skips.push_back(h);
    h = act(net, conv(net, "down" + std::to_string(l), h, 2));
  }
  for (int l = L; l >= 1; --l) {
    h = act(net, conv(net, "up" + std::to_string(l), diff::upsample2x(h)));
    h = diff::add(h, skips[static_cast<std::size_t>(l - 1)]);
  }
  h = act(net, conv(net, "refine", h));
  return conv(net, "head", h);
}

}  // namespace

NetParams<float> init_params(const ArchConfig& arch, Role role, std::uint64_t seed) {
  arch.validate();
  NetParams<float> net;
  net.role = role;
  net.arch = arch;
  net.init.seed = seed;
  Initializer ini(net.params, blur::mix_seed(seed ^ (0x1000ULL + static_cast<std::uint64_t>(role))));
  if (role == Role::Discriminator) {
    int c = 3;
    for (int l = 0; l < arch.patch_levels; ++l) {
      ini.conv("patch" + std::to_string(l + 1), c, disc_channels(arch, l));
      c = disc_channels(arch, l);
    }
    ini.conv("score", c, 1);
    return net;
  }
  const int out_ch = role == Role::Deblur ? 3 : 2;
  ini.conv("stem", 3, level_channels(arch, 0));
  for (int l = 1; l <= arch.levels; ++l)
    ini.conv("down" + std::to_string(l), level_channels(arch, l - 1), level_channels(arch, l));
  for (int l = arch.levels; l >= 1; --l)
    ini.conv("up" + std::to_string(l), level_channels(arch, l), level_channels(arch, l - 1));
  ini.conv("refine", level_channels(arch, 0), level_channels(arch, 0));
  ini.conv("head", level_channels(arch, 0), out_ch, /*zero=*/true);
  return net;
}

template <typename T>
NetParams<T> NetParams<T>::frozen() const {
  NetParams out{role, arch, init, params.frozen()};
  return out;
}

template <typename T>
template <typename U>
NetParams<U> NetParams<T>::cast() const {
  NetParams<U> out;
  out.role = role;
  out.arch = arch;
  out.init = init;
  for (const auto& it : params.items()) {
    const auto v = it.value.values();
    BasicTensor<U> t(it.value.shape(), std::vector<U>(v.begin(), v.end()));
    t.set_requires_grad(it.value.requires_grad());
    out.params.add(it.name, std::move(t));
  }
  return out;
}

template <typename T>
BasicTensor<T> deblur_forward(const NetParams<T>& net, const BasicTensor<T>& blurry) {
  if (net.role != Role::Deblur) throw std::invalid_argument("deblur_forward: parameters are not a deblurrer");
  check_image("deblur_forward", net.arch, blurry.shape());
  return diff::clamp(diff::add(blurry, encoder_decoder(net, blurry)), T(0), T(1));
}

template <typename T>
blur::MotionMap<T> motion_forward(const NetParams<T>& net, const BasicTensor<T>& image) {
  if (net.role != Role::Motion) throw std::invalid_argument("motion_forward: parameters are not a motion net");
  check_image("motion_forward", net.arch, image.shape());
  auto field = diff::scale(diff::tanh(encoder_decoder(net, image)), static_cast<T>(net.arch.alpha));
  return blur::MotionMap<T>(std::move(field), net.arch.alpha);
}

template <typename T>
BasicTensor<T> discriminator_forward(const NetParams<T>& net, const BasicTensor<T>& image) {
  if (net.role != Role::Discriminator)
    throw std::invalid_argument("discriminator_forward: parameters are not a discriminator");
  const auto& s = image.shape();
  if (s.size() != 3 || s[0] != 3)
    throw std::invalid_argument("discriminator_forward: expected a [3,h,w] image, got " + diff::shape_str(s));
  const auto rf = static_cast<std::size_t>(receptive_field(net.arch));
  if (s[1] < rf || s[2] < rf) {
    throw std::invalid_argument("discriminator_forward: input " + std::to_string(s[1]) + "x" +
                                std::to_string(s[2]) + " is smaller than the receptive field " +
                                std::to_string(rf));
  }
  auto h = image;
  for (int l = 1; l <= net.arch.patch_levels; ++l) h = act(net, conv(net, "patch" + std::to_string(l), h, 2));
  return conv(net, "score", h);
}

template <typename T>
std::vector<BasicTensor<T>> discriminator_forward(const NetParams<T>& net,
                                                  const std::vector<BasicTensor<T>>& batch) {
  std::vector<BasicTensor<T>> out;
  out.reserve(batch.size());
  for (const auto& img : batch) out.push_back(discriminator_forward(net, img));
  return out;
}

#define NEURMAP_INSTANTIATE_NETS(T)                                                              \
  template struct NetParams<T>;                                                                  \
  template BasicTensor<T> deblur_forward(const NetParams<T>&, const BasicTensor<T>&);            \
  template blur::MotionMap<T> motion_forward(const NetParams<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> discriminator_forward(const NetParams<T>&, const BasicTensor<T>&);     \
  template std::vector<BasicTensor<T>> discriminator_forward(const NetParams<T>&,                \
                                                             const std::vector<BasicTensor<T>>&);

NEURMAP_INSTANTIATE_NETS(float)
NEURMAP_INSTANTIATE_NETS(double)
template NetParams<double> NetParams<float>::cast<double>() const;
template NetParams<float> NetParams<double>::cast<float>() const;
template NetParams<float> NetParams<float>::cast<float>() const;

}  // namespace neurmap::nets
