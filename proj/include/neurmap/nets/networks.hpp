#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neurmap/blur/motion_map.hpp"
#include "neurmap/diff/adam.hpp"

namespace neurmap::nets {

struct ArchConfig {
  int levels = 3;          // encoder-decoder depth of D and M
  int base_channels = 16;  // level l uses base*(l+1) channels
  double alpha = 40.0;     // motion bound of M
  int patch_levels = 3;    // stride-2 layers of the discriminator
  float leaky_slope = 0.2f;

  void validate() const;
};

enum class Role { Deblur, Motion, Discriminator };
const char* role_name(Role r);
Role role_from_name(const std::string& name);

struct InitRecord {
  std::string scheme = "xavier_uniform";
  std::uint64_t seed = 0;
};

template <typename T>
struct NetParams {
  Role role = Role::Deblur;
  ArchConfig arch;
  InitRecord init;
  diff::ParameterSet<T> params;

  /// Same network with requires_grad off on every tensor.
  NetParams frozen() const;
  /// Value-converted copy, e.g. float -> double for gradient checks.
  template <typename U>
  NetParams<U> cast() const;
};

/// Xavier-uniform conv weights with bound sqrt(6/(fan_in+fan_out)), zero
/// biases. The output heads of D and M start at exactly zero so that D is
/// the identity and M the zero field.
NetParams<float> init_params(const ArchConfig& arch, Role role, std::uint64_t seed);

/// clamp(blurry + residual, 0, 1) for a [3,h,w] input with h, w divisible by 2^levels.
template <typename T>
diff::BasicTensor<T> deblur_forward(const NetParams<T>& net, const diff::BasicTensor<T>& blurry);

/// alpha * tanh(head), [2,h,w].
template <typename T>
blur::MotionMap<T> motion_forward(const NetParams<T>& net, const diff::BasicTensor<T>& image);

/// PatchGAN score map [1, h/2^L, w/2^L] of raw (unsquashed) scores.
template <typename T>
diff::BasicTensor<T> discriminator_forward(const NetParams<T>& net, const diff::BasicTensor<T>& image);

template <typename T>
std::vector<diff::BasicTensor<T>> discriminator_forward(const NetParams<T>& net,
                                                        const std::vector<diff::BasicTensor<T>>& batch);

/// Receptive field of the discriminator stack: 2^(patch_levels+2) - 1.
int receptive_field(const ArchConfig& arch);

/// Spatial resolution of the deepest encoder level.
std::pair<std::size_t, std::size_t> bottleneck_size(const ArchConfig& arch, std::size_t h, std::size_t w);

}  // namespace neurmap::nets
