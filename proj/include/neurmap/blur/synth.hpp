#pragma once

#include <cstdint>

#include "neurmap/blur/motion_map.hpp"

namespace neurmap::blur {

/// Parameters of the random spatially-variant motion synthesizer.
///
/// A field is a convex blend of one global (camera) vector and
/// `n_segments` regional vectors with Gaussian support, low-pass filtered
/// and clipped to [-alpha, alpha]. Every vector is drawn with a direction in
/// the half-plane u >= 0: a linear blur and its negation are the same blur,
/// so this picks one canonical sign for ground truth.
struct SynthParams {
  double alpha = 40.0;
  double smoothness = 0.5;  // 0 = no filtering, 1 = widest filter
  int n_segments = 3;
  double min_magnitude = 2.0;
  double max_magnitude = 10.0;
};

MotionMap<float> synth_motion_field(std::uint64_t seed, std::size_t h, std::size_t w,
                                    const SynthParams& params);

/// splitmix64 finalizer; used to derive per-image and per-sample seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace neurmap::blur
