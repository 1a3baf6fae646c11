#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "neurmap/blur/motion_map.hpp"
#include "neurmap/blur/reblur.hpp"
#include "neurmap/nets/networks.hpp"

namespace neurmap::loss {

template <typename T>
using Tensor = diff::BasicTensor<T>;
template <typename T>
using Motion = blur::MotionMap<T>;

struct LossWeights {
  double lambda = 100.0;  // reconstruction (reblur and content) weight
  double beta = 0.1;      // natural-image prior weight
  double alpha = 40.0;    // magnitude target for motion of blurry images

  void validate() const;
};

/// Switches for the ablations. Every term is on by default.
struct LossSwitches {
  bool reblur_for_d = true;
  bool reblur_for_m = true;
  bool tv = true;
  bool natural = true;
  bool sharp = true;
  bool real_includes_blurry = true;  // turning this off is rejected
};

class LossReport {
 public:
  static constexpr std::array<const char*, 10> kNames = {
      "reblur", "m_b", "m_s", "m_shat", "tv_rel", "sharp", "natural_d", "natural_n", "tv_shat", "content"};

  void set(const std::string& name, double value);
  std::optional<double> get(const std::string& name) const;
  bool has(const std::string& name) const { return get(name).has_value(); }
  std::vector<std::string> present() const;
  /// Terms of `other` overwrite terms of the same name.
  void merge(const LossReport& other);
  bool all_finite() const;
  std::string summary() const;

  static std::string csv_header();
  /// step, lr, then the ten terms; absent terms are empty fields.
  std::string csv_row(long step, double lr) const;

 private:
  static std::size_t index_of(const std::string& name);
  std::array<std::optional<double>, 10> values_{};
};

// ---- individual terms -------------------------------------------------------

/// mean((b - reblur(s_hat, m_rel))^2)
template <typename T>
Tensor<T> loss_reblur(const Tensor<T>& b, const Tensor<T>& s_hat, const Motion<T>& m_rel, int n_steps);

template <typename T>
struct KernelPriorTerms {
  Tensor<T> m_b, m_s, m_shat;
  Tensor<T> total() const;
};

/// L1 kernel prior:
///   mean| m_b - alpha*sgn(m_b) | + mean|m_s| + mean|m_shat - m_b_detached|
/// sgn is taken without gradient and sgn(0) = +1, so the first term equals
/// mean| |m_b| - alpha | while still pushing an all-zero map off zero.
template <typename T>
KernelPriorTerms<T> loss_kernel_prior(const Motion<T>& m_b, const Motion<T>& m_s, const Motion<T>& m_shat,
                                      const Motion<T>& m_b_detached, double alpha);

/// First kernel-prior term alone.
template <typename T>
Tensor<T> loss_magnitude_prior(const Motion<T>& m_b, double alpha);

/// Anisotropic TV summed over channels, each direction normalized by its
/// number of neighbour pairs. Zero for a 1x1 map.
template <typename T>
Tensor<T> loss_tv(const Motion<T>& m);

/// mean|m_shat - target| with target a detached 2-vector broadcast over pixels.
template <typename T>
Tensor<T> loss_sharp(const Motion<T>& m_shat, const Tensor<T>& target);

/// Per-channel mean of M*(S) over every pixel of every sharp image, detached.
template <typename T>
Tensor<T> sharp_motion_target(const std::vector<Motion<T>>& m_sharp);

enum class GanSide { Deblurrer, Discriminator };

/// LSGAN. Discriminator side: mean(fake^2) + mean((real-1)^2), each mean
/// taken over all score maps of its set. Deblurrer side: mean((fake-1)^2).
template <typename T>
Tensor<T> loss_gan(const std::vector<Tensor<T>>& fake, const std::vector<Tensor<T>>& real, GanSide side);

/// mean((s - d)^2)
template <typename T>
Tensor<T> loss_content(const Tensor<T>& s_pair, const Tensor<T>& d_of_b_pair);

// ---- assembled objectives ---------------------------------------------------

template <typename T>
struct UnpairedBatch {
  std::vector<Tensor<T>> blurry;
  std::vector<Tensor<T>> sharp;
  // D*(blurry) without gradient; filled on demand and shared by the N and M updates.
  std::vector<Tensor<T>> deblurred;
};

template <typename T>
struct PairedBatch {
  std::vector<Tensor<T>> blurry;
  std::vector<Tensor<T>> sharp;
};

template <typename T>
struct Networks {
  const nets::NetParams<T>* d = nullptr;
  const nets::NetParams<T>* m = nullptr;
  const nets::NetParams<T>* n = nullptr;
};

template <typename T>
struct Objective {
  Tensor<T> total;
  LossReport report;
};

struct ObjectiveOptions {
  LossWeights weights;
  LossSwitches switches;
  int n_steps = blur::kDefaultSteps;
};

/// Fills batch.deblurred with D(blurry) evaluated without gradient.
template <typename T>
void ensure_deblurred(UnpairedBatch<T>& batch, const nets::NetParams<T>& d);

/// Motion objective, trains M only:
///   lambda*reblur(B, Shat, M_B - M_Shat) + kernel prior + TV(M_B - M_Shat)
template <typename T>
Objective<T> objective_M(UnpairedBatch<T>& batch, const Networks<T>& nets, const ObjectiveOptions& opt);

/// Same objective from precomputed maps; per-sample terms are averaged.
/// `m_b_reference` replaces detach(m_b) in the third kernel-prior term when
/// given, which lets a finite-difference check hold it at the base point.
template <typename T>
Objective<T> objective_M_from_maps(const std::vector<Tensor<T>>& b, const std::vector<Tensor<T>>& s_hat,
                                   const std::vector<Motion<T>>& m_b, const std::vector<Motion<T>>& m_s,
                                   const std::vector<Motion<T>>& m_shat, const ObjectiveOptions& opt,
                                   const std::vector<Motion<T>>* m_b_reference = nullptr);

/// Maps M produces for one unpaired batch, in the order objective_M uses them.
template <typename T>
struct MotionMaps {
  std::vector<Motion<T>> m_b, m_s, m_shat;
};
template <typename T>
MotionMaps<T> motion_maps(UnpairedBatch<T>& batch, const Networks<T>& nets);

/// Deblurrer objective, trains D only:
///   lambda*reblur(B, D(B), M*(B) - M*(D(B))) + sharp prior + beta*LSGAN_D
///   + TV(M*(D(B))) [+ lambda*content on the paired batch]
template <typename T>
Objective<T> objective_D(UnpairedBatch<T>& batch, const PairedBatch<T>* paired, const Networks<T>& nets,
                         const ObjectiveOptions& opt);

/// Discriminator objective, trains N only: LSGAN with D*(B) fake and {B, S} real.
template <typename T>
Objective<T> objective_N(UnpairedBatch<T>& batch, const Networks<T>& nets, const ObjectiveOptions& opt);

}  // namespace neurmap::loss
