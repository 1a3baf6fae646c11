#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "neurmap/loss/objectives.hpp"
#include "neurmap/train/checkpoint.hpp"

namespace neurmap::train {

/// Training images held in memory.
struct TrainData {
  std::vector<diff::Tensor> blurry;  // unpaired blurry set
  std::vector<diff::Tensor> sharp;   // unpaired sharp set
  std::vector<diff::Tensor> paired_blurry, paired_sharp;
};

/// Reads the three sets named by the config. Dataset directories contribute
/// their train rows; the unpaired sets also accept a plain PNG directory.
TrainData load_train_data(const TrainConfig& config);

struct Batches {
  loss::UnpairedBatch<float> unpaired;
  std::optional<loss::PairedBatch<float>> paired;
};

/// Draws one step's batches (uniform indices, random crops, horizontal
/// flips) from `rng`, so the sample order depends only on the RNG stream.
Batches sample_batches(const TrainData& data, const TrainConfig& config, std::mt19937_64& rng);

/// [c, crop, crop] window at (y0, x0), mirrored left-right when `flip`.
diff::Tensor crop_flip(const diff::Tensor& image, std::size_t y0, std::size_t x0, std::size_t size, bool flip);

enum class SubUpdate { Discriminator, Motion, Deblur };

struct StepResult {
  loss::LossReport report;
  bool applied = true;  // false when a non-finite loss aborted the step
};

using StepObserver = std::function<void(SubUpdate, const TrainState&)>;

/// One semi-supervised iteration: update N on objective_N, then M on
/// objective_M, then D on objective_D with the paired content term, each
/// with its own Adam state and the scheduled learning rate. On a non-finite
/// loss or gradient all three networks and optimizers are restored and the
/// event is logged; the step counter advances either way.
StepResult train_step(TrainState& state, const loss::PairedBatch<float>* paired,
                      loss::UnpairedBatch<float>& unpaired, const StepObserver& observer = {});

struct TrainOptions {
  std::optional<std::filesystem::path> resume;  // continue from this checkpoint
  long stop_at = -1;                            // stop early at this step; -1 = total_steps
};

/// Runs the loop to total_steps (or stop_at), writing to output_dir:
///   loss.csv, samples/step_XXXXXX.png (blurry | deblurred | reblurred | motion),
///   checkpoints/step_XXXXXX.nmck at the interval, and final.nmck.
TrainState train(const TrainConfig& config, const TrainOptions& options = {});

}  // namespace neurmap::train
