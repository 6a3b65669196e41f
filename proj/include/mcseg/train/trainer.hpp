#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcseg/arch/network.hpp"
#include "mcseg/data/patch_class.hpp"
#include "mcseg/train/batch_source.hpp"

namespace mcseg::train {

struct TrainConfig {
  data::Target target = data::Target::Detector;
  std::size_t batch = 256;
  double lr = 1e-3;
  std::size_t batches_per_epoch = 200;
  std::size_t plateau_window = 5;
  double plateau_epsilon = 1e-4;
  std::size_t patience = 15;
  std::size_t max_epochs = 100;
  std::size_t validation_batches = 4;  // fixed validation set of this many batches
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument unless lr > 0, batch even and positive,
  /// plateau_window >= 1 and patience >= plateau_window.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;  // fraction in [0, 1]
  double lr = 0.0;            // rate used during this epoch
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0 until an epoch completes
  std::string stop_reason;
  /// Per-epoch wall time in seconds; not part of equality.
  std::vector<double> wall_seconds;

  friend bool operator==(const TrainLog& a, const TrainLog& b) {
    return a.epochs == b.epochs && a.best_epoch == b.best_epoch && a.stop_reason == b.stop_reason;
  }
};

/// Tab-separated: header line, then epoch, train_loss, val_loss, val_accuracy, lr, wall_s.
std::string format_log(const TrainLog& log);
void write_log(const TrainLog& log, const std::filesystem::path& path);

/// Learning rate for the next epoch: halved when the best validation loss of
/// the last P epochs (all run at the current rate) is not below the best of
/// the earlier epochs by more than epsilon. Unchanged otherwise, including
/// when fewer than P epochs have run at the current rate.
double plateau_lr_step(const TrainLog& log, std::size_t window, double epsilon, double lr);

/// True once `patience` epochs have passed since the last new best
/// (strictly lower) validation loss.
bool early_stop_check(const TrainLog& log, std::size_t patience);

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, TrainLog log) : std::runtime_error(what), log_(std::move(log)) {}
  const TrainLog& log() const noexcept { return log_; }

 private:
  TrainLog log_;
};

struct TrainResult {
  arch::NetworkWeights<double> weights;  // best-validation checkpoint
  TrainLog log;
};

/// Called after each epoch; returning false stops training.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Adam on balanced minibatches; validation on a fixed set drawn once from
/// `val`. Weights stay at storage (float) precision after every step, so the
/// returned checkpoint serializes exactly. Throws TrainingDiverged with the
/// partial log on a non-finite loss or gradient.
TrainResult train(const arch::NetworkSpec& spec, const BatchSource& train_source, const BatchSource& val_source,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Convenience overload over patch indices and their images.
TrainResult train(const arch::NetworkSpec& spec, const data::PatchIndex& train_index,
                  std::span<const data::GrayImage> train_images, const data::PatchIndex& val_index,
                  std::span<const data::GrayImage> val_images, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Patch sizes tried for the input window.
inline constexpr std::array<std::size_t, 3> kSweepPatchSizes{29, 39, 49};

struct SweepSources {
  std::unique_ptr<BatchSource> train;
  std::unique_ptr<BatchSource> val;
};
using SourceFactory = std::function<SweepSources(std::size_t patch_size)>;

struct SweepEntry {
  std::size_t patch_size = 0;
  TrainLog log;
  double best_val_loss = 0.0;
  double best_val_accuracy = 0.0;
};

/// Trains one network per patch size with otherwise identical settings.
std::vector<SweepEntry> sweep_patch_sizes(std::span<const std::size_t> sizes, const arch::NetworkSpec& base,
                                          const SourceFactory& sources, const TrainConfig& config);

/// Mean cross-entropy and accuracy of inference-phase predictions.
struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};
Evaluation evaluate_batches(const arch::NetworkWeights<double>& weights, const std::vector<Batch>& batches);

}  // namespace mcseg::train
