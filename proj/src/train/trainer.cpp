#include "mcseg/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mcseg/data/sampling.hpp"
#include "mcseg/nn/adam.hpp"
#include "mcseg/nn/random.hpp"

namespace mcseg::train {

namespace {

// Streams split off the run seed.
enum Stream : std::uint64_t { kInit = 0, kTrainBatches = 1, kDropout = 2, kValidation = 3 };

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (batch == 0 || batch % 2 != 0) throw std::invalid_argument("batch size must be even and positive");
  if (plateau_window == 0) throw std::invalid_argument("plateau window must be >= 1");
  if (patience < plateau_window) throw std::invalid_argument("patience must be >= plateau window");
  if (batches_per_epoch == 0 || max_epochs == 0 || validation_batches == 0) {
    throw std::invalid_argument("epoch, batch and validation counts must be positive");
  }
}

std::string format_log(const TrainLog& log) {
  std::ostringstream out;
  out.precision(9);
  out << "epoch\ttrain_loss\tval_loss\tval_accuracy\tlr\twall_s\n";
  for (std::size_t i = 0; i < log.epochs.size(); ++i) {
    const EpochRecord& e = log.epochs[i];
    out << e.epoch << '\t' << e.train_loss << '\t' << e.val_loss << '\t' << e.val_accuracy << '\t' << e.lr << '\t'
        << (i < log.wall_seconds.size() ? log.wall_seconds[i] : 0.0) << '\n';
  }
  return out.str();
}

void write_log(const TrainLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << format_log(log);
}

double plateau_lr_step(const TrainLog& log, std::size_t window, double epsilon, double lr) {
  if (window == 0) throw std::invalid_argument("plateau window must be >= 1");
  const auto& e = log.epochs;
  std::size_t at_rate = 0;
  while (at_rate < e.size() && e[e.size() - 1 - at_rate].lr == lr) ++at_rate;
  if (at_rate < window) return lr;

  const std::size_t split = e.size() - window;
  double prior = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < split; ++i) prior = std::min(prior, e[i].val_loss);
  double recent = std::numeric_limits<double>::infinity();
  for (std::size_t i = split; i < e.size(); ++i) recent = std::min(recent, e[i].val_loss);
  if (std::isinf(prior)) return lr;
  return recent < prior - epsilon ? lr : lr / 2.0;
}

bool early_stop_check(const TrainLog& log, std::size_t patience) {
  if (patience == 0) throw std::invalid_argument("patience must be >= 1");
  if (log.epochs.empty()) return false;
  std::size_t best_epoch = 0;
  double best = std::numeric_limits<double>::infinity();
  for (const EpochRecord& r : log.epochs) {
    if (r.val_loss < best) {
      best = r.val_loss;
      best_epoch = r.epoch;
    }
  }
  return log.epochs.back().epoch - best_epoch >= patience;
}

Evaluation evaluate_batches(const arch::NetworkWeights<double>& weights, const std::vector<Batch>& batches) {
  double loss = 0.0;
  std::size_t correct = 0, total = 0;
  for (const Batch& b : batches) {
    const nn::Tensor probs = arch::predict(weights, b.patches);
    loss += nn::cross_entropy(probs, b.labels).loss * static_cast<double>(b.labels.extent(0));
    for (std::size_t i = 0; i < probs.extent(0); ++i) {
      const bool predicted = probs(i, data::kPositiveColumn) >= 0.5;
      correct += predicted == (b.labels(i, data::kPositiveColumn) == 1.0);
    }
    total += b.labels.extent(0);
  }
  return {loss / static_cast<double>(total), static_cast<double>(correct) / static_cast<double>(total)};
}

TrainResult train(const arch::NetworkSpec& spec, const BatchSource& train_source, const BatchSource& val_source,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  spec.validate();
  if (train_source.patch_size() != spec.patch_size || val_source.patch_size() != spec.patch_size) {
    throw std::invalid_argument("batch sources do not match the network patch size");
  }

  arch::NetworkWeights<double> weights = arch::build_network(spec, nn::derive_seed(config.seed, kInit));
  std::vector<nn::AdamState> states;
  for (const nn::Tensor* p : weights.trainable()) states.push_back(nn::AdamState::for_parameter(*p));

  std::vector<Batch> validation;
  for (std::size_t i = 0; i < config.validation_batches; ++i) {
    validation.push_back(val_source.draw(config.batch, nn::derive_seed(nn::derive_seed(config.seed, kValidation), i)));
  }

  TrainResult result{weights, {}};
  TrainLog& log = result.log;
  double best = std::numeric_limits<double>::infinity();
  double lr = config.lr;
  const std::uint64_t batch_stream = nn::derive_seed(config.seed, kTrainBatches);
  const std::uint64_t dropout_stream = nn::derive_seed(config.seed, kDropout);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < config.batches_per_epoch; ++b) {
      const std::uint64_t step = (epoch - 1) * config.batches_per_epoch + b;
      const Batch batch = train_source.draw(config.batch, nn::derive_seed(batch_stream, step));
      arch::ForwardResult fwd = arch::forward(weights, batch.patches, nn::Phase::Train, nn::derive_seed(dropout_stream, step));
      const double loss = nn::cross_entropy(fwd.probs, batch.labels).loss;
      if (!std::isfinite(loss)) {
        log.stop_reason = "diverged";
        throw TrainingDiverged("non-finite training loss at epoch " + std::to_string(epoch), log);
      }
      loss_sum += loss;
      const arch::NetworkGradients grads = arch::backward(weights, fwd.cache, batch.labels);
      auto params = weights.trainable();
      try {
        for (std::size_t k = 0; k < params.size(); ++k) nn::adam_step(*params[k], grads.tensors[k], states[k], lr);
      } catch (const nn::NonFiniteGradient& e) {
        log.stop_reason = "diverged";
        throw TrainingDiverged(std::string("non-finite gradient at epoch ") + std::to_string(epoch) + ": " + e.what(),
                               log);
      }
      arch::round_to_storage_precision(weights);
      ++weights.generation;
    }

    const Evaluation val = evaluate_batches(weights, validation);
    if (!std::isfinite(val.loss)) {
      log.stop_reason = "diverged";
      throw TrainingDiverged("non-finite validation loss at epoch " + std::to_string(epoch), log);
    }
    log.epochs.push_back({epoch, loss_sum / static_cast<double>(config.batches_per_epoch), val.loss, val.accuracy, lr});
    log.wall_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    if (val.loss < best) {
      best = val.loss;
      log.best_epoch = epoch;
      result.weights = weights;
    }
    if (on_epoch && !on_epoch(log.epochs.back())) {
      log.stop_reason = "stopped by caller";
      break;
    }
    if (early_stop_check(log, config.patience)) {
      log.stop_reason = "early stop";
      break;
    }
    lr = plateau_lr_step(log, config.plateau_window, config.plateau_epsilon, lr);
  }
  if (log.stop_reason.empty()) log.stop_reason = "max epochs";
  return result;
}

TrainResult train(const arch::NetworkSpec& spec, const data::PatchIndex& train_index,
                  std::span<const data::GrayImage> train_images, const data::PatchIndex& val_index,
                  std::span<const data::GrayImage> val_images, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  const IndexBatchSource train_source(train_index, train_images, config.target);
  const IndexBatchSource val_source(val_index, val_images, config.target);
  return train(spec, train_source, val_source, config, on_epoch);
}

std::vector<SweepEntry> sweep_patch_sizes(std::span<const std::size_t> sizes, const arch::NetworkSpec& base,
                                          const SourceFactory& sources, const TrainConfig& config) {
  std::vector<SweepEntry> out;
  for (std::size_t n : sizes) {
    arch::NetworkSpec spec = base;
    spec.patch_size = n;
    const SweepSources s = sources(n);
    if (!s.train || !s.val) throw std::invalid_argument("source factory returned no source");
    TrainResult r = train(spec, *s.train, *s.val, config);
    const EpochRecord& best = r.log.epochs.at(r.log.best_epoch - 1);
    out.push_back({n, std::move(r.log), best.val_loss, best.val_accuracy});
  }
  return out;
}

}  // namespace mcseg::train
