#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mcseg/arch/network.hpp"
#include "mcseg/data/patch_index.hpp"

namespace mcseg::train {

/// Error per patch class and overall accuracy of one network, in percent.
struct ClassErrorTable {
  data::Target target = data::Target::Detector;
  std::array<double, 4> error_percent{};  // C1..C4
  std::array<std::size_t, 4> evaluated{};
  double overall_accuracy_percent = 0.0;

  /// Class with the highest error rate (lowest index on ties).
  data::PatchClass worst_class() const noexcept;
};

/// One evaluated patch: its class and the network's positive probability.
struct Prediction {
  data::PatchClass patch_class = data::PatchClass::C4;
  double positive_probability = 0.0;
};

/// Builds the table from raw predictions. A class's error is the share of
/// its patches whose thresholded (>= 0.5) label disagrees with the target
/// label. Overall accuracy weighs positives and negatives equally, each side
/// being the mean accuracy over its classes. Throws if a class is missing.
ClassErrorTable evaluate_predictions(std::span<const Prediction> predictions, data::Target target);

struct EvalConfig {
  std::size_t per_class_cap = 0;  // 0 = every record
  std::size_t batch = 256;
  std::uint64_t seed = 0;         // picks the capped subset
};

/// Positive-class probabilities for the records, float inference in batches.
std::vector<double> predict_records(const arch::NetworkWeights<float>& weights,
                                    std::span<const data::PatchRecord> records,
                                    std::span<const data::GrayImage> images, std::size_t batch = 256);

/// Runs the network over (a per-class sample of) the index.
/// Throws std::invalid_argument when a class has no records.
ClassErrorTable evaluate_per_class(const arch::NetworkWeights<double>& weights, const data::PatchIndex& index,
                                   std::span<const data::GrayImage> images, data::Target target,
                                   const EvalConfig& config = {});
std::vector<Prediction> collect_predictions(const arch::NetworkWeights<double>& weights,
                                            const data::PatchIndex& index,
                                            std::span<const data::GrayImage> images, const EvalConfig& config = {});

/// Aligned text: header row "Network C1 C2 C3 C4 Overall", one row per table.
std::string render_tables(std::span<const ClassErrorTable> tables);

}  // namespace mcseg::train
