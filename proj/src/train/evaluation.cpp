#include "mcseg/train/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "mcseg/data/sampling.hpp"
#include "mcseg/nn/random.hpp"

namespace mcseg::train {

data::PatchClass ClassErrorTable::worst_class() const noexcept {
  std::size_t worst = 0;
  for (std::size_t i = 1; i < 4; ++i) {
    if (error_percent[i] > error_percent[worst]) worst = i;
  }
  return data::kAllClasses[worst];
}

ClassErrorTable evaluate_predictions(std::span<const Prediction> predictions, data::Target target) {
  ClassErrorTable table;
  table.target = target;
  std::array<std::size_t, 4> wrong{};
  for (const Prediction& p : predictions) {
    if (!(p.positive_probability >= 0.0 && p.positive_probability <= 1.0)) {
      throw std::invalid_argument("probability outside [0, 1]");
    }
    const std::size_t c = data::index_of(p.patch_class);
    ++table.evaluated[c];
    wrong[c] += (p.positive_probability >= 0.5) != data::is_positive(p.patch_class, target);
  }
  for (data::PatchClass c : data::kAllClasses) {
    const std::size_t i = data::index_of(c);
    if (table.evaluated[i] == 0) throw std::invalid_argument(std::string("no patches of class ") + data::to_string(c));
    table.error_percent[i] = 100.0 * static_cast<double>(wrong[i]) / static_cast<double>(table.evaluated[i]);
  }
  double overall = 0.0;
  for (bool positive : {true, false}) {
    const auto classes = data::classes_for(target, positive);
    double mean_error = 0.0;
    for (data::PatchClass c : classes) mean_error += table.error_percent[data::index_of(c)];
    mean_error /= static_cast<double>(classes.size());
    overall += 0.5 * (100.0 - mean_error);
  }
  table.overall_accuracy_percent = overall;
  return table;
}

std::vector<double> predict_records(const arch::NetworkWeights<float>& weights,
                                    std::span<const data::PatchRecord> records,
                                    std::span<const data::GrayImage> images, std::size_t batch) {
  if (batch == 0) throw std::invalid_argument("batch must be positive");
  std::vector<double> out;
  out.reserve(records.size());
  const std::size_t n = weights.spec.patch_size;
  for (std::size_t start = 0; start < records.size(); start += batch) {
    const auto chunk = records.subspan(start, std::min(batch, records.size() - start));
    const nn::TensorF probs = arch::predict(weights, data::gather_patches<float>(chunk, images, n));
    for (std::size_t i = 0; i < chunk.size(); ++i) out.push_back(probs(i, data::kPositiveColumn));
  }
  return out;
}

std::vector<Prediction> collect_predictions(const arch::NetworkWeights<double>& weights,
                                            const data::PatchIndex& index,
                                            std::span<const data::GrayImage> images, const EvalConfig& config) {
  if (index.patch_size != weights.spec.patch_size) throw std::invalid_argument("index and network patch sizes differ");
  const arch::NetworkWeights<float> inference = weights.cast<float>();
  std::vector<Prediction> out;
  for (data::PatchClass c : data::kAllClasses) {
    std::vector<data::PatchRecord> chosen;
    const auto& group = index.records(c);
    if (config.per_class_cap == 0 || group.size() <= config.per_class_cap) {
      chosen = group;
    } else {
      std::mt19937_64 rng(nn::derive_seed(config.seed, data::index_of(c)));
      std::sample(group.begin(), group.end(), std::back_inserter(chosen), config.per_class_cap, rng);
    }
    for (double p : predict_records(inference, chosen, images, config.batch)) out.push_back({c, p});
  }
  return out;
}

ClassErrorTable evaluate_per_class(const arch::NetworkWeights<double>& weights, const data::PatchIndex& index,
                                   std::span<const data::GrayImage> images, data::Target target,
                                   const EvalConfig& config) {
  for (data::PatchClass c : data::kAllClasses) {
    if (index.count(c) == 0) throw std::invalid_argument(std::string("index has no ") + data::to_string(c) + " records");
  }
  const std::vector<Prediction> predictions = collect_predictions(weights, index, images, config);
  return evaluate_predictions(predictions, target);
}

std::string render_tables(std::span<const ClassErrorTable> tables) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %8s %8s %8s %8s %10s\n", "Network", "C1", "C2", "C3", "C4", "Overall");
  out += line;
  for (const ClassErrorTable& t : tables) {
    const std::string name = t.target == data::Target::Detector ? "Detector" : "Segmentator";
    std::snprintf(line, sizeof line, "%-12s %8.2f %8.2f %8.2f %8.2f %10.2f\n", name.c_str(), t.error_percent[0],
                  t.error_percent[1], t.error_percent[2], t.error_percent[3], t.overall_accuracy_percent);
    out += line;
  }
  return out;
}

}  // namespace mcseg::train
