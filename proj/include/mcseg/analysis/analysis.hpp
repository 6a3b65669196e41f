#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mcseg/arch/network.hpp"
#include "mcseg/data/patch_index.hpp"

namespace mcseg::analysis {

struct EmbeddingRow {
  data::PatchClass patch_class = data::PatchClass::C4;
  bool truth = false;      // positive for the target
  bool predicted = false;  // positive probability >= 0.5
  double positive_probability = 0.0;
  data::PatchRecord record;
};

/// Penultimate-layer features, one row of `width` values per patch.
struct EmbeddingSet {
  data::Target target = data::Target::Detector;
  std::size_t width = arch::kHiddenUnits;
  std::vector<double> features;  // size() x width, row-major
  std::vector<EmbeddingRow> rows;

  std::size_t size() const noexcept { return rows.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * width, width}; }
  /// Appends a row; throws if the feature width is wrong.
  void add(std::span<const double> feature, const EmbeddingRow& row);
};

/// Features and predictions for up to `cap` records sampled uniformly
/// without replacement from the whole index (all of it if smaller).
EmbeddingSet collect_embeddings(const arch::NetworkWeights<double>& weights, const data::PatchIndex& index,
                                std::span<const data::GrayImage> images, data::Target target, std::size_t cap,
                                std::uint64_t seed);

/// |truth - positive probability|: 0 for a confident hit, above 0.5 for a miss.
double misclassification_error(const EmbeddingRow& row) noexcept;

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double exaggeration = 4.0;
  std::size_t exaggeration_iterations = 100;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;
  std::uint64_t seed = 0;
  /// Optional distinct per-row identities (default: row positions). Row i
  /// starts at a point drawn from (seed, ids[i]) and rows are processed in id
  /// order, so permuting rows together with their ids permutes the output exactly.
  std::vector<std::uint64_t> row_ids;
};

/// Row-wise conditional affinities p(j|i) from squared distances, each row
/// calibrated by bisection on the Gaussian precision to the target perplexity.
struct Affinities {
  std::size_t n = 0;
  std::vector<double> conditional;  // n x n, zero diagonal, rows sum to 1
  std::vector<double> perplexity;   // realized per row
};
Affinities calibrate_affinities(std::span<const double> points, std::size_t dims, double perplexity);

/// (P + P^T) / 2n: symmetric, sums to 1.
std::vector<double> joint_probabilities(const Affinities& affinities);

/// KL(P || Q) for a 2-D layout under the Student-t kernel.
double kl_divergence(std::span<const double> joint, std::span<const double> layout);

struct ProjectedPoints {
  std::vector<double> points;  // n x 2
  double initial_kl = 0.0;
  double final_kl = 0.0;
  std::size_t size() const noexcept { return points.size() / 2; }
};

/// Exact t-SNE. Throws std::invalid_argument when n < 3 * perplexity or the
/// configuration is unusable.
ProjectedPoints tsne_project(std::span<const double> points, std::size_t dims, const TsneConfig& config = {});
ProjectedPoints tsne_project(const EmbeddingSet& embeddings, const TsneConfig& config = {});

struct Neighbor {
  std::size_t row = 0;
  double distance = 0.0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Euclidean nearest rows of class `restrict_class`, closest first (ties by
/// row), the query itself excluded; k = 0 returns all of them.
/// Throws std::invalid_argument if the class has no rows besides the query.
std::vector<Neighbor> feature_neighbors(const EmbeddingSet& embeddings, std::size_t query,
                                        data::PatchClass restrict_class, std::size_t k = 0);

struct MisclassifiedEntry {
  std::size_t row = 0;
  double error = 0.0;
  std::vector<Neighbor> neighbors;  // well-classified rows of the predicted label
};

struct MisclassificationReport {
  std::array<std::vector<MisclassifiedEntry>, 4> by_class;  // C1..C4, worst first
};

/// Per class, the `top_k` misclassified rows by error, each with its nearest
/// correctly classified rows whose true label is the one it was given.
MisclassificationReport misclassification_report(const EmbeddingSet& embeddings, std::size_t top_k = 5,
                                                 std::size_t neighbors = 3);

/// "x<TAB>y<TAB>class<TAB>true<TAB>predicted" per point after a header line.
std::string format_projection(const ProjectedPoints& projection, const EmbeddingSet& embeddings);
std::string format_report(const MisclassificationReport& report, const EmbeddingSet& embeddings);

}  // namespace mcseg::analysis
