#include "mcseg/analysis/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mcseg/data/sampling.hpp"
#include "mcseg/nn/random.hpp"

namespace mcseg::analysis {

void EmbeddingSet::add(std::span<const double> feature, const EmbeddingRow& row) {
  if (feature.size() != width) throw std::invalid_argument("feature row has the wrong width");
  features.insert(features.end(), feature.begin(), feature.end());
  rows.push_back(row);
}

EmbeddingSet collect_embeddings(const arch::NetworkWeights<double>& weights, const data::PatchIndex& index,
                                std::span<const data::GrayImage> images, data::Target target, std::size_t cap,
                                std::uint64_t seed) {
  if (index.patch_size != weights.spec.patch_size) throw std::invalid_argument("index and network patch sizes differ");
  std::vector<data::PatchRecord> all;
  for (const auto& group : index.groups) all.insert(all.end(), group.begin(), group.end());
  std::vector<data::PatchRecord> chosen;
  if (all.size() <= cap) {
    chosen = std::move(all);
  } else {
    std::mt19937_64 rng(seed);
    std::sample(all.begin(), all.end(), std::back_inserter(chosen), cap, rng);
  }

  EmbeddingSet out;
  out.target = target;
  constexpr std::size_t kBatch = 256;
  for (std::size_t start = 0; start < chosen.size(); start += kBatch) {
    const auto chunk = std::span<const data::PatchRecord>(chosen).subspan(start, std::min(kBatch, chosen.size() - start));
    const nn::Tensor patches = data::gather_patches<double>(chunk, images, index.patch_size);
    const nn::Tensor features = arch::penultimate_features(weights, patches);
    const nn::Tensor probs = arch::predict(weights, patches);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      EmbeddingRow row;
      row.patch_class = chunk[i].patch_class;
      row.truth = data::is_positive(row.patch_class, target);
      row.positive_probability = probs(i, data::kPositiveColumn);
      row.predicted = row.positive_probability >= 0.5;
      row.record = chunk[i];
      out.add({features.data() + i * out.width, out.width}, row);
    }
  }
  return out;
}

double misclassification_error(const EmbeddingRow& row) noexcept {
  return std::abs((row.truth ? 1.0 : 0.0) - row.positive_probability);
}

namespace {

std::vector<double> squared_distances(std::span<const double> points, std::size_t dims) {
  const std::size_t n = points.size() / dims;
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dims; ++k) {
        const double diff = points[i * dims + k] - points[j * dims + k];
        s += diff * diff;
      }
      d[i * n + j] = d[j * n + i] = s;
    }
  }
  return d;
}

// Fills row i of p with exp(-beta (d - dmin)) normalized; returns the perplexity.
double gaussian_row(const double* dist, std::size_t n, std::size_t i, double beta, double dmin, double* p) {
  double sum = 0.0, weighted = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      p[j] = 0.0;
      continue;
    }
    const double shifted = dist[j] - dmin;
    p[j] = std::exp(-beta * shifted);
    sum += p[j];
    weighted += shifted * p[j];
  }
  for (std::size_t j = 0; j < n; ++j) p[j] /= sum;
  return std::exp(std::log(sum) + beta * weighted / sum);
}

}  // namespace

Affinities calibrate_affinities(std::span<const double> points, std::size_t dims, double perplexity) {
  if (dims == 0 || points.size() % dims != 0) throw std::invalid_argument("point buffer does not match dims");
  const std::size_t n = points.size() / dims;
  if (!(perplexity >= 1.0) || static_cast<double>(n) < 3.0 * perplexity) {
    throw std::invalid_argument("perplexity needs at least 3 * perplexity points");
  }
  const std::vector<double> dist = squared_distances(points, dims);
  Affinities out{n, std::vector<double>(n * n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = dist.data() + i * n;
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) dmin = std::min(dmin, row[j]);
    }
    double* p = out.conditional.data() + i * n;
    double lo = 0.0, hi = std::numeric_limits<double>::infinity(), beta = 1.0;
    double realized = gaussian_row(row, n, i, beta, dmin, p);
    // Perplexity falls as beta grows; duplicates can put the target out of reach,
    // in which case the closest attainable row is kept.
    for (int iter = 0; iter < 200 && std::abs(realized - perplexity) > 1e-7 * perplexity; ++iter) {
      if (realized > perplexity) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
      realized = gaussian_row(row, n, i, beta, dmin, p);
    }
    out.perplexity[i] = realized;
  }
  return out;
}

std::vector<double> joint_probabilities(const Affinities& a) {
  const std::size_t n = a.n;
  std::vector<double> p(n * n, 0.0);
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      p[i * n + j] = p[j * n + i] = (a.conditional[i * n + j] + a.conditional[j * n + i]) * scale;
    }
  }
  return p;
}

namespace {

// Student-t kernel values (zero diagonal); returns their sum.
double student_kernel(std::span<const double> y, std::size_t n, std::vector<double>& num) {
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num[i * n + i] = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      num[i * n + j] = num[j * n + i] = v;
      z += 2.0 * v;
    }
  }
  return z;
}

double kl_with_kernel(std::span<const double> joint, const std::vector<double>& num, double z) {
  double kl = 0.0;
  for (std::size_t k = 0; k < joint.size(); ++k) {
    if (joint[k] > 0.0) kl += joint[k] * std::log(joint[k] / std::max(num[k] / z, std::numeric_limits<double>::min()));
  }
  return kl;
}

}  // namespace

double kl_divergence(std::span<const double> joint, std::span<const double> layout) {
  const std::size_t n = layout.size() / 2;
  if (joint.size() != n * n) throw std::invalid_argument("joint matrix and layout sizes differ");
  std::vector<double> num(n * n);
  const double z = student_kernel(layout, n, num);
  return kl_with_kernel(joint, num, z);
}

namespace {

// Runs on rows already in canonical (id) order.
ProjectedPoints tsne_canonical(std::span<const double> points, std::size_t dims, const TsneConfig& config,
                               std::span<const std::uint64_t> ids) {
  const Affinities affinities = calibrate_affinities(points, dims, config.perplexity);
  const std::size_t n = affinities.n;
  const std::vector<double> p = joint_probabilities(affinities);

  ProjectedPoints out;
  out.points.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(nn::derive_seed(config.seed, ids[i]));
    std::normal_distribution<double> normal(0.0, 1e-2);
    out.points[2 * i] = normal(rng);
    out.points[2 * i + 1] = normal(rng);
  }
  std::vector<double> num(n * n);
  out.initial_kl = kl_with_kernel(p, num, student_kernel(out.points, n, num));

  std::vector<double> update(2 * n, 0.0), gains(2 * n, 1.0), grad(2 * n);
  for (std::size_t iter = 0; iter < config.iterations; ++iter) {
    const double exaggeration = iter < config.exaggeration_iterations ? config.exaggeration : 1.0;
    const double momentum = iter < config.momentum_switch ? config.initial_momentum : config.final_momentum;
    const double z = student_kernel(out.points, n, num);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double coeff = (exaggeration * p[i * n + j] - num[i * n + j] / z) * num[i * n + j];
        gx += coeff * (out.points[2 * i] - out.points[2 * j]);
        gy += coeff * (out.points[2 * i + 1] - out.points[2 * j + 1]);
      }
      grad[2 * i] = 4.0 * gx;
      grad[2 * i + 1] = 4.0 * gy;
    }
    for (std::size_t k = 0; k < 2 * n; ++k) {
      gains[k] = (grad[k] > 0.0) != (update[k] > 0.0) ? gains[k] + 0.2 : std::max(gains[k] * 0.8, 0.01);
      update[k] = momentum * update[k] - config.learning_rate * gains[k] * grad[k];
      out.points[k] += update[k];
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += out.points[2 * i];
      my += out.points[2 * i + 1];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.points[2 * i] -= mx;
      out.points[2 * i + 1] -= my;
    }
  }
  out.final_kl = kl_with_kernel(p, num, student_kernel(out.points, n, num));
  return out;
}

}  // namespace

ProjectedPoints tsne_project(std::span<const double> points, std::size_t dims, const TsneConfig& config) {
  if (config.iterations == 0 || !(config.learning_rate > 0.0) || !(config.exaggeration >= 1.0)) {
    throw std::invalid_argument("bad t-SNE configuration");
  }
  if (dims == 0 || points.size() % dims != 0) throw std::invalid_argument("point buffer does not match dims");
  const std::size_t n = points.size() / dims;
  std::vector<std::uint64_t> ids = config.row_ids;
  if (ids.empty()) {
    ids.resize(n);
    std::iota(ids.begin(), ids.end(), std::uint64_t{0});
  }
  if (ids.size() != n) throw std::invalid_argument("row_ids size mismatch");

  // Work in id order so every sum runs in the same sequence for any row order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  std::vector<double> sorted(points.size());
  std::vector<std::uint64_t> sorted_ids(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && ids[order[k]] == ids[order[k - 1]]) throw std::invalid_argument("row_ids must be distinct");
    std::copy_n(points.begin() + static_cast<std::ptrdiff_t>(order[k] * dims), dims,
                sorted.begin() + static_cast<std::ptrdiff_t>(k * dims));
    sorted_ids[k] = ids[order[k]];
  }
  ProjectedPoints canonical = tsne_canonical(sorted, dims, config, sorted_ids);
  ProjectedPoints out = canonical;
  for (std::size_t k = 0; k < n; ++k) {
    out.points[2 * order[k]] = canonical.points[2 * k];
    out.points[2 * order[k] + 1] = canonical.points[2 * k + 1];
  }
  return out;
}

ProjectedPoints tsne_project(const EmbeddingSet& embeddings, const TsneConfig& config) {
  return tsne_project(embeddings.features, embeddings.width, config);
}

std::vector<Neighbor> feature_neighbors(const EmbeddingSet& embeddings, std::size_t query,
                                        data::PatchClass restrict_class, std::size_t k) {
  if (query >= embeddings.size()) throw std::out_of_range("query row out of range");
  const auto q = embeddings.row(query);
  std::vector<Neighbor> out;
  for (std::size_t r = 0; r < embeddings.size(); ++r) {
    if (r == query || embeddings.rows[r].patch_class != restrict_class) continue;
    const auto v = embeddings.row(r);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += (v[i] - q[i]) * (v[i] - q[i]);
    out.push_back({r, std::sqrt(s)});
  }
  if (out.empty()) {
    throw std::invalid_argument(std::string("no rows of class ") + data::to_string(restrict_class));
  }
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.row < b.row);
  };
  if (k != 0 && k < out.size()) {
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(k), out.end(), closer);
    out.resize(k);
  } else {
    std::sort(out.begin(), out.end(), closer);
  }
  return out;
}

MisclassificationReport misclassification_report(const EmbeddingSet& embeddings, std::size_t top_k,
                                                 std::size_t neighbors) {
  MisclassificationReport report;
  for (data::PatchClass c : data::kAllClasses) {
    std::vector<MisclassifiedEntry> wrong;
    for (std::size_t r = 0; r < embeddings.size(); ++r) {
      const EmbeddingRow& row = embeddings.rows[r];
      if (row.patch_class == c && row.predicted != row.truth) wrong.push_back({r, misclassification_error(row), {}});
    }
    std::stable_sort(wrong.begin(), wrong.end(),
                     [](const MisclassifiedEntry& a, const MisclassifiedEntry& b) { return a.error > b.error; });
    if (wrong.size() > top_k) wrong.resize(top_k);

    for (MisclassifiedEntry& e : wrong) {
      const bool label = embeddings.rows[e.row].predicted;
      const auto q = embeddings.row(e.row);
      for (std::size_t r = 0; r < embeddings.size(); ++r) {
        const EmbeddingRow& other = embeddings.rows[r];
        if (other.truth != label || other.predicted != other.truth) continue;
        const auto v = embeddings.row(r);
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) s += (v[i] - q[i]) * (v[i] - q[i]);
        e.neighbors.push_back({r, std::sqrt(s)});
      }
      std::sort(e.neighbors.begin(), e.neighbors.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.distance < b.distance || (a.distance == b.distance && a.row < b.row);
      });
      if (e.neighbors.size() > neighbors) e.neighbors.resize(neighbors);
    }
    report.by_class[data::index_of(c)] = std::move(wrong);
  }
  return report;
}

std::string format_projection(const ProjectedPoints& projection, const EmbeddingSet& embeddings) {
  if (projection.size() != embeddings.size()) throw std::invalid_argument("projection and embeddings differ in size");
  std::ostringstream out;
  out.precision(9);
  out << "x\ty\tclass\ttrue\tpredicted\n";
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    const EmbeddingRow& r = embeddings.rows[i];
    out << projection.points[2 * i] << '\t' << projection.points[2 * i + 1] << '\t' << data::to_string(r.patch_class)
        << '\t' << (r.truth ? "pos" : "neg") << '\t' << (r.predicted ? "pos" : "neg") << '\n';
  }
  return out.str();
}

std::string format_report(const MisclassificationReport& report, const EmbeddingSet& embeddings) {
  std::ostringstream out;
  out.precision(4);
  for (data::PatchClass c : data::kAllClasses) {
    const auto& entries = report.by_class[data::index_of(c)];
    out << "class " << data::to_string(c) << " misclassified " << entries.size() << '\n';
    for (const MisclassifiedEntry& e : entries) {
      const data::PatchRecord& rec = embeddings.rows[e.row].record;
      out << "  row " << e.row << " image " << rec.image << " at " << rec.center.x << ',' << rec.center.y
          << " error " << e.error << '\n';
      for (const Neighbor& nb : e.neighbors) {
        const EmbeddingRow& r = embeddings.rows[nb.row];
        out << "    neighbor " << nb.row << ' ' << data::to_string(r.patch_class) << " distance " << nb.distance
            << " error " << misclassification_error(r) << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace mcseg::analysis
