#include "mcseg/pipeline/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

#include "mcseg/arch/weights_io.hpp"
#include "mcseg/data/sampling.hpp"
#include "mcseg/imaging/otsu.hpp"
#include "mcseg/imaging/patch.hpp"
#include "mcseg/imaging/tiling.hpp"

namespace mcseg::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_inputs(const GrayImage& image, const arch::NetworkWeights<double>& weights, std::size_t n,
                  const char* role) {
  if (weights.spec.patch_size != n) {
    throw std::invalid_argument(std::string(role) + " weights expect N=" + std::to_string(weights.spec.patch_size) +
                                ", got N=" + std::to_string(n));
  }
  if (image.width() < n || image.height() < n) throw std::invalid_argument("image smaller than the patch size");
}

std::size_t worker_count(std::size_t requested) {
  if (requested == 0) return std::max(1u, std::thread::hardware_concurrency());
  return requested;
}

// Positive-class probability for each centre. Batches are cut the same way
// whatever the thread count, so results do not depend on it.
std::vector<float> classify_centres(const GrayImage& image, const std::vector<Pixel>& centres,
                                    const arch::NetworkWeights<float>& weights, std::size_t batch,
                                    std::size_t threads) {
  const std::size_t n = weights.spec.patch_size;
  const std::size_t count = centres.size();
  const std::size_t batches = (count + batch - 1) / batch;
  std::vector<float> out(count);
  auto run_batch = [&](std::size_t b) {
    const std::size_t start = b * batch;
    const std::size_t size = std::min(batch, count - start);
    nn::TensorF patches({size, 1, n, n});
    for (std::size_t i = 0; i < size; ++i) {
      imaging::extract_patch_into(image, centres[start + i], n, patches.data() + i * n * n);
    }
    const nn::TensorF probs = arch::predict(weights, patches);
    for (std::size_t i = 0; i < size; ++i) out[start + i] = probs(i, data::kPositiveColumn);
  };

  const std::size_t workers = std::min(worker_count(threads), batches);
  if (workers <= 1) {
    for (std::size_t b = 0; b < batches; ++b) run_batch(b);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t b = w; b < batches; b += workers) run_batch(b);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// Summed-area table over a mask, for per-tile foreground counts.
std::vector<std::size_t> integral(const BinaryMask& mask) {
  const std::size_t w = mask.width(), h = mask.height();
  std::vector<std::size_t> t((w + 1) * (h + 1), 0);
  for (std::size_t y = 0; y < h; ++y) {
    std::size_t row = 0;
    for (std::size_t x = 0; x < w; ++x) {
      row += mask.at(x, y);
      t[(y + 1) * (w + 1) + x + 1] = t[y * (w + 1) + x + 1] + row;
    }
  }
  return t;
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(skip_background_fraction >= 0.0 && skip_background_fraction <= 1.0)) {
    throw std::invalid_argument("skip fraction must lie in [0, 1]");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("threshold must lie in (0, 1)");
  if (batch == 0) throw std::invalid_argument("batch must be positive");
}

double PipelineStats::patches_per_second() const noexcept {
  const double t = detector_seconds + segmentator_seconds;
  return t > 0.0 ? static_cast<double>(evaluations()) / t : 0.0;
}

RoiSet run_detector(const GrayImage& image, const arch::NetworkWeights<double>& detector, std::size_t n,
                    const PipelineConfig& config) {
  config.validate();
  check_inputs(image, detector, n, "detector");
  const imaging::TileGrid grid = imaging::tile_image(image, n);
  const imaging::OtsuResult otsu = imaging::otsu_threshold(image);
  const BinaryMask foreground = imaging::threshold_mask(image, otsu.threshold);
  const auto table = integral(foreground);
  const std::size_t w1 = image.width() + 1;

  RoiSet out;
  out.patch_size = n;
  out.tiles_total = grid.origins.size();
  std::vector<Pixel> kept, centres;
  const double area = static_cast<double>(n * n);
  for (const Pixel& o : grid.origins) {
    const std::size_t x1 = o.x + n, y1 = o.y + n;
    const std::size_t fg = table[y1 * w1 + x1] + table[o.y * w1 + o.x] - table[o.y * w1 + x1] - table[y1 * w1 + o.x];
    const double background = 1.0 - static_cast<double>(fg) / area;
    if (background > config.skip_background_fraction) continue;
    kept.push_back(o);
    centres.push_back({o.x + n / 2, o.y + n / 2});
  }
  out.tiles_evaluated = kept.size();
  if (kept.empty()) return out;

  const auto probs = classify_centres(image, centres, detector.cast<float>(), config.batch, config.threads);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (probs[i] >= config.threshold) out.rois.push_back({kept[i], probs[i]});
  }
  return out;
}

SegmentationResult run_segmentator(const GrayImage& image, const RoiSet& rois,
                                   const arch::NetworkWeights<double>& segmentator, std::size_t n,
                                   const PipelineConfig& config) {
  config.validate();
  check_inputs(image, segmentator, n, "segmentator");
  SegmentationResult out{std::vector<float>(image.width() * image.height(), 0.0f),
                         BinaryMask(image.width(), image.height()), BinaryMask(image.width(), image.height()), 0};
  for (const Roi& roi : rois.rois) {
    const Box b = rois.box(roi);
    if (b.x1 > image.width() || b.y1 > image.height()) throw std::invalid_argument("ROI outside the image");
    for (std::size_t y = b.y0; y < b.y1; ++y)
      for (std::size_t x = b.x0; x < b.x1; ++x) out.evaluated.set(x, y, true);
  }
  std::vector<Pixel> centres;
  centres.reserve(out.evaluated.popcount());
  for (std::size_t y = 0; y < image.height(); ++y)
    for (std::size_t x = 0; x < image.width(); ++x)
      if (out.evaluated.at(x, y)) centres.push_back({x, y});
  if (centres.empty()) return out;

  const auto probs = classify_centres(image, centres, segmentator.cast<float>(), config.batch, config.threads);
  out.evaluations = centres.size();
  for (std::size_t i = 0; i < centres.size(); ++i) {
    const Pixel& p = centres[i];
    out.probability[p.y * image.width() + p.x] = probs[i];
    out.mask.set(p.x, p.y, probs[i] >= config.threshold);
  }
  return out;
}

imaging::ClusterReport report_from_mask(const BinaryMask& mask, double spacing_mm,
                                        const imaging::ClusterConfig& config) {
  return imaging::detect_clusters(imaging::connected_components(mask), spacing_mm, config);
}

PipelineResult run_pipeline(const GrayImage& image, const arch::NetworkWeights<double>& detector,
                            const arch::NetworkWeights<double>& segmentator, std::size_t n,
                            const PipelineConfig& config) {
  const auto start = Clock::now();
  PipelineResult out;
  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const PipelineError&) {
      throw;
    } catch (const std::exception& e) {
      throw PipelineError(name, e.what());
    }
  };

  auto t = Clock::now();
  out.rois = stage("detector", [&] { return run_detector(image, detector, n, config); });
  out.stats.detector_seconds = seconds_since(t);
  out.stats.detector_evaluations = out.rois.tiles_evaluated;

  t = Clock::now();
  out.segmentation = stage("segmentator", [&] { return run_segmentator(image, out.rois, segmentator, n, config); });
  out.stats.segmentator_seconds = seconds_since(t);
  out.stats.segmentator_evaluations = out.segmentation.evaluations;

  const imaging::LabeledRegions labels =
      stage("labeling", [&] { return imaging::connected_components(out.segmentation.mask); });
  out.report = stage("clustering", [&] { return imaging::detect_clusters(labels, image.spacing_mm(), config.clusters); });
  out.stats.total_seconds = seconds_since(start);
  return out;
}

PipelineResult run_pipeline(const GrayImage& image, const std::filesystem::path& detector_path,
                            const std::filesystem::path& segmentator_path, std::size_t n,
                            const PipelineConfig& config) {
  arch::NetworkWeights<double> detector, segmentator;
  try {
    detector = arch::load_weights(detector_path);
    segmentator = arch::load_weights(segmentator_path);
  } catch (const std::exception& e) {
    throw PipelineError("load", e.what());
  }
  return run_pipeline(image, detector, segmentator, n, config);
}

imaging::RgbImage render_overlay(const GrayImage& image, const BinaryMask& mask, const imaging::ClusterReport& report) {
  imaging::require_same_size(image, mask);
  const std::size_t w = image.width(), h = image.height();
  imaging::RgbImage out(w, h);
  const double scale = 255.0 / static_cast<double>(image.max_value());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (mask.at(x, y)) {
        out.at(x, y) = kMcTint;
      } else {
        const auto v = static_cast<std::uint8_t>(std::lround(image.at(x, y) * scale));
        out.at(x, y) = {v, v, v};
      }
    }
  }
  for (const imaging::ClusterRegion& region : report.regions) {
    const Box& b = region.box;
    if (b.x1 > w || b.y1 > h || b.width() == 0 || b.height() == 0) {
      throw std::invalid_argument("cluster box outside the image");
    }
    for (std::size_t x = b.x0; x < b.x1; ++x) {
      out.at(x, b.y0) = kClusterOutline;
      out.at(x, b.y1 - 1) = kClusterOutline;
    }
    for (std::size_t y = b.y0; y < b.y1; ++y) {
      out.at(b.x0, y) = kClusterOutline;
      out.at(b.x1 - 1, y) = kClusterOutline;
    }
  }
  return out;
}

}  // namespace mcseg::pipeline
