#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <random>

#include "mcseg/arch/weights_io.hpp"
#include "mcseg/imaging/otsu.hpp"
#include "mcseg/imaging/phantom.hpp"
#include "mcseg/imaging/tiling.hpp"
#include "mcseg/pipeline/pipeline.hpp"
#include "synthetic.hpp"

using namespace mcseg::pipeline;
using mcseg::imaging::Rgb;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kN = 9;

mcseg::imaging::Phantom phantom(std::uint64_t seed) {
  mcseg::imaging::PhantomConfig cfg;
  cfg.seed = seed;
  return mcseg::imaging::generate_phantom(cfg);
}

mcseg::arch::NetworkWeights<double> net(std::uint64_t seed) {
  return mcseg::arch::build_network(mcseg::testing::miniature_spec(kN), seed);
}

// Tiles whose background share is at most the skip fraction, counted pixel by pixel.
std::size_t kept_tiles_oracle(const GrayImage& image, std::size_t n, double skip) {
  const auto t = mcseg::imaging::otsu_threshold(image).threshold;
  const auto grid = mcseg::imaging::tile_image(image, n);
  std::size_t kept = 0;
  for (const auto& o : grid.origins) {
    std::size_t bg = 0;
    for (std::size_t y = o.y; y < o.y + n; ++y)
      for (std::size_t x = o.x; x < o.x + n; ++x) bg += image.at(x, y) <= t;
    kept += static_cast<double>(bg) / static_cast<double>(n * n) <= skip;
  }
  return kept;
}

RoiSet overlapping_rois() {
  RoiSet set;
  set.patch_size = kN;
  set.rois = {{{10, 10}, 0.9}, {{14, 12}, 0.8}, {{40, 40}, 0.7}, {{13, 10}, 0.6}};
  return set;
}

}  // namespace

TEST_CASE("detector skips background tiles") {
  SUBCASE("constant image") {
    const GrayImage flat(64, 64, 255, 0.05, 30);
    const RoiSet rois = run_detector(flat, net(1), kN);
    CHECK(rois.rois.empty());
    CHECK(rois.tiles_evaluated == 0);
    CHECK(rois.tiles_total == mcseg::imaging::tile_image(flat, kN).origins.size());
  }
  SUBCASE("phantoms") {
    for (std::uint64_t s = 0; s < 3; ++s) {
      const auto p = phantom(s);
      PipelineConfig cfg;
      const RoiSet rois = run_detector(p.image, net(s), kN, cfg);
      CHECK(rois.tiles_evaluated <= rois.tiles_total);
      CHECK(rois.tiles_evaluated < rois.tiles_total);  // the phantom has a dark border
      CHECK(rois.tiles_evaluated == kept_tiles_oracle(p.image, kN, cfg.skip_background_fraction));
      CHECK(rois.rois.size() <= rois.tiles_evaluated);
      for (const Roi& r : rois.rois) {
        CHECK(r.probability >= 0.5);
        CHECK(r.probability <= 1.0);
        CHECK(r.origin.x + kN <= p.image.width());
        CHECK(r.origin.y + kN <= p.image.height());
      }
    }
  }
  SUBCASE("skip fraction 1 keeps every tile") {
    const auto p = phantom(0);
    PipelineConfig cfg;
    cfg.skip_background_fraction = 1.0;
    const RoiSet rois = run_detector(p.image, net(0), kN, cfg);
    CHECK(rois.tiles_evaluated == rois.tiles_total);
  }
}

TEST_CASE("inputs are checked") {
  const auto p = phantom(0);
  CHECK_THROWS_AS(run_detector(p.image, net(0), 11), std::invalid_argument);
  const GrayImage small(8, 20);
  CHECK_THROWS_AS(run_detector(small, net(0), kN), std::invalid_argument);
  PipelineConfig bad;
  bad.threshold = 1.0;
  CHECK_THROWS_AS(run_detector(p.image, net(0), kN, bad), std::invalid_argument);
  RoiSet outside;
  outside.patch_size = kN;
  outside.rois = {{{250, 0}, 0.9}};
  CHECK_THROWS_AS(run_segmentator(p.image, outside, net(0), kN), std::invalid_argument);
}

TEST_CASE("segmentator evaluates each ROI pixel once") {
  const auto p = phantom(2);
  const auto seg = net(3);
  SUBCASE("empty ROI set") {
    RoiSet none;
    none.patch_size = kN;
    const auto r = run_segmentator(p.image, none, seg, kN);
    CHECK(r.mask.popcount() == 0);
    CHECK(r.evaluated.popcount() == 0);
    CHECK(r.evaluations == 0);
  }
  SUBCASE("overlapping ROIs") {
    RoiSet rois = overlapping_rois();
    const auto a = run_segmentator(p.image, rois, seg, kN);
    // union area: 9x9 at (10,10) U (14,12) U (13,10) plus the separate (40,40)
    mcseg::imaging::BinaryMask expect(p.image.width(), p.image.height());
    for (const Roi& r : rois.rois)
      for (std::size_t y = r.origin.y; y < r.origin.y + kN; ++y)
        for (std::size_t x = r.origin.x; x < r.origin.x + kN; ++x) expect.set(x, y, true);
    CHECK(a.evaluated == expect);
    CHECK(a.evaluations == expect.popcount());

    std::mt19937_64 rng(5);
    for (int k = 0; k < 4; ++k) {
      std::shuffle(rois.rois.begin(), rois.rois.end(), rng);
      CHECK(run_segmentator(p.image, rois, seg, kN) == a);
    }
    PipelineConfig threaded;
    threaded.threads = 3;
    threaded.batch = 16;
    PipelineConfig serial = threaded;
    serial.threads = 1;
    CHECK(run_segmentator(p.image, rois, seg, kN, threaded) == run_segmentator(p.image, rois, seg, kN, serial));

    for (std::size_t y = 0; y < p.image.height(); ++y) {
      for (std::size_t x = 0; x < p.image.width(); ++x) {
        const float prob = a.probability[y * p.image.width() + x];
        if (a.mask.at(x, y)) {
          CHECK(a.evaluated.at(x, y));
          CHECK(prob >= 0.5f);
        }
        if (!a.evaluated.at(x, y)) CHECK(prob == 0.0f);
      }
    }
  }
}

TEST_CASE("pipeline output is deterministic and stays inside the ROIs") {
  const auto p = phantom(4);
  const auto det = net(10), seg = net(11);
  PipelineConfig cfg;
  cfg.batch = 64;
  const PipelineResult a = run_pipeline(p.image, det, seg, kN, cfg);
  cfg.threads = 2;
  const PipelineResult b = run_pipeline(p.image, det, seg, kN, cfg);
  CHECK(a.rois == b.rois);
  CHECK(a.segmentation == b.segmentation);
  CHECK(mcseg::imaging::format_report(a.report) == mcseg::imaging::format_report(b.report));

  mcseg::imaging::BinaryMask roi_union(p.image.width(), p.image.height());
  for (const Roi& r : a.rois.rois) {
    const Box box = a.rois.box(r);
    for (std::size_t y = box.y0; y < box.y1; ++y)
      for (std::size_t x = box.x0; x < box.x1; ++x) roi_union.set(x, y, true);
  }
  for (std::size_t y = 0; y < p.image.height(); ++y)
    for (std::size_t x = 0; x < p.image.width(); ++x)
      if (a.segmentation.mask.at(x, y)) CHECK(roi_union.at(x, y));

  CHECK(a.stats.detector_evaluations == a.rois.tiles_evaluated);
  CHECK(a.stats.segmentator_evaluations == roi_union.popcount());
  CHECK(a.stats.evaluations() == a.rois.tiles_evaluated + roi_union.popcount());
  for (const auto& region : a.report.regions) CHECK(region.members.size() > 5);
}

TEST_CASE("ground-truth mask through labeling and clustering reproduces the planted clusters") {
  for (std::uint64_t s = 0; s < 8; ++s) {
    const auto p = phantom(s);
    const auto labels = mcseg::imaging::connected_components(p.mask);
    const auto report = report_from_mask(p.mask, p.image.spacing_mm());
    REQUIRE(report.regions.size() == p.truth.clusters.size());
    for (std::size_t c = 0; c < p.truth.clusters.size(); ++c) {
      std::vector<std::size_t> planted;
      for (std::size_t m : p.truth.clusters[c].members) {
        const auto& seed = p.truth.mcs[m].seed;
        planted.push_back(labels.at(seed.x, seed.y) - 1);
      }
      std::sort(planted.begin(), planted.end());
      bool found = false;
      for (const auto& region : report.regions) {
        std::vector<std::size_t> members = region.members;
        std::sort(members.begin(), members.end());
        found = found || std::includes(members.begin(), members.end(), planted.begin(), planted.end());
      }
      CHECK(found);
    }
  }
}

TEST_CASE("stage failures name the stage") {
  const auto p = phantom(0);
  try {
    (void)run_pipeline(p.image, net(0), mcseg::arch::build_network(mcseg::testing::miniature_spec(11), 0), kN);
    FAIL("expected PipelineError");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "segmentator");
  }
  try {
    (void)run_pipeline(p.image, mcseg::arch::build_network(mcseg::testing::miniature_spec(11), 0), net(0), kN);
    FAIL("expected PipelineError");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "detector");
  }
  try {
    (void)run_pipeline(p.image, fs::path("/nonexistent/det.bin"), fs::path("/nonexistent/seg.bin"), kN);
    FAIL("expected PipelineError");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "load");
  }

  const fs::path dir = fs::temp_directory_path() / "mcseg_pipeline_test";
  fs::create_directories(dir);
  mcseg::arch::save_weights(net(1), dir / "det.bin");
  mcseg::arch::save_weights(net(2), dir / "seg.bin");
  const auto from_files = run_pipeline(p.image, dir / "det.bin", dir / "seg.bin", kN);
  const auto in_memory = run_pipeline(p.image, net(1), net(2), kN);
  CHECK(from_files.segmentation == in_memory.segmentation);
  fs::remove_all(dir);
}

TEST_CASE("overlay rendering") {
  const auto p = phantom(1);
  const mcseg::imaging::BinaryMask empty(p.image.width(), p.image.height());
  const mcseg::imaging::ClusterReport none;
  const auto base = render_overlay(p.image, empty, none);
  for (std::size_t y = 0; y < p.image.height(); ++y) {
    for (std::size_t x = 0; x < p.image.width(); ++x) {
      const auto v = static_cast<std::uint8_t>(p.image.at(x, y));  // 8-bit image: identity scale
      CHECK(base.at(x, y) == Rgb{v, v, v});
    }
  }

  const auto report = report_from_mask(p.mask, p.image.spacing_mm());
  REQUIRE_FALSE(report.regions.empty());
  const auto overlay = render_overlay(p.image, p.mask, report);
  for (const auto& region : report.regions) {
    const Box& b = region.box;
    CHECK(overlay.at(b.x0, b.y0) == kClusterOutline);
    CHECK(overlay.at(b.x1 - 1, b.y0) == kClusterOutline);
    CHECK(overlay.at(b.x0, b.y1 - 1) == kClusterOutline);
    CHECK(overlay.at(b.x1 - 1, b.y1 - 1) == kClusterOutline);
  }
  std::size_t tinted = 0;
  for (std::size_t y = 0; y < p.image.height(); ++y) {
    for (std::size_t x = 0; x < p.image.width(); ++x) {
      bool on_box = false;
      for (const auto& region : report.regions) {
        const Box& b = region.box;
        on_box = on_box || ((x == b.x0 || x + 1 == b.x1) && y >= b.y0 && y < b.y1) ||
                 ((y == b.y0 || y + 1 == b.y1) && x >= b.x0 && x < b.x1);
      }
      if (p.mask.at(x, y) && !on_box) {
        CHECK(overlay.at(x, y) == kMcTint);
        ++tinted;
      }
    }
  }
  CHECK(tinted > 0);
  CHECK(render_overlay(p.image, p.mask, report) == overlay);

  const mcseg::imaging::BinaryMask wrong(10, 10);
  CHECK_THROWS_AS(render_overlay(p.image, wrong, none), std::invalid_argument);
}
