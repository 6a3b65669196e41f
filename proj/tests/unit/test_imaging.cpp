#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "mcseg/imaging/clusters.hpp"
#include "mcseg/imaging/components.hpp"
#include "mcseg/imaging/netpbm.hpp"
#include "mcseg/imaging/otsu.hpp"
#include "mcseg/imaging/patch.hpp"
#include "mcseg/imaging/phantom.hpp"
#include "mcseg/imaging/tiling.hpp"
#include "oracles.hpp"

using namespace mcseg::imaging;
namespace fs = std::filesystem;

namespace {

GrayImage random_image(std::size_t w, std::size_t h, std::uint64_t seed, unsigned levels = 256,
                       std::uint16_t max_value = 255) {
  GrayImage img(w, h, max_value);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<unsigned> pick(0, levels - 1);
  for (auto& v : img.pixels()) v = static_cast<std::uint16_t>(pick(rng) * (max_value / (levels - 1)));
  return img;
}

BinaryMask random_mask(std::size_t w, std::size_t h, std::uint64_t seed, double density) {
  BinaryMask m(w, h);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(density);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) m.set(x, y, b(rng));
  return m;
}

// Dihedral transform k of a square mask (k % 4 quarter turns, mirrored for k >= 4).
BinaryMask transform_mask(const BinaryMask& m, int k) {
  const std::size_t n = m.width();
  BinaryMask out(n, n);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      std::size_t sx = k >= 4 ? n - 1 - x : x, sy = y;
      for (int r = 0; r < k % 4; ++r) {
        const std::size_t t = sx;
        sx = sy;
        sy = n - 1 - t;
      }
      out.set(x, y, m.at(sx, sy));
    }
  }
  return out;
}

Component centroid_at(double x, double y) {
  Component c;
  c.area = 1;
  c.centroid_x = x;
  c.centroid_y = y;
  return c;
}

std::vector<Component> group(double cx, double cy, int count) {
  std::vector<Component> out;
  for (int i = 0; i < count; ++i) out.push_back(centroid_at(cx + 7.0 * (i % 3), cy + 9.0 * (i / 3)));
  return out;
}

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("mcseg_imaging_" + name); }

}  // namespace

TEST_CASE("otsu splits a two-level image at the lower level") {
  GrayImage img(40, 25);
  for (std::size_t i = 500; i < 1000; ++i) img.pixels()[i] = 255;
  const OtsuResult r = otsu_threshold(img);
  CHECK_FALSE(r.degenerate);
  CHECK(r.threshold == 0);
  CHECK(threshold_mask(img, r.threshold).popcount() == 500);
  CHECK(mcseg::testing::otsu_oracle(img) == std::optional<std::uint16_t>{0});
}

TEST_CASE("otsu flags a constant image") {
  const GrayImage img(8, 8, 255, 0.05, 77);
  const OtsuResult r = otsu_threshold(img);
  CHECK(r.degenerate);
  CHECK(r.threshold == 77);
  CHECK(threshold_mask(img, r.threshold).popcount() == 0);
}

TEST_CASE("otsu matches the exhaustive oracle") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    CAPTURE(seed);
    const unsigned levels = seed % 4 == 0 ? 3 + seed % 7 : 256;  // few levels exercise ties
    const GrayImage img = random_image(32, 32, seed, levels);
    const auto expected = mcseg::testing::otsu_oracle(img);
    REQUIRE(expected.has_value());
    CHECK(otsu_threshold(img).threshold == *expected);
  }
  SUBCASE("16-bit") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const GrayImage img = random_image(16, 16, seed + 1000, 40, 65535);
      CHECK(otsu_threshold(img).threshold == *mcseg::testing::otsu_oracle(img));
    }
  }
}

TEST_CASE("tile origins follow the clamping rule") {
  CHECK(axis_origins(98, 49) == std::vector<std::size_t>{0, 24, 48, 49});
  const TileGrid g = tile_image(98, 98, 49);
  CHECK(g.stride == 24);
  CHECK(g.origins.size() == 16);
  const TileGrid one = tile_image(49, 49, 49);
  REQUIRE(one.origins.size() == 1);
  CHECK(one.origins[0] == Pixel{0, 0});
  CHECK(axis_origins(96, 48) == std::vector<std::size_t>{0, 24, 48});
  CHECK_THROWS_AS(tile_image(40, 60, 49), std::invalid_argument);
}

TEST_CASE("tiles cover every pixel and stay inside the image") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 3 + 2 * (rng() % 25);
    const std::size_t w = n + rng() % 150, h = n + rng() % 150;
    CAPTURE(n);
    CAPTURE(w);
    CAPTURE(h);
    const TileGrid g = tile_image(w, h, n);
    for (std::size_t i = 0; i < g.origins.size(); ++i) {
      CHECK(g.tile(i).x1 <= w);
      CHECK(g.tile(i).y1 <= h);
    }
    std::set<Pixel> unique(g.origins.begin(), g.origins.end());
    CHECK(unique.size() == g.origins.size());
    const auto cover = mcseg::testing::tile_coverage(g, w, h);
    bool all = true, interior = true;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        all = all && cover[y * w + x] >= 1;
        if (x >= n && y >= n && x + n < w && y + n < h) interior = interior && cover[y * w + x] >= 4;
      }
    }
    CHECK(all);
    CHECK(interior);
  }
}

TEST_CASE("reflect_index mirrors without repeating the edge") {
  CHECK(reflect_index(-1, 5) == 1);
  CHECK(reflect_index(-2, 5) == 2);
  CHECK(reflect_index(5, 5) == 3);
  CHECK(reflect_index(6, 5) == 2);
  CHECK(reflect_index(3, 5) == 3);
  CHECK(reflect_index(-7, 3) == 1);
  CHECK(reflect_index(4, 1) == 0);
}

TEST_CASE("extract_patch crops the interior and reflects at borders") {
  const GrayImage img = random_image(20, 17, 3);
  const auto p = extract_patch<double>(img, {10, 8}, 5);
  REQUIRE(p.shape() == mcseg::nn::Shape{1, 5, 5});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(p[i * 5 + j] == img.at(8 + j, 6 + i) / 255.0);

  const auto corner = extract_patch<double>(img, {0, 0}, 5);
  for (std::ptrdiff_t dy = -2; dy <= 2; ++dy) {
    for (std::ptrdiff_t dx = -2; dx <= 2; ++dx) {
      const std::size_t sx = static_cast<std::size_t>(std::abs(dx)), sy = static_cast<std::size_t>(std::abs(dy));
      CHECK(corner[static_cast<std::size_t>((dy + 2) * 5 + dx + 2)] == img.at(sx, sy) / 255.0);
    }
  }
  CHECK(extract_patch<float>(img, {19, 16}, 7).size() == 49);
  CHECK_THROWS_AS(extract_patch<double>(img, {20, 0}, 5), std::invalid_argument);
  CHECK_THROWS_AS(extract_patch<double>(img, {3, 3}, 4), std::invalid_argument);
}

TEST_CASE("connected components on small shapes") {
  BinaryMask plus(7, 7);
  for (std::size_t i = 1; i < 6; ++i) {
    plus.set(3, i);
    plus.set(i, 3);
  }
  const LabeledRegions r = connected_components(plus);
  REQUIRE(r.components.size() == 1);
  CHECK(r.components[0].area == 9);
  CHECK(r.components[0].centroid_x == doctest::Approx(3.0));
  CHECK(r.components[0].centroid_y == doctest::Approx(3.0));
  CHECK(r.components[0].bounds == Box{1, 1, 6, 6});

  BinaryMask diag(4, 4);
  diag.set(1, 1);
  diag.set(2, 2);
  CHECK(connected_components(diag).components.size() == 1);

  BinaryMask apart(5, 1);
  apart.set(0, 0);
  apart.set(2, 0);
  apart.set(4, 0);
  const LabeledRegions three = connected_components(apart);
  CHECK(three.components.size() == 3);
  CHECK(three.at(4, 0) == 3);

  // A U shape whose arms only meet at the bottom.
  BinaryMask u(5, 4);
  for (std::size_t y = 0; y < 4; ++y) {
    u.set(0, y);
    u.set(4, y);
  }
  for (std::size_t x = 0; x < 5; ++x) u.set(x, 3);
  CHECK(connected_components(u).components.size() == 1);
}

TEST_CASE("connected components agree with flood fill") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const BinaryMask m = random_mask(24, 24, seed, 0.15 + 0.4 * static_cast<double>(seed % 5) / 5.0);
    const LabeledRegions r = connected_components(m);
    CAPTURE(seed);
    CHECK(mcseg::testing::same_partition(r.labels, mcseg::testing::flood_fill_labels(m)));

    std::size_t area = 0;
    std::set<std::uint32_t> labels;
    for (std::uint32_t l : r.labels)
      if (l != 0) labels.insert(l);
    for (const Component& c : r.components) area += c.area;
    CHECK(area == m.popcount());
    CHECK(labels.size() == r.components.size());
    if (!labels.empty()) CHECK(*labels.rbegin() == r.components.size());

    for (int k = 1; k < 8; ++k) CHECK(connected_components(transform_mask(m, k)).components.size() == r.components.size());
  }
}

TEST_CASE("cluster rule counts strictly more than five per square centimetre") {
  CHECK(cluster_window_px(0.05) == 200);
  CHECK(cluster_window_px(0.1) == 100);

  const auto six = detect_clusters(group(300, 300, 6), 1000, 1000, 0.05);
  REQUIRE(six.regions.size() == 1);
  CHECK(six.regions[0].members.size() == 6);

  CHECK(detect_clusters(group(300, 300, 5), 1000, 1000, 0.05).regions.empty());

  auto two = group(150, 150, 6);
  const auto far = group(650, 150, 6);
  two.insert(two.end(), far.begin(), far.end());
  const auto report = detect_clusters(two, 1000, 1000, 0.05);
  REQUIRE(report.regions.size() == 2);
  CHECK_FALSE(report.regions[0].box.overlaps(report.regions[1].box));

  ClusterConfig at_least_five;
  at_least_five.more_than = 4;
  CHECK(detect_clusters(group(300, 300, 5), 1000, 1000, 0.05, at_least_five).regions.size() == 1);
}

TEST_CASE("cluster count is translation equivariant") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const double dx = static_cast<double>(rng() % 300), dy = static_cast<double>(rng() % 300);
    auto base = group(250, 250, 6 + static_cast<int>(trial % 3));
    auto second = group(750, 300, 6);
    base.insert(base.end(), second.begin(), second.end());
    auto shifted = base;
    for (Component& c : shifted) {
      c.centroid_x += dx;
      c.centroid_y += dy;
    }
    CHECK(detect_clusters(base, 1400, 1400, 0.05).regions.size() ==
          detect_clusters(shifted, 1400, 1400, 0.05).regions.size());
  }
}

TEST_CASE("every reported cluster holds more than five centroids") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> pos(0.0, 600.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Component> pts;
    for (int i = 0; i < 40; ++i) pts.push_back(centroid_at(pos(rng), pos(rng)));
    const auto report = detect_clusters(pts, 600, 600, 0.05);
    for (const ClusterRegion& r : report.regions) CHECK(r.members.size() > 5);
  }
}

TEST_CASE("phantom generation") {
  PhantomConfig cfg;
  cfg.seed = 11;
  const Phantom a = generate_phantom(cfg);
  const Phantom b = generate_phantom(cfg);
  CHECK(a.image == b.image);
  CHECK(a.mask == b.mask);

  std::size_t planted = 0;
  for (const PlantedMc& mc : a.truth.mcs) planted += mc.area;
  CHECK(a.mask.popcount() == planted);
  CHECK(a.truth.mcs.size() == cfg.clusters * cfg.mcs_per_cluster + cfg.scattered_mcs);

  // Each planted MC is exactly one connected component.
  const LabeledRegions regions = connected_components(a.mask);
  CHECK(regions.components.size() == a.truth.mcs.size());

  // Mask pixels clear the smooth background by the margin.
  for (std::size_t y = 0; y < a.image.height(); ++y) {
    for (std::size_t x = 0; x < a.image.width(); ++x) {
      if (a.mask.at(x, y)) CHECK(a.image.at(x, y) >= a.background[y * a.image.width() + x] + cfg.margin * 255.0);
    }
  }

  // Otsu separates tissue from the dark border and keeps every MC in the foreground.
  const BinaryMask fg = threshold_mask(a.image, otsu_threshold(a.image).threshold);
  CHECK(a.image.at(a.image.width() - 1, 0) <= otsu_threshold(a.image).threshold);
  for (std::size_t y = 0; y < a.image.height(); ++y)
    for (std::size_t x = 0; x < a.image.width(); ++x)
      if (a.mask.at(x, y)) CHECK(fg.at(x, y));

  cfg.seed = 12;
  CHECK_FALSE(generate_phantom(cfg).image == a.image);
}

TEST_CASE("planted clusters are recovered from the ground-truth mask") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    PhantomConfig cfg;
    cfg.seed = seed;
    cfg.mcs_per_cluster = 6;
    cfg.scattered_mcs = 0;
    const Phantom p = generate_phantom(cfg);
    const ClusterReport report = detect_clusters(connected_components(p.mask), cfg.spacing_mm);
    REQUIRE(report.regions.size() == 1);
    const PlantedCluster& truth = p.truth.clusters.at(0);
    CHECK(report.regions[0].box.overlaps(truth.bounds));
    CHECK(report.regions[0].members.size() == 6);
  }
  PhantomConfig big;
  big.width = big.height = 800;
  big.clusters = 2;
  big.seed = 4;
  const Phantom p = generate_phantom(big);
  CHECK(detect_clusters(connected_components(p.mask), big.spacing_mm).regions.size() == 2);
}

TEST_CASE("phantom rejects bad configurations") {
  PhantomConfig small;
  small.width = 128;
  CHECK_THROWS_AS(generate_phantom(small), std::invalid_argument);

  PhantomConfig tiny_mc;
  tiny_mc.mc_diameter_min = 1.0;
  CHECK_THROWS_AS(generate_phantom(tiny_mc), std::invalid_argument);

  PhantomConfig crowded;
  crowded.scattered_mcs = 400;
  CHECK_THROWS_AS(generate_phantom(crowded), PhantomError);

  PhantomConfig two_clusters;  // two 1 cm clusters cannot both fit in 256 px
  two_clusters.clusters = 2;
  CHECK_THROWS_AS(generate_phantom(two_clusters), PhantomError);
}

TEST_CASE("16-bit phantoms keep the same structure") {
  PhantomConfig cfg;
  cfg.max_value = 65535;
  cfg.seed = 3;
  const Phantom p = generate_phantom(cfg);
  CHECK(p.image.max_value() == 65535);
  PhantomConfig eight = cfg;
  eight.max_value = 255;
  CHECK(generate_phantom(eight).mask == p.mask);
}

TEST_CASE("netpbm round trips") {
  const GrayImage img8 = random_image(13, 7, 1);
  write_pgm(img8, temp_path("a.pgm"));
  CHECK(read_pgm(temp_path("a.pgm")) == img8);

  const GrayImage img16 = random_image(5, 9, 2, 1000, 65535);
  write_pgm(img16, temp_path("b.pgm"));
  CHECK(read_pgm(temp_path("b.pgm")) == img16);
  {
    // 16-bit samples are big-endian.
    std::ifstream in(temp_path("b.pgm"), std::ios::binary);
    std::string header;
    std::getline(in, header);
    std::getline(in, header);
    std::getline(in, header);
    const int hi = in.get(), lo = in.get();
    CHECK(((hi << 8) | lo) == img16.pixels()[0]);
  }

  const BinaryMask mask = random_mask(11, 6, 3, 0.3);
  write_mask_pgm(mask, temp_path("m.pgm"));
  CHECK(read_mask_pgm(temp_path("m.pgm")) == mask);

  RgbImage rgb(3, 2);
  rgb.at(1, 1) = {10, 200, 30};
  write_ppm(rgb, temp_path("c.ppm"));
  CHECK(read_ppm(temp_path("c.ppm")) == rgb);

  PhantomConfig cfg;
  cfg.seed = 8;
  const Phantom p = generate_phantom(cfg);
  write_sidecar(p.truth, temp_path("truth.txt"));
  const PhantomTruth back = read_sidecar(temp_path("truth.txt"));
  REQUIRE(back.mcs.size() == p.truth.mcs.size());
  REQUIRE(back.clusters.size() == p.truth.clusters.size());
  CHECK(back.clusters[0].bounds == p.truth.clusters[0].bounds);
  CHECK(back.clusters[0].members == p.truth.clusters[0].members);
  CHECK(back.mcs[3].area == p.truth.mcs[3].area);
}

TEST_CASE("netpbm rejects malformed files") {
  {
    std::ofstream out(temp_path("bad.pgm"), std::ios::binary);
    out << "P2\n2 2\n255\n0 0 0 0";
  }
  CHECK_THROWS_AS(read_pgm(temp_path("bad.pgm")), ImageIoError);
  {
    std::ofstream out(temp_path("short.pgm"), std::ios::binary);
    out << "P5\n# comment\n4 4\n255\n" << std::string(10, 'x');
  }
  CHECK_THROWS_AS(read_pgm(temp_path("short.pgm")), ImageIoError);
  CHECK_THROWS_AS(read_pgm(temp_path("missing.pgm")), ImageIoError);
}
