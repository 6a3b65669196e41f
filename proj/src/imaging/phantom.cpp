#include "mcseg/imaging/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "mcseg/imaging/clusters.hpp"
#include "mcseg/nn/random.hpp"

namespace mcseg::imaging {

namespace {

// Independent RNG streams so changing one feature leaves the others intact.
enum Stream : std::uint64_t { kBlobs = 1, kPlacement = 2, kShapes = 3, kNoise = 4 };

constexpr int kHaloPx = 3;  // soft intensity tail beyond the mask edge

struct Tissue {
  double a, b, cy;  // ellipse semi-axes, chest wall along x = 0
  double radius(double x, double y) const { return std::hypot(x / a, (y - cy) / b); }
  double weight(double x, double y) const {
    const double t = std::clamp((1.0 - radius(x, y)) / 0.05, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
  }
};

// One MC footprint: mask offsets and a normalized intensity profile on a
// (2R+1)^2 grid around the seed pixel.
struct Blob {
  int reach = 0;
  std::vector<double> profile;            // row-major, peak 1
  std::vector<std::pair<int, int>> mask;  // (dx, dy)
  double at(int dx, int dy) const { return profile[(dy + reach) * (2 * reach + 1) + (dx + reach)]; }
};

Blob make_blob(double diameter, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = diameter / 2.0;
  Blob blob;
  blob.reach = static_cast<int>(std::ceil(r)) + kHaloPx;
  const int side = 2 * blob.reach + 1;

  struct Lobe {
    double x, y, sigma, weight;
  };
  std::vector<Lobe> lobes(1 + static_cast<std::size_t>(u(rng) * 3.0) % 3);
  for (Lobe& l : lobes) {
    const double ang = 2.0 * std::numbers::pi * u(rng);
    const double off = 0.35 * r * std::sqrt(u(rng));
    l = {off * std::cos(ang), off * std::sin(ang), r / std::sqrt(2.0 * std::numbers::ln2) * (0.6 + 0.4 * u(rng)),
         0.6 + 0.4 * u(rng)};
  }
  blob.profile.assign(static_cast<std::size_t>(side * side), 0.0);
  double peak = 0.0;
  int peak_dx = 0, peak_dy = 0;
  for (int dy = -blob.reach; dy <= blob.reach; ++dy) {
    for (int dx = -blob.reach; dx <= blob.reach; ++dx) {
      double p = 0.0;
      for (const Lobe& l : lobes) {
        const double ex = dx - l.x, ey = dy - l.y;
        p += l.weight * std::exp(-(ex * ex + ey * ey) / (2.0 * l.sigma * l.sigma));
      }
      blob.profile[(dy + blob.reach) * side + (dx + blob.reach)] = p;
      if (p > peak) {
        peak = p;
        peak_dx = dx;
        peak_dy = dy;
      }
    }
  }
  for (double& p : blob.profile) p /= peak;

  // Mask: the connected region above half-peak grown from the peak, kept
  // within r+1 of the seed so neighbouring MCs never touch.
  const double limit = (r + 1.0) * (r + 1.0);
  std::vector<char> seen(blob.profile.size(), 0);
  std::vector<std::pair<int, int>> stack{{peak_dx, peak_dy}};
  seen[(peak_dy + blob.reach) * side + (peak_dx + blob.reach)] = 1;
  while (!stack.empty()) {
    const auto [x, y] = stack.back();
    stack.pop_back();
    blob.mask.push_back({x, y});
    for (int ny = y - 1; ny <= y + 1; ++ny) {
      for (int nx = x - 1; nx <= x + 1; ++nx) {
        if (std::abs(nx) > blob.reach || std::abs(ny) > blob.reach) continue;
        char& s = seen[(ny + blob.reach) * side + (nx + blob.reach)];
        if (s || nx * nx + ny * ny > limit || blob.at(nx, ny) <= 0.5) continue;
        s = 1;
        stack.push_back({nx, ny});
      }
    }
  }
  std::sort(blob.mask.begin(), blob.mask.end(),
            [](auto p, auto q) { return std::tie(p.second, p.first) < std::tie(q.second, q.first); });
  return blob;
}

struct Placement {
  Pixel seed;
  long cluster;
};

}  // namespace

void PhantomConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("phantom config: " + what); };
  if (width < 256 || height < 256) fail("image must be at least 256x256");
  if (max_value != 255 && max_value != 65535) fail("max_value must be 255 or 65535");
  if (!(spacing_mm > 0.0)) fail("spacing must be positive");
  if (!(mc_diameter_min >= 2.0) || !(mc_diameter_max >= mc_diameter_min) || mc_diameter_max > 10.0) {
    fail("MC diameters must satisfy 2 <= min <= max <= 10");
  }
  if (clusters > 0 && mcs_per_cluster == 0) fail("clusters need at least one MC");
  if (!(cluster_radius_px > 0.0)) fail("cluster radius must be positive");
  if (min_spacing_px != 0.0 && min_spacing_px < mc_diameter_max + 4.0) fail("min spacing below diameter_max + 4");
  for (double f : {mc_contrast, margin, noise_sigma, tissue_level, blob_amplitude, border_level}) {
    if (!(f >= 0.0 && f <= 1.0)) fail("intensity fractions must lie in [0, 1]");
  }
  if (!(margin > 0.0) || margin > mc_contrast) fail("margin must be in (0, mc_contrast]");
  if (tissue_level + mc_contrast >= 1.0) fail("tissue level plus MC contrast saturates");
}

Phantom generate_phantom(const PhantomConfig& config) {
  config.validate();
  const std::size_t w = config.width, h = config.height;
  const double wd = static_cast<double>(w), hd = static_cast<double>(h);
  const Tissue tissue{0.9 * wd, 0.62 * hd, hd / 2.0};

  // Smooth background: tissue level plus broad blobs, fading into the dark border.
  std::mt19937_64 blob_rng(nn::derive_seed(config.seed, kBlobs));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  struct Broad {
    double x, y, sigma, amp;
  };
  std::vector<Broad> broad(config.blob_count);
  for (Broad& b : broad) b = {u(blob_rng) * wd, u(blob_rng) * hd, 15.0 + 30.0 * u(blob_rng), (2.0 * u(blob_rng) - 1.0)};
  const double ceiling = 1.0 - config.mc_contrast - 0.05;
  std::vector<double> background(w * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double level = config.tissue_level;
      for (const Broad& b : broad) {
        const double dx = static_cast<double>(x) - b.x, dy = static_cast<double>(y) - b.y;
        level += config.blob_amplitude * b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
      }
      level = std::clamp(level, config.border_level, ceiling);
      const double t = tissue.weight(static_cast<double>(x), static_cast<double>(y));
      background[y * w + x] = config.border_level + t * (level - config.border_level);
    }
  }

  // MC placement by rejection sampling.
  const double spacing = config.min_spacing_px > 0.0 ? config.min_spacing_px : config.mc_diameter_max + 6.0;
  const std::size_t total = config.clusters * config.mcs_per_cluster + config.scattered_mcs;
  const double tissue_area = std::numbers::pi * tissue.a * tissue.b / 2.0;
  if (static_cast<double>(total) * spacing * spacing > 0.5 * std::min(tissue_area, wd * hd)) {
    throw PhantomError("cannot fit " + std::to_string(total) + " MCs at spacing " + std::to_string(spacing));
  }
  const double edge = config.mc_diameter_max / 2.0 + kHaloPx + 2.0;
  auto inside = [&](double x, double y, double pad) {
    return x >= edge + pad && y >= edge + pad && x <= wd - 1.0 - edge - pad && y <= hd - 1.0 - edge - pad &&
           tissue.radius(x, y) <= 0.8;
  };
  std::mt19937_64 place_rng(nn::derive_seed(config.seed, kPlacement));
  std::vector<Placement> placed;
  auto clear_of_others = [&](double x, double y) {
    for (const Placement& p : placed) {
      if (std::hypot(x - static_cast<double>(p.seed.x), y - static_cast<double>(p.seed.y)) < spacing) return false;
    }
    return true;
  };
  constexpr int kAttempts = 20000;

  // Flagged windows reach at most one window past their members, so clusters
  // this far apart are never merged into one region.
  const double cluster_gap =
      2.0 * static_cast<double>(cluster_window_px(config.spacing_mm)) + 2.0 * config.cluster_radius_px + 2.0;
  std::vector<std::pair<double, double>> centres;
  for (std::size_t c = 0; c < config.clusters; ++c) {
    bool ok = false;
    for (int attempt = 0; attempt < kAttempts && !ok; ++attempt) {
      const double x = u(place_rng) * wd, y = u(place_rng) * hd;
      if (!inside(x, y, config.cluster_radius_px) || tissue.radius(x, y) > 0.7) continue;
      ok = std::all_of(centres.begin(), centres.end(),
                       [&](auto q) { return std::hypot(x - q.first, y - q.second) >= cluster_gap; });
      if (ok) centres.push_back({x, y});
    }
    if (!ok) throw PhantomError("cannot place cluster " + std::to_string(c));
    for (std::size_t m = 0; m < config.mcs_per_cluster; ++m) {
      bool done = false;
      for (int attempt = 0; attempt < kAttempts && !done; ++attempt) {
        const double ang = 2.0 * std::numbers::pi * u(place_rng);
        const double rad = config.cluster_radius_px * std::sqrt(u(place_rng));
        const double x = std::round(centres.back().first + rad * std::cos(ang));
        const double y = std::round(centres.back().second + rad * std::sin(ang));
        if (!inside(x, y, 0.0) || !clear_of_others(x, y)) continue;
        placed.push_back({{static_cast<std::size_t>(x), static_cast<std::size_t>(y)}, static_cast<long>(c)});
        done = true;
      }
      if (!done) throw PhantomError("cannot place MC " + std::to_string(m) + " of cluster " + std::to_string(c));
    }
  }
  for (std::size_t m = 0; m < config.scattered_mcs; ++m) {
    bool done = false;
    for (int attempt = 0; attempt < kAttempts && !done; ++attempt) {
      const double x = std::round(u(place_rng) * wd), y = std::round(u(place_rng) * hd);
      if (!inside(x, y, 0.0) || !clear_of_others(x, y)) continue;
      placed.push_back({{static_cast<std::size_t>(x), static_cast<std::size_t>(y)}, -1});
      done = true;
    }
    if (!done) throw PhantomError("cannot place scattered MC " + std::to_string(m));
  }

  // Render MCs: the brightest profile wins where halos meet.
  std::mt19937_64 shape_rng(nn::derive_seed(config.seed, kShapes));
  std::uniform_real_distribution<double> diam(config.mc_diameter_min, config.mc_diameter_max);
  std::vector<double> lift(w * h, 0.0);
  Phantom out;
  out.mask = BinaryMask(w, h);
  out.truth.clusters.resize(config.clusters);
  for (std::size_t i = 0; i < placed.size(); ++i) {
    const Placement& p = placed[i];
    const Blob blob = make_blob(diam(shape_rng), shape_rng);
    const auto sx = static_cast<long>(p.seed.x), sy = static_cast<long>(p.seed.y);
    for (int dy = -blob.reach; dy <= blob.reach; ++dy) {
      for (int dx = -blob.reach; dx <= blob.reach; ++dx) {
        const std::size_t idx = static_cast<std::size_t>(sy + dy) * w + static_cast<std::size_t>(sx + dx);
        lift[idx] = std::max(lift[idx], blob.at(dx, dy));
      }
    }
    PlantedMc mc;
    mc.seed = p.seed;
    mc.cluster = p.cluster;
    mc.area = blob.mask.size();
    for (auto [dx, dy] : blob.mask) {
      const auto x = static_cast<std::size_t>(sx + dx), y = static_cast<std::size_t>(sy + dy);
      out.mask.set(x, y);
      mc.centroid_x += static_cast<double>(x);
      mc.centroid_y += static_cast<double>(y);
      if (p.cluster >= 0) {
        PlantedCluster& c = out.truth.clusters[static_cast<std::size_t>(p.cluster)];
        const Box px{x, y, x + 1, y + 1};
        c.bounds = c.members.empty() && c.bounds == Box{} ? px : c.bounds.united(px);
      }
    }
    mc.centroid_x /= static_cast<double>(mc.area);
    mc.centroid_y /= static_cast<double>(mc.area);
    if (p.cluster >= 0) out.truth.clusters[static_cast<std::size_t>(p.cluster)].members.push_back(i);
    out.truth.mcs.push_back(mc);
  }

  // Compose, add noise, and enforce the margin on mask pixels.
  std::mt19937_64 noise_rng(nn::derive_seed(config.seed, kNoise));
  std::normal_distribution<double> noise(0.0, config.noise_sigma);
  const double maxv = config.max_value;
  out.image = GrayImage(w, h, config.max_value, config.spacing_mm);
  out.background.resize(w * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      const double base = background[i] * maxv;
      double v = (background[i] + config.mc_contrast * lift[i] + noise(noise_rng)) * maxv;
      if (out.mask.at(x, y)) v = std::max(v, std::ceil(base + config.margin * maxv));
      out.image.at(x, y) = static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, maxv));
      out.background[i] = base;
    }
  }
  return out;
}

void write_sidecar(const PhantomTruth& truth, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.setf(std::ios::fixed);
  out.precision(3);
  out << "# mc id centroid_x centroid_y area cluster seed_x seed_y\n";
  for (std::size_t i = 0; i < truth.mcs.size(); ++i) {
    const PlantedMc& m = truth.mcs[i];
    out << "mc " << i << ' ' << m.centroid_x << ' ' << m.centroid_y << ' ' << m.area << ' ' << m.cluster << ' '
        << m.seed.x << ' ' << m.seed.y << '\n';
  }
  out << "# cluster id x0 y0 x1 y1 count\n";
  for (std::size_t i = 0; i < truth.clusters.size(); ++i) {
    const PlantedCluster& c = truth.clusters[i];
    out << "cluster " << i << ' ' << c.bounds.x0 << ' ' << c.bounds.y0 << ' ' << c.bounds.x1 << ' ' << c.bounds.y1
        << ' ' << c.members.size() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

PhantomTruth read_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  PhantomTruth truth;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string kind;
    std::size_t id = 0;
    row >> kind >> id;
    if (kind == "mc") {
      PlantedMc m;
      row >> m.centroid_x >> m.centroid_y >> m.area >> m.cluster >> m.seed.x >> m.seed.y;
      if (!row || id != truth.mcs.size()) throw std::runtime_error("bad mc line in " + path.string());
      truth.mcs.push_back(m);
    } else if (kind == "cluster") {
      PlantedCluster c;
      std::size_t count = 0;
      row >> c.bounds.x0 >> c.bounds.y0 >> c.bounds.x1 >> c.bounds.y1 >> count;
      if (!row || id != truth.clusters.size()) throw std::runtime_error("bad cluster line in " + path.string());
      truth.clusters.push_back(c);
    } else {
      throw std::runtime_error("unknown sidecar record '" + kind + "' in " + path.string());
    }
  }
  for (std::size_t i = 0; i < truth.mcs.size(); ++i) {
    const long c = truth.mcs[i].cluster;
    if (c >= 0) {
      if (static_cast<std::size_t>(c) >= truth.clusters.size()) throw std::runtime_error("mc refers to missing cluster");
      truth.clusters[static_cast<std::size_t>(c)].members.push_back(i);
    }
  }
  return truth;
}

}  // namespace mcseg::imaging
