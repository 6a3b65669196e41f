#include "mcseg/data/patch_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mcseg/imaging/netpbm.hpp"
#include "mcseg/imaging/otsu.hpp"
#include "mcseg/nn/random.hpp"

namespace mcseg::data {

namespace {

std::size_t cap_for(double factor, std::size_t c1, std::size_t floor) {
  return std::max(floor, static_cast<std::size_t>(std::llround(factor * static_cast<double>(c1))));
}

void take_sample(std::vector<PatchRecord>& candidates, std::size_t cap, std::mt19937_64& rng,
                 std::vector<PatchRecord>& out) {
  if (candidates.size() > cap) {
    std::vector<PatchRecord> kept;
    kept.reserve(cap);
    std::sample(candidates.begin(), candidates.end(), std::back_inserter(kept), cap, rng);
    candidates.swap(kept);
  }
  out.insert(out.end(), candidates.begin(), candidates.end());
}

[[noreturn]] void bad_line(const std::filesystem::path& path, std::size_t line, const std::string& why) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + why);
}

}  // namespace

std::size_t PatchIndex::size() const noexcept {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

PatchIndex build_patch_index(std::span<const GrayImage> images, std::span<const BinaryMask> masks,
                             std::vector<ImageEntry> manifest, std::size_t n, const IndexConfig& config) {
  if (images.size() != masks.size() || images.size() != manifest.size()) {
    throw std::invalid_argument("images, masks and manifest must have equal length");
  }
  PatchIndex index;
  index.patch_size = n;
  index.manifest = std::move(manifest);
  for (std::size_t i = 0; i < images.size(); ++i) {
    imaging::require_same_size(images[i], masks[i]);
    const BinaryMask& mask = masks[i];
    const PatchClassifier classifier(mask);
    const imaging::OtsuResult otsu = imaging::otsu_threshold(images[i]);
    std::vector<PatchRecord> c3, c4_fg, c4_any;
    std::size_t c1 = 0;
    for (std::size_t y = 0; y < mask.height(); ++y) {
      for (std::size_t x = 0; x < mask.width(); ++x) {
        const PatchRecord r{i, {x, y}, classifier.classify({x, y}, n)};
        switch (r.patch_class) {
          case PatchClass::C1:
            ++c1;
            [[fallthrough]];
          case PatchClass::C2:
            index.groups[index_of(r.patch_class)].push_back(r);
            break;
          case PatchClass::C3:
            c3.push_back(r);
            break;
          case PatchClass::C4:
            (images[i].at(x, y) > otsu.threshold ? c4_fg : c4_any).push_back(r);
            break;
        }
      }
    }
    if (c4_fg.empty()) c4_fg.swap(c4_any);
    std::mt19937_64 rng(nn::derive_seed(config.seed, i));
    take_sample(c3, cap_for(config.c3_per_c1, c1, config.min_cap), rng, index.groups[index_of(PatchClass::C3)]);
    take_sample(c4_fg, cap_for(config.c4_per_c1, c1, config.min_cap), rng, index.groups[index_of(PatchClass::C4)]);
  }
  return index;
}

PatchIndex subset_index(const PatchIndex& index, std::span<const std::size_t> images) {
  PatchIndex out;
  out.patch_size = index.patch_size;
  std::map<std::size_t, std::size_t> renumber;
  for (std::size_t id : images) {
    if (id >= index.manifest.size()) throw std::out_of_range("subset refers to missing image");
    if (renumber.emplace(id, out.manifest.size()).second) out.manifest.push_back(index.manifest[id]);
  }
  for (std::size_t g = 0; g < 4; ++g) {
    for (const PatchRecord& r : index.groups[g]) {
      auto it = renumber.find(r.image);
      if (it != renumber.end()) out.groups[g].push_back({it->second, r.center, r.patch_class});
    }
    std::stable_sort(out.groups[g].begin(), out.groups[g].end(),
                     [](const PatchRecord& a, const PatchRecord& b) { return a.image < b.image; });
  }
  return out;
}

void save_manifest(const std::vector<ImageEntry>& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const ImageEntry& e : manifest) out << e.id << '\t' << e.image.string() << '\t' << e.mask.string() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<ImageEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<ImageEntry> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    ImageEntry e;
    std::string image, mask;
    if (!std::getline(row, e.id, '\t') || !std::getline(row, image, '\t') || !std::getline(row, mask)) {
      bad_line(path, no, "expected id, image and mask columns");
    }
    e.image = image;
    e.mask = mask;
    out.push_back(std::move(e));
  }
  return out;
}

void save_index(const PatchIndex& index, const std::filesystem::path& index_path,
                const std::filesystem::path& manifest_path) {
  save_manifest(index.manifest, manifest_path);
  std::ofstream out(index_path);
  if (!out) throw std::runtime_error("cannot write " + index_path.string());
  out << "# patch_size " << index.patch_size << '\n';
  for (const auto& group : index.groups) {
    for (const PatchRecord& r : group) {
      out << index.manifest.at(r.image).image.string() << '\t' << r.center.x << '\t' << r.center.y << '\t'
          << to_string(r.patch_class) << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed: " + index_path.string());
}

PatchIndex load_index(const std::filesystem::path& index_path, const std::filesystem::path& manifest_path) {
  PatchIndex index;
  index.manifest = load_manifest(manifest_path);
  std::map<std::string, std::size_t> by_path;
  for (std::size_t i = 0; i < index.manifest.size(); ++i) by_path.emplace(index.manifest[i].image.string(), i);

  std::ifstream in(index_path);
  if (!in) throw std::runtime_error("cannot open " + index_path.string());
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream head(line.substr(1));
      std::string key;
      if (head >> key && key == "patch_size") head >> index.patch_size;
      continue;
    }
    std::istringstream row(line);
    std::string path, cx, cy, cls;
    if (!std::getline(row, path, '\t') || !std::getline(row, cx, '\t') || !std::getline(row, cy, '\t') ||
        !std::getline(row, cls)) {
      bad_line(index_path, no, "expected 4 tab-separated columns");
    }
    auto it = by_path.find(path);
    if (it == by_path.end()) bad_line(index_path, no, "image not in manifest: " + path);
    PatchRecord r;
    r.image = it->second;
    try {
      r.center = {std::stoul(cx), std::stoul(cy)};
      r.patch_class = parse_patch_class(cls);
    } catch (const std::exception& e) {
      bad_line(index_path, no, e.what());
    }
    index.groups[index_of(r.patch_class)].push_back(r);
  }
  if (index.patch_size == 0) throw std::runtime_error(index_path.string() + ": missing patch_size header");
  return index;
}

Corpus load_corpus(const std::vector<ImageEntry>& manifest, double spacing_mm) {
  Corpus corpus;
  for (const ImageEntry& e : manifest) {
    corpus.images.push_back(imaging::read_pgm(e.image, spacing_mm));
    corpus.masks.push_back(imaging::read_mask_pgm(e.mask));
    imaging::require_same_size(corpus.images.back(), corpus.masks.back());
  }
  return corpus;
}

std::vector<std::vector<std::size_t>> seeded_split(std::size_t count, const std::vector<std::size_t>& sizes,
                                                   std::uint64_t seed) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total > count) throw std::invalid_argument("split sizes exceed item count");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> parts;
  std::size_t at = 0;
  for (std::size_t s : sizes) {
    parts.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                       order.begin() + static_cast<std::ptrdiff_t>(at + s));
    std::sort(parts.back().begin(), parts.back().end());
    at += s;
  }
  return parts;
}

}  // namespace mcseg::data
