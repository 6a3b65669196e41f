#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mcseg/data/patch_class.hpp"
#include "mcseg/imaging/image.hpp"

namespace mcseg::data {

using imaging::GrayImage;

/// One manifest line: image id plus the PGM files holding image and mask.
struct ImageEntry {
  std::string id;
  std::filesystem::path image;
  std::filesystem::path mask;
  friend bool operator==(const ImageEntry&, const ImageEntry&) = default;
};

/// One training sample. `image` indexes the owning index's manifest.
struct PatchRecord {
  std::size_t image = 0;
  Pixel center;
  PatchClass patch_class = PatchClass::C4;
  friend bool operator==(const PatchRecord&, const PatchRecord&) = default;
};

/// Records grouped by class, each group in (image, y, x) order.
struct PatchIndex {
  std::size_t patch_size = 0;
  std::vector<ImageEntry> manifest;
  std::array<std::vector<PatchRecord>, 4> groups;

  const std::vector<PatchRecord>& records(PatchClass c) const noexcept { return groups[index_of(c)]; }
  std::size_t count(PatchClass c) const noexcept { return groups[index_of(c)].size(); }
  std::size_t size() const noexcept;

  friend bool operator==(const PatchIndex&, const PatchIndex&) = default;
};

struct IndexConfig {
  double c3_per_c1 = 50.0;   // C3 cap relative to the image's C1 count
  double c4_per_c1 = 200.0;  // C4 cap relative to the image's C1 count
  std::size_t min_cap = 256; // floor on both caps, so MC-free images still contribute C4
  std::uint64_t seed = 0;
};

/// Enumerates every C1 and C2 centre, subsamples C3 uniformly and C4
/// uniformly over the Otsu foreground (whole image if Otsu finds none),
/// per image. `images`, `masks` and `manifest` are aligned.
PatchIndex build_patch_index(std::span<const GrayImage> images, std::span<const BinaryMask> masks,
                             std::vector<ImageEntry> manifest, std::size_t n, const IndexConfig& config = {});

/// Restricts an index to the given manifest entries, renumbering them.
PatchIndex subset_index(const PatchIndex& index, std::span<const std::size_t> images);

/// Index file: "# patch_size N" then "image_path<TAB>cx<TAB>cy<TAB>C#" per record.
/// Manifest file: "id<TAB>image_path<TAB>mask_path" per image.
void save_index(const PatchIndex& index, const std::filesystem::path& index_path,
                const std::filesystem::path& manifest_path);
PatchIndex load_index(const std::filesystem::path& index_path, const std::filesystem::path& manifest_path);

void save_manifest(const std::vector<ImageEntry>& manifest, const std::filesystem::path& path);
std::vector<ImageEntry> load_manifest(const std::filesystem::path& path);

/// Images and masks of a manifest, read from disk in manifest order.
struct Corpus {
  std::vector<GrayImage> images;
  std::vector<BinaryMask> masks;
};
Corpus load_corpus(const std::vector<ImageEntry>& manifest, double spacing_mm = imaging::kDefaultSpacingMm);

/// Seeded shuffle of 0..count-1 cut into consecutive parts of the given
/// sizes. Throws if the sizes sum past count.
std::vector<std::vector<std::size_t>> seeded_split(std::size_t count, const std::vector<std::size_t>& sizes,
                                                   std::uint64_t seed);

}  // namespace mcseg::data
