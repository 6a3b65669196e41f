#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mcseg/data/patch_index.hpp"
#include "mcseg/nn/tensor.hpp"

namespace mcseg::data {

/// One of the 8 symmetries of the square: mirror left-right if k >= 4, then
/// rotate by (k % 4) quarter turns. k = 0 is the identity.
/// Accepts N x N or 1 x N x N tensors; throws for non-square input or k > 7.
template <typename T>
nn::BasicTensor<T> dihedral_augment(const nn::BasicTensor<T>& patch, unsigned k);

/// Column of the positive class in one-hot labels and probabilities.
inline constexpr std::size_t kPositiveColumn = 1;

struct Minibatch {
  nn::Tensor patches;  // B x 1 x N x N, intensities in [0, 1]
  nn::Tensor labels;   // B x 2 one-hot, column kPositiveColumn = positive
  std::vector<PatchRecord> records;
  std::vector<unsigned> transforms;  // dihedral index applied to each patch
};

/// Patch tensor for the given records, no augmentation.
template <typename T>
nn::BasicTensor<T> gather_patches(std::span<const PatchRecord> records, std::span<const GrayImage> images,
                                  std::size_t n);

nn::Tensor one_hot_labels(std::span<const PatchRecord> records, Target target);

/// B/2 positive and B/2 negative records for `target`. Each side splits as
/// evenly as possible over its classes; the leftover slots go to classes
/// picked at random without repetition. Records are drawn uniformly with
/// replacement and every patch gets a random dihedral transform.
/// Throws std::invalid_argument for odd or zero B, or an empty class
/// (the message names the class).
Minibatch sample_minibatch(const PatchIndex& index, std::span<const GrayImage> images, Target target,
                           std::size_t batch, std::uint64_t seed);

/// Per-class slot counts for one side of a batch (aligned with classes_for).
std::vector<std::size_t> side_quota(std::size_t slots, std::size_t classes, std::uint64_t seed);

}  // namespace mcseg::data
