#include "mcseg/data/sampling.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "mcseg/imaging/patch.hpp"
#include "mcseg/nn/random.hpp"

namespace mcseg::data {

template <typename T>
nn::BasicTensor<T> dihedral_augment(const nn::BasicTensor<T>& patch, unsigned k) {
  if (k > 7) throw std::invalid_argument("dihedral index must be 0..7, got " + std::to_string(k));
  const std::size_t r = patch.rank();
  if ((r != 2 && r != 3) || (r == 3 && patch.extent(0) != 1) || patch.extent(r - 1) != patch.extent(r - 2)) {
    throw std::invalid_argument("dihedral_augment needs a square patch, got " + nn::shape_to_string(patch.shape()));
  }
  const std::size_t n = patch.extent(r - 1);
  nn::BasicTensor<T> out(patch.shape());
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      // Walk the output coordinate back through the rotations, then the mirror.
      std::size_t sx = x, sy = y;
      for (unsigned q = 0; q < k % 4; ++q) {
        const std::size_t t = sx;
        sx = sy;
        sy = n - 1 - t;
      }
      if (k >= 4) sx = n - 1 - sx;
      out[y * n + x] = patch[sy * n + sx];
    }
  }
  return out;
}

template nn::BasicTensor<float> dihedral_augment(const nn::BasicTensor<float>&, unsigned);
template nn::BasicTensor<double> dihedral_augment(const nn::BasicTensor<double>&, unsigned);

template <typename T>
nn::BasicTensor<T> gather_patches(std::span<const PatchRecord> records, std::span<const GrayImage> images,
                                  std::size_t n) {
  if (records.empty()) throw std::invalid_argument("no records to gather");
  nn::BasicTensor<T> out({records.size(), 1, n, n});
  for (std::size_t i = 0; i < records.size(); ++i) {
    imaging::extract_patch_into(images[records[i].image], records[i].center, n, out.data() + i * n * n);
  }
  return out;
}

template nn::BasicTensor<float> gather_patches(std::span<const PatchRecord>, std::span<const GrayImage>, std::size_t);
template nn::BasicTensor<double> gather_patches(std::span<const PatchRecord>, std::span<const GrayImage>, std::size_t);

nn::Tensor one_hot_labels(std::span<const PatchRecord> records, Target target) {
  nn::Tensor labels({records.size(), 2});
  for (std::size_t i = 0; i < records.size(); ++i) {
    labels(i, is_positive(records[i].patch_class, target) ? kPositiveColumn : 1 - kPositiveColumn) = 1.0;
  }
  return labels;
}

std::vector<std::size_t> side_quota(std::size_t slots, std::size_t classes, std::uint64_t seed) {
  if (classes == 0) throw std::invalid_argument("side needs at least one class");
  std::vector<std::size_t> quota(classes, slots / classes);
  std::vector<std::size_t> order(classes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < slots % classes; ++i) ++quota[order[i]];
  return quota;
}

Minibatch sample_minibatch(const PatchIndex& index, std::span<const GrayImage> images, Target target,
                           std::size_t batch, std::uint64_t seed) {
  if (batch == 0 || batch % 2 != 0) throw std::invalid_argument("batch size must be even and positive");
  if (images.size() != index.manifest.size()) throw std::invalid_argument("images do not match the index manifest");
  const std::size_t n = index.patch_size;

  Minibatch mb;
  mb.records.reserve(batch);
  std::mt19937_64 rng(nn::derive_seed(seed, 0));
  for (bool positive : {true, false}) {
    const std::vector<PatchClass> classes = classes_for(target, positive);
    for (PatchClass c : classes) {
      if (index.count(c) == 0) {
        throw std::invalid_argument(std::string("class ") + to_string(c) + " has no records; cannot build a " +
                                    to_string(target) + " batch");
      }
    }
    const auto quota = side_quota(batch / 2, classes.size(), nn::derive_seed(seed, positive ? 1 : 2));
    for (std::size_t k = 0; k < classes.size(); ++k) {
      const auto& pool = index.records(classes[k]);
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      for (std::size_t j = 0; j < quota[k]; ++j) mb.records.push_back(pool[pick(rng)]);
    }
  }

  mb.patches = nn::Tensor({batch, 1, n, n});
  std::uniform_int_distribution<unsigned> dihedral(0, 7);
  nn::Tensor scratch({n, n});
  for (std::size_t i = 0; i < batch; ++i) {
    const PatchRecord& r = mb.records[i];
    imaging::extract_patch_into(images[r.image], r.center, n, scratch.data());
    const unsigned k = dihedral(rng);
    mb.transforms.push_back(k);
    const nn::Tensor turned = dihedral_augment(scratch, k);
    std::copy(turned.values().begin(), turned.values().end(), mb.patches.data() + i * n * n);
  }
  mb.labels = one_hot_labels(mb.records, target);
  return mb;
}

}  // namespace mcseg::data
