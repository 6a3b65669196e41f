#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "mcseg/data/patch_index.hpp"
#include "mcseg/data/patch_class.hpp"
#include "mcseg/nn/tensor.hpp"

namespace mcseg::train {

struct Batch {
  nn::Tensor patches;  // B x 1 x N x N
  nn::Tensor labels;   // B x 2 one-hot
};

/// Where training and validation batches come from. draw() must be a pure
/// function of (batch, seed) so runs are reproducible.
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual Batch draw(std::size_t batch, std::uint64_t seed) const = 0;
  virtual std::size_t patch_size() const = 0;
};

/// Balanced, augmented minibatches from a patch index.
class IndexBatchSource final : public BatchSource {
 public:
  IndexBatchSource(const data::PatchIndex& index, std::span<const data::GrayImage> images, data::Target target)
      : index_(&index), images_(images), target_(target) {}
  Batch draw(std::size_t batch, std::uint64_t seed) const override;
  std::size_t patch_size() const override { return index_->patch_size; }

 private:
  const data::PatchIndex* index_;
  std::span<const data::GrayImage> images_;
  data::Target target_;
};

/// A fixed labelled set. A request for the whole set returns it in stored
/// order; smaller even requests draw a balanced subset without replacement.
class FixedBatchSource final : public BatchSource {
 public:
  FixedBatchSource(nn::Tensor patches, nn::Tensor labels);
  Batch draw(std::size_t batch, std::uint64_t seed) const override;
  std::size_t patch_size() const override { return patches_.extent(2); }
  std::size_t size() const noexcept { return patches_.extent(0); }

 private:
  nn::Tensor patches_;
  nn::Tensor labels_;
};

}  // namespace mcseg::train
