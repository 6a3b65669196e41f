#include "mcseg/train/batch_source.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "mcseg/data/sampling.hpp"

namespace mcseg::train {

Batch IndexBatchSource::draw(std::size_t batch, std::uint64_t seed) const {
  data::Minibatch mb = data::sample_minibatch(*index_, images_, target_, batch, seed);
  return {std::move(mb.patches), std::move(mb.labels)};
}

FixedBatchSource::FixedBatchSource(nn::Tensor patches, nn::Tensor labels)
    : patches_(std::move(patches)), labels_(std::move(labels)) {
  if (patches_.rank() != 4 || labels_.rank() != 2 || labels_.extent(0) != patches_.extent(0) ||
      labels_.extent(1) != 2) {
    throw std::invalid_argument("fixed set needs B x 1 x N x N patches and B x 2 labels");
  }
}

Batch FixedBatchSource::draw(std::size_t batch, std::uint64_t seed) const {
  const std::size_t total = size();
  if (batch == total) return {patches_, labels_};
  if (batch == 0 || batch % 2 != 0 || batch > total) throw std::invalid_argument("bad batch size for fixed set");

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < total; ++i) (labels_(i, data::kPositiveColumn) == 1.0 ? pos : neg).push_back(i);
  if (pos.size() < batch / 2 || neg.size() < batch / 2) throw std::invalid_argument("fixed set too unbalanced");
  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  std::vector<std::size_t> pick(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(batch / 2));
  pick.insert(pick.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(batch / 2));

  const std::size_t per = patches_.size() / total;
  Batch out{nn::Tensor({batch, patches_.extent(1), patches_.extent(2), patches_.extent(3)}), nn::Tensor({batch, 2})};
  for (std::size_t i = 0; i < batch; ++i) {
    std::copy_n(patches_.data() + pick[i] * per, per, out.patches.data() + i * per);
    out.labels(i, 0) = labels_(pick[i], 0);
    out.labels(i, 1) = labels_(pick[i], 1);
  }
  return out;
}

}  // namespace mcseg::train
