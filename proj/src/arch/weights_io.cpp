#include "mcseg/arch/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace mcseg::arch {

namespace {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  void raw(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw WeightFileError(WeightFileErrc::Truncated, "unexpected end of file");
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const char* to_string(WeightFileErrc code) noexcept {
  switch (code) {
    case WeightFileErrc::CannotOpen: return "cannot open";
    case WeightFileErrc::BadFormat: return "bad format";
    case WeightFileErrc::UnsupportedVersion: return "unsupported version";
    case WeightFileErrc::Truncated: return "truncated";
    case WeightFileErrc::InconsistentSpec: return "inconsistent spec";
    case WeightFileErrc::SpecMismatch: return "spec mismatch";
  }
  return "unknown";
}

void save_weights(const NetworkWeights<double>& weights, const std::filesystem::path& path) {
  const NetworkSpec& spec = weights.spec;
  ByteWriter out;
  out.raw(kWeightMagic, 4);
  out.u32(kWeightFormatVersion);
  out.u32(static_cast<std::uint32_t>(spec.patch_size));
  out.u32(spec.conv_mode == ConvMode::Same ? 1U : 0U);
  for (std::size_t f : spec.filters) out.u32(static_cast<std::uint32_t>(f));
  out.u32(static_cast<std::uint32_t>(kHiddenUnits));
  out.u32(static_cast<std::uint32_t>(kClassCount));
  out.f32(static_cast<float>(spec.dropout_keep));
  for (const nn::Tensor* t : weights.all_tensors()) {
    for (double v : t->values()) out.f32(static_cast<float>(v));
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw WeightFileError(WeightFileErrc::CannotOpen, path.string());
  file.write(out.bytes().data(), static_cast<std::streamsize>(out.bytes().size()));
  if (!file) throw WeightFileError(WeightFileErrc::CannotOpen, "write failed: " + path.string());
}

NetworkWeights<double> load_weights(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw WeightFileError(WeightFileErrc::CannotOpen, path.string());
  ByteReader in(std::vector<char>(std::istreambuf_iterator<char>(file), {}));

  char magic[4];
  try {
    in.raw(magic, 4);
  } catch (const WeightFileError&) {
    throw WeightFileError(WeightFileErrc::BadFormat, "file too short for magic bytes");
  }
  if (std::memcmp(magic, kWeightMagic, 4) != 0) throw WeightFileError(WeightFileErrc::BadFormat, "magic is not MCNN");
  const std::uint32_t version = in.u32();
  if (version != kWeightFormatVersion) {
    throw WeightFileError(WeightFileErrc::UnsupportedVersion, "version " + std::to_string(version));
  }

  NetworkSpec spec;
  spec.patch_size = in.u32();
  const std::uint32_t mode = in.u32();
  for (std::size_t& f : spec.filters) f = in.u32();
  const std::uint32_t hidden = in.u32();
  const std::uint32_t classes = in.u32();
  spec.dropout_keep = in.f32();
  if (mode > 1 || hidden != kHiddenUnits || classes != kClassCount) {
    throw WeightFileError(WeightFileErrc::InconsistentSpec, "unsupported layer layout in header");
  }
  spec.conv_mode = mode == 1 ? ConvMode::Same : ConvMode::Valid;

  NetworkWeights<double> weights;
  try {
    weights = allocate_weights<double>(spec);
  } catch (const std::invalid_argument& err) {
    throw WeightFileError(WeightFileErrc::InconsistentSpec, err.what());
  }
  for (nn::Tensor* t : weights.all_tensors()) {
    for (double& v : t->values()) v = in.f32();
  }
  if (!in.at_end()) throw WeightFileError(WeightFileErrc::BadFormat, "trailing bytes after last tensor");
  return weights;
}

NetworkWeights<double> load_weights(const std::filesystem::path& path, const NetworkSpec& expected) {
  NetworkWeights<double> weights = load_weights(path);
  NetworkSpec stored_form = expected;
  stored_form.dropout_keep = static_cast<float>(expected.dropout_keep);
  if (!(weights.spec == stored_form)) {
    throw WeightFileError(WeightFileErrc::SpecMismatch,
                          path.string() + " holds a " + nn::to_string(weights.spec.conv_mode) + " N=" +
                              std::to_string(weights.spec.patch_size) + " network, expected " +
                              nn::to_string(expected.conv_mode) + " N=" + std::to_string(expected.patch_size));
  }
  return weights;
}

}  // namespace mcseg::arch
