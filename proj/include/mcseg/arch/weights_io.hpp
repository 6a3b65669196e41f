#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "mcseg/arch/network.hpp"

namespace mcseg::arch {

inline constexpr char kWeightMagic[4] = {'M', 'C', 'N', 'N'};
inline constexpr std::uint32_t kWeightFormatVersion = 1;

enum class WeightFileErrc {
  CannotOpen,
  BadFormat,           // magic bytes wrong or trailing garbage
  UnsupportedVersion,
  Truncated,
  InconsistentSpec,    // header fields do not describe a valid network
  SpecMismatch,        // valid file, but not the architecture the caller expects
};

const char* to_string(WeightFileErrc code) noexcept;

class WeightFileError : public std::runtime_error {
 public:
  WeightFileError(WeightFileErrc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}
  WeightFileErrc code() const noexcept { return code_; }

 private:
  WeightFileErrc code_;
};

/// Writes the header and every tensor as little-endian float32 in storage
/// order. Values are rounded to single precision on the way out.
void save_weights(const NetworkWeights<double>& weights, const std::filesystem::path& path);

NetworkWeights<double> load_weights(const std::filesystem::path& path);

/// As load_weights, but rejects files whose architecture differs from `expected`
/// with WeightFileErrc::SpecMismatch.
NetworkWeights<double> load_weights(const std::filesystem::path& path, const NetworkSpec& expected);

}  // namespace mcseg::arch
