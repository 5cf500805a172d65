#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "clkan/network.hpp"

namespace clkan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary layout: magic "CLKANCKP", u32 version, u64 metadata length, JSON
/// metadata (model config, grid spec, block sizes), then little-endian
/// doubles for the grid points, the parameters and every running statistic,
/// and finally the marker "CKPTEND!".
void save_checkpoint(const Model& model, std::ostream& os);
void save_checkpoint(const Model& model, const std::filesystem::path& path);

/// Rebuilds the model exactly, grid points included. Throws CheckpointError
/// on a bad magic, a version other than kCheckpointVersion, or truncation.
Model load_checkpoint(std::istream& is);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace clkan
