#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "gzsl_align/latent_net.hpp"
#include "gzsl_align/optim.hpp"

namespace gzsl {

/// On-disk layout:
///   8 bytes   magic "GZSLCKPT"
///   8 bytes   header length H, little-endian uint64
///   H bytes   JSON header (specs, seed, epoch, config hash, tensor list,
///             optimizer metadata)
///   then      every parameter tensor as little-endian float64 in declared
///             order, followed (when present) by Adam first-moment buffers
///             and then second-moment buffers in the optimizer's tensor order.
struct Checkpoint {
  ModelParams params;
  std::optional<AdamState> optimizer;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::string config_hash;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gzsl
