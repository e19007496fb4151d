#pragma once

#include <filesystem>

#include "rlnst/networks.hpp"
#include "rlnst/params.hpp"

namespace rlnst {

// Container layout (all integers little-endian):
//   "RLNST1"            6-byte magic
//   u8  dtype           0 = float32, 1 = float64
//   u32 entry count
//   per entry: u16 name length, UTF-8 name, u8 rank, u32 extents[rank],
//              raw values in the declared dtype
inline constexpr char kCheckpointMagic[6] = {'R', 'L', 'N', 'S', 'T', '1'};

template <typename T>
void save_checkpoint(const ParamRegistry<T>& reg, const std::filesystem::path& path);

// Values stored in another dtype are converted on load.
template <typename T>
ParamRegistry<T> load_checkpoint(const std::filesystem::path& path);

// Copies a loaded registry into live networks. Every entry of the networks
// must be present with the same shape; a registry with only "featnet."
// entries (an exported feature-weight file) updates the feature net alone.
template <typename T, typename U>
void apply_checkpoint(Networks<T>& nets, const ParamRegistry<U>& loaded);

}  // namespace rlnst
