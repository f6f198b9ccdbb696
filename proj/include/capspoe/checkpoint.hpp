#pragma once

#include <map>
#include <string>

#include "capspoe/tensor.hpp"

namespace capspoe {

/// Binary checkpoint container. Layout, all integers little-endian:
///
///   "CPOE" | u32 version (=1) | u32 section count
///   per section: u32 name length | name bytes (ASCII) |
///                u32 rank | u64 extents... | f64 payload (little-endian)
///   trailing u64 FNV-1a checksum of every preceding byte
///
/// Sections are written in name order, so identical contents produce
/// identical files on any host. load verifies the checksum and magic and
/// round-trips values bitwise.
void save_checkpoint(const std::map<std::string, Tensor>& sections, const std::string& path);
std::map<std::string, Tensor> load_checkpoint(const std::string& path);

constexpr std::uint32_t kCheckpointVersion = 1;

} // namespace capspoe
