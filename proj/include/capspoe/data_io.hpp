#pragma once

#include <string>
#include <vector>

#include "capspoe/routing.hpp"
#include "capspoe/tensor.hpp"

namespace capspoe {

/// IDX container (big-endian header). Accepts unsigned-byte tensors
/// (type code 0x08, e.g. magic 0x00000803 for image stacks); pixel bytes are
/// normalized to [0,1] as v/255. Throws BadMagicError / TruncatedError /
/// DimensionError for the distinct failure modes.
Tensor load_idx(const std::string& path);

/// CIFAR-10 binary batch: 3073-byte records (label + 3x1024 planar RGB).
/// Labels are skipped; output is [N,32,32,3] in [0,1]. File sizes that are
/// not a multiple of the record size raise RecordSizeError.
Tensor load_cifar10(const std::string& path);

/// Writes rows x cols images as one PGM (P5, single channel) or PPM (P6,
/// three channels) file with 1-pixel mid-gray separators and outer border.
/// Image count must equal rows*cols and shapes must agree.
void emit_image_grid(const std::vector<Tensor>& images, std::size_t rows, std::size_t cols,
                     const std::string& path);

/// Standalone SVG 1.1 rendering of a routing diagram: lower capsules as a
/// bottom row of rectangles, upper capsules on top, grayscale mapped
/// linearly (shade 0 lightest, 1 darkest) for both nodes and edges.
void emit_routing_svg(const DiagramModel& diagram, const std::string& path);

} // namespace capspoe
