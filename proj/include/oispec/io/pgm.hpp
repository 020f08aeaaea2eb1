#pragma once

#include <filesystem>

#include "oispec/types.hpp"

namespace oispec::io {

/// Reads a binary (P5) PGM with maxval 65535, big-endian sample order.
/// All pixels come back valid. Throws FrameIoError on unreadable or
/// malformed files and on 8-bit PGMs (the acquisition depth is fixed).
ImagePlane read_pgm16(const std::filesystem::path& path);

/// Writes a 16-bit P5 PGM. Values are rounded to the nearest integer and
/// must land in [0, 65535]; the plane must be fully valid, since PGM has
/// no way to carry a mask.
void write_pgm16(const ImagePlane& plane, const std::filesystem::path& path);

} // namespace oispec::io
