#pragma once

#include <filesystem>

#include "oispec/types.hpp"

namespace oispec::io {

/// Reads a flat little-endian float32 frame. Dimensions come from the
/// caller (the manifest); the file length must be exactly 4*width*height.
/// NaN samples become invalid pixels.
ImagePlane read_f32(const std::filesystem::path& path, int width, int height);

/// Writes a frame as flat little-endian float32, row-major. Invalid pixels
/// are stored as NaN. Values are rounded to the nearest representable
/// float32.
void write_f32(const ImagePlane& plane, const std::filesystem::path& path);

} // namespace oispec::io
