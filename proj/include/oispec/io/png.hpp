#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace oispec::io {

/// 8-bit interleaved image buffer. channels: 1 = gray, 2 = gray+alpha,
/// 3 = RGB, 4 = RGBA.
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> data;

    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
};

/// Decodes a PNG to 8-bit samples (palette expanded, 16-bit depth reduced).
Image8 read_png8(const std::filesystem::path& path);

/// Encodes 8-bit gray/gray-alpha/RGB/RGBA data as PNG.
void write_png8(const Image8& image, const std::filesystem::path& path);

} // namespace oispec::io
