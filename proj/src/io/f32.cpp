#include "oispec/io/f32.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include "oispec/errors.hpp"

static_assert(std::numeric_limits<float>::is_iec559, "float32 frames require IEEE 754");

namespace oispec::io {

namespace {

std::uint32_t load_le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_le32(std::uint32_t v, std::uint8_t* p) {
    p[0] = static_cast<std::uint8_t>(v & 0xff);
    p[1] = static_cast<std::uint8_t>((v >> 8) & 0xff);
    p[2] = static_cast<std::uint8_t>((v >> 16) & 0xff);
    p[3] = static_cast<std::uint8_t>((v >> 24) & 0xff);
}

} // namespace

ImagePlane read_f32(const std::filesystem::path& path, int width, int height) {
    if (width <= 0 || height <= 0)
        throw DimensionError("f32 frame " + path.string() + ": non-positive dimensions requested");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FrameIoError("cannot open f32 frame " + path.string());

    const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    std::vector<std::uint8_t> buf(n * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size())
        throw FrameIoError("f32 frame " + path.string() + ": truncated (expected " +
                           std::to_string(buf.size()) + " bytes)");
    if (in.peek() != EOF)
        throw DimensionError("f32 frame " + path.string() + ": file longer than width*height*4");

    ImagePlane plane(width, height);
    for (std::size_t i = 0; i < n; ++i) {
        const float f = std::bit_cast<float>(load_le32(&buf[4 * i]));
        if (std::isnan(f)) {
            plane.values[i] = 0.0;
            plane.valid[i] = 0;
        } else {
            plane.values[i] = static_cast<double>(f);
        }
    }
    return plane;
}

void write_f32(const ImagePlane& plane, const std::filesystem::path& path) {
    plane.validate();
    const std::size_t n = plane.pixel_count();
    std::vector<std::uint8_t> buf(n * 4);
    for (std::size_t i = 0; i < n; ++i) {
        const float f = plane.valid[i] ? static_cast<float>(plane.values[i])
                                       : std::numeric_limits<float>::quiet_NaN();
        store_le32(std::bit_cast<std::uint32_t>(f), &buf[4 * i]);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FrameIoError("cannot create f32 frame " + path.string());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw FrameIoError("failed writing f32 frame " + path.string());
}

} // namespace oispec::io
