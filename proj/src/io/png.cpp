#include "oispec/io/png.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "oispec/errors.hpp"

namespace oispec::io {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_thrower(png_structp, png_const_charp msg) {
    throw FrameIoError(std::string("PNG: ") + (msg ? msg : "unknown error"));
}

void png_warning_sink(png_structp, png_const_charp) {}

} // namespace

Image8 read_png8(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw FrameIoError("cannot open PNG file " + path.string());

    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_thrower, png_warning_sink);
    if (!png) throw FrameIoError("PNG reader allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw FrameIoError("PNG reader allocation failed");
    }

    Image8 out;
    try {
        png_init_io(png, fp.get());
        png_read_info(png, info);

        png_set_palette_to_rgb(png);
        png_set_expand_gray_1_2_4_to_8(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        png_set_strip_16(png);
        png_read_update_info(png, info);

        out.width = static_cast<int>(png_get_image_width(png, info));
        out.height = static_cast<int>(png_get_image_height(png, info));
        out.channels = static_cast<int>(png_get_channels(png, info));
        const std::size_t rowbytes = png_get_rowbytes(png, info);
        out.data.resize(rowbytes * out.height);

        std::vector<png_bytep> rows(out.height);
        for (int y = 0; y < out.height; ++y) rows[y] = out.data.data() + rowbytes * y;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void write_png8(const Image8& image, const std::filesystem::path& path) {
    if (image.width <= 0 || image.height <= 0)
        throw ValidationError("PNG: non-positive dimensions");
    if (image.channels < 1 || image.channels > 4)
        throw ValidationError("PNG: channels must be 1..4");
    const std::size_t expect = static_cast<std::size_t>(image.width) * image.height * image.channels;
    if (image.data.size() != expect)
        throw ValidationError("PNG: buffer size does not match width*height*channels");

    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw FrameIoError("cannot create PNG file " + path.string());

    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_thrower, png_warning_sink);
    if (!png) throw FrameIoError("PNG writer allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw FrameIoError("PNG writer allocation failed");
    }

    static const int kColorType[5] = {0, PNG_COLOR_TYPE_GRAY, PNG_COLOR_TYPE_GRAY_ALPHA,
                                      PNG_COLOR_TYPE_RGB, PNG_COLOR_TYPE_RGB_ALPHA};
    try {
        png_init_io(png, fp.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                     static_cast<png_uint_32>(image.height), 8, kColorType[image.channels],
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);

        const std::size_t rowbytes = static_cast<std::size_t>(image.width) * image.channels;
        std::vector<png_bytep> rows(image.height);
        for (int y = 0; y < image.height; ++y)
            rows[y] = const_cast<png_bytep>(image.data.data() + rowbytes * y);
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
}

} // namespace oispec::io
