#include "oispec/io/pgm.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "oispec/errors.hpp"

namespace oispec::io {

namespace {

// Reads one whitespace/comment-delimited token from a PGM header.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

long parse_number(const std::string& tok, const std::filesystem::path& path, const char* what) {
    try {
        std::size_t pos = 0;
        long v = std::stol(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw FrameIoError("PGM " + path.string() + ": bad " + what + " field '" + tok + "'");
    }
}

} // namespace

ImagePlane read_pgm16(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FrameIoError("cannot open PGM file " + path.string());

    std::string magic = next_token(in);
    if (magic != "P5") throw FrameIoError("PGM " + path.string() + ": expected P5, got '" + magic + "'");

    long w = parse_number(next_token(in), path, "width");
    long h = parse_number(next_token(in), path, "height");
    long maxval = parse_number(next_token(in), path, "maxval");
    if (w <= 0 || h <= 0) throw FrameIoError("PGM " + path.string() + ": non-positive dimensions");
    if (maxval != 65535)
        throw FrameIoError("PGM " + path.string() + ": maxval " + std::to_string(maxval) +
                           ", only 16-bit (65535) frames are supported");
    // Exactly one whitespace byte separates the header from the samples;
    // next_token already consumed it.

    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    std::vector<std::uint8_t> buf(n * 2);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size())
        throw FrameIoError("PGM " + path.string() + ": truncated pixel data");

    ImagePlane plane(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned hi = buf[2 * i];
        const unsigned lo = buf[2 * i + 1];
        plane.values[i] = static_cast<double>((hi << 8) | lo);
    }
    return plane;
}

void write_pgm16(const ImagePlane& plane, const std::filesystem::path& path) {
    plane.validate();
    const std::size_t n = plane.pixel_count();
    std::vector<std::uint8_t> buf(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        if (!plane.valid[i])
            throw FrameIoError("PGM " + path.string() +
                               ": plane has invalid pixels, which PGM cannot represent");
        const double r = std::round(plane.values[i]);
        if (!(r >= 0.0 && r <= 65535.0))
            throw ValidationError("PGM " + path.string() + ": value " + std::to_string(plane.values[i]) +
                                  " outside the 16-bit range");
        const auto v = static_cast<std::uint16_t>(r);
        buf[2 * i] = static_cast<std::uint8_t>(v >> 8);
        buf[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FrameIoError("cannot create PGM file " + path.string());
    out << "P5\n" << plane.width << " " << plane.height << "\n65535\n";
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw FrameIoError("failed writing PGM file " + path.string());
}

} // namespace oispec::io
