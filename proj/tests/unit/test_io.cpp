#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "oispec/errors.hpp"
#include "oispec/io/f32.hpp"
#include "oispec/io/pgm.hpp"
#include "oispec/io/png.hpp"
#include "oispec/types.hpp"

using namespace oispec;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "oispec_io_tests";
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_SUITE("io") {
    TEST_CASE("pgm16 round trip is exact") {
        std::mt19937 rng(42);
        std::uniform_int_distribution<int> dist(0, 65535);
        ImagePlane plane(7, 5);
        for (double& v : plane.values) v = dist(rng);

        const fs::path path = temp_dir() / "roundtrip.pgm";
        io::write_pgm16(plane, path);
        const ImagePlane back = io::read_pgm16(path);
        REQUIRE(back.width == 7);
        REQUIRE(back.height == 5);
        for (std::size_t i = 0; i < plane.values.size(); ++i) {
            CHECK(back.values[i] == plane.values[i]);
            CHECK(back.valid[i] == 1);
        }
    }

    TEST_CASE("pgm16 samples are stored big endian") {
        ImagePlane plane(1, 1);
        plane.at(0, 0) = 0x0102;
        const fs::path path = temp_dir() / "endian.pgm";
        io::write_pgm16(plane, path);

        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        REQUIRE(bytes.size() >= 2);
        CHECK(static_cast<unsigned char>(bytes[bytes.size() - 2]) == 0x01);
        CHECK(static_cast<unsigned char>(bytes[bytes.size() - 1]) == 0x02);
    }

    TEST_CASE("pgm16 rejects 8-bit files and garbage") {
        const fs::path path = temp_dir() / "eightbit.pgm";
        {
            std::ofstream out(path, std::ios::binary);
            out << "P5\n2 1\n255\n"
                << char(1) << char(2);
        }
        CHECK_THROWS_AS(io::read_pgm16(path), FrameIoError);
        CHECK_THROWS_AS(io::read_pgm16(temp_dir() / "missing.pgm"), FrameIoError);

        const fs::path p2 = temp_dir() / "magic.pgm";
        {
            std::ofstream out(p2, std::ios::binary);
            out << "P2\n2 1\n65535\n1 2\n";
        }
        CHECK_THROWS_AS(io::read_pgm16(p2), FrameIoError);

        const fs::path p3 = temp_dir() / "short.pgm";
        {
            std::ofstream out(p3, std::ios::binary);
            out << "P5\n4 4\n65535\n"
                << char(0);
        }
        CHECK_THROWS_AS(io::read_pgm16(p3), FrameIoError);
    }

    TEST_CASE("pgm16 write demands full validity and 16-bit range") {
        ImagePlane range(2, 1);
        range.at(0, 0) = 70000.0;
        CHECK_THROWS_AS(io::write_pgm16(range, temp_dir() / "range.pgm"), ValidationError);
        range.at(0, 0) = -3.0;
        CHECK_THROWS_AS(io::write_pgm16(range, temp_dir() / "range.pgm"), ValidationError);

        ImagePlane masked(2, 1);
        masked.invalidate(1, 0);
        CHECK_THROWS_AS(io::write_pgm16(masked, temp_dir() / "masked.pgm"), FrameIoError);
    }

    TEST_CASE("f32 round trip preserves float32 values and the mask") {
        ImagePlane plane(5, 3);
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> dist(-4.0, 4.0);
        for (double& v : plane.values) v = static_cast<float>(dist(rng));
        plane.invalidate(0, 0);
        plane.invalidate(4, 2);

        const fs::path path = temp_dir() / "frame.f32";
        io::write_f32(plane, path);
        CHECK(fs::file_size(path) == 4u * 5u * 3u);

        const ImagePlane back = io::read_f32(path, 5, 3);
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 5; ++x) {
                CHECK(back.is_valid(x, y) == plane.is_valid(x, y));
                if (plane.is_valid(x, y)) CHECK(back.at(x, y) == plane.at(x, y));
            }
    }

    TEST_CASE("f32 invalid pixels are NaN on disk") {
        ImagePlane plane(2, 1, 1.5);
        plane.invalidate(1, 0);
        const fs::path path = temp_dir() / "nan.f32";
        io::write_f32(plane, path);

        std::ifstream in(path, std::ios::binary);
        float raw[2];
        in.read(reinterpret_cast<char*>(raw), sizeof raw);
        CHECK(raw[0] == 1.5f);
        CHECK(std::isnan(raw[1]));
    }

    TEST_CASE("f32 length mismatches are errors") {
        ImagePlane plane(3, 3, 0.25);
        const fs::path path = temp_dir() / "sized.f32";
        io::write_f32(plane, path);
        CHECK_THROWS_AS(io::read_f32(path, 4, 3), FrameIoError);
        CHECK_THROWS_AS(io::read_f32(temp_dir() / "absent.f32", 3, 3), FrameIoError);
    }

    TEST_CASE("png8 round trip for gray and rgba") {
        io::Image8 gray;
        gray.width = 4;
        gray.height = 2;
        gray.channels = 1;
        gray.data = {0, 10, 20, 30, 200, 210, 220, 255};
        const fs::path gp = temp_dir() / "gray.png";
        io::write_png8(gray, gp);
        const io::Image8 gback = io::read_png8(gp);
        REQUIRE(gback.width == 4);
        REQUIRE(gback.height == 2);
        REQUIRE(gback.channels == 1);
        CHECK(gback.data == gray.data);

        io::Image8 rgba;
        rgba.width = 2;
        rgba.height = 2;
        rgba.channels = 4;
        rgba.data = {255, 0, 0, 255, 0, 255, 0, 128, 0, 0, 255, 255, 9, 8, 7, 0};
        const fs::path cp = temp_dir() / "rgba.png";
        io::write_png8(rgba, cp);
        const io::Image8 cback = io::read_png8(cp);
        REQUIRE(cback.channels == 4);
        CHECK(cback.data == rgba.data);
    }
}
