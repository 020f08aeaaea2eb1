#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "oispec/colorimetry.hpp"
#include "oispec/errors.hpp"

using namespace oispec;
namespace fs = std::filesystem;

namespace {

const WavelengthGrid kVisible{430.0, 5.0, 71};  // 430..780
const WavelengthGrid kFull{430.0, 5.0, 115};    // 430..1000

IlluminationGeometry one_angle() {
    IlluminationGeometry g;
    g.polar_deg = 50.0;
    g.azimuths_deg = {0.0};
    return g;
}

} // namespace

TEST_SUITE("colorimetry") {
    TEST_CASE("observer table shape") {
        const auto peak = ColorMatchingTable::sample(555.0);
        CHECK(peak[1] > 0.99);
        CHECK(ColorMatchingTable::sample(500.0)[1] < peak[1]);
        CHECK(ColorMatchingTable::sample(379.0) == std::array<double, 3>{0.0, 0.0, 0.0});
        CHECK(ColorMatchingTable::sample(781.0) == std::array<double, 3>{0.0, 0.0, 0.0});
        // Linear interpolation between table rows.
        const auto a = ColorMatchingTable::sample(555.0);
        const auto b = ColorMatchingTable::sample(560.0);
        const auto mid = ColorMatchingTable::sample(557.5);
        for (int c = 0; c < 3; ++c)
            CHECK(mid[static_cast<std::size_t>(c)] ==
                  doctest::Approx(0.5 * (a[static_cast<std::size_t>(c)] +
                                         b[static_cast<std::size_t>(c)]))
                      .epsilon(1e-12));
        // Two broad x_bar lobes: blue-side response exists.
        CHECK(ColorMatchingTable::sample(445.0)[0] > 0.2);
    }

    TEST_CASE("zero spectrum maps to zero") {
        const Xyz xyz = spectrum_to_xyz(std::vector<double>(71, 0.0), kVisible);
        CHECK(xyz.x == 0.0);
        CHECK(xyz.y == 0.0);
        CHECK(xyz.z == 0.0);
    }

    TEST_CASE("equal-energy spectrum sits at the white point") {
        // Full observer band; starting at 430 would cut the z_bar lobe.
        const WavelengthGrid band{380.0, 5.0, 81};
        const Xyz xyz = spectrum_to_xyz(std::vector<double>(81, 1.0), band);
        CHECK(xyz.y == doctest::Approx(1.0).epsilon(1e-12));
        const double total = xyz.x + xyz.y + xyz.z;
        CHECK(std::abs(xyz.x / total - 1.0 / 3.0) < 0.02);
        CHECK(std::abs(xyz.y / total - 1.0 / 3.0) < 0.02);
        CHECK(std::abs(xyz.z / total - 1.0 / 3.0) < 0.02);
    }

    TEST_CASE("tristimulus integration is linear") {
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> s1(71), s2(71);
        for (double& v : s1) v = u(rng);
        for (double& v : s2) v = u(rng);
        const Xyz a = spectrum_to_xyz(s1, kVisible);
        const Xyz b = spectrum_to_xyz(s2, kVisible);
        std::vector<double> combo(71);
        for (std::size_t i = 0; i < 71; ++i) combo[i] = 0.3 * s1[i] + 1.7 * s2[i];
        const Xyz c = spectrum_to_xyz(combo, kVisible);
        CHECK(c.x == doctest::Approx(0.3 * a.x + 1.7 * b.x).epsilon(1e-12));
        CHECK(c.y == doctest::Approx(0.3 * a.y + 1.7 * b.y).epsilon(1e-12));
        CHECK(c.z == doctest::Approx(0.3 * a.z + 1.7 * b.z).epsilon(1e-12));
    }

    TEST_CASE("near-infrared samples never move the tristimulus") {
        std::mt19937 rng(11);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> visible(71);
        for (double& v : visible) v = u(rng);
        std::vector<double> padded = visible;
        padded.resize(115);
        for (std::size_t i = 71; i < 115; ++i) padded[i] = 10.0 * u(rng);

        const Xyz a = spectrum_to_xyz(visible, kVisible);
        const Xyz b = spectrum_to_xyz(padded, kFull);
        CHECK(a.x == b.x);
        CHECK(a.y == b.y);
        CHECK(a.z == b.z);
    }

    TEST_CASE("pointwise domination orders luminance") {
        std::mt19937 rng(13);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> lo(115), hi(115);
        for (std::size_t i = 0; i < 115; ++i) {
            lo[i] = u(rng);
            hi[i] = lo[i] + u(rng);
        }
        CHECK(spectrum_to_xyz(lo, kFull).y <= spectrum_to_xyz(hi, kFull).y);
    }

    TEST_CASE("grids outside the visible band are rejected") {
        CHECK_THROWS_AS(spectrum_to_xyz(std::vector<double>(20, 1.0), WavelengthGrid{800.0, 10.0, 20}),
                        ValidationError);
        CHECK_THROWS_AS(spectrum_to_xyz(std::vector<double>(10, 1.0), kVisible), ValidationError);
    }

    TEST_CASE("the D65 white point renders as pure white") {
        const Rgb white = xyz_to_srgb({0.9505, 1.0, 1.089});
        CHECK(std::abs(white.r - 1.0) < 1e-3);
        CHECK(std::abs(white.g - 1.0) < 1e-3);
        CHECK(std::abs(white.b - 1.0) < 1e-3);

        const Rgb black = xyz_to_srgb({0.0, 0.0, 0.0});
        CHECK(black.r == 0.0);
        CHECK(black.g == 0.0);
        CHECK(black.b == 0.0);
    }

    TEST_CASE("mid gray keeps its channels together") {
        const Rgb gray = xyz_to_srgb({0.18 * 0.9505, 0.18, 0.18 * 1.089});
        CHECK(std::abs(gray.r - gray.g) < 1e-3);
        CHECK(std::abs(gray.g - gray.b) < 1e-3);
        // sRGB transfer of linear 0.18.
        CHECK(gray.g == doctest::Approx(0.4613).epsilon(2e-3));
    }

    TEST_CASE("out-of-gamut tristimulus clamps to the unit cube") {
        const Rgb c = xyz_to_srgb({0.2, 0.05, 0.7});
        for (double v : {c.r, c.g, c.b}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        // The transfer curve's 1.055/0.055 constants are not dyadic, so the
        // clamped top lands one ulp under 1.
        const Rgb bright = xyz_to_srgb({2.0, 2.0, 2.0});
        CHECK(bright.g == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(bright.g <= 1.0);
    }

    TEST_CASE("srgb round trip through xyz") {
        // Cover both transfer-curve branches (linear toe below 0.04045).
        // The published 7-digit matrices invert each other to about 1e-7,
        // which the gamma slope stretches toward 1e-6.
        for (double r : {0.0, 0.004, 0.03, 0.2, 0.73, 1.0})
            for (double g : {0.01, 0.5, 0.98})
                for (double b : {0.0, 0.04, 0.7}) {
                    const Xyz xyz = srgb_to_xyz({r, g, b});
                    const Rgb back = xyz_to_srgb(xyz);
                    CHECK(std::abs(back.r - r) < 1e-5);
                    CHECK(std::abs(back.g - g) < 1e-5);
                    CHECK(std::abs(back.b - b) < 1e-5);
                }
    }

    TEST_CASE("stack_to_rgb matches the scalar path and honors masks") {
        SpectralStack stack = make_stack(kVisible, one_angle(), 3, 2, FrameKind::Diffuse);
        std::mt19937 rng(17);
        std::uniform_real_distribution<double> u(0.1, 0.9);
        std::vector<double> spectrum(71);
        for (double& v : spectrum) v = u(rng);
        for (int j = 0; j < 71; ++j)
            for (int y = 0; y < 2; ++y)
                for (int x = 0; x < 3; ++x) stack.plane(0, j).at(x, y) = spectrum[static_cast<std::size_t>(j)];

        // Pixel (1,0): a few wavelengths knocked out. Pixel (2,1): all gone.
        for (int j = 10; j < 20; ++j) stack.plane(0, j).invalidate(1, 0);
        for (int j = 0; j < 71; ++j) stack.plane(0, j).invalidate(2, 1);

        const auto rgb = stack_to_rgb(stack, 0);
        const Xyz ref = spectrum_to_xyz(spectrum, kVisible);
        const Rgb expect = xyz_to_srgb(ref);
        CHECK(rgb[0].at(0, 0) == doctest::Approx(expect.r).epsilon(1e-12));
        CHECK(rgb[1].at(0, 0) == doctest::Approx(expect.g).epsilon(1e-12));
        CHECK(rgb[2].at(0, 0) == doctest::Approx(expect.b).epsilon(1e-12));

        // The per-pixel normalizer follows the surviving samples, so a
        // constant spectrum keeps its luminance no matter which wavelengths
        // drop out (chromaticity does shift with the surviving band).
        SpectralStack cstack = make_stack(kVisible, one_angle(), 2, 1, FrameKind::Diffuse);
        for (int j = 0; j < 71; ++j)
            for (int x = 0; x < 2; ++x) cstack.plane(0, j).at(x, 0) = 0.37;
        for (int j = 30; j < 60; ++j) cstack.plane(0, j).invalidate(1, 0);
        const ImagePlane clum = luminance_plane(cstack, 0);
        CHECK(clum.at(1, 0) == doctest::Approx(0.37).epsilon(1e-12));
        CHECK(clum.at(0, 0) == doctest::Approx(0.37).epsilon(1e-12));

        for (int c = 0; c < 3; ++c) {
            CHECK(rgb[static_cast<std::size_t>(c)].is_valid(1, 0));
            CHECK_FALSE(rgb[static_cast<std::size_t>(c)].is_valid(2, 1));
        }
        CHECK_THROWS_AS(stack_to_rgb(stack, 1), ValidationError);
    }

    TEST_CASE("luminance plane equals the Y channel") {
        SpectralStack stack = make_stack(kVisible, one_angle(), 4, 3, FrameKind::Flattened);
        std::mt19937 rng(19);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int j = 0; j < 71; ++j)
            for (int y = 0; y < 3; ++y)
                for (int x = 0; x < 4; ++x) stack.plane(0, j).at(x, y) = u(rng);

        const ImagePlane lum = luminance_plane(stack, 0);
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 4; ++x) {
                std::vector<double> s(71);
                for (int j = 0; j < 71; ++j) s[static_cast<std::size_t>(j)] = stack.plane(0, j).at(x, y);
                CHECK(lum.at(x, y) == doctest::Approx(spectrum_to_xyz(s, kVisible).y).epsilon(1e-12));
            }
    }

    TEST_CASE("eight-bit render") {
        std::array<ImagePlane, 3> rgb = {ImagePlane(2, 1), ImagePlane(2, 1), ImagePlane(2, 1)};
        rgb[0].at(0, 0) = 1.0;
        rgb[1].at(0, 0) = 0.5;
        rgb[2].at(0, 0) = 0.0;
        rgb[0].invalidate(1, 0);
        const io::Image8 img = rgb_image(rgb);
        CHECK(img.width == 2);
        CHECK(img.height == 1);
        CHECK(img.channels == 4);
        CHECK(img.data[0] == 255);
        CHECK(img.data[1] == 128);
        CHECK(img.data[2] == 0);
        CHECK(img.data[3] == 255);
        CHECK(img.data[4 + 3] == 0); // invalid in any channel kills the pixel
    }

    TEST_CASE("region spectra pool masked pixels across angles") {
        const WavelengthGrid grid{500.0, 100.0, 2};
        IlluminationGeometry g;
        g.polar_deg = 50.0;
        g.azimuths_deg = {0.0, 180.0};
        SpectralStack stack = make_stack(grid, g, 2, 1, FrameKind::Flattened);
        // Region covers only pixel 0.
        stack.plane(0, 0).at(0, 0) = 0.2;
        stack.plane(1, 0).at(0, 0) = 0.4;
        stack.plane(0, 1).at(0, 0) = 0.6;
        stack.plane(1, 1).at(0, 0) = 0.6;
        stack.plane(0, 0).at(1, 0) = 9.0; // outside the region, must not leak

        ImagePlane region(2, 1);
        region.at(0, 0) = 1.0;

        const RegionSpectrum r = extract_region_spectrum(stack, region);
        REQUIRE(r.wavelength_nm == std::vector<double>{500.0, 600.0});
        CHECK(r.mean[0] == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(r.sd[0] == doctest::Approx(0.1).epsilon(1e-9));
        CHECK(r.mean[1] == doctest::Approx(0.6).epsilon(1e-12));
        CHECK(r.sd[1] == doctest::Approx(0.0).epsilon(1e-12));

        // One angle masked at one wavelength: the other still counts.
        stack.plane(1, 0).invalidate(0, 0);
        const RegionSpectrum partial = extract_region_spectrum(stack, region);
        CHECK(partial.mean[0] == doctest::Approx(0.2).epsilon(1e-12));

        // Both angles masked leaves the wavelength empty.
        stack.plane(0, 0).invalidate(0, 0);
        CHECK_THROWS_AS(extract_region_spectrum(stack, region), ValidationError);

        ImagePlane empty_region(2, 1); // all zeros selects nothing
        CHECK_THROWS_AS(extract_region_spectrum(stack, empty_region), ValidationError);
        ImagePlane wrong(3, 1);
        wrong.at(0, 0) = 1.0;
        CHECK_THROWS_AS(extract_region_spectrum(stack, wrong), DimensionError);
    }

    TEST_CASE("spectrum csv writer") {
        RegionSpectrum spec;
        spec.wavelength_nm = {430.0, 435.0};
        spec.mean = {0.25, 0.5};
        spec.sd = {0.01, 0.0};
        const fs::path path = fs::temp_directory_path() / "oispec_spectrum.csv";
        write_spectrum_csv(spec, path);

        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        CHECK(line == "wavelength_nm,mean,sd");
        std::getline(in, line);
        CHECK(line == "430,0.25,0.01");
        std::getline(in, line);
        CHECK(line == "435,0.5,0");
    }
}
