#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "oispec/io/png.hpp"
#include "oispec/types.hpp"

namespace oispec {

/// CIE 1931 2 degree standard observer, 380 to 780 nm at 5 nm.
struct ColorMatchingTable {
    static constexpr double kStartNm = 380.0;
    static constexpr double kStepNm = 5.0;
    static constexpr int kCount = 81;

    /// x_bar, y_bar, z_bar linearly interpolated at lambda_nm. Outside the
    /// table the response is zero.
    static std::array<double, 3> sample(double lambda_nm);
};

struct Xyz {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

struct Rgb {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
};

/// Tristimulus integration of a spectrum sampled on `grid`: sums
/// spectrum * CMF over the samples falling inside [380, 780] nm and
/// divides by the sum of y_bar over those samples. Samples outside the
/// band contribute nothing to either sum. Throws ValidationError when the
/// grid has no overlap with the band.
Xyz spectrum_to_xyz(const std::vector<double>& spectrum, const WavelengthGrid& grid);

/// D65 linear sRGB matrix followed by the sRGB transfer curve; channels
/// clamped to [0, 1].
Rgb xyz_to_srgb(const Xyz& xyz);

/// Inverse sRGB transfer curve plus the inverse matrix (for round-trip
/// checks).
Xyz srgb_to_xyz(const Rgb& rgb);

/// Per-pixel spectrum_to_xyz then xyz_to_srgb over one angle's lambda
/// stack. A pixel uses only the wavelengths where it is valid; pixels with
/// no valid in-band sample come back invalid in all three channels.
std::array<ImagePlane, 3> stack_to_rgb(const SpectralStack& stack, int angle_index);

/// CIE Y of each pixel's spectrum at one angle, same masking rules as
/// stack_to_rgb. This is the scalar image registration and photometric
/// stereo operate on.
ImagePlane luminance_plane(const SpectralStack& stack, int angle_index);

/// 8-bit RGBA from three [0,1] planes; invalid pixels get alpha 0.
io::Image8 rgb_image(const std::array<ImagePlane, 3>& rgb);

/// Masked mean and standard deviation per wavelength over the region
/// (pixels where the mask plane is valid and nonzero), pooled across all
/// angles of the stack. Throws ValidationError when some wavelength has no
/// valid pixel in the region.
struct RegionSpectrum {
    std::vector<double> wavelength_nm;
    std::vector<double> mean;
    std::vector<double> sd;
};
RegionSpectrum extract_region_spectrum(const SpectralStack& stack, const ImagePlane& region);

/// Writes "wavelength_nm,mean,sd" CSV rows.
void write_spectrum_csv(const RegionSpectrum& spectrum, const std::filesystem::path& path);

} // namespace oispec
