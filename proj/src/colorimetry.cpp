#include "oispec/colorimetry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "oispec/errors.hpp"
#include "oispec/parallel.hpp"

namespace oispec {

namespace {

// CIE 1931 2 degree standard observer, 380-780 nm, 5 nm intervals.
// Columns: x_bar, y_bar, z_bar.
constexpr double kCmf[ColorMatchingTable::kCount][3] = {
    {0.001368, 0.000039, 0.006450}, {0.002236, 0.000064, 0.010550},
    {0.004243, 0.000120, 0.020050}, {0.007650, 0.000217, 0.036210},
    {0.014310, 0.000396, 0.067850}, {0.023190, 0.000640, 0.110200},
    {0.043510, 0.001210, 0.207400}, {0.077630, 0.002180, 0.371300},
    {0.134380, 0.004000, 0.645600}, {0.214770, 0.007300, 1.039050},
    {0.283900, 0.011600, 1.385600}, {0.328500, 0.016840, 1.622960},
    {0.348280, 0.023000, 1.747060}, {0.348060, 0.029800, 1.782600},
    {0.336200, 0.038000, 1.772110}, {0.318700, 0.048000, 1.744100},
    {0.290800, 0.060000, 1.669200}, {0.251100, 0.073900, 1.528100},
    {0.195360, 0.090980, 1.287640}, {0.142100, 0.112600, 1.041900},
    {0.095640, 0.139020, 0.812950}, {0.057950, 0.169300, 0.616200},
    {0.032010, 0.208020, 0.465180}, {0.014700, 0.258600, 0.353300},
    {0.004900, 0.323000, 0.272000}, {0.002400, 0.407300, 0.212300},
    {0.009300, 0.503000, 0.158200}, {0.029100, 0.608200, 0.111700},
    {0.063270, 0.710000, 0.078250}, {0.109600, 0.793200, 0.057250},
    {0.165500, 0.862000, 0.042160}, {0.225750, 0.914850, 0.029840},
    {0.290400, 0.954000, 0.020300}, {0.359700, 0.980300, 0.013400},
    {0.433450, 0.994950, 0.008750}, {0.512050, 1.000000, 0.005750},
    {0.594500, 0.995000, 0.003900}, {0.678400, 0.978600, 0.002750},
    {0.762100, 0.952000, 0.002100}, {0.842500, 0.915400, 0.001800},
    {0.916300, 0.870000, 0.001650}, {0.978600, 0.816300, 0.001400},
    {1.026300, 0.757000, 0.001100}, {1.056700, 0.694900, 0.001000},
    {1.062200, 0.631000, 0.000800}, {1.045600, 0.566800, 0.000600},
    {1.002600, 0.503000, 0.000340}, {0.938400, 0.441200, 0.000240},
    {0.854450, 0.381000, 0.000190}, {0.751400, 0.321000, 0.000100},
    {0.642400, 0.265000, 0.000050}, {0.541900, 0.217000, 0.000030},
    {0.447900, 0.175000, 0.000020}, {0.360800, 0.138200, 0.000010},
    {0.283500, 0.107000, 0.000000}, {0.218700, 0.081600, 0.000000},
    {0.164900, 0.061000, 0.000000}, {0.121200, 0.044580, 0.000000},
    {0.087400, 0.032000, 0.000000}, {0.063600, 0.023200, 0.000000},
    {0.046770, 0.017000, 0.000000}, {0.032900, 0.011920, 0.000000},
    {0.022700, 0.008210, 0.000000}, {0.015840, 0.005723, 0.000000},
    {0.011359, 0.004102, 0.000000}, {0.008111, 0.002929, 0.000000},
    {0.005790, 0.002091, 0.000000}, {0.004109, 0.001484, 0.000000},
    {0.002899, 0.001047, 0.000000}, {0.002049, 0.000740, 0.000000},
    {0.001440, 0.000520, 0.000000}, {0.001000, 0.000361, 0.000000},
    {0.000690, 0.000249, 0.000000}, {0.000476, 0.000172, 0.000000},
    {0.000332, 0.000120, 0.000000}, {0.000235, 0.000085, 0.000000},
    {0.000166, 0.000060, 0.000000}, {0.000117, 0.000042, 0.000000},
    {0.000083, 0.000030, 0.000000}, {0.000059, 0.000021, 0.000000},
    {0.000042, 0.000015, 0.000000},
};

// IEC 61966-2-1 XYZ (D65) to linear sRGB.
constexpr double kXyzToRgb[3][3] = {
    {3.2404542, -1.5371385, -0.4985314},
    {-0.9692660, 1.8760108, 0.0415560},
    {0.0556434, -0.2040259, 1.0572252},
};
constexpr double kRgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};

double srgb_encode(double c) {
    c = std::clamp(c, 0.0, 1.0);
    return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double srgb_decode(double c) {
    c = std::clamp(c, 0.0, 1.0);
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

bool in_band(double lambda_nm) {
    return lambda_nm >= ColorMatchingTable::kStartNm &&
           lambda_nm <= ColorMatchingTable::kStartNm +
                            ColorMatchingTable::kStepNm * (ColorMatchingTable::kCount - 1);
}

void check_angle(const SpectralStack& stack, int angle_index) {
    if (angle_index < 0 || angle_index >= stack.angle_count())
        throw ValidationError("angle index " + std::to_string(angle_index) +
                              " outside the stack's " + std::to_string(stack.angle_count()) +
                              " angles");
}

// Per-pixel XYZ accumulation over the in-band wavelengths where the pixel
// is valid, each channel normalized by the y_bar sum over those same
// wavelengths.
void accumulate_xyz(const SpectralStack& stack, int angle_index, ImagePlane* out_x,
                    ImagePlane* out_y, ImagePlane* out_z) {
    std::vector<int> band;
    std::vector<std::array<double, 3>> cmf;
    for (int j = 0; j < stack.grid.count; ++j) {
        const double wl = stack.grid.wavelength(j);
        if (!in_band(wl)) continue;
        band.push_back(j);
        cmf.push_back(ColorMatchingTable::sample(wl));
    }
    if (band.empty())
        throw ValidationError("stack grid has no overlap with the 380-780 nm band");

    const int w = stack.width;
    const int h = stack.height;
    ImagePlane X(w, h), Y(w, h), Z(w, h);
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
        for (std::size_t y = y0; y < y1; ++y) {
            for (int x = 0; x < w; ++x) {
                double sx = 0.0, sy = 0.0, sz = 0.0, ny = 0.0;
                bool any = false;
                for (std::size_t b = 0; b < band.size(); ++b) {
                    const ImagePlane& p = stack.plane(angle_index, band[b]);
                    if (!p.is_valid(x, static_cast<int>(y))) continue;
                    const double s = p.at(x, static_cast<int>(y));
                    sx += s * cmf[b][0];
                    sy += s * cmf[b][1];
                    sz += s * cmf[b][2];
                    ny += cmf[b][1];
                    any = true;
                }
                if (!any || ny <= 0.0) {
                    X.set(x, static_cast<int>(y), 0.0, false);
                    Y.set(x, static_cast<int>(y), 0.0, false);
                    Z.set(x, static_cast<int>(y), 0.0, false);
                } else {
                    X.set(x, static_cast<int>(y), sx / ny);
                    Y.set(x, static_cast<int>(y), sy / ny);
                    Z.set(x, static_cast<int>(y), sz / ny);
                }
            }
        }
    });
    if (out_x) *out_x = std::move(X);
    if (out_y) *out_y = std::move(Y);
    if (out_z) *out_z = std::move(Z);
}

} // namespace

std::array<double, 3> ColorMatchingTable::sample(double lambda_nm) {
    if (!in_band(lambda_nm)) return {0.0, 0.0, 0.0};
    const double pos = (lambda_nm - kStartNm) / kStepNm;
    const int i0 = std::min(static_cast<int>(pos), kCount - 2);
    const double f = pos - i0;
    std::array<double, 3> out{};
    for (int c = 0; c < 3; ++c) out[c] = (1.0 - f) * kCmf[i0][c] + f * kCmf[i0 + 1][c];
    return out;
}

Xyz spectrum_to_xyz(const std::vector<double>& spectrum, const WavelengthGrid& grid) {
    grid.validate();
    if (static_cast<int>(spectrum.size()) != grid.count)
        throw ValidationError("spectrum length does not match its wavelength grid");
    Xyz out;
    double norm = 0.0;
    bool any = false;
    for (int j = 0; j < grid.count; ++j) {
        const double wl = grid.wavelength(j);
        if (!in_band(wl)) continue;
        const auto cmf = ColorMatchingTable::sample(wl);
        out.x += spectrum[j] * cmf[0];
        out.y += spectrum[j] * cmf[1];
        out.z += spectrum[j] * cmf[2];
        norm += cmf[1];
        any = true;
    }
    if (!any) throw ValidationError("spectrum grid has no overlap with the 380-780 nm band");
    if (norm > 0.0) {
        out.x /= norm;
        out.y /= norm;
        out.z /= norm;
    }
    return out;
}

Rgb xyz_to_srgb(const Xyz& xyz) {
    const double in[3] = {xyz.x, xyz.y, xyz.z};
    double lin[3];
    for (int r = 0; r < 3; ++r)
        lin[r] = kXyzToRgb[r][0] * in[0] + kXyzToRgb[r][1] * in[1] + kXyzToRgb[r][2] * in[2];
    return {srgb_encode(lin[0]), srgb_encode(lin[1]), srgb_encode(lin[2])};
}

Xyz srgb_to_xyz(const Rgb& rgb) {
    const double lin[3] = {srgb_decode(rgb.r), srgb_decode(rgb.g), srgb_decode(rgb.b)};
    return {
        kRgbToXyz[0][0] * lin[0] + kRgbToXyz[0][1] * lin[1] + kRgbToXyz[0][2] * lin[2],
        kRgbToXyz[1][0] * lin[0] + kRgbToXyz[1][1] * lin[1] + kRgbToXyz[1][2] * lin[2],
        kRgbToXyz[2][0] * lin[0] + kRgbToXyz[2][1] * lin[1] + kRgbToXyz[2][2] * lin[2],
    };
}

std::array<ImagePlane, 3> stack_to_rgb(const SpectralStack& stack, int angle_index) {
    stack.validate();
    check_angle(stack, angle_index);
    ImagePlane X, Y, Z;
    accumulate_xyz(stack, angle_index, &X, &Y, &Z);

    const int w = stack.width;
    const int h = stack.height;
    std::array<ImagePlane, 3> rgb{ImagePlane(w, h), ImagePlane(w, h), ImagePlane(w, h)};
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
        for (std::size_t y = y0; y < y1; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!X.is_valid(x, static_cast<int>(y))) {
                    for (auto& ch : rgb) ch.set(x, static_cast<int>(y), 0.0, false);
                    continue;
                }
                const Rgb c = xyz_to_srgb({X.at(x, static_cast<int>(y)),
                                           Y.at(x, static_cast<int>(y)),
                                           Z.at(x, static_cast<int>(y))});
                rgb[0].set(x, static_cast<int>(y), c.r);
                rgb[1].set(x, static_cast<int>(y), c.g);
                rgb[2].set(x, static_cast<int>(y), c.b);
            }
        }
    });
    return rgb;
}

ImagePlane luminance_plane(const SpectralStack& stack, int angle_index) {
    stack.validate();
    check_angle(stack, angle_index);
    ImagePlane Y;
    accumulate_xyz(stack, angle_index, nullptr, &Y, nullptr);
    return Y;
}

io::Image8 rgb_image(const std::array<ImagePlane, 3>& rgb) {
    for (int c = 1; c < 3; ++c)
        if (!rgb[0].same_shape(rgb[static_cast<std::size_t>(c)]))
            throw DimensionError("rgb_image: channel planes disagree in shape");
    io::Image8 img;
    img.width = rgb[0].width;
    img.height = rgb[0].height;
    img.channels = 4;
    img.data.assign(rgb[0].pixel_count() * 4, 0);
    for (std::size_t i = 0; i < rgb[0].pixel_count(); ++i) {
        const bool ok = rgb[0].valid[i] && rgb[1].valid[i] && rgb[2].valid[i];
        for (int c = 0; c < 3; ++c) {
            const double v = std::clamp(rgb[static_cast<std::size_t>(c)].values[i], 0.0, 1.0);
            img.data[i * 4 + static_cast<std::size_t>(c)] =
                ok ? static_cast<std::uint8_t>(std::lround(v * 255.0)) : 0;
        }
        img.data[i * 4 + 3] = ok ? 255 : 0;
    }
    return img;
}

RegionSpectrum extract_region_spectrum(const SpectralStack& stack, const ImagePlane& region) {
    stack.validate();
    if (region.width != stack.width || region.height != stack.height)
        throw DimensionError("region mask dimensions differ from the stack");

    std::vector<std::size_t> pixels;
    for (int y = 0; y < stack.height; ++y)
        for (int x = 0; x < stack.width; ++x)
            if (region.is_valid(x, y) && region.at(x, y) != 0.0)
                pixels.push_back(region.index(x, y));
    if (pixels.empty()) throw ValidationError("region mask selects no pixels");

    RegionSpectrum out;
    out.wavelength_nm = stack.grid.wavelengths();
    out.mean.resize(stack.grid.count);
    out.sd.resize(stack.grid.count);
    for (int j = 0; j < stack.grid.count; ++j) {
        double sum = 0.0, sum2 = 0.0;
        std::size_t n = 0;
        for (int a = 0; a < stack.angle_count(); ++a) {
            const ImagePlane& p = stack.plane(a, j);
            for (std::size_t i : pixels) {
                if (!p.valid[i]) continue;
                sum += p.values[i];
                sum2 += p.values[i] * p.values[i];
                ++n;
            }
        }
        if (n == 0)
            throw ValidationError("region has no valid pixel at wavelength " +
                                  std::to_string(stack.grid.wavelength(j)) + " nm");
        const double mean = sum / static_cast<double>(n);
        const double var = std::max(0.0, sum2 / static_cast<double>(n) - mean * mean);
        out.mean[j] = mean;
        out.sd[j] = std::sqrt(var);
    }
    return out;
}

void write_spectrum_csv(const RegionSpectrum& spectrum, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FrameIoError("cannot create " + path.string());
    out << "wavelength_nm,mean,sd\n";
    char buf[96];
    for (std::size_t i = 0; i < spectrum.wavelength_nm.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", spectrum.wavelength_nm[i],
                      spectrum.mean[i], spectrum.sd[i]);
        out << buf;
    }
    if (!out) throw FrameIoError("failed writing " + path.string());
}

} // namespace oispec
