#pragma once

#include <filesystem>
#include <vector>

#include "oispec/io/png.hpp"
#include "oispec/types.hpp"

namespace oispec {

/// Per-pixel unit surface normal plus albedo k (the norm of the scaled
/// normal the least squares recovers). residual_rms carries the per-pixel
/// RMS of I - N.L over the lights actually used.
struct NormalMap {
    int width = 0;
    int height = 0;
    std::vector<double> nx, ny, nz, k;
    std::vector<std::uint8_t> valid;
    ImagePlane residual_rms;

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    bool is_valid(int x, int y) const { return valid[index(x, y)] != 0; }
    LightVector normal(int x, int y) const {
        const std::size_t i = index(x, y);
        return {nx[i], ny[i], nz[i]};
    }
    void validate() const;
};

struct SolveNormalsOptions {
    /// Albedo below this marks the pixel invalid.
    double eps_albedo = 1e-4;
    /// Drop the brightest and darkest light per pixel when at least 5
    /// valid lights remain afterwards.
    bool trim = false;
};

/// Per-pixel least squares for the scaled normal in I_l = N.L_l, one
/// intensity plane per light. Pixels with fewer than 3 valid lights, tiny
/// albedo, or a rear-facing solution are marked invalid. Throws
/// GeometryError when the lighting matrix is rank deficient.
NormalMap solve_normals(const std::vector<ImagePlane>& intensity_per_light,
                        const std::vector<LightVector>& lights,
                        const SolveNormalsOptions& options = {});

enum class CollapseMode { Luminance, MeanChannel };

/// Collapses each angle of a registered stack to a scalar plane (CIE
/// luminance by default, plain wavelength mean behind the flag) and runs
/// solve_normals with the stack's light vectors.
NormalMap solve_stack_normals(const SpectralStack& stack, const SolveNormalsOptions& options = {},
                              CollapseMode collapse = CollapseMode::Luminance);

/// Per-pixel N.L of the unit normal; values at or below eps_cos (grazing
/// or self-shadowed) are invalid.
ImagePlane shading_gradient(const NormalMap& normals, const LightVector& light,
                            double eps_cos = 0.05);

/// Divides every plane by its angle's shading gradient (frame becomes
/// flattened). Invalid wherever the gradient or the input pixel is.
SpectralStack flatten(const SpectralStack& stack, const NormalMap& normals, double eps_cos = 0.05);

/// normals.bin: flat float32 nx,ny,nz,k per pixel, little endian, invalid
/// pixels all-NaN; a JSON header sits next to it.
void save_normal_map(const NormalMap& normals, const std::filesystem::path& bin_path);
NormalMap load_normal_map(const std::filesystem::path& bin_path);

/// RGB visualization, n mapped to [0,255] via (n+1)/2; invalid pixels are
/// transparent.
io::Image8 normal_map_image(const NormalMap& normals);

} // namespace oispec
