#pragma once

#include <array>
#include <filesystem>
#include <utility>
#include <vector>

#include "oispec/types.hpp"

namespace oispec {

/// Rigid motion of image content: rotate by rotation_deg about center_xy,
/// then translate by translation_xy. Application resamples once, so
/// composing both parts costs a single interpolation.
struct RigidTransform {
    double rotation_deg = 0.0;
    std::array<double, 2> center_xy{0.0, 0.0};
    std::array<double, 2> translation_xy{0.0, 0.0};
};

/// Resamples `plane` under the transform with bilinear interpolation.
/// Output pixels whose source point leaves the image, or touches an
/// invalid pixel with nonzero weight, come back invalid. An identity
/// transform returns the input bit-exactly.
ImagePlane apply_rigid(const ImagePlane& plane, const RigidTransform& transform);

/// Rotates the image content by -beta_deg about center.
ImagePlane derotate(const ImagePlane& plane, double beta_deg, const std::array<double, 2>& center);

/// Sub-pixel shift (dx, dy) such that `moving` matches `reference`
/// translated by (dx, dy), via phase correlation with a Hann window and a
/// three-point parabolic peak refinement. Requires >= 25% jointly valid
/// pixels; constant (featureless) inputs raise ComputationError.
std::array<double, 2> estimate_translation(const ImagePlane& reference, const ImagePlane& moving);

enum class RegisterMode { Auto, Landmarks };

/// Hand-labeled correspondences for one azimuth: points in the reference
/// view paired with points in that azimuth's acquired view.
struct LandmarkSet {
    double azimuth_deg = 0.0;
    std::vector<std::array<double, 2>> reference;
    std::vector<std::array<double, 2>> moving;
};

std::vector<LandmarkSet> load_landmarks(const std::filesystem::path& path);

struct RegisterOptions {
    RegisterMode mode = RegisterMode::Auto;
    std::vector<LandmarkSet> landmarks;
    /// Overrides the stack's rotation center when set.
    std::optional<std::array<double, 2>> center;
};

struct RegisterResult {
    SpectralStack stack;
    std::vector<RigidTransform> transforms;
};

/// Estimates one transform per azimuth on the luminance collapse (derotate
/// by the stage angle relative to angle 0 when the sample rotates, then
/// correct residual translation against angle 0) and applies it to every
/// wavelength of that azimuth in a single resampling pass.
RegisterResult register_stack(const SpectralStack& stack, const RegisterOptions& options = {});

/// JSON sidecar with one entry per azimuth.
void save_transforms(const std::vector<RigidTransform>& transforms,
                     const std::vector<double>& azimuths_deg, const std::filesystem::path& path);
std::vector<RigidTransform> load_transforms(const std::filesystem::path& path);

} // namespace oispec
