#pragma once

#include <vector>

#include "oispec/types.hpp"

namespace oispec {

/// Mean of N shuttered exposures.
struct DarkFrame {
    ImagePlane plane;
    int n_frames = 0;
};

/// Per-pixel arithmetic mean over the frames, skipping invalid pixels.
/// A pixel invalid in every frame stays invalid.
DarkFrame average_darks(const std::vector<ImagePlane>& frames);

struct CalibrateOptions {
    /// Pixels where |white - dark| falls at or below this fraction of the
    /// 16-bit full scale are masked instead of divided.
    double eps_den = 1e-6;
    /// Replace the spatially resolved white frame by its mean over valid
    /// pixels before dividing.
    bool white_mean = false;
};

/// Refl = (image - dark) / (white - dark), unclamped; near-zero
/// denominators are masked.
ImagePlane reflectance(const ImagePlane& image, const ImagePlane& white, const DarkFrame& dark,
                       const CalibrateOptions& options = {});

/// Applies reflectance() to every plane of a raw stack. `whites` holds one
/// plane per wavelength of the stack grid and is shared across angles.
SpectralStack calibrate_stack(const SpectralStack& stack, const std::vector<ImagePlane>& whites,
                              const DarkFrame& dark, const CalibrateOptions& options = {});

} // namespace oispec
