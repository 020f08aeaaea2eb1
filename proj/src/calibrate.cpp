#include "oispec/calibrate.hpp"

#include <cmath>

#include "oispec/errors.hpp"
#include "oispec/parallel.hpp"

namespace oispec {

DarkFrame average_darks(const std::vector<ImagePlane>& frames) {
    if (frames.empty()) throw ValidationError("average_darks: no dark frames given");
    const int w = frames[0].width;
    const int h = frames[0].height;
    for (const ImagePlane& f : frames) {
        if (f.width != w || f.height != h)
            throw DimensionError("average_darks: dark frames have mixed dimensions");
        f.validate();
    }

    DarkFrame out;
    out.n_frames = static_cast<int>(frames.size());
    out.plane = ImagePlane(w, h);
    const std::size_t n = out.plane.pixel_count();
    parallel_for(n, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            double sum = 0.0;
            int used = 0;
            for (const ImagePlane& f : frames) {
                if (!f.valid[i]) continue;
                sum += f.values[i];
                ++used;
            }
            if (used == 0) {
                out.plane.values[i] = 0.0;
                out.plane.valid[i] = 0;
            } else {
                out.plane.values[i] = sum / used;
            }
        }
    });
    return out;
}

ImagePlane reflectance(const ImagePlane& image, const ImagePlane& white, const DarkFrame& dark,
                       const CalibrateOptions& options) {
    if (!image.same_shape(white) || !image.same_shape(dark.plane))
        throw DimensionError("reflectance: image, white and dark dimensions disagree");
    if (dark.n_frames < 1) throw ValidationError("reflectance: dark frame averages zero frames");

    // Threshold is expressed as a fraction of the 16-bit full scale the raw
    // frames were digitized at.
    const double eps = options.eps_den * 65535.0;

    double white_mean = 0.0;
    if (options.white_mean) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < white.values.size(); ++i) {
            if (!white.valid[i] || !dark.plane.valid[i]) continue;
            sum += white.values[i] - dark.plane.values[i];
            ++n;
        }
        if (n == 0) throw ValidationError("reflectance: white frame has no valid pixels");
        white_mean = sum / static_cast<double>(n);
    }

    ImagePlane out(image.width, image.height);
    parallel_for(out.pixel_count(), [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            if (!image.valid[i] || !white.valid[i] || !dark.plane.valid[i]) {
                out.values[i] = 0.0;
                out.valid[i] = 0;
                continue;
            }
            const double den =
                options.white_mean ? white_mean : white.values[i] - dark.plane.values[i];
            if (std::abs(den) <= eps) {
                out.values[i] = 0.0;
                out.valid[i] = 0;
                continue;
            }
            out.values[i] = (image.values[i] - dark.plane.values[i]) / den;
        }
    });
    return out;
}

SpectralStack calibrate_stack(const SpectralStack& stack, const std::vector<ImagePlane>& whites,
                              const DarkFrame& dark, const CalibrateOptions& options) {
    stack.validate();
    if (stack.frame != FrameKind::Raw)
        throw ValidationError("calibrate_stack: expected a raw stack, got " +
                              to_string(stack.frame));
    if (static_cast<int>(whites.size()) != stack.grid.count)
        throw DimensionError("calibrate_stack: need one white frame per wavelength (" +
                             std::to_string(whites.size()) + " given, " +
                             std::to_string(stack.grid.count) + " needed)");

    SpectralStack out = stack;
    out.frame = FrameKind::Reflectance;
    for (int a = 0; a < stack.angle_count(); ++a)
        for (int j = 0; j < stack.grid.count; ++j)
            out.plane(a, j) = reflectance(stack.plane(a, j), whites[j], dark, options);
    return out;
}

} // namespace oispec
