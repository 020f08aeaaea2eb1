#include "oispec/types.hpp"

#include "oispec/errors.hpp"

#include <cmath>

namespace oispec {

std::vector<double> WavelengthGrid::wavelengths() const {
    std::vector<double> out(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = wavelength(i);
    return out;
}

void WavelengthGrid::validate() const {
    if (!(step_nm > 0.0)) throw ValidationError("wavelength grid: step_nm must be > 0");
    if (count < 1) throw ValidationError("wavelength grid: count must be >= 1");
    if (!std::isfinite(start_nm) || !std::isfinite(step_nm))
        throw ValidationError("wavelength grid: non-finite bounds");
}

double LightVector::norm() const { return std::sqrt(x * x + y * y + z * z); }

// IlluminationGeometry::light_vectors is defined in core.cpp next to
// light_vector().

void IlluminationGeometry::validate() const {
    if (!(polar_deg >= 0.0 && polar_deg < 90.0))
        throw ValidationError("illumination geometry: polar_deg must lie in [0, 90)");
    if (azimuths_deg.empty())
        throw ValidationError("illumination geometry: azimuth list is empty");
    for (double b : azimuths_deg) {
        if (!(b >= 0.0 && b < 360.0))
            throw ValidationError("illumination geometry: azimuth " + std::to_string(b) +
                                  " outside [0, 360)");
    }
    for (std::size_t i = 0; i < azimuths_deg.size(); ++i)
        for (std::size_t j = i + 1; j < azimuths_deg.size(); ++j)
            if (std::abs(azimuths_deg[i] - azimuths_deg[j]) < 1e-9)
                throw ValidationError("illumination geometry: duplicate azimuth " +
                                      std::to_string(azimuths_deg[i]));
}

ImagePlane::ImagePlane(int w, int h, double fill, bool valid_fill)
    : width(w),
      height(h),
      values(static_cast<std::size_t>(w) * h, fill),
      valid(static_cast<std::size_t>(w) * h, valid_fill ? 1 : 0) {
    if (w < 0 || h < 0) throw ValidationError("image plane: negative dimensions");
}

void ImagePlane::set(int x, int y, double v, bool ok) {
    const std::size_t i = index(x, y);
    values[i] = v;
    valid[i] = ok ? 1 : 0;
}

void ImagePlane::invalidate(int x, int y) { valid[index(x, y)] = 0; }

std::size_t ImagePlane::valid_count() const {
    std::size_t n = 0;
    for (std::uint8_t v : valid) n += v != 0;
    return n;
}

void ImagePlane::validate() const {
    const std::size_t expect = static_cast<std::size_t>(width) * height;
    if (values.size() != expect || valid.size() != expect)
        throw ValidationError("image plane: buffer size does not match width*height");
    for (std::size_t i = 0; i < values.size(); ++i)
        if (valid[i] && !std::isfinite(values[i]))
            throw ValidationError("image plane: non-finite value marked valid");
}

std::string to_string(FrameKind kind) {
    switch (kind) {
        case FrameKind::Raw: return "raw";
        case FrameKind::Reflectance: return "reflectance";
        case FrameKind::Flattened: return "flattened";
        case FrameKind::Diffuse: return "diffuse";
    }
    throw ValidationError("unknown frame kind");
}

FrameKind frame_kind_from_string(const std::string& s) {
    if (s == "raw") return FrameKind::Raw;
    if (s == "reflectance") return FrameKind::Reflectance;
    if (s == "flattened") return FrameKind::Flattened;
    if (s == "diffuse") return FrameKind::Diffuse;
    throw ValidationError("unknown frame kind: " + s);
}

std::array<double, 2> SpectralStack::center() const {
    if (rotation_center) return *rotation_center;
    return {(width - 1) / 2.0, (height - 1) / 2.0};
}

void SpectralStack::validate() const {
    grid.validate();
    geometry.validate();
    const std::size_t expect = static_cast<std::size_t>(geometry.angle_count()) * grid.count;
    if (planes.size() != expect)
        throw DimensionError("stack: plane count " + std::to_string(planes.size()) +
                             " does not equal angles x wavelengths = " + std::to_string(expect));
    for (const ImagePlane& p : planes) {
        if (p.width != width || p.height != height)
            throw DimensionError("stack: plane dimensions disagree with stack dimensions");
        p.validate();
    }
}

SpectralStack make_stack(const WavelengthGrid& grid, const IlluminationGeometry& geometry,
                         int width, int height, FrameKind frame) {
    grid.validate();
    geometry.validate();
    SpectralStack s;
    s.grid = grid;
    s.geometry = geometry;
    s.frame = frame;
    s.width = width;
    s.height = height;
    s.planes.assign(static_cast<std::size_t>(geometry.angle_count()) * grid.count,
                    ImagePlane(width, height));
    return s;
}

} // namespace oispec
