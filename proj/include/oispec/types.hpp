#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace oispec {

/// Uniform wavelength sampling: wavelength(i) = start_nm + i * step_nm.
struct WavelengthGrid {
    double start_nm = 0.0;
    double step_nm = 0.0;
    int count = 0;

    double wavelength(int i) const { return start_nm + i * step_nm; }
    double end_nm() const { return wavelength(count - 1); }
    std::vector<double> wavelengths() const;

    bool operator==(const WavelengthGrid&) const = default;

    /// Throws ValidationError unless step_nm > 0 and count >= 1.
    void validate() const;
};

/// Unit illumination direction. z points along the optical axis toward the
/// detector, so physical illumination always has z > 0.
struct LightVector {
    double x = 0.0;
    double y = 0.0;
    double z = 1.0;

    double norm() const;
    double dot(const LightVector& o) const { return x * o.x + y * o.y + z * o.z; }
};

/// Fixed polar angle plus the ordered list of azimuthal views.
struct IlluminationGeometry {
    double polar_deg = 0.0;
    std::vector<double> azimuths_deg;

    int angle_count() const { return static_cast<int>(azimuths_deg.size()); }
    std::vector<LightVector> light_vectors() const;

    bool operator==(const IlluminationGeometry&) const = default;

    /// polar in [0, 90), azimuths non-empty, each in [0, 360), no duplicates.
    void validate() const;
};

/// One image: row-major values plus a per-pixel validity mask. Values are
/// kept in double precision regardless of acquisition depth; invalid pixels
/// carry no meaningful value.
struct ImagePlane {
    int width = 0;
    int height = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;

    ImagePlane() = default;
    ImagePlane(int w, int h, double fill = 0.0, bool valid_fill = true);

    std::size_t pixel_count() const { return values.size(); }
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }

    double at(int x, int y) const { return values[index(x, y)]; }
    double& at(int x, int y) { return values[index(x, y)]; }
    bool is_valid(int x, int y) const { return valid[index(x, y)] != 0; }
    void set(int x, int y, double v, bool ok = true);
    void invalidate(int x, int y);

    bool same_shape(const ImagePlane& o) const { return width == o.width && height == o.height; }
    std::size_t valid_count() const;

    /// Throws ValidationError if the buffers disagree with width*height or a
    /// valid pixel holds a non-finite value.
    void validate() const;
};

enum class FrameKind { Raw, Reflectance, Flattened, Diffuse };

std::string to_string(FrameKind kind);
FrameKind frame_kind_from_string(const std::string& s);

/// The 4-D dataset: 2 spatial dimensions x wavelength x illumination angle.
/// Planes are angle-major: plane(a, j) lives at a * grid.count + j.
struct SpectralStack {
    WavelengthGrid grid;
    IlluminationGeometry geometry;
    FrameKind frame = FrameKind::Raw;
    int width = 0;
    int height = 0;
    /// True when the raw views were acquired by physically rotating the
    /// sample, i.e. registration must derotate by the stage azimuth.
    bool sample_rotates = true;
    /// Optional stage-axis pixel position; defaults to the image center.
    std::optional<std::array<double, 2>> rotation_center;
    std::vector<ImagePlane> planes;

    int angle_count() const { return geometry.angle_count(); }
    std::size_t plane_index(int angle, int wl) const {
        return static_cast<std::size_t>(angle) * grid.count + wl;
    }
    const ImagePlane& plane(int angle, int wl) const { return planes[plane_index(angle, wl)]; }
    ImagePlane& plane(int angle, int wl) { return planes[plane_index(angle, wl)]; }

    std::array<double, 2> center() const;

    /// Structural invariants: plane count, shared dimensions, valid grid and
    /// geometry. Throws ValidationError subtypes.
    void validate() const;
};

/// Allocates an empty stack with all planes sized and marked valid.
SpectralStack make_stack(const WavelengthGrid& grid, const IlluminationGeometry& geometry,
                         int width, int height, FrameKind frame);

} // namespace oispec
