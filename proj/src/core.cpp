#include "oispec/core.hpp"

#include <cmath>
#include <numbers>

#include "oispec/errors.hpp"

namespace oispec {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

LightVector light_vector(double polar_deg, double azimuth_deg) {
    if (!(polar_deg >= 0.0 && polar_deg < 90.0))
        throw ValidationError("light_vector: polar angle must lie in [0, 90) degrees, got " +
                              std::to_string(polar_deg));
    const double a = polar_deg * kDegToRad;
    const double b = azimuth_deg * kDegToRad;
    const double sa = std::sin(a);
    LightVector L{sa * std::cos(b), sa * std::sin(b), std::cos(a)};
    if (polar_deg == 0.0) {
        // sin(0) is exact, make the axial case exact too.
        L.x = 0.0;
        L.y = 0.0;
        L.z = 1.0;
    }
    return L;
}

std::vector<LightVector> IlluminationGeometry::light_vectors() const {
    std::vector<LightVector> out;
    out.reserve(azimuths_deg.size());
    for (double beta : azimuths_deg) out.push_back(light_vector(polar_deg, beta));
    return out;
}

int wavelength_count(double start_nm, double end_nm, double step_nm) {
    if (!(step_nm > 0.0))
        throw ValidationError("wavelength_count: step must be positive");
    if (!(end_nm >= start_nm))
        throw ValidationError("wavelength_count: end must not precede start");
    const double steps = (end_nm - start_nm) / step_nm;
    const double rounded = std::round(steps);
    if (std::abs(steps - rounded) > 1e-9)
        throw ValidationError("wavelength_count: range is not an integer number of steps");
    return static_cast<int>(rounded) + 1;
}

long total_images(const IlluminationGeometry& geometry, const WavelengthGrid& grid) {
    geometry.validate();
    grid.validate();
    return static_cast<long>(geometry.angle_count()) * grid.count;
}

double rayleigh_limit(double lambda_nm, double numerical_aperture) {
    if (!(lambda_nm > 0.0) || !(numerical_aperture > 0.0))
        throw ValidationError("rayleigh_limit: wavelength and NA must both be positive");
    return 0.61 * lambda_nm / numerical_aperture / 1000.0;
}

std::vector<double> lighting_matrix(const IlluminationGeometry& geometry) {
    geometry.validate();
    std::vector<double> m;
    m.reserve(static_cast<std::size_t>(geometry.angle_count()) * 3);
    for (const LightVector& L : geometry.light_vectors()) {
        m.push_back(L.x);
        m.push_back(L.y);
        m.push_back(L.z);
    }
    return m;
}

} // namespace oispec
