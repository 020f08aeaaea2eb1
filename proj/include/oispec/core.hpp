#pragma once

#include "oispec/types.hpp"

namespace oispec {

/// Unit illumination direction for a polar angle alpha and azimuth beta,
/// both in degrees: (sin a cos b, sin a sin b, cos a).
/// Throws ValidationError unless 0 <= polar_deg < 90.
LightVector light_vector(double polar_deg, double azimuth_deg);

/// Number of samples on a closed uniform grid, (end - start) / step + 1.
/// The range must divide evenly (within 1e-9 of an integer step count).
int wavelength_count(double start_nm, double end_nm, double step_nm);

/// Planes in a full acquisition: one image per (azimuth, wavelength) pair.
long total_images(const IlluminationGeometry& geometry, const WavelengthGrid& grid);

/// Rayleigh resolution limit 0.61 * lambda / NA, returned in micrometers.
double rayleigh_limit(double lambda_nm, double numerical_aperture);

/// Rows are the light vectors of the geometry in azimuth order. Shape
/// angle_count x 3, row-major.
std::vector<double> lighting_matrix(const IlluminationGeometry& geometry);

} // namespace oispec
