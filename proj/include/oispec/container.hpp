#pragma once

#include <filesystem>
#include <vector>

#include "oispec/types.hpp"

namespace oispec {

/// A stack plus its reference frames. Dark frames are wavelength-agnostic
/// shuttered exposures; white frames, when present, hold one plane per
/// wavelength of the grid, in grid order.
struct AcquisitionBundle {
    SpectralStack stack;
    std::vector<ImagePlane> darks;
    std::vector<ImagePlane> whites;
};

/// Writes frames plus manifest.json into `directory` (created if needed).
/// Raw stacks go to 16-bit PGM, everything else to float32 frames. Fully
/// invalid planes are recorded with a null path and get no file. Returns
/// the manifest path.
std::filesystem::path save_bundle(const AcquisitionBundle& bundle,
                                  const std::filesystem::path& directory);
std::filesystem::path save_stack(const SpectralStack& stack,
                                 const std::filesystem::path& directory);

/// Loads a cube from a manifest.json path or the directory holding one.
/// Every (azimuth, wavelength) pair must be covered by a files entry;
/// entries with a null path produce fully masked planes.
AcquisitionBundle load_bundle(const std::filesystem::path& manifest_or_dir);
SpectralStack load_stack(const std::filesystem::path& manifest_or_dir);

} // namespace oispec
