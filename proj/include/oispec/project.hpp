#pragma once

#include "oispec/types.hpp"

namespace oispec {

enum class ProjectionKind { Min, Max, Avg, Diff };

ProjectionKind projection_kind_from_string(const std::string& s);
std::string to_string(ProjectionKind kind);

struct ProjectOptions {
    /// Soft minimum: use the rank-th smallest valid value instead of the
    /// smallest (clamped to the number of valid angles). Only the min
    /// projection honors it.
    int rank = 1;
    /// Projections normally run on flattened stacks; set this to accept a
    /// plain reflectance stack.
    bool allow_unflattened = false;
};

/// Collapses the angle axis per pixel per wavelength. A pixel is invalid
/// only when it is invalid at every angle. The result has a single
/// pseudo-angle at azimuth 0 and frame kind diffuse.
SpectralStack project(const SpectralStack& stack, ProjectionKind kind,
                      const ProjectOptions& options = {});

SpectralStack min_projection(const SpectralStack& stack, const ProjectOptions& options = {});
SpectralStack max_projection(const SpectralStack& stack, const ProjectOptions& options = {});
SpectralStack avg_projection(const SpectralStack& stack, const ProjectOptions& options = {});
SpectralStack difference_image(const SpectralStack& stack, const ProjectOptions& options = {});

} // namespace oispec
