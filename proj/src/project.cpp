#include "oispec/project.hpp"

#include <algorithm>
#include <vector>

#include "oispec/errors.hpp"
#include "oispec/parallel.hpp"

namespace oispec {

ProjectionKind projection_kind_from_string(const std::string& s) {
    if (s == "min") return ProjectionKind::Min;
    if (s == "max") return ProjectionKind::Max;
    if (s == "avg") return ProjectionKind::Avg;
    if (s == "diff") return ProjectionKind::Diff;
    throw ValidationError("unknown projection kind: " + s + " (expected min|max|avg|diff)");
}

std::string to_string(ProjectionKind kind) {
    switch (kind) {
        case ProjectionKind::Min: return "min";
        case ProjectionKind::Max: return "max";
        case ProjectionKind::Avg: return "avg";
        case ProjectionKind::Diff: return "diff";
    }
    throw ValidationError("unknown projection kind");
}

SpectralStack project(const SpectralStack& stack, ProjectionKind kind,
                      const ProjectOptions& options) {
    stack.validate();
    if (stack.frame == FrameKind::Raw)
        throw ValidationError("project: raw stacks must be calibrated first");
    if (stack.frame == FrameKind::Reflectance && !options.allow_unflattened)
        throw ValidationError(
            "project: stack is not flattened (pass the unflattened flag to project reflectance)");
    if (options.rank < 1) throw ValidationError("project: rank must be >= 1");

    const int n_angles = stack.angle_count();
    SpectralStack out = make_stack(stack.grid, IlluminationGeometry{stack.geometry.polar_deg, {0.0}},
                                   stack.width, stack.height, FrameKind::Diffuse);
    out.sample_rotates = false;
    out.rotation_center = stack.rotation_center;

    for (int j = 0; j < stack.grid.count; ++j) {
        ImagePlane& dst = out.plane(0, j);
        parallel_for(dst.pixel_count(), [&](std::size_t i0, std::size_t i1) {
            std::vector<double> vals;
            vals.reserve(static_cast<std::size_t>(n_angles));
            for (std::size_t i = i0; i < i1; ++i) {
                vals.clear();
                for (int a = 0; a < n_angles; ++a) {
                    const ImagePlane& src = stack.plane(a, j);
                    if (src.valid[i]) vals.push_back(src.values[i]);
                }
                if (vals.empty()) {
                    dst.values[i] = 0.0;
                    dst.valid[i] = 0;
                    continue;
                }
                double v = 0.0;
                switch (kind) {
                    case ProjectionKind::Min: {
                        const std::size_t r =
                            std::min<std::size_t>(static_cast<std::size_t>(options.rank),
                                                  vals.size()) -
                            1;
                        std::nth_element(vals.begin(), vals.begin() + static_cast<long>(r),
                                         vals.end());
                        v = vals[r];
                        break;
                    }
                    case ProjectionKind::Max:
                        v = *std::max_element(vals.begin(), vals.end());
                        break;
                    case ProjectionKind::Avg: {
                        // Summing in value order makes the mean independent
                        // of how the angles happen to be ordered.
                        std::sort(vals.begin(), vals.end());
                        double sum = 0.0;
                        for (double x : vals) sum += x;
                        v = sum / static_cast<double>(vals.size());
                        break;
                    }
                    case ProjectionKind::Diff:
                        v = *std::max_element(vals.begin(), vals.end()) -
                            *std::min_element(vals.begin(), vals.end());
                        break;
                }
                dst.values[i] = v;
            }
        });
    }
    return out;
}

SpectralStack min_projection(const SpectralStack& stack, const ProjectOptions& options) {
    return project(stack, ProjectionKind::Min, options);
}
SpectralStack max_projection(const SpectralStack& stack, const ProjectOptions& options) {
    return project(stack, ProjectionKind::Max, options);
}
SpectralStack avg_projection(const SpectralStack& stack, const ProjectOptions& options) {
    return project(stack, ProjectionKind::Avg, options);
}
SpectralStack difference_image(const SpectralStack& stack, const ProjectOptions& options) {
    return project(stack, ProjectionKind::Diff, options);
}

} // namespace oispec
