#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "oispec/errors.hpp"
#include "oispec/project.hpp"

using namespace oispec;

namespace {

// Single-pixel stack with one value per angle.
SpectralStack angle_column(const std::vector<double>& values, FrameKind kind) {
    WavelengthGrid grid{500.0, 5.0, 1};
    IlluminationGeometry geometry;
    geometry.polar_deg = 50.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        geometry.azimuths_deg.push_back(360.0 * static_cast<double>(i) /
                                        static_cast<double>(values.size()));
    SpectralStack stack =
        make_stack(grid, geometry, 1, 1, kind);
    for (std::size_t a = 0; a < values.size(); ++a)
        stack.plane(static_cast<int>(a), 0).at(0, 0) = values[a];
    return stack;
}

SpectralStack random_stack(std::mt19937& rng, int w, int h, int wavelengths, int angles) {
    WavelengthGrid grid{430.0, 10.0, wavelengths};
    IlluminationGeometry geometry;
    geometry.polar_deg = 50.0;
    for (int i = 0; i < angles; ++i) geometry.azimuths_deg.push_back(360.0 * i / angles);
    SpectralStack stack = make_stack(grid, geometry, w, h, FrameKind::Flattened);
    std::uniform_real_distribution<double> value(0.0, 1.0);
    std::uniform_int_distribution<int> coin(0, 9);
    for (auto& plane : stack.planes)
        for (std::size_t i = 0; i < plane.values.size(); ++i) {
            plane.values[i] = value(rng);
            if (coin(rng) == 0) plane.valid[i] = 0;
        }
    return stack;
}

} // namespace

TEST_SUITE("project") {
    TEST_CASE("worked example over three angles") {
        const SpectralStack stack = angle_column({0.3, 0.5, 0.4}, FrameKind::Flattened);
        CHECK(min_projection(stack).plane(0, 0).at(0, 0) == 0.3);
        CHECK(max_projection(stack).plane(0, 0).at(0, 0) == 0.5);
        CHECK(avg_projection(stack).plane(0, 0).at(0, 0) == doctest::Approx(0.4).epsilon(1e-12));
        CHECK(difference_image(stack).plane(0, 0).at(0, 0) == doctest::Approx(0.2).epsilon(1e-12));
    }

    TEST_CASE("invalid angles are skipped, not counted") {
        SpectralStack stack = angle_column({0.7, 0.2, 0.9}, FrameKind::Flattened);
        stack.plane(0, 0).invalidate(0, 0);
        CHECK(min_projection(stack).plane(0, 0).at(0, 0) == 0.2);
        CHECK(max_projection(stack).plane(0, 0).at(0, 0) == 0.9);

        for (int a = 0; a < 3; ++a) stack.plane(a, 0).invalidate(0, 0);
        const SpectralStack out = min_projection(stack);
        CHECK_FALSE(out.plane(0, 0).is_valid(0, 0)); // invalid result, not an error
    }

    TEST_CASE("single-angle stacks project to themselves") {
        const SpectralStack stack = angle_column({0.42}, FrameKind::Flattened);
        const SpectralStack mn = min_projection(stack);
        const SpectralStack mx = max_projection(stack);
        const SpectralStack av = avg_projection(stack);
        CHECK(mn.plane(0, 0).at(0, 0) == 0.42);
        CHECK(mx.plane(0, 0).at(0, 0) == 0.42);
        CHECK(av.plane(0, 0).at(0, 0) == 0.42);
        CHECK(difference_image(stack).plane(0, 0).at(0, 0) == 0.0);
        CHECK(mn.angle_count() == 1);
        CHECK(mn.frame == FrameKind::Diffuse);
    }

    TEST_CASE("projection is idempotent") {
        std::mt19937 rng(5);
        const SpectralStack stack = random_stack(rng, 6, 5, 3, 7);
        const SpectralStack once = min_projection(stack);
        const SpectralStack twice = min_projection(once);
        for (int j = 0; j < 3; ++j) {
            CHECK(twice.plane(0, j).values == once.plane(0, j).values);
            CHECK(twice.plane(0, j).valid == once.plane(0, j).valid);
        }
    }

    TEST_CASE("angle order does not matter") {
        std::mt19937 rng(6);
        const SpectralStack stack = random_stack(rng, 5, 4, 2, 6);
        SpectralStack shuffled = stack;
        // Reverse the angle axis, azimuth labels included.
        for (int a = 0; a < 6; ++a) {
            shuffled.geometry.azimuths_deg[a] = stack.geometry.azimuths_deg[5 - a];
            for (int j = 0; j < 2; ++j) shuffled.plane(a, j) = stack.plane(5 - a, j);
        }
        std::sort(shuffled.geometry.azimuths_deg.begin(), shuffled.geometry.azimuths_deg.end());

        for (const ProjectionKind kind :
             {ProjectionKind::Min, ProjectionKind::Max, ProjectionKind::Avg, ProjectionKind::Diff}) {
            const SpectralStack a = project(stack, kind);
            const SpectralStack b = project(shuffled, kind);
            for (int j = 0; j < 2; ++j) {
                CHECK(a.plane(0, j).values == b.plane(0, j).values);
                CHECK(a.plane(0, j).valid == b.plane(0, j).valid);
            }
        }
    }

    TEST_CASE("min <= avg <= max pointwise on random stacks") {
        std::mt19937 rng(7);
        for (int trial = 0; trial < 10; ++trial) {
            const SpectralStack stack = random_stack(rng, 8, 8, 3, 5);
            const SpectralStack mn = min_projection(stack);
            const SpectralStack av = avg_projection(stack);
            const SpectralStack mx = max_projection(stack);
            const SpectralStack df = difference_image(stack);
            for (int j = 0; j < 3; ++j)
                for (std::size_t i = 0; i < mn.plane(0, j).values.size(); ++i) {
                    if (!mn.plane(0, j).valid[i]) continue;
                    CHECK(mn.plane(0, j).values[i] <= av.plane(0, j).values[i] + 1e-12);
                    CHECK(av.plane(0, j).values[i] <= mx.plane(0, j).values[i] + 1e-12);
                    CHECK(df.plane(0, j).values[i] >= 0.0);
                }
        }
    }

    TEST_CASE("nonnegative corruption moves projections one way only") {
        std::mt19937 rng(8);
        const SpectralStack stack = random_stack(rng, 6, 6, 2, 5);
        SpectralStack corrupted = stack;
        std::uniform_real_distribution<double> bump(0.0, 0.5);
        for (int j = 0; j < 2; ++j)
            for (double& v : corrupted.plane(2, j).values) v += bump(rng);

        const SpectralStack mn0 = min_projection(stack);
        const SpectralStack mn1 = min_projection(corrupted);
        const SpectralStack mx0 = max_projection(stack);
        const SpectralStack mx1 = max_projection(corrupted);
        for (int j = 0; j < 2; ++j)
            for (std::size_t i = 0; i < mn0.plane(0, j).values.size(); ++i) {
                if (!mn0.plane(0, j).valid[i]) continue;
                CHECK(mx1.plane(0, j).values[i] >= mx0.plane(0, j).values[i] - 1e-12);
                CHECK(mn1.plane(0, j).values[i] >= mn0.plane(0, j).values[i] - 1e-12);
            }
    }

    TEST_CASE("rank option takes the r-th smallest") {
        const SpectralStack stack = angle_column({0.3, 0.5, 0.4}, FrameKind::Flattened);
        ProjectOptions options;
        options.rank = 2;
        CHECK(min_projection(stack, options).plane(0, 0).at(0, 0) == 0.4);
        options.rank = 7; // clamped to the number of valid angles
        CHECK(min_projection(stack, options).plane(0, 0).at(0, 0) == 0.5);
        options.rank = 0;
        CHECK_THROWS_AS(min_projection(stack, options), ValidationError);
    }

    TEST_CASE("frame kind gates") {
        const SpectralStack raw = angle_column({0.3, 0.5}, FrameKind::Raw);
        CHECK_THROWS_AS(min_projection(raw), ValidationError);

        const SpectralStack refl = angle_column({0.3, 0.5}, FrameKind::Reflectance);
        CHECK_THROWS_AS(min_projection(refl), ValidationError);
        ProjectOptions options;
        options.allow_unflattened = true;
        CHECK(min_projection(refl, options).plane(0, 0).at(0, 0) == 0.3);

        CHECK_THROWS_AS(projection_kind_from_string("median"), ValidationError);
        CHECK(projection_kind_from_string("diff") == ProjectionKind::Diff);
    }
}
