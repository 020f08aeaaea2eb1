#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "oispec/calibrate.hpp"
#include "oispec/container.hpp"
#include "oispec/core.hpp"
#include "oispec/errors.hpp"
#include "oispec/simulate.hpp"
#include "oispec/unmix.hpp"

using namespace oispec;
namespace fs = std::filesystem;

namespace {

SceneSpec tiny_scene() {
    SceneSpec s;
    s.width = 16;
    s.height = 12;
    s.grid = {430.0, 50.0, 6};
    s.geometry.polar_deg = 50.0;
    s.geometry.azimuths_deg = {0.0, 120.0, 240.0};
    s.rotate_stage = false;
    s.jitter_px = 0.0;
    s.noise_sigma = 0.0;
    s.dark_frame_count = 3;
    s.k_true = 2;
    SceneRegion ground;
    ground.label = "ground";
    ground.rects = {{0, 0, 16, 12}};
    ground.mixture = {{"zinc_white", 0.8}};
    s.regions = {ground};
    return s;
}

} // namespace

TEST_SUITE("simulate") {
    TEST_CASE("counter rng streams are deterministic and decorrelated") {
        CHECK(sim_uniform(42, 1, 7) == sim_uniform(42, 1, 7));
        CHECK(sim_gaussian(42, 1, 7) == sim_gaussian(42, 1, 7));
        CHECK(sim_uniform(42, 1, 7) != sim_uniform(42, 2, 7));
        CHECK(sim_uniform(42, 1, 7) != sim_uniform(43, 1, 7));
        CHECK(sim_uniform(42, 1, 7) != sim_uniform(42, 1, 8));

        double usum = 0.0, gsum = 0.0, gsum2 = 0.0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            const double u = sim_uniform(9, 3, static_cast<std::uint64_t>(i));
            CHECK(u >= 0.0);
            CHECK(u < 1.0);
            usum += u;
            const double g = sim_gaussian(9, 4, static_cast<std::uint64_t>(i));
            gsum += g;
            gsum2 += g * g;
        }
        CHECK(std::abs(usum / n - 0.5) < 0.01);
        const double gmean = gsum / n;
        CHECK(std::abs(gmean) < 0.025);
        CHECK(std::abs(std::sqrt(gsum2 / n - gmean * gmean) - 1.0) < 0.025);
    }

    TEST_CASE("same seed reproduces the scene bit for bit") {
        SceneSpec spec = tiny_scene();
        spec.noise_sigma = 3.0;
        spec.jitter_px = 2.0;
        spec.rotate_stage = true;
        spec.texture_amplitude = 0.2;
        spec.texture_period_px = 8.0;

        const GroundTruth a = generate_scene(spec, 77);
        const GroundTruth b = generate_scene(spec, 77);
        CHECK(a.texture.values == b.texture.values);
        CHECK(a.jitter == b.jitter);
        CHECK(a.corruption_weights == b.corruption_weights);

        const AcquisitionBundle ra = render_stack(a);
        const AcquisitionBundle rb = render_stack(b);
        REQUIRE(ra.stack.planes.size() == rb.stack.planes.size());
        for (std::size_t i = 0; i < ra.stack.planes.size(); ++i)
            CHECK(ra.stack.planes[i].values == rb.stack.planes[i].values);
        for (std::size_t i = 0; i < ra.darks.size(); ++i)
            CHECK(ra.darks[i].values == rb.darks[i].values);

        const GroundTruth c = generate_scene(spec, 78);
        CHECK(a.texture.values != c.texture.values);
        CHECK(a.jitter != c.jitter);
    }

    TEST_CASE("raw frames are quantized counts with reference frames") {
        SceneSpec spec = tiny_scene();
        spec.noise_sigma = 4.0;
        const GroundTruth truth = generate_scene(spec, 5);
        const AcquisitionBundle bundle = render_stack(truth);

        CHECK(bundle.stack.frame == FrameKind::Raw);
        CHECK(bundle.stack.angle_count() == 3);
        CHECK(bundle.stack.grid.count == 6);
        REQUIRE(static_cast<int>(bundle.darks.size()) == spec.dark_frame_count);
        REQUIRE(static_cast<int>(bundle.whites.size()) == 6);

        for (const ImagePlane& p : bundle.stack.planes)
            for (double v : p.values) {
                CHECK(v == std::floor(v));
                CHECK(v >= 0.0);
                CHECK(v <= 65535.0);
            }
        // Darks sit near the dark level, far below the illuminated scene.
        for (const ImagePlane& d : bundle.darks)
            for (double v : d.values) {
                CHECK(v > 300.0);
                CHECK(v < 500.0);
            }
        for (const ImagePlane& w : bundle.whites)
            for (double v : w.values) CHECK(v > 10000.0);
    }

    TEST_CASE("flat noise-free scene calibrates back to its reflectance") {
        const SceneSpec spec = tiny_scene();
        const GroundTruth truth = generate_scene(spec, 3);

        // Flat field: every normal is straight up.
        for (std::size_t i = 0; i < truth.normals.nx.size(); ++i) {
            CHECK(truth.normals.nx[i] == 0.0);
            CHECK(truth.normals.ny[i] == 0.0);
            CHECK(truth.normals.nz[i] == 1.0);
        }

        const AcquisitionBundle bundle = render_stack(truth);
        const DarkFrame dark = average_darks(bundle.darks);
        const SpectralStack refl = calibrate_stack(bundle.stack, bundle.whites, dark);

        // The white target is unshaded, so calibrated frames still carry the
        // N.L factor; for a flat scene that is cos(polar) everywhere.
        const double shade = light_vector(spec.geometry.polar_deg, 0.0).z;
        const SpectralDictionary dict = builtin_pigment_dictionary(spec.grid);
        const int zinc = dict.find("zinc_white");
        REQUIRE(zinc >= 0);
        for (int a = 0; a < 3; ++a)
            for (int j = 0; j < 6; ++j) {
                const double want = 0.8 * dict.atoms[static_cast<std::size_t>(zinc)]
                                              [static_cast<std::size_t>(j)] * shade;
                for (double got : refl.plane(a, j).values)
                    CHECK(std::abs(got - want) < 5e-5);
            }
    }

    TEST_CASE("ground truth layers follow the scene regions") {
        SceneSpec spec = tiny_scene();
        SceneRegion patch;
        patch.label = "patch";
        patch.rects = {{2, 3, 7, 9}};
        patch.mixture = {{"ultramarine", 0.5}, {"madder_lake", 0.4}};
        patch.corruption_amplitude = 0.3;
        spec.regions.push_back(patch);
        spec.texture_amplitude = 0.15;
        spec.texture_period_px = 6.0;
        spec.clean_angle = 1;

        const GroundTruth truth = generate_scene(spec, 21);
        REQUIRE(truth.atom_names == std::vector<std::string>{"ultramarine", "madder_lake",
                                                             "zinc_white"});
        // Later regions paint over earlier ones.
        CHECK(truth.label_map.at(0, 0) == 0.0);
        CHECK(truth.label_map.at(3, 4) == 1.0);
        CHECK(truth.abundances[2].at(0, 0) == 0.8);
        CHECK(truth.abundances[2].at(3, 4) == 0.0);
        CHECK(truth.abundances[0].at(3, 4) == 0.5);
        CHECK(truth.abundances[1].at(3, 4) == 0.4);

        // Diffuse = texture * linear pigment mixture, per wavelength.
        const SpectralDictionary dict = builtin_pigment_dictionary(spec.grid);
        for (int j = 0; j < 6; ++j) {
            const double mix = 0.5 * dict.atoms[static_cast<std::size_t>(dict.find("ultramarine"))]
                                         [static_cast<std::size_t>(j)] +
                               0.4 * dict.atoms[static_cast<std::size_t>(dict.find("madder_lake"))]
                                         [static_cast<std::size_t>(j)];
            CHECK(truth.diffuse.plane(0, j).at(3, 4) ==
                  doctest::Approx(truth.texture.at(3, 4) * mix).epsilon(1e-12));
        }
        for (double v : truth.texture.values) CHECK(v > 0.0);

        // Corruption weights: zero at the clean angle, at least 0.3 elsewhere.
        REQUIRE(truth.corruption_weights.size() == 3);
        CHECK(truth.corruption_weights[1] == 0.0);
        for (int a : {0, 2}) {
            CHECK(truth.corruption_weights[static_cast<std::size_t>(a)] >= 0.3);
            CHECK(truth.corruption_weights[static_cast<std::size_t>(a)] <= 1.0);
        }
    }

    TEST_CASE("dense regions saturate instead of mixing linearly") {
        SceneSpec spec = tiny_scene();
        SceneRegion glaze;
        glaze.label = "glaze";
        glaze.rects = {{4, 4, 10, 8}};
        glaze.mixture = {{"madder_lake", 0.6}, {"ultramarine", 0.3}};
        glaze.dense_floor = 0.01;
        glaze.dense_scale = 0.4;
        spec.regions.push_back(glaze);

        const GroundTruth truth = generate_scene(spec, 9);
        const SpectralDictionary dict = builtin_pigment_dictionary(spec.grid);
        for (int j = 0; j < 6; ++j) {
            const double mix =
                0.6 * dict.atoms[static_cast<std::size_t>(dict.find("madder_lake"))]
                          [static_cast<std::size_t>(j)] +
                0.3 * dict.atoms[static_cast<std::size_t>(dict.find("ultramarine"))]
                          [static_cast<std::size_t>(j)];
            CHECK(truth.diffuse.plane(0, j).at(5, 5) ==
                  doctest::Approx(0.01 + 0.4 * mix).epsilon(1e-12));
        }
        // Truth abundances keep the nominal fractions.
        CHECK(truth.abundances[1].at(5, 5) == 0.6);
        CHECK(truth.abundances[0].at(5, 5) == 0.3);
    }

    TEST_CASE("normal fields") {
        SceneSpec spec = tiny_scene();
        spec.normal_field.kind = NormalFieldSpec::Kind::Tilted;
        spec.normal_field.slope = 0.3;
        spec.normal_field.azimuth_deg = 0.0;
        const GroundTruth tilted = generate_scene(spec, 2);
        const double nx0 = tilted.normals.normal(0, 0).x;
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                const LightVector n = tilted.normals.normal(x, y);
                CHECK(n.x == doctest::Approx(nx0).epsilon(1e-12));
                CHECK(std::sqrt(n.x * n.x + n.y * n.y + n.z * n.z) ==
                      doctest::Approx(1.0).epsilon(1e-12));
                CHECK(std::hypot(n.x, n.y) / n.z == doctest::Approx(0.3).epsilon(1e-9));
            }

        spec.normal_field.kind = NormalFieldSpec::Kind::Bump;
        spec.normal_field.slope = 0.4;
        spec.normal_field.period_px = 8.0;
        const GroundTruth bump = generate_scene(spec, 2);
        double max_slope = 0.0;
        bool varies = false;
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                const LightVector n = bump.normals.normal(x, y);
                max_slope = std::max(max_slope, std::hypot(n.x, n.y) / n.z);
                varies = varies || std::abs(n.x - bump.normals.normal(0, 0).x) > 1e-6;
            }
        CHECK(varies);
        CHECK(max_slope <= 0.4 + 1e-9);
        CHECK(max_slope > 0.1);

        CHECK(normal_field_kind_from_string("grooves") == NormalFieldSpec::Kind::Grooves);
        CHECK(to_string(NormalFieldSpec::Kind::Bump) == "bump");
        CHECK_THROWS_AS(normal_field_kind_from_string("dunes"), ValidationError);
    }

    TEST_CASE("stage pose: jitter bounded and first angle exact") {
        SceneSpec spec = tiny_scene();
        spec.rotate_stage = true;
        spec.jitter_px = 2.5;
        spec.texture_amplitude = 0.3;
        spec.texture_period_px = 5.0;
        const GroundTruth truth = generate_scene(spec, 31);
        REQUIRE(truth.jitter.size() == 3);
        CHECK(truth.jitter[0][0] == 0.0);
        CHECK(truth.jitter[0][1] == 0.0);
        bool moved = false;
        for (const auto& j : truth.jitter) {
            CHECK(std::abs(j[0]) <= 2.5);
            CHECK(std::abs(j[1]) <= 2.5);
            moved = moved || j[0] != 0.0 || j[1] != 0.0;
        }
        CHECK(moved);

        // With the stage fixed, frames of a flat noise-free scene cannot
        // depend on the azimuth through anything but shading; a rotating
        // stage moves the texture pattern between angles.
        const AcquisitionBundle bundle = render_stack(truth);
        const ImagePlane& a0 = bundle.stack.plane(0, 0);
        const ImagePlane& a1 = bundle.stack.plane(1, 0);
        CHECK(a0.values != a1.values);
    }

    TEST_CASE("scene specs survive the json round trip") {
        SceneSpec spec = tiny_scene();
        spec.rotate_stage = true;
        spec.rotation_center = {{7.5, 5.0}};
        spec.jitter_px = 1.5;
        spec.noise_sigma = 2.0;
        spec.texture_amplitude = 0.1;
        spec.clean_angle = 2;
        SceneRegion glaze;
        glaze.label = "glaze";
        glaze.rects = {{1, 1, 4, 4}, {8, 2, 12, 6}};
        glaze.mixture = {{"prussian_blue", 0.7}};
        glaze.corruption_amplitude = 0.25;
        glaze.dense_floor = 0.02;
        glaze.dense_scale = 0.5;
        spec.regions.push_back(glaze);

        const fs::path path = fs::temp_directory_path() / "oispec_scene.json";
        save_scene_spec(spec, path);
        const SceneSpec back = load_scene_spec(path);
        CHECK(back.width == 16);
        CHECK(back.height == 12);
        CHECK(back.grid.step_nm == 50.0);
        CHECK(back.geometry.azimuths_deg == spec.geometry.azimuths_deg);
        REQUIRE(back.rotation_center.has_value());
        CHECK((*back.rotation_center)[0] == 7.5);
        CHECK(back.jitter_px == 1.5);
        CHECK(back.clean_angle == 2);
        REQUIRE(back.regions.size() == 2);
        CHECK(back.regions[1].label == "glaze");
        CHECK(back.regions[1].rects.size() == 2);
        CHECK(back.regions[1].rects[1].x1 == 12);
        CHECK(back.regions[1].mixture[0].first == "prussian_blue");
        CHECK(back.regions[1].dense_floor == 0.02);
        CHECK(back.regions[1].dense_scale == 0.5);
        CHECK(back.regions[1].corruption_amplitude == 0.25);
        CHECK(back.rotate_stage == true);
    }

    TEST_CASE("scene validation") {
        const SpectralDictionary dict = builtin_pigment_dictionary(WavelengthGrid{430.0, 50.0, 6});
        SceneSpec spec = tiny_scene();
        CHECK_NOTHROW(spec.validate(dict));

        spec.regions[0].mixture = {{"unobtainium", 1.0}};
        CHECK_THROWS_AS(spec.validate(dict), ValidationError);

        spec = tiny_scene();
        spec.regions[0].dense_floor = 0.1; // floor without a scale
        CHECK_THROWS_AS(spec.validate(dict), ValidationError);

        spec = tiny_scene();
        spec.regions[0].mixture = {{"zinc_white", 0.4}, {"ultramarine", 0.3}, {"vermilion", 0.2}};
        CHECK_THROWS_AS(spec.validate(dict), ValidationError); // k_true = 2

        spec = tiny_scene();
        spec.clean_angle = 3;
        CHECK_THROWS_AS(spec.validate(dict), ValidationError);

        spec = tiny_scene();
        spec.jitter_px = -1.0;
        CHECK_THROWS_AS(spec.validate(dict), ValidationError);
    }

    TEST_CASE("presets load and validate") {
        const std::vector<std::string> names = preset_scene_names();
        CHECK(names == std::vector<std::string>{"mockup4", "adversarial", "regtest", "sepcheck"});
        for (const std::string& name : names) {
            const SceneSpec spec = preset_scene(name);
            const SpectralDictionary dict = builtin_pigment_dictionary(spec.grid);
            CHECK_NOTHROW(spec.validate(dict));
        }
        CHECK(preset_scene("mockup4").width == 120);
        CHECK(preset_scene("regtest").jitter_px == 4.0);
        CHECK_THROWS_AS(preset_scene("nope"), ValidationError);
    }

    TEST_CASE("simulate_scene writes a loadable cube and its truth") {
        const fs::path dir = fs::temp_directory_path() / "oispec_sim_unit";
        fs::remove_all(dir);
        SceneSpec spec = tiny_scene();
        spec.noise_sigma = 2.0;
        const GroundTruth truth = simulate_scene(spec, 13, dir);

        CHECK(fs::exists(dir / "manifest.json"));
        CHECK(fs::exists(dir / "truth" / "scene.json"));
        CHECK(fs::exists(dir / "truth" / "jitter.json"));
        CHECK(fs::exists(dir / "truth" / "normals.bin"));
        CHECK(fs::exists(dir / "truth" / "abundance_zinc_white.f32"));
        CHECK(fs::exists(dir / "truth" / "diffuse" / "manifest.json"));

        const AcquisitionBundle bundle = load_bundle(dir);
        CHECK(bundle.stack.width == 16);
        CHECK(bundle.stack.frame == FrameKind::Raw);
        CHECK(bundle.darks.size() == 3);

        // The cube on disk is the render of the returned truth.
        const AcquisitionBundle expect = render_stack(truth);
        for (std::size_t i = 0; i < expect.stack.planes.size(); ++i)
            CHECK(bundle.stack.planes[i].values == expect.stack.planes[i].values);
        fs::remove_all(dir);
    }
}
