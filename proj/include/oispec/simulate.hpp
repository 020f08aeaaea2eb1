#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oispec/container.hpp"
#include "oispec/shape.hpp"
#include "oispec/types.hpp"
#include "oispec/unmix.hpp"

namespace oispec {

/// Half-open pixel rectangle [x0,x1) x [y0,y1).
struct PixelRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

/// One labeled layer: a union of rectangles, a sparse pigment mixture and
/// an additive corruption amplitude applied inside the region.
struct SceneRegion {
    std::string label;
    std::vector<PixelRect> rects;
    /// (builtin atom name, fraction) pairs; fractions are nonnegative and
    /// at most k_true entries per region.
    std::vector<std::pair<std::string, double>> mixture;
    double corruption_amplitude = 0.0;
    /// Dense-layer saturation: when dense_scale > 0 the region's reflectance
    /// becomes dense_floor + dense_scale * mixture instead of the plain linear
    /// mixture, crushing the constituents' structure the way an optically
    /// thick dark glaze does. Ground-truth abundances still store the mixture
    /// fractions, so sparse recovery is not expected to succeed here.
    double dense_floor = 0.0;
    double dense_scale = 0.0;
};

/// Analytic height fields; slope is the maximum gradient magnitude.
struct NormalFieldSpec {
    enum class Kind { Flat, Tilted, Bump, Grooves };
    Kind kind = Kind::Flat;
    double slope = 0.0;
    double azimuth_deg = 0.0;
    double period_px = 32.0;
};

std::string to_string(NormalFieldSpec::Kind kind);
NormalFieldSpec::Kind normal_field_kind_from_string(const std::string& s);

/// Complete forward-model description. JSON schema in docs/scene_spec.md.
struct SceneSpec {
    int width = 0;
    int height = 0;
    WavelengthGrid grid;
    IlluminationGeometry geometry;
    std::vector<SceneRegion> regions;
    NormalFieldSpec normal_field;
    int k_true = 2;

    bool rotate_stage = true;
    std::optional<std::array<double, 2>> rotation_center;
    /// Per-axis jitter bound in pixels; the first angle is always exact.
    double jitter_px = 0.0;

    double gain = 51000.0;
    double dark_level = 400.0;
    double noise_sigma = 0.0;
    int dark_frame_count = 50;

    /// Multiplicative band-limited noise texture around 1.0; amplitude
    /// bounds the deviation and period_px sets the correlation length.
    double texture_amplitude = 0.0;
    double texture_period_px = 24.0;

    /// Index into geometry.azimuths_deg with zero corruption weight, or -1.
    int clean_angle = -1;

    /// Throws ValidationError; mixture names are checked against
    /// `dictionary`.
    void validate(const SpectralDictionary& dictionary) const;
};

SceneSpec load_scene_spec(const std::filesystem::path& path);
void save_scene_spec(const SceneSpec& spec, const std::filesystem::path& path);

/// Built-in scenes: "mockup4" (four-band layered mockup), "adversarial"
/// (dense madder + ultramarine, the known false-positive case), "regtest"
/// (stage rotation + jitter), "sepcheck" (corruption separation).
SceneSpec preset_scene(const std::string& name);
std::vector<std::string> preset_scene_names();

/// Everything the verification side needs: per-pixel geometry, mixtures
/// and nuisance parameters, all prior to quantization.
struct GroundTruth {
    SceneSpec spec;
    std::uint64_t seed = 0;

    NormalMap normals;
    /// Atoms actually referenced by the scene, in dictionary order, with
    /// one fraction plane each.
    std::vector<std::string> atom_names;
    std::vector<ImagePlane> abundances;
    /// Region index per pixel.
    ImagePlane label_map;
    /// Multiplicative albedo texture; diffuse includes it.
    ImagePlane texture;
    /// Single-pseudo-angle diffuse stack: texture * sum fraction * atom.
    SpectralStack diffuse;

    /// Per-angle stage translation (first angle is zero).
    std::vector<std::array<double, 2>> jitter;
    /// Per-angle corruption weight in [0.3, 1], zero at the clean angle.
    std::vector<double> corruption_weights;
};

GroundTruth generate_scene(const SceneSpec& spec, std::uint64_t seed);

/// Renders raw 16-bit frames, the white stack and dark frames:
/// I = gain * (diffuse * max(0, N.L) + corruption), warped by the stage
/// pose, plus dark level and Gaussian noise, clamped and rounded. Whites
/// image a unit-reflectance flat target through the same camera.
AcquisitionBundle render_stack(const GroundTruth& truth);

/// Writes the acquisition cube plus truth/ (scene.json, normals,
/// abundance planes, diffuse cube, jitter.json).
void save_simulation(const GroundTruth& truth, const AcquisitionBundle& bundle,
                     const std::filesystem::path& dir);

/// generate + render + save in one call; returns the truth.
GroundTruth simulate_scene(const SceneSpec& spec, std::uint64_t seed,
                           const std::filesystem::path& dir);

/// Deterministic counter-based uniform in [0,1) and standard normal;
/// parallel and serial renders agree bit for bit because draws are keyed
/// by (seed, stream, counter) only.
double sim_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);
double sim_gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

} // namespace oispec
