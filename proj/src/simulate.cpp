#include "oispec/simulate.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "oispec/errors.hpp"
#include "oispec/io/f32.hpp"
#include "oispec/parallel.hpp"

namespace oispec {

namespace {

using nlohmann::json;

// Stream bases for counter-based randomness. Every random draw is a pure
// function of (seed, stream, counter), so the render order never matters.
constexpr std::uint64_t kStreamData = 1ull << 56;    // + angle * 4096 + wavelength
constexpr std::uint64_t kStreamWhite = 2ull << 56;   // + wavelength
constexpr std::uint64_t kStreamDark = 3ull << 56;    // + frame index
constexpr std::uint64_t kStreamJitter = 4ull << 56;  // + angle, counters 0/1
constexpr std::uint64_t kStreamCorrupt = 5ull << 56; // + angle, counter 0
constexpr std::uint64_t kStreamTexture = 6ull << 56; // counter = pixel index

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double corruption_profile(double wavelength_nm) {
    const double d = (wavelength_nm - 560.0) / 80.0;
    return 0.5 + 0.5 * std::exp(-0.5 * d * d);
}

struct Gradient {
    double hx = 0.0;
    double hy = 0.0;
};

Gradient height_gradient(const NormalFieldSpec& f, int x, int y) {
    const double rad = f.azimuth_deg * std::numbers::pi / 180.0;
    switch (f.kind) {
    case NormalFieldSpec::Kind::Flat:
        return {};
    case NormalFieldSpec::Kind::Tilted:
        return {f.slope * std::cos(rad), f.slope * std::sin(rad)};
    case NormalFieldSpec::Kind::Bump: {
        const double k = 2.0 * std::numbers::pi / f.period_px;
        return {f.slope * std::cos(k * x) * std::sin(k * y),
                f.slope * std::sin(k * x) * std::cos(k * y)};
    }
    case NormalFieldSpec::Kind::Grooves: {
        const double k = 2.0 * std::numbers::pi / f.period_px;
        const double u = x * std::cos(rad) + y * std::sin(rad);
        const double d = f.slope * std::cos(k * u);
        return {d * std::cos(rad), d * std::sin(rad)};
    }
    }
    return {};
}

// Bilinear sample with zero fill outside the frame: the stage moves the
// sample, and off-sample pixels image the black background.
double sample_zero_fill(const ImagePlane& p, double fx, double fy) {
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const double wx = fx - x0;
    const double wy = fy - y0;
    double acc = 0.0;
    for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
            const double w = (dx ? wx : 1.0 - wx) * (dy ? wy : 1.0 - wy);
            if (w <= 1e-12) continue;
            const int x = x0 + dx;
            const int y = y0 + dy;
            if (x < 0 || x >= p.width || y < 0 || y >= p.height) continue;
            acc += w * p.at(x, y);
        }
    return acc;
}

std::uint16_t quantize(double v) {
    v = std::max(0.0, v);
    v = std::round(v);
    return static_cast<std::uint16_t>(std::min(v, 65535.0));
}

json rect_to_json(const PixelRect& r) { return json::array({r.x0, r.y0, r.x1, r.y1}); }

PixelRect rect_from_json(const json& j) {
    if (!j.is_array() || j.size() != 4)
        throw ValidationError("scene spec: rects must be [x0, y0, x1, y1] arrays");
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

} // namespace

double sim_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    const std::uint64_t h = mix64(mix64(mix64(seed) ^ stream) ^ counter);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double sim_gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    const double u1 = std::max(sim_uniform(seed, stream, 2 * counter), 0x1.0p-53);
    const double u2 = sim_uniform(seed, stream, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string to_string(NormalFieldSpec::Kind kind) {
    switch (kind) {
    case NormalFieldSpec::Kind::Flat:
        return "flat";
    case NormalFieldSpec::Kind::Tilted:
        return "tilted";
    case NormalFieldSpec::Kind::Bump:
        return "bump";
    case NormalFieldSpec::Kind::Grooves:
        return "grooves";
    }
    return "flat";
}

NormalFieldSpec::Kind normal_field_kind_from_string(const std::string& s) {
    if (s == "flat") return NormalFieldSpec::Kind::Flat;
    if (s == "tilted") return NormalFieldSpec::Kind::Tilted;
    if (s == "bump") return NormalFieldSpec::Kind::Bump;
    if (s == "grooves") return NormalFieldSpec::Kind::Grooves;
    throw ValidationError("scene spec: unknown normal field kind '" + s + "'");
}

void SceneSpec::validate(const SpectralDictionary& dictionary) const {
    if (width <= 0 || height <= 0)
        throw ValidationError("scene spec: width and height must be positive");
    grid.validate();
    geometry.validate();
    dictionary.validate();
    if (dictionary.grid != grid)
        throw ValidationError("scene spec: dictionary grid must match the scene grid");

    if (gain <= 0.0) throw ValidationError("scene spec: gain must be positive");
    if (dark_level < 0.0) throw ValidationError("scene spec: dark_level must be nonnegative");
    if (noise_sigma < 0.0) throw ValidationError("scene spec: noise_sigma must be nonnegative");
    if (dark_frame_count < 1) throw ValidationError("scene spec: dark_frames must be >= 1");
    if (jitter_px < 0.0) throw ValidationError("scene spec: jitter_px must be nonnegative");
    if (k_true < 1) throw ValidationError("scene spec: k_true must be >= 1");
    if (texture_amplitude < 0.0 || texture_amplitude >= 1.0)
        throw ValidationError("scene spec: texture amplitude must lie in [0, 1)");
    if (texture_period_px <= 0.0)
        throw ValidationError("scene spec: texture period must be positive");
    if (normal_field.slope < 0.0 || normal_field.slope > 1.0)
        throw ValidationError("scene spec: normal field slope must lie in [0, 1]");
    if (normal_field.period_px <= 0.0)
        throw ValidationError("scene spec: normal field period must be positive");
    if (clean_angle < -1 || clean_angle >= geometry.angle_count())
        throw ValidationError("scene spec: clean_angle must be -1 or an azimuth index");
    if (rotation_center &&
        (!std::isfinite((*rotation_center)[0]) || !std::isfinite((*rotation_center)[1])))
        throw ValidationError("scene spec: rotation_center must be finite");

    if (regions.empty()) throw ValidationError("scene spec: at least one region required");
    std::vector<char> covered(static_cast<std::size_t>(width) * height, 0);
    for (std::size_t r = 0; r < regions.size(); ++r) {
        const SceneRegion& region = regions[r];
        const std::string where = "scene spec: region '" + region.label + "'";
        if (region.label.empty()) throw ValidationError("scene spec: region labels must be set");
        for (std::size_t q = 0; q < r; ++q)
            if (regions[q].label == region.label)
                throw ValidationError(where + ": duplicate label");
        if (region.rects.empty()) throw ValidationError(where + ": no rects");
        for (const PixelRect& rect : region.rects) {
            if (rect.x0 < 0 || rect.y0 < 0 || rect.x1 > width || rect.y1 > height ||
                rect.x0 >= rect.x1 || rect.y0 >= rect.y1)
                throw ValidationError(where + ": rect outside the frame or empty");
            for (int y = rect.y0; y < rect.y1; ++y)
                std::fill(covered.begin() + static_cast<std::ptrdiff_t>(y) * width + rect.x0,
                          covered.begin() + static_cast<std::ptrdiff_t>(y) * width + rect.x1,
                          char(1));
        }
        if (region.mixture.empty()) throw ValidationError(where + ": empty mixture");
        if (static_cast<int>(region.mixture.size()) > k_true)
            throw ValidationError(where + ": mixture has more than k_true atoms");
        for (const auto& [atom, fraction] : region.mixture) {
            if (dictionary.find(atom) < 0)
                throw ValidationError(where + ": unknown dictionary atom '" + atom + "'");
            if (!(fraction >= 0.0))
                throw ValidationError(where + ": fractions must be nonnegative");
        }
        if (region.corruption_amplitude < 0.0)
            throw ValidationError(where + ": corruption amplitude must be nonnegative");
        if (region.dense_scale < 0.0 || region.dense_floor < 0.0)
            throw ValidationError(where + ": dense floor and scale must be nonnegative");
        if (region.dense_floor > 0.0 && region.dense_scale <= 0.0)
            throw ValidationError(where + ": dense floor requires a positive dense scale");
    }
    if (std::find(covered.begin(), covered.end(), char(0)) != covered.end())
        throw ValidationError("scene spec: regions must cover every pixel");
}

SceneSpec load_scene_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read scene spec " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ValidationError("scene spec " + path.string() + ": invalid JSON (" + e.what() + ")");
    }

    SceneSpec s;
    try {
        s.width = doc.at("width").get<int>();
        s.height = doc.at("height").get<int>();
        const json& g = doc.at("grid");
        s.grid = {g.at("start_nm").get<double>(), g.at("step_nm").get<double>(),
                  g.at("count").get<int>()};
        const json& geo = doc.at("geometry");
        s.geometry.polar_deg = geo.at("polar_deg").get<double>();
        s.geometry.azimuths_deg = geo.at("azimuths_deg").get<std::vector<double>>();

        s.k_true = doc.value("k_true", s.k_true);
        s.rotate_stage = doc.value("rotate_stage", s.rotate_stage);
        if (doc.contains("rotation_center") && !doc["rotation_center"].is_null())
            s.rotation_center = doc["rotation_center"].get<std::array<double, 2>>();
        s.jitter_px = doc.value("jitter_px", s.jitter_px);
        s.gain = doc.value("gain", s.gain);
        s.dark_level = doc.value("dark_level", s.dark_level);
        s.noise_sigma = doc.value("noise_sigma", s.noise_sigma);
        s.dark_frame_count = doc.value("dark_frames", s.dark_frame_count);
        s.clean_angle = doc.value("clean_angle", s.clean_angle);
        if (doc.contains("texture")) {
            s.texture_amplitude = doc["texture"].value("amplitude", s.texture_amplitude);
            s.texture_period_px = doc["texture"].value("period_px", s.texture_period_px);
        }
        if (doc.contains("normal_field")) {
            const json& nf = doc["normal_field"];
            s.normal_field.kind =
                normal_field_kind_from_string(nf.value("kind", std::string("flat")));
            s.normal_field.slope = nf.value("slope", 0.0);
            s.normal_field.azimuth_deg = nf.value("azimuth_deg", 0.0);
            s.normal_field.period_px = nf.value("period_px", 32.0);
        }
        for (const json& r : doc.at("regions")) {
            SceneRegion region;
            region.label = r.at("label").get<std::string>();
            for (const json& rect : r.at("rects")) region.rects.push_back(rect_from_json(rect));
            for (const json& m : r.at("mixture"))
                region.mixture.emplace_back(m.at("atom").get<std::string>(),
                                            m.at("fraction").get<double>());
            region.corruption_amplitude = r.value("corruption_amplitude", 0.0);
            if (r.contains("dense")) {
                region.dense_floor = r["dense"].value("floor", 0.0);
                region.dense_scale = r["dense"].value("scale", 0.0);
            }
            s.regions.push_back(std::move(region));
        }
    } catch (const json::exception& e) {
        throw ValidationError("scene spec " + path.string() + ": " + e.what());
    }
    return s;
}

void save_scene_spec(const SceneSpec& spec, const std::filesystem::path& path) {
    json doc{
        {"width", spec.width},
        {"height", spec.height},
        {"grid",
         {{"start_nm", spec.grid.start_nm},
          {"step_nm", spec.grid.step_nm},
          {"count", spec.grid.count}}},
        {"geometry",
         {{"polar_deg", spec.geometry.polar_deg}, {"azimuths_deg", spec.geometry.azimuths_deg}}},
        {"k_true", spec.k_true},
        {"rotate_stage", spec.rotate_stage},
        {"jitter_px", spec.jitter_px},
        {"gain", spec.gain},
        {"dark_level", spec.dark_level},
        {"noise_sigma", spec.noise_sigma},
        {"dark_frames", spec.dark_frame_count},
        {"clean_angle", spec.clean_angle},
        {"texture",
         {{"amplitude", spec.texture_amplitude}, {"period_px", spec.texture_period_px}}},
        {"normal_field",
         {{"kind", to_string(spec.normal_field.kind)},
          {"slope", spec.normal_field.slope},
          {"azimuth_deg", spec.normal_field.azimuth_deg},
          {"period_px", spec.normal_field.period_px}}},
    };
    if (spec.rotation_center)
        doc["rotation_center"] = {(*spec.rotation_center)[0], (*spec.rotation_center)[1]};
    json regions = json::array();
    for (const SceneRegion& r : spec.regions) {
        json rects = json::array();
        for (const PixelRect& rect : r.rects) rects.push_back(rect_to_json(rect));
        json mixture = json::array();
        for (const auto& [atom, fraction] : r.mixture)
            mixture.push_back({{"atom", atom}, {"fraction", fraction}});
        json entry{{"label", r.label},
                   {"rects", rects},
                   {"mixture", mixture},
                   {"corruption_amplitude", r.corruption_amplitude}};
        if (r.dense_scale > 0.0)
            entry["dense"] = {{"floor", r.dense_floor}, {"scale", r.dense_scale}};
        regions.push_back(std::move(entry));
    }
    doc["regions"] = regions;

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FrameIoError("cannot create " + path.string());
    out << doc.dump(2) << "\n";
    if (!out) throw FrameIoError("failed writing " + path.string());
}

std::vector<std::string> preset_scene_names() {
    return {"mockup4", "adversarial", "regtest", "sepcheck"};
}

SceneSpec preset_scene(const std::string& name) {
    auto azimuths = [](int n) {
        std::vector<double> a(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = 360.0 * i / n;
        return a;
    };

    SceneSpec s;
    s.geometry.polar_deg = 50.0;
    s.geometry.azimuths_deg = azimuths(10);

    if (name == "mockup4") {
        // Four stacked paint layers exposed as bands in cross-section, each
        // a 1- or 2-pigment mixture; two bands carry angle-dependent
        // corruption with azimuth 0 guaranteed clean.
        s.width = 120;
        s.height = 96;
        s.grid = {430.0, 10.0, 58};
        s.rotate_stage = false;
        s.jitter_px = 0.0;
        s.noise_sigma = 4.0;
        s.texture_amplitude = 0.12;
        s.texture_period_px = 24.0;
        s.normal_field = {NormalFieldSpec::Kind::Bump, 0.30, 0.0, 48.0};
        s.clean_angle = 0;
        s.regions = {
            {"layer1", {{0, 0, 120, 24}}, {{"ultramarine", 0.6}, {"zinc_white", 0.4}}, 0.0},
            {"layer2", {{0, 24, 120, 48}}, {{"madder_lake", 0.9}}, 0.0},
            {"layer3", {{0, 48, 120, 72}}, {{"vermilion", 0.85}}, 0.06},
            {"layer4", {{0, 72, 120, 96}}, {{"cadmium_yellow", 0.7}, {"prussian_blue", 0.3}}, 0.0},
        };
    } else if (name == "adversarial") {
        // Optically dense madder + ultramarine glaze patch on a white ground.
        // Saturation crushes the glaze to an almost flat, near-zero profile
        // that the unmixer reads as Prussian blue: the documented
        // false-positive case.
        s.width = 48;
        s.height = 48;
        s.grid = {430.0, 10.0, 58};
        s.rotate_stage = false;
        s.jitter_px = 0.0;
        s.noise_sigma = 2.0;
        s.normal_field = {};
        s.clean_angle = -1;
        SceneRegion ground{"ground", {{0, 0, 48, 48}}, {{"zinc_white", 0.85}}, 0.0};
        SceneRegion glaze{"dense_glaze",
                          {{12, 12, 36, 36}},
                          {{"madder_lake", 0.05}, {"ultramarine", 0.04}},
                          0.0};
        glaze.dense_floor = 0.006;
        glaze.dense_scale = 0.52;
        s.regions = {ground, glaze};
    } else if (name == "regtest") {
        // Rotating stage at 36 degree steps with random jitter up to 4 px;
        // strong texture so phase correlation has structure to lock onto.
        s.width = 96;
        s.height = 96;
        s.grid = {430.0, 30.0, 10};
        s.rotate_stage = true;
        s.jitter_px = 4.0;
        s.noise_sigma = 0.0;
        s.texture_amplitude = 0.35;
        s.texture_period_px = 13.0;
        s.normal_field = {NormalFieldSpec::Kind::Bump, 0.25, 0.0, 30.0};
        s.clean_angle = -1;
        s.regions = {
            {"left", {{0, 0, 48, 96}}, {{"vermilion", 0.7}, {"zinc_white", 0.3}}, 0.0},
            {"right", {{48, 0, 96, 96}}, {{"ultramarine", 0.5}, {"zinc_white", 0.5}}, 0.0},
        };
    } else if (name == "sepcheck") {
        // Flat Lambertian scene, corruption confined to the left half with
        // azimuth 0 clean: isolates the min-projection separation claim.
        s.width = 64;
        s.height = 48;
        s.grid = {430.0, 10.0, 58};
        s.rotate_stage = false;
        s.jitter_px = 0.0;
        s.noise_sigma = 0.0;
        s.normal_field = {};
        s.clean_angle = 0;
        s.regions = {
            {"corrupted", {{0, 0, 32, 48}}, {{"zinc_white", 0.8}}, 0.4},
            {"clean", {{32, 0, 64, 48}}, {{"vermilion", 0.8}}, 0.0},
        };
    } else {
        throw ValidationError("unknown scene preset '" + name +
                              "' (available: mockup4, adversarial, regtest, sepcheck)");
    }
    return s;
}

GroundTruth generate_scene(const SceneSpec& spec, std::uint64_t seed) {
    const SpectralDictionary dict = builtin_pigment_dictionary(spec.grid);
    spec.validate(dict);

    GroundTruth t;
    t.spec = spec;
    t.seed = seed;

    t.label_map = ImagePlane(spec.width, spec.height);
    for (std::size_t r = 0; r < spec.regions.size(); ++r)
        for (const PixelRect& rect : spec.regions[r].rects)
            for (int y = rect.y0; y < rect.y1; ++y)
                for (int x = rect.x0; x < rect.x1; ++x)
                    t.label_map.at(x, y) = static_cast<double>(r);

    std::vector<int> used;
    for (const SceneRegion& region : spec.regions)
        for (const auto& [atom, fraction] : region.mixture) {
            const int idx = dict.find(atom);
            if (std::find(used.begin(), used.end(), idx) == used.end()) used.push_back(idx);
        }
    std::sort(used.begin(), used.end());
    for (int idx : used) t.atom_names.push_back(dict.names[static_cast<std::size_t>(idx)]);
    t.abundances.assign(used.size(), ImagePlane(spec.width, spec.height));

    // Albedo texture: band-limited noise (box-blurred counter-based
    // uniforms) so registration sees broadband structure with an unambiguous
    // autocorrelation peak; period_px sets the correlation length.
    t.texture = ImagePlane(spec.width, spec.height, 1.0);
    if (spec.texture_amplitude > 0.0) {
        ImagePlane field(spec.width, spec.height);
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x)
                field.at(x, y) =
                    2.0 * sim_uniform(seed, kStreamTexture,
                                      static_cast<std::uint64_t>(y) * spec.width + x) -
                    1.0;
        const int radius = std::max(1, static_cast<int>(std::lround(spec.texture_period_px / 4.0)));
        auto blur = [&](const ImagePlane& src, bool horizontal) {
            ImagePlane dst(spec.width, spec.height);
            for (int y = 0; y < spec.height; ++y)
                for (int x = 0; x < spec.width; ++x) {
                    double acc = 0.0;
                    for (int d = -radius; d <= radius; ++d) {
                        const int sx = horizontal ? std::clamp(x + d, 0, spec.width - 1) : x;
                        const int sy = horizontal ? y : std::clamp(y + d, 0, spec.height - 1);
                        acc += src.at(sx, sy);
                    }
                    dst.at(x, y) = acc / (2 * radius + 1);
                }
            return dst;
        };
        field = blur(blur(field, true), false);
        double rms = 0.0;
        for (double v : field.values) rms += v * v;
        rms = std::sqrt(rms / static_cast<double>(field.values.size()));
        // tanh keeps the full amplitude in the bulk while softly bounding the
        // tails, so texture stays positive for any amplitude below one.
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x)
                t.texture.at(x, y) =
                    1.0 + spec.texture_amplitude * std::tanh(field.at(x, y) / rms);
    }

    t.normals.width = spec.width;
    t.normals.height = spec.height;
    const std::size_t n_px = static_cast<std::size_t>(spec.width) * spec.height;
    t.normals.nx.assign(n_px, 0.0);
    t.normals.ny.assign(n_px, 0.0);
    t.normals.nz.assign(n_px, 1.0);
    t.normals.k.assign(n_px, 1.0);
    t.normals.valid.assign(n_px, 1);
    t.normals.residual_rms = ImagePlane(spec.width, spec.height);
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            const Gradient g = height_gradient(spec.normal_field, x, y);
            const double inv = 1.0 / std::sqrt(g.hx * g.hx + g.hy * g.hy + 1.0);
            const std::size_t i = t.normals.index(x, y);
            t.normals.nx[i] = -g.hx * inv;
            t.normals.ny[i] = -g.hy * inv;
            t.normals.nz[i] = inv;
        }

    t.diffuse = make_stack(spec.grid, IlluminationGeometry{spec.geometry.polar_deg, {0.0}},
                           spec.width, spec.height, FrameKind::Diffuse);
    t.diffuse.sample_rotates = false;
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            const SceneRegion& region =
                spec.regions[static_cast<std::size_t>(t.label_map.at(x, y))];
            for (std::size_t a = 0; a < used.size(); ++a) t.abundances[a].at(x, y) = 0.0;
            for (const auto& [atom, fraction] : region.mixture) {
                const int idx = dict.find(atom);
                const std::size_t slot = static_cast<std::size_t>(
                    std::find(used.begin(), used.end(), idx) - used.begin());
                t.abundances[slot].at(x, y) = fraction;
            }
            const double tex = t.texture.at(x, y);
            for (int j = 0; j < spec.grid.count; ++j) {
                double refl = 0.0;
                for (std::size_t a = 0; a < used.size(); ++a)
                    refl += t.abundances[a].at(x, y) *
                            dict.atoms[static_cast<std::size_t>(used[a])][static_cast<std::size_t>(j)];
                if (region.dense_scale > 0.0)
                    refl = region.dense_floor + region.dense_scale * refl;
                t.diffuse.plane(0, j).at(x, y) = tex * refl;
            }
        }

    const int n_angles = spec.geometry.angle_count();
    t.jitter.assign(static_cast<std::size_t>(n_angles), {0.0, 0.0});
    t.corruption_weights.assign(static_cast<std::size_t>(n_angles), 0.0);
    for (int a = 0; a < n_angles; ++a) {
        if (a > 0 && spec.jitter_px > 0.0) {
            const std::uint64_t stream = kStreamJitter + static_cast<std::uint64_t>(a);
            t.jitter[static_cast<std::size_t>(a)] = {
                (2.0 * sim_uniform(seed, stream, 0) - 1.0) * spec.jitter_px,
                (2.0 * sim_uniform(seed, stream, 1) - 1.0) * spec.jitter_px};
        }
        if (a != spec.clean_angle)
            t.corruption_weights[static_cast<std::size_t>(a)] =
                0.3 + 0.7 * sim_uniform(seed, kStreamCorrupt + static_cast<std::uint64_t>(a), 0);
    }
    return t;
}

AcquisitionBundle render_stack(const GroundTruth& truth) {
    const SceneSpec& s = truth.spec;
    const std::uint64_t seed = truth.seed;
    const std::vector<LightVector> lights = s.geometry.light_vectors();
    const std::array<double, 2> center =
        s.rotation_center ? *s.rotation_center
                          : std::array<double, 2>{(s.width - 1) / 2.0, (s.height - 1) / 2.0};

    // Per-pixel corruption amplitude from the region map.
    ImagePlane amplitude(s.width, s.height);
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x)
            amplitude.at(x, y) =
                s.regions[static_cast<std::size_t>(truth.label_map.at(x, y))].corruption_amplitude;

    AcquisitionBundle bundle;
    bundle.stack = make_stack(s.grid, s.geometry, s.width, s.height, FrameKind::Raw);
    bundle.stack.sample_rotates = s.rotate_stage;
    if (s.rotate_stage) bundle.stack.rotation_center = center;

    const int n_angles = s.geometry.angle_count();
    const int n_wl = s.grid.count;
    const std::size_t n_planes = static_cast<std::size_t>(n_angles) * n_wl;

    parallel_for(n_planes, [&](std::size_t p0, std::size_t p1) {
        ImagePlane upright(s.width, s.height);
        for (std::size_t p = p0; p < p1; ++p) {
            const int a = static_cast<int>(p) / n_wl;
            const int j = static_cast<int>(p) % n_wl;
            const LightVector& L = lights[static_cast<std::size_t>(a)];
            const double w_corr = truth.corruption_weights[static_cast<std::size_t>(a)];
            const double g = corruption_profile(s.grid.wavelength(j));
            const ImagePlane& diffuse = truth.diffuse.plane(0, j);

            for (int y = 0; y < s.height; ++y)
                for (int x = 0; x < s.width; ++x) {
                    const LightVector n = truth.normals.normal(x, y);
                    const double shading = std::max(0.0, n.dot(L));
                    upright.at(x, y) =
                        diffuse.at(x, y) * shading + amplitude.at(x, y) * w_corr * g;
                }

            const double beta = s.rotate_stage ? s.geometry.azimuths_deg[static_cast<std::size_t>(a)] : 0.0;
            const auto& jit = truth.jitter[static_cast<std::size_t>(a)];
            const bool warped = beta != 0.0 || jit[0] != 0.0 || jit[1] != 0.0;
            const double rad = -beta * std::numbers::pi / 180.0;
            const double cr = std::cos(rad);
            const double sr = std::sin(rad);

            ImagePlane& out = bundle.stack.plane(a, j);
            const std::uint64_t stream =
                kStreamData + static_cast<std::uint64_t>(a) * 4096 + static_cast<std::uint64_t>(j);
            for (int y = 0; y < s.height; ++y)
                for (int x = 0; x < s.width; ++x) {
                    double radiance;
                    if (warped) {
                        const double dx = x - center[0] - jit[0];
                        const double dy = y - center[1] - jit[1];
                        radiance = sample_zero_fill(upright, center[0] + cr * dx - sr * dy,
                                                    center[1] + sr * dx + cr * dy);
                    } else {
                        radiance = upright.at(x, y);
                    }
                    double v = s.gain * radiance + s.dark_level;
                    if (s.noise_sigma > 0.0)
                        v += s.noise_sigma * sim_gaussian(seed, stream, upright.index(x, y));
                    out.at(x, y) = quantize(v);
                }
        }
    });

    // White stack: a unit-reflectance flat calibration target imaged per
    // wavelength through the same camera (no stage warp, Lambert term
    // already folded into the reference).
    bundle.whites.assign(static_cast<std::size_t>(n_wl), ImagePlane(s.width, s.height));
    parallel_for(static_cast<std::size_t>(n_wl), [&](std::size_t j0, std::size_t j1) {
        for (std::size_t j = j0; j < j1; ++j) {
            ImagePlane& out = bundle.whites[j];
            const std::uint64_t stream = kStreamWhite + j;
            for (std::size_t i = 0; i < out.pixel_count(); ++i) {
                double v = s.gain + s.dark_level;
                if (s.noise_sigma > 0.0) v += s.noise_sigma * sim_gaussian(seed, stream, i);
                out.values[i] = quantize(v);
            }
        }
    });

    bundle.darks.assign(static_cast<std::size_t>(s.dark_frame_count), ImagePlane(s.width, s.height));
    parallel_for(bundle.darks.size(), [&](std::size_t k0, std::size_t k1) {
        for (std::size_t k = k0; k < k1; ++k) {
            ImagePlane& out = bundle.darks[k];
            const std::uint64_t stream = kStreamDark + k;
            for (std::size_t i = 0; i < out.pixel_count(); ++i) {
                double v = s.dark_level;
                if (s.noise_sigma > 0.0) v += s.noise_sigma * sim_gaussian(seed, stream, i);
                out.values[i] = quantize(v);
            }
        }
    });
    return bundle;
}

void save_simulation(const GroundTruth& truth, const AcquisitionBundle& bundle,
                     const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    save_bundle(bundle, dir);

    const fs::path troot = dir / "truth";
    fs::create_directories(troot);
    save_scene_spec(truth.spec, troot / "scene.json");
    save_normal_map(truth.normals, troot / "normals.bin");
    save_stack(truth.diffuse, troot / "diffuse");
    io::write_f32(truth.label_map, troot / "label_map.f32");
    io::write_f32(truth.texture, troot / "texture.f32");

    json abundances{{"width", truth.label_map.width},
                    {"height", truth.label_map.height},
                    {"atoms", json::array()}};
    for (std::size_t a = 0; a < truth.atom_names.size(); ++a) {
        const std::string file = "abundance_" + truth.atom_names[a] + ".f32";
        io::write_f32(truth.abundances[a], troot / file);
        abundances["atoms"].push_back({{"name", truth.atom_names[a]}, {"path", file}});
    }
    std::ofstream ab(troot / "abundances.json", std::ios::trunc);
    ab << abundances.dump(2) << "\n";

    json jitter{{"seed", truth.seed}, {"angles", json::array()}};
    for (std::size_t a = 0; a < truth.jitter.size(); ++a)
        jitter["angles"].push_back(
            {{"azimuth_deg", truth.spec.geometry.azimuths_deg[a]},
             {"jitter_px", {truth.jitter[a][0], truth.jitter[a][1]}},
             {"corruption_weight", truth.corruption_weights[a]}});
    std::ofstream jt(troot / "jitter.json", std::ios::trunc);
    jt << jitter.dump(2) << "\n";
    if (!ab || !jt) throw FrameIoError("failed writing truth files under " + troot.string());
}

GroundTruth simulate_scene(const SceneSpec& spec, std::uint64_t seed,
                           const std::filesystem::path& dir) {
    GroundTruth truth = generate_scene(spec, seed);
    const AcquisitionBundle bundle = render_stack(truth);
    save_simulation(truth, bundle, dir);
    return truth;
}

} // namespace oispec
