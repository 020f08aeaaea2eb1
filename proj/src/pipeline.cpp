#include "oispec/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "oispec/calibrate.hpp"
#include "oispec/colorimetry.hpp"
#include "oispec/container.hpp"
#include "oispec/errors.hpp"
#include "oispec/io/f32.hpp"
#include "oispec/io/png.hpp"
#include "oispec/parallel.hpp"
#include "oispec/project.hpp"
#include "oispec/shape.hpp"

namespace oispec {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Rethrows preserving the concrete error type so exit codes survive the
// stage wrapper.
template <typename F>
auto run_stage(const std::string& name, F&& f) {
    try {
        return f();
    } catch (const ManifestError& e) {
        throw ManifestError(name + ": " + e.what());
    } catch (const DimensionError& e) {
        throw DimensionError(name + ": " + e.what());
    } catch (const FrameIoError& e) {
        throw FrameIoError(name + ": " + e.what());
    } catch (const GeometryError& e) {
        throw GeometryError(name + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(name + ": " + e.what());
    } catch (const ComputationError& e) {
        throw ComputationError(name + ": " + e.what());
    }
}

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

json config_to_json(const PipelineConfig& c) {
    json doc{{"input", c.input.string()},
             {"white", c.white.string()},
             {"darks", c.darks.string()},
             {"dictionary", c.dictionary},
             {"output", c.output.string()},
             {"mode", c.mode == RegisterMode::Auto ? "auto" : "landmarks"},
             {"white_mean", c.white_mean},
             {"trim", c.trim},
             {"rank", c.rank},
             {"k_sparsity", c.k_sparsity},
             {"nnls", c.nnls},
             {"norm", c.norm == UnmixOptions::Norm::Max ? "max" : "sum"},
             {"threads", c.threads}};
    if (!c.landmarks.empty()) doc["landmarks"] = c.landmarks.string();
    if (c.center) doc["center"] = {(*c.center)[0], (*c.center)[1]};
    if (c.render_angle)
        doc["render_angle"] = *c.render_angle;
    else
        doc["render_angle"] = "min";
    return doc;
}

} // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FrameIoError("cannot read " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
        if (n < static_cast<std::streamsize>(sizeof(buf))) break;
    }
    return h;
}

void PipelineConfig::validate() const {
    if (input.empty()) throw ValidationError("pipeline config: input is required");
    if (output.empty()) throw ValidationError("pipeline config: output is required");
    if (dictionary.empty())
        throw ValidationError("pipeline config: dictionary is required (path or \"builtin\")");
    if (dictionary != "builtin" && !fs::exists(dictionary))
        throw ValidationError("pipeline config: dictionary file " + dictionary + " not found");
    if (!fs::exists(input))
        throw ValidationError("pipeline config: input " + input.string() + " not found");
    if (!white.empty() && !fs::exists(white))
        throw ValidationError("pipeline config: white " + white.string() + " not found");
    if (!darks.empty() && !fs::exists(darks))
        throw ValidationError("pipeline config: darks " + darks.string() + " not found");
    if (mode == RegisterMode::Landmarks) {
        if (landmarks.empty())
            throw ValidationError("pipeline config: landmarks file required in landmarks mode");
        if (!fs::exists(landmarks))
            throw ValidationError("pipeline config: landmarks " + landmarks.string() +
                                  " not found");
    }
    if (rank < 1) throw ValidationError("pipeline config: rank must be >= 1");
    if (k_sparsity < 1) throw ValidationError("pipeline config: k_sparsity must be >= 1");
    if (threads < 0) throw ValidationError("pipeline config: threads must be >= 0");
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read pipeline config " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ValidationError("pipeline config " + path.string() + ": invalid JSON (" + e.what() +
                              ")");
    }

    PipelineConfig c;
    try {
        c.input = doc.at("input").get<std::string>();
        c.output = doc.at("output").get<std::string>();
        if (doc.contains("dictionary")) c.dictionary = doc["dictionary"].get<std::string>();
        c.white = doc.value("white", std::string());
        c.darks = doc.value("darks", std::string());
        const std::string mode = doc.value("mode", std::string("auto"));
        if (mode == "auto")
            c.mode = RegisterMode::Auto;
        else if (mode == "landmarks")
            c.mode = RegisterMode::Landmarks;
        else
            throw ValidationError("pipeline config: mode must be auto or landmarks");
        c.landmarks = doc.value("landmarks", std::string());
        if (doc.contains("center") && !doc["center"].is_null())
            c.center = doc["center"].get<std::array<double, 2>>();
        c.white_mean = doc.value("white_mean", false);
        c.trim = doc.value("trim", false);
        c.rank = doc.value("rank", 1);
        c.k_sparsity = doc.value("k_sparsity", 2);
        c.nnls = doc.value("nnls", false);
        const std::string norm = doc.value("norm", std::string("max"));
        if (norm == "max")
            c.norm = UnmixOptions::Norm::Max;
        else if (norm == "sum")
            c.norm = UnmixOptions::Norm::Sum;
        else
            throw ValidationError("pipeline config: norm must be max or sum");
        if (doc.contains("render_angle") && !doc["render_angle"].is_null()) {
            const json& ra = doc["render_angle"];
            if (ra.is_string()) {
                if (ra.get<std::string>() != "min")
                    throw ValidationError(
                        "pipeline config: render_angle must be \"min\" or an azimuth");
            } else {
                c.render_angle = ra.get<double>();
            }
        }
        c.threads = doc.value("threads", 0);
    } catch (const json::exception& e) {
        throw ValidationError("pipeline config " + path.string() + ": " + e.what());
    }
    return c;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
    config.validate();
    if (config.threads > 0) set_max_threads(config.threads);

    // Load and validate every input before any stage output is written.
    const AcquisitionBundle input = run_stage("stage load", [&] { return load_bundle(config.input); });
    std::vector<ImagePlane> whites = input.whites;
    std::vector<ImagePlane> darks = input.darks;
    if (!config.white.empty())
        whites = run_stage("stage load", [&] { return load_bundle(config.white).whites; });
    if (!config.darks.empty())
        darks = run_stage("stage load", [&] { return load_bundle(config.darks).darks; });
    if (whites.empty()) throw ValidationError("pipeline: no white frames available");
    if (darks.empty()) throw ValidationError("pipeline: no dark frames available");

    SpectralDictionary dict = config.dictionary == "builtin"
                                  ? builtin_pigment_dictionary(input.stack.grid)
                                  : load_dictionary(config.dictionary);
    if (config.k_sparsity > dict.atom_count())
        throw ValidationError("pipeline: k_sparsity exceeds the dictionary atom count");

    std::vector<LandmarkSet> landmark_sets;
    if (config.mode == RegisterMode::Landmarks)
        landmark_sets = run_stage("stage register", [&] { return load_landmarks(config.landmarks); });

    if (config.render_angle) {
        bool found = false;
        for (double b : input.stack.geometry.azimuths_deg)
            if (std::abs(b - *config.render_angle) <= 1e-6) found = true;
        if (!found)
            throw ValidationError("pipeline: render_angle is not an azimuth of the input stack");
    }

    fs::create_directories(config.output);

    PipelineResult result;
    result.output = config.output;
    auto timed = [&result, &config](const std::string& name, auto&& f) {
        if (config.verbose) std::fprintf(stderr, "[pipeline] %s\n", name.c_str());
        const auto t0 = std::chrono::steady_clock::now();
        auto value = run_stage("stage " + name, f);
        result.timings_ms[name] = ms_since(t0);
        return value;
    };

    const DarkFrame dark = average_darks(darks);
    CalibrateOptions copt;
    copt.white_mean = config.white_mean;
    const SpectralStack calibrated = timed("calibrate", [&] {
        SpectralStack out = calibrate_stack(input.stack, whites, dark, copt);
        save_stack(out, config.output / "calibrated");
        return out;
    });

    RegisterOptions ropt;
    ropt.mode = config.mode;
    ropt.landmarks = landmark_sets;
    ropt.center = config.center;
    const RegisterResult registered = timed("register", [&] {
        RegisterResult out = register_stack(calibrated, ropt);
        save_stack(out.stack, config.output / "registered");
        save_transforms(out.transforms, calibrated.geometry.azimuths_deg,
                        config.output / "registered" / "transforms.json");
        return out;
    });

    SolveNormalsOptions nopt;
    nopt.trim = config.trim;
    const NormalMap normals = timed("normals", [&] {
        NormalMap out = solve_stack_normals(registered.stack, nopt);
        save_normal_map(out, config.output / "normals.bin");
        io::write_png8(normal_map_image(out), config.output / "normals.png");
        return out;
    });

    const SpectralStack flattened = timed("flatten", [&] {
        SpectralStack out = flatten(registered.stack, normals);
        save_stack(out, config.output / "flattened");
        return out;
    });

    ProjectOptions popt;
    popt.rank = config.rank;
    const SpectralStack proj_min = timed("project", [&] {
        SpectralStack mn = project(flattened, ProjectionKind::Min, popt);
        save_stack(mn, config.output / "proj_min");
        save_stack(project(flattened, ProjectionKind::Max, popt), config.output / "proj_max");
        save_stack(project(flattened, ProjectionKind::Avg, popt), config.output / "proj_avg");
        save_stack(project(flattened, ProjectionKind::Diff, popt), config.output / "proj_diff");
        return mn;
    });

    timed("render", [&] {
        int angle = 0;
        const SpectralStack* source = &proj_min;
        if (config.render_angle) {
            source = &flattened;
            for (int a = 0; a < flattened.geometry.angle_count(); ++a)
                if (std::abs(flattened.geometry.azimuths_deg[static_cast<std::size_t>(a)] -
                             *config.render_angle) <= 1e-6)
                    angle = a;
        }
        io::write_png8(rgb_image(stack_to_rgb(*source, angle)), config.output / "render.png");
        return 0;
    });

    UnmixOptions uopt;
    uopt.k_sparsity = config.k_sparsity;
    uopt.nonnegative = config.nnls;
    uopt.norm = config.norm;
    timed("unmix", [&] {
        const AbundanceMaps maps = unmix_stack(proj_min, dict, uopt);
        const fs::path adir = config.output / "abundance";
        fs::create_directories(adir);
        json doc{{"width", proj_min.width},
                 {"height", proj_min.height},
                 {"k_sparsity", config.k_sparsity},
                 {"nnls", config.nnls},
                 {"norm", config.norm == UnmixOptions::Norm::Max ? "max" : "sum"},
                 {"atoms", json::array()}};
        for (std::size_t a = 0; a < maps.atom_names.size(); ++a) {
            const std::string weight = "abundance_" + maps.atom_names[a] + ".f32";
            const std::string raw = "raw_" + maps.atom_names[a] + ".f32";
            io::write_f32(maps.weights[a], adir / weight);
            io::write_f32(maps.raw[a], adir / raw);
            doc["atoms"].push_back(
                {{"name", maps.atom_names[a]}, {"weights", weight}, {"raw", raw}});
        }
        std::ofstream out(adir / "abundance.json", std::ios::trunc);
        out << doc.dump(2) << "\n";
        if (!out) throw FrameIoError("failed writing abundance.json");
        return 0;
    });

    // Checksums over every artifact, sorted by relative path; the report
    // itself is excluded (it carries wall-clock timings).
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(config.output))
        if (entry.is_regular_file() && entry.path().filename() != "run_report.json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    json checksums = json::object();
    for (const fs::path& f : files) {
        char hex[17];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(fnv1a64_file(f)));
        const std::string rel = fs::relative(f, config.output).generic_string();
        checksums[rel] = hex;
        result.checksums[rel] = hex;
    }

    json timings = json::object();
    for (const auto& [name, ms] : result.timings_ms) timings[name] = ms;
    json report{
        {"parameters", config_to_json(config)}, {"timings_ms", timings}, {"checksums", checksums}};
    result.report_path = config.output / "run_report.json";
    std::ofstream out(result.report_path, std::ios::trunc);
    out << report.dump(2) << "\n";
    if (!out) throw FrameIoError("failed writing " + result.report_path.string());
    return result;
}

} // namespace oispec
