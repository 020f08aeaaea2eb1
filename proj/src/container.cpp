#include "oispec/container.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "oispec/errors.hpp"
#include "oispec/io/f32.hpp"
#include "oispec/io/pgm.hpp"

namespace oispec {

namespace {

using nlohmann::json;

std::filesystem::path resolve_manifest(const std::filesystem::path& manifest_or_dir) {
    std::filesystem::path p = manifest_or_dir;
    if (std::filesystem::is_directory(p)) p /= "manifest.json";
    if (!std::filesystem::exists(p))
        throw ManifestError("manifest not found: " + p.string());
    return p;
}

const json& require(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end())
        throw ManifestError(where + ": missing required field '" + key + "'");
    return *it;
}

template <typename T>
T get_as(const json& j, const char* key, const std::string& where) {
    try {
        return require(j, key, where).get<T>();
    } catch (const json::exception& e) {
        throw ManifestError(where + ": field '" + key + "' has the wrong type (" + e.what() + ")");
    }
}

std::string frame_name(int angle, int wl, FrameKind kind) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "a%02d_l%03d.%s", angle, wl,
                  kind == FrameKind::Raw ? "pgm" : "f32");
    return buf;
}

ImagePlane read_frame(const std::filesystem::path& path, int width, int height,
                      const std::string& where) {
    ImagePlane plane;
    if (path.extension() == ".pgm")
        plane = io::read_pgm16(path);
    else if (path.extension() == ".f32")
        plane = io::read_f32(path, width, height);
    else
        throw ManifestError(where + ": unknown frame extension '" + path.extension().string() +
                            "' (expected .pgm or .f32)");
    if (plane.width != width || plane.height != height)
        throw DimensionError(where + ": frame " + path.string() + " is " +
                             std::to_string(plane.width) + "x" + std::to_string(plane.height) +
                             " but the manifest declares " + std::to_string(width) + "x" +
                             std::to_string(height));
    return plane;
}

void write_frame(const ImagePlane& plane, const std::filesystem::path& path, FrameKind kind) {
    if (kind == FrameKind::Raw)
        io::write_pgm16(plane, path);
    else
        io::write_f32(plane, path);
}

int match_index(double value, const std::vector<double>& table, const char* what,
                const std::string& where) {
    for (std::size_t i = 0; i < table.size(); ++i)
        if (std::abs(table[i] - value) <= 1e-6) return static_cast<int>(i);
    throw ManifestError(where + ": files entry names " + what + " " + std::to_string(value) +
                        " which is not in the declared " + what + " list");
}

} // namespace

std::filesystem::path save_bundle(const AcquisitionBundle& bundle,
                                  const std::filesystem::path& directory) {
    const SpectralStack& stack = bundle.stack;
    stack.validate();
    if (!bundle.whites.empty() && static_cast<int>(bundle.whites.size()) != stack.grid.count)
        throw ValidationError("save_bundle: white reference must hold one plane per wavelength");
    for (const ImagePlane& d : bundle.darks)
        if (d.width != stack.width || d.height != stack.height)
            throw DimensionError("save_bundle: dark frame dimensions differ from the stack");
    for (const ImagePlane& w : bundle.whites)
        if (w.width != stack.width || w.height != stack.height)
            throw DimensionError("save_bundle: white frame dimensions differ from the stack");

    std::filesystem::create_directories(directory);

    json files = json::array();
    for (int a = 0; a < stack.angle_count(); ++a) {
        for (int j = 0; j < stack.grid.count; ++j) {
            const ImagePlane& plane = stack.plane(a, j);
            json entry{{"azimuth_deg", stack.geometry.azimuths_deg[a]},
                       {"wavelength_nm", stack.grid.wavelength(j)}};
            if (plane.valid_count() == 0) {
                entry["path"] = nullptr;
            } else {
                const std::string name = frame_name(a, j, stack.frame);
                write_frame(plane, directory / name, stack.frame);
                entry["path"] = name;
            }
            files.push_back(std::move(entry));
        }
    }
    for (std::size_t k = 0; k < bundle.darks.size(); ++k) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "dark_%03zu.%s", k,
                      stack.frame == FrameKind::Raw ? "pgm" : "f32");
        write_frame(bundle.darks[k], directory / buf, stack.frame);
        files.push_back(json{{"role", "dark"}, {"path", buf}});
    }
    for (std::size_t j = 0; j < bundle.whites.size(); ++j) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "white_l%03zu.%s", j,
                      stack.frame == FrameKind::Raw ? "pgm" : "f32");
        write_frame(bundle.whites[j], directory / buf, stack.frame);
        files.push_back(json{{"role", "white"},
                             {"wavelength_nm", stack.grid.wavelength(static_cast<int>(j))},
                             {"path", buf}});
    }

    json manifest{
        {"width", stack.width},
        {"height", stack.height},
        {"grid",
         {{"start_nm", stack.grid.start_nm}, {"step_nm", stack.grid.step_nm}, {"count", stack.grid.count}}},
        {"geometry", {{"polar_deg", stack.geometry.polar_deg}, {"azimuths_deg", stack.geometry.azimuths_deg}}},
        {"frame_kind", to_string(stack.frame)},
        {"sample_rotates", stack.sample_rotates},
        {"files", std::move(files)},
    };
    if (stack.rotation_center)
        manifest["rotation_center"] = {(*stack.rotation_center)[0], (*stack.rotation_center)[1]};

    const std::filesystem::path manifest_path = directory / "manifest.json";
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw FrameIoError("cannot create " + manifest_path.string());
    out << manifest.dump(2) << "\n";
    if (!out) throw FrameIoError("failed writing " + manifest_path.string());
    return manifest_path;
}

std::filesystem::path save_stack(const SpectralStack& stack, const std::filesystem::path& directory) {
    AcquisitionBundle bundle;
    bundle.stack = stack;
    return save_bundle(bundle, directory);
}

AcquisitionBundle load_bundle(const std::filesystem::path& manifest_or_dir) {
    const std::filesystem::path manifest_path = resolve_manifest(manifest_or_dir);
    const std::filesystem::path base = manifest_path.parent_path();
    const std::string where = manifest_path.string();

    std::ifstream in(manifest_path);
    if (!in) throw ManifestError("cannot read manifest " + where);
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw ManifestError(where + ": invalid JSON (" + std::string(e.what()) + ")");
    }
    if (!manifest.is_object()) throw ManifestError(where + ": top level must be a JSON object");

    AcquisitionBundle bundle;
    SpectralStack& stack = bundle.stack;
    stack.width = get_as<int>(manifest, "width", where);
    stack.height = get_as<int>(manifest, "height", where);

    const json& grid = require(manifest, "grid", where);
    stack.grid.start_nm = get_as<double>(grid, "start_nm", where + ": grid");
    stack.grid.step_nm = get_as<double>(grid, "step_nm", where + ": grid");
    stack.grid.count = get_as<int>(grid, "count", where + ": grid");

    const json& geometry = require(manifest, "geometry", where);
    stack.geometry.polar_deg = get_as<double>(geometry, "polar_deg", where + ": geometry");
    stack.geometry.azimuths_deg =
        get_as<std::vector<double>>(geometry, "azimuths_deg", where + ": geometry");

    stack.frame = frame_kind_from_string(get_as<std::string>(manifest, "frame_kind", where));
    if (manifest.contains("sample_rotates"))
        stack.sample_rotates = get_as<bool>(manifest, "sample_rotates", where);
    if (manifest.contains("rotation_center")) {
        auto c = get_as<std::vector<double>>(manifest, "rotation_center", where);
        if (c.size() != 2) throw ManifestError(where + ": rotation_center must be [x, y]");
        stack.rotation_center = std::array<double, 2>{c[0], c[1]};
    }

    if (stack.width <= 0 || stack.height <= 0)
        throw ManifestError(where + ": width and height must be positive");
    try {
        stack.grid.validate();
        stack.geometry.validate();
    } catch (const ValidationError& e) {
        throw ManifestError(where + ": " + e.what());
    }

    stack.planes.assign(static_cast<std::size_t>(stack.angle_count()) * stack.grid.count,
                        ImagePlane());
    std::vector<ImagePlane>& whites = bundle.whites;

    const json& files = require(manifest, "files", where);
    if (!files.is_array()) throw ManifestError(where + ": 'files' must be an array");

    std::vector<char> seen(stack.planes.size(), 0);
    std::map<int, ImagePlane> whites_by_wl;
    for (const json& entry : files) {
        if (!entry.is_object()) throw ManifestError(where + ": files entries must be objects");
        const std::string role =
            entry.contains("role") ? get_as<std::string>(entry, "role", where + ": files") : "data";

        std::optional<std::filesystem::path> path;
        const json& p = require(entry, "path", where + ": files");
        if (!p.is_null()) path = base / p.get<std::string>();

        if (role == "dark") {
            if (!path) throw ManifestError(where + ": dark entry with null path");
            bundle.darks.push_back(read_frame(*path, stack.width, stack.height, where));
        } else if (role == "white") {
            if (!path) throw ManifestError(where + ": white entry with null path");
            const double wl = get_as<double>(entry, "wavelength_nm", where + ": white entry");
            const int j = match_index(wl, stack.grid.wavelengths(), "wavelength_nm", where);
            if (!whites_by_wl.emplace(j, read_frame(*path, stack.width, stack.height, where)).second)
                throw ManifestError(where + ": duplicate white frame for wavelength_nm " +
                                    std::to_string(wl));
        } else if (role == "data") {
            const double beta = get_as<double>(entry, "azimuth_deg", where + ": files");
            const double wl = get_as<double>(entry, "wavelength_nm", where + ": files");
            const int a = match_index(beta, stack.geometry.azimuths_deg, "azimuth_deg", where);
            const int j = match_index(wl, stack.grid.wavelengths(), "wavelength_nm", where);
            const std::size_t idx = stack.plane_index(a, j);
            if (seen[idx])
                throw ManifestError(where + ": duplicate files entry for azimuth_deg " +
                                    std::to_string(beta) + ", wavelength_nm " + std::to_string(wl));
            seen[idx] = 1;
            if (path)
                stack.planes[idx] = read_frame(*path, stack.width, stack.height, where);
            else
                stack.planes[idx] = ImagePlane(stack.width, stack.height, 0.0, false);
        } else {
            throw ManifestError(where + ": unknown files role '" + role + "'");
        }
    }

    for (int a = 0; a < stack.angle_count(); ++a)
        for (int j = 0; j < stack.grid.count; ++j)
            if (!seen[stack.plane_index(a, j)])
                throw ManifestError(where + ": no files entry for azimuth_deg " +
                                    std::to_string(stack.geometry.azimuths_deg[a]) +
                                    ", wavelength_nm " + std::to_string(stack.grid.wavelength(j)));

    if (!whites_by_wl.empty()) {
        if (static_cast<int>(whites_by_wl.size()) != stack.grid.count)
            throw ManifestError(where + ": white reference covers " +
                                std::to_string(whites_by_wl.size()) + " of " +
                                std::to_string(stack.grid.count) + " wavelengths");
        whites.reserve(whites_by_wl.size());
        for (auto& [j, plane] : whites_by_wl) whites.push_back(std::move(plane));
    }

    stack.validate();
    return bundle;
}

SpectralStack load_stack(const std::filesystem::path& manifest_or_dir) {
    return std::move(load_bundle(manifest_or_dir).stack);
}

} // namespace oispec
