#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "oispec/registration.hpp"
#include "oispec/unmix.hpp"

namespace oispec {

/// One-shot run of calibrate -> register -> normals -> flatten ->
/// project(min, max, avg, diff) -> render -> unmix. JSON schema in
/// docs/scene_spec.md (pipeline config section).
struct PipelineConfig {
    std::filesystem::path input;
    /// Cubes holding the reference frames; default to `input`, whose
    /// manifest usually carries them with dark/white roles.
    std::filesystem::path white;
    std::filesystem::path darks;
    /// Dictionary CSV/JSON path, or "builtin" for the six-pigment set
    /// evaluated on the stack grid. Required.
    std::string dictionary;
    std::filesystem::path output;

    RegisterMode mode = RegisterMode::Auto;
    std::filesystem::path landmarks;
    std::optional<std::array<double, 2>> center;
    bool white_mean = false;
    bool trim = false;
    int rank = 1;
    int k_sparsity = 2;
    bool nnls = false;
    UnmixOptions::Norm norm = UnmixOptions::Norm::Max;
    /// Azimuth rendered to render.png; unset renders the min projection.
    std::optional<double> render_angle;
    /// 0 keeps the current parallelism cap.
    int threads = 0;
    /// Stage progress notes on standard error (not serialized).
    bool verbose = false;

    /// Structural checks only (paths exist, names resolve); throws
    /// ValidationError before any stage runs.
    void validate() const;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct PipelineResult {
    std::filesystem::path output;
    std::filesystem::path report_path;
    /// Relative artifact path -> FNV-1a 64 checksum (hex), as written to
    /// the run report.
    std::map<std::string, std::string> checksums;
    std::map<std::string, double> timings_ms;
};

/// Runs every stage, persists each stage's artifacts under
/// config.output and writes run_report.json last. Stage failures rethrow
/// the original error type prefixed with the stage name.
PipelineResult run_pipeline(const PipelineConfig& config);

/// FNV-1a 64 over a file's bytes.
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::uint64_t fnv1a64(const void* data, std::size_t size);

} // namespace oispec
