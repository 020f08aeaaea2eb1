#include <CLI11.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "oispec/calibrate.hpp"
#include "oispec/colorimetry.hpp"
#include "oispec/container.hpp"
#include "oispec/errors.hpp"
#include "oispec/io/f32.hpp"
#include "oispec/io/png.hpp"
#include "oispec/parallel.hpp"
#include "oispec/pipeline.hpp"
#include "oispec/project.hpp"
#include "oispec/registration.hpp"
#include "oispec/shape.hpp"
#include "oispec/simulate.hpp"
#include "oispec/unmix.hpp"

namespace {

namespace fs = std::filesystem;
using namespace oispec;

std::array<double, 2> parse_center(const std::string& s) {
    double x = 0.0;
    double y = 0.0;
    if (std::sscanf(s.c_str(), "%lf,%lf", &x, &y) != 2)
        throw ValidationError("--center expects \"x,y\"");
    return {x, y};
}

SpectralDictionary dictionary_for(const std::string& spec, const WavelengthGrid& grid) {
    if (spec == "builtin") return builtin_pigment_dictionary(grid);
    return load_dictionary(spec);
}

ImagePlane region_from_png(const fs::path& path) {
    const io::Image8 img = io::read_png8(path);
    ImagePlane region(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            region.at(x, y) = img.data[img.index(x, y)];
    return region;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"oblique-illumination spectral microscopy toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "cap worker threads (0 = all cores)");

    auto* sim = app.add_subcommand("simulate", "render a synthetic acquisition with ground truth");
    std::string sim_spec, sim_preset, sim_out;
    std::uint64_t sim_seed = 7;
    sim->add_option("--spec", sim_spec, "scene spec JSON (see docs/scene_spec.md)");
    sim->add_option("--preset", sim_preset, "built-in scene: mockup4, adversarial, regtest, sepcheck");
    sim->add_option("--seed", sim_seed, "random seed")->capture_default_str();
    sim->add_option("--out", sim_out, "output directory")->required();

    auto* cal = app.add_subcommand("calibrate", "dark-subtract and white-normalize a raw cube");
    std::string cal_stack, cal_white, cal_darks, cal_out;
    bool cal_white_mean = false;
    cal->add_option("--stack", cal_stack, "raw cube directory or manifest")->required();
    cal->add_option("--white", cal_white, "cube holding the white frames")->required();
    cal->add_option("--darks", cal_darks, "cube holding the dark frames")->required();
    cal->add_flag("--white-mean", cal_white_mean, "divide by the spatial mean of white - dark");
    cal->add_option("--out", cal_out, "output directory")->required();

    auto* reg = app.add_subcommand("register", "derotate and shift-align a reflectance cube");
    std::string reg_stack, reg_center, reg_mode = "auto", reg_landmarks, reg_out;
    reg->add_option("--stack", reg_stack, "reflectance cube")->required();
    reg->add_option("--center", reg_center, "rotation center \"x,y\"");
    reg->add_option("--mode", reg_mode, "auto|landmarks")->capture_default_str();
    reg->add_option("--landmarks", reg_landmarks, "landmark pairs JSON");
    reg->add_option("--out", reg_out, "output directory")->required();

    auto* nrm = app.add_subcommand("normals", "photometric-stereo normals from a registered cube");
    std::string nrm_stack, nrm_out, nrm_png;
    bool nrm_trim = false;
    nrm->add_option("--stack", nrm_stack, "registered reflectance cube")->required();
    nrm->add_option("--out", nrm_out, "output .bin path")->required();
    nrm->add_option("--png", nrm_png, "also write a normal-map PNG");
    nrm->add_flag("--trim", nrm_trim, "drop brightest and darkest light per pixel");

    auto* flt = app.add_subcommand("flatten", "divide out per-angle Lambertian shading");
    std::string flt_stack, flt_normals, flt_out;
    flt->add_option("--stack", flt_stack, "registered reflectance cube")->required();
    flt->add_option("--normals", flt_normals, "normals .bin from the normals step")->required();
    flt->add_option("--out", flt_out, "output directory")->required();

    auto* prj = app.add_subcommand("project", "collapse the angle axis");
    std::string prj_stack, prj_kind, prj_out;
    int prj_rank = 1;
    bool prj_allow = false;
    prj->add_option("--stack", prj_stack, "flattened cube")->required();
    prj->add_option("--kind", prj_kind, "min|max|avg|diff")->required();
    prj->add_option("--rank", prj_rank, "soft-minimum rank")->capture_default_str();
    prj->add_flag("--allow-unflattened", prj_allow, "accept a plain reflectance cube");
    prj->add_option("--out", prj_out, "output directory")->required();

    auto* unm = app.add_subcommand("unmix", "sparse abundance maps from a diffuse cube");
    std::string unm_stack, unm_dict, unm_norm = "max", unm_out;
    int unm_k = 2;
    bool unm_nnls = false;
    unm->add_option("--stack", unm_stack, "single-angle diffuse cube (a projection)")->required();
    unm->add_option("--dict", unm_dict, "dictionary CSV/JSON or \"builtin\"")->required();
    unm->add_option("--k", unm_k, "sparsity")->capture_default_str();
    unm->add_flag("--nnls", unm_nnls, "nonnegative re-solve on the selected support");
    unm->add_option("--norm", unm_norm, "max|sum weight normalization")->capture_default_str();
    unm->add_option("--out", unm_out, "output directory")->required();

    auto* ren = app.add_subcommand("render", "sRGB rendering of one angle or the min projection");
    std::string ren_stack, ren_angle = "min", ren_out;
    ren->add_option("--stack", ren_stack, "spectral cube")->required();
    ren->add_option("--angle", ren_angle, "azimuth in degrees, or \"min\"")->capture_default_str();
    ren->add_option("--out", ren_out, "output PNG path")->required();

    auto* spc = app.add_subcommand("spectra", "masked region spectrum as CSV");
    std::string spc_stack, spc_region, spc_out;
    spc->add_option("--stack", spc_stack, "spectral cube")->required();
    spc->add_option("--region", spc_region, "mask PNG (nonzero pixels select the region)")
        ->required();
    spc->add_option("--out", spc_out, "output CSV path")->required();

    auto* pip = app.add_subcommand("pipeline", "run the full workflow from a JSON config");
    std::string pip_config, pip_input, pip_output, pip_dict, pip_mode, pip_norm, pip_render;
    std::string pip_landmarks, pip_center, pip_white, pip_darks;
    int pip_k = -1, pip_rank = -1;
    bool pip_nnls = false, pip_trim = false, pip_white_mean = false;
    pip->add_option("--config", pip_config, "pipeline config JSON")->required();
    pip->add_option("--input", pip_input, "override: input cube");
    pip->add_option("--white", pip_white, "override: white cube");
    pip->add_option("--darks", pip_darks, "override: darks cube");
    pip->add_option("--output", pip_output, "override: output directory");
    pip->add_option("--dict", pip_dict, "override: dictionary");
    pip->add_option("--k", pip_k, "override: sparsity");
    pip->add_option("--rank", pip_rank, "override: soft-minimum rank");
    pip->add_option("--mode", pip_mode, "override: auto|landmarks");
    pip->add_option("--landmarks", pip_landmarks, "override: landmarks JSON");
    pip->add_option("--center", pip_center, "override: rotation center \"x,y\"");
    pip->add_option("--norm", pip_norm, "override: max|sum");
    pip->add_option("--render-angle", pip_render, "override: azimuth or \"min\"");
    pip->add_flag("--nnls", pip_nnls, "override: nonnegative re-solve");
    pip->add_flag("--trim", pip_trim, "override: trimmed photometric stereo");
    pip->add_flag("--white-mean", pip_white_mean, "override: spatial-mean white");

    try {
        app.parse(argc, argv);
        if (threads > 0) set_max_threads(threads);

        if (sim->parsed()) {
            if (sim_spec.empty() == sim_preset.empty())
                throw ValidationError("simulate: give exactly one of --spec or --preset");
            const SceneSpec scene =
                sim_spec.empty() ? preset_scene(sim_preset) : load_scene_spec(sim_spec);
            simulate_scene(scene, sim_seed, sim_out);
            std::fprintf(stderr, "wrote cube and truth/ under %s\n", sim_out.c_str());
        } else if (cal->parsed()) {
            const SpectralStack stack = load_stack(cal_stack);
            const std::vector<ImagePlane> whites = load_bundle(cal_white).whites;
            const std::vector<ImagePlane> darks = load_bundle(cal_darks).darks;
            if (whites.empty()) throw ValidationError("calibrate: no white frames in " + cal_white);
            if (darks.empty()) throw ValidationError("calibrate: no dark frames in " + cal_darks);
            CalibrateOptions opt;
            opt.white_mean = cal_white_mean;
            save_stack(calibrate_stack(stack, whites, average_darks(darks), opt), cal_out);
            std::fprintf(stderr, "wrote reflectance cube to %s\n", cal_out.c_str());
        } else if (reg->parsed()) {
            RegisterOptions opt;
            if (reg_mode == "auto")
                opt.mode = RegisterMode::Auto;
            else if (reg_mode == "landmarks")
                opt.mode = RegisterMode::Landmarks;
            else
                throw ValidationError("register: --mode must be auto or landmarks");
            if (!reg_center.empty()) opt.center = parse_center(reg_center);
            if (opt.mode == RegisterMode::Landmarks) {
                if (reg_landmarks.empty())
                    throw ValidationError("register: --landmarks required in landmarks mode");
                opt.landmarks = load_landmarks(reg_landmarks);
            }
            const RegisterResult result = register_stack(load_stack(reg_stack), opt);
            save_stack(result.stack, reg_out);
            save_transforms(result.transforms, result.stack.geometry.azimuths_deg,
                            fs::path(reg_out) / "transforms.json");
            std::fprintf(stderr, "wrote registered cube to %s\n", reg_out.c_str());
        } else if (nrm->parsed()) {
            SolveNormalsOptions opt;
            opt.trim = nrm_trim;
            const NormalMap normals = solve_stack_normals(load_stack(nrm_stack), opt);
            save_normal_map(normals, nrm_out);
            if (!nrm_png.empty()) io::write_png8(normal_map_image(normals), nrm_png);
            std::fprintf(stderr, "wrote normal map to %s\n", nrm_out.c_str());
        } else if (flt->parsed()) {
            const SpectralStack flattened =
                flatten(load_stack(flt_stack), load_normal_map(flt_normals));
            save_stack(flattened, flt_out);
            std::fprintf(stderr, "wrote flattened cube to %s\n", flt_out.c_str());
        } else if (prj->parsed()) {
            ProjectOptions opt;
            opt.rank = prj_rank;
            opt.allow_unflattened = prj_allow;
            save_stack(project(load_stack(prj_stack), projection_kind_from_string(prj_kind), opt),
                       prj_out);
            std::fprintf(stderr, "wrote %s projection to %s\n", prj_kind.c_str(), prj_out.c_str());
        } else if (unm->parsed()) {
            const SpectralStack stack = load_stack(unm_stack);
            UnmixOptions opt;
            opt.k_sparsity = unm_k;
            opt.nonnegative = unm_nnls;
            if (unm_norm == "max")
                opt.norm = UnmixOptions::Norm::Max;
            else if (unm_norm == "sum")
                opt.norm = UnmixOptions::Norm::Sum;
            else
                throw ValidationError("unmix: --norm must be max or sum");
            const AbundanceMaps maps =
                unmix_stack(stack, dictionary_for(unm_dict, stack.grid), opt);
            fs::create_directories(unm_out);
            for (std::size_t a = 0; a < maps.atom_names.size(); ++a) {
                io::write_f32(maps.weights[a],
                              fs::path(unm_out) / ("abundance_" + maps.atom_names[a] + ".f32"));
                io::write_f32(maps.raw[a],
                              fs::path(unm_out) / ("raw_" + maps.atom_names[a] + ".f32"));
            }
            std::fprintf(stderr, "wrote %zu abundance maps to %s\n", maps.atom_names.size(),
                         unm_out.c_str());
        } else if (ren->parsed()) {
            SpectralStack stack = load_stack(ren_stack);
            int angle = 0;
            if (ren_angle == "min") {
                if (stack.angle_count() > 1) stack = min_projection(stack);
            } else {
                const double beta = std::stod(ren_angle);
                angle = -1;
                for (int a = 0; a < stack.angle_count(); ++a)
                    if (std::abs(stack.geometry.azimuths_deg[static_cast<std::size_t>(a)] - beta) <=
                        1e-6)
                        angle = a;
                if (angle < 0)
                    throw ValidationError("render: azimuth " + ren_angle +
                                          " is not in the stack geometry");
            }
            io::write_png8(rgb_image(stack_to_rgb(stack, angle)), ren_out);
            std::fprintf(stderr, "wrote %s\n", ren_out.c_str());
        } else if (spc->parsed()) {
            const SpectralStack stack = load_stack(spc_stack);
            write_spectrum_csv(extract_region_spectrum(stack, region_from_png(spc_region)),
                               spc_out);
            std::fprintf(stderr, "wrote %s\n", spc_out.c_str());
        } else if (pip->parsed()) {
            PipelineConfig config = load_pipeline_config(pip_config);
            if (!pip_input.empty()) config.input = pip_input;
            if (!pip_white.empty()) config.white = pip_white;
            if (!pip_darks.empty()) config.darks = pip_darks;
            if (!pip_output.empty()) config.output = pip_output;
            if (!pip_dict.empty()) config.dictionary = pip_dict;
            if (pip_k > 0) config.k_sparsity = pip_k;
            if (pip_rank > 0) config.rank = pip_rank;
            if (!pip_mode.empty()) {
                if (pip_mode == "auto")
                    config.mode = RegisterMode::Auto;
                else if (pip_mode == "landmarks")
                    config.mode = RegisterMode::Landmarks;
                else
                    throw ValidationError("pipeline: --mode must be auto or landmarks");
            }
            if (!pip_landmarks.empty()) config.landmarks = pip_landmarks;
            if (!pip_center.empty()) config.center = parse_center(pip_center);
            if (!pip_norm.empty()) {
                if (pip_norm == "max")
                    config.norm = UnmixOptions::Norm::Max;
                else if (pip_norm == "sum")
                    config.norm = UnmixOptions::Norm::Sum;
                else
                    throw ValidationError("pipeline: --norm must be max or sum");
            }
            if (!pip_render.empty()) {
                if (pip_render == "min")
                    config.render_angle.reset();
                else
                    config.render_angle = std::stod(pip_render);
            }
            if (pip_nnls) config.nnls = true;
            if (pip_trim) config.trim = true;
            if (pip_white_mean) config.white_mean = true;
            if (threads > 0) config.threads = threads;
            config.verbose = true;
            const PipelineResult result = run_pipeline(config);
            std::fprintf(stderr, "pipeline complete: %s\n", result.report_path.string().c_str());
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ComputationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
