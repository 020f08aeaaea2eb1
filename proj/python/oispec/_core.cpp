#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstdint>
#include <string>
#include <vector>

#include "oispec/colorimetry.hpp"
#include "oispec/container.hpp"
#include "oispec/core.hpp"
#include "oispec/errors.hpp"
#include "oispec/pipeline.hpp"
#include "oispec/simulate.hpp"
#include "oispec/unmix.hpp"

namespace py = pybind11;
using namespace oispec;

namespace {

SpectralDictionary dictionary_from_rows(const std::vector<std::vector<double>>& atoms) {
    if (atoms.empty()) throw ValidationError("atoms must be a non-empty list of spectra");
    SpectralDictionary d;
    d.grid = {400.0, 10.0, static_cast<int>(atoms.front().size())};
    d.atoms = atoms;
    for (std::size_t i = 0; i < atoms.size(); ++i) d.names.push_back("atom" + std::to_string(i));
    return d;
}

py::dict solution_to_dict(const SparseSolution& sol) {
    py::dict out;
    out["coefficients"] = sol.coefficients;
    out["support"] = sol.support;
    out["residual"] = sol.residual;
    out["residual_norms"] = sol.residual_norms;
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Oblique-illumination spectral microscopy toolkit";

    py::register_exception<Error>(m, "Error");
    py::register_exception<ComputationError>(m, "ComputationError");
    py::register_exception<ValidationError>(m, "ValidationError");

    m.def("wavelength_count", &wavelength_count, py::arg("start_nm"), py::arg("end_nm"),
          py::arg("step_nm"), "Number of samples on an inclusive uniform grid.");
    m.def("total_images", &total_images, py::arg("angles"), py::arg("wavelengths"),
          "Total frames in an acquisition.");
    m.def("rayleigh_limit_um", &rayleigh_limit, py::arg("wavelength_nm"), py::arg("na"),
          "Rayleigh resolution limit in micrometers.");
    m.def(
        "light_vector",
        [](double polar_deg, double azimuth_deg) {
            const LightVector v = light_vector(polar_deg, azimuth_deg);
            return py::make_tuple(v.x, v.y, v.z);
        },
        py::arg("polar_deg"), py::arg("azimuth_deg"),
        "Unit illumination direction for a polar/azimuth pair.");

    m.def(
        "spectrum_to_xyz",
        [](const std::vector<double>& spectrum, double start_nm, double step_nm) {
            const WavelengthGrid grid{start_nm, step_nm, static_cast<int>(spectrum.size())};
            const Xyz xyz = spectrum_to_xyz(spectrum, grid);
            return py::make_tuple(xyz.x, xyz.y, xyz.z);
        },
        py::arg("spectrum"), py::arg("start_nm"), py::arg("step_nm"));
    m.def(
        "xyz_to_srgb",
        [](double x, double y, double z) {
            const Rgb rgb = xyz_to_srgb({x, y, z});
            return py::make_tuple(rgb.r, rgb.g, rgb.b);
        },
        py::arg("x"), py::arg("y"), py::arg("z"));

    m.def(
        "builtin_dictionary",
        [](double start_nm, double step_nm, int count) {
            const SpectralDictionary d = builtin_pigment_dictionary({start_nm, step_nm, count});
            py::dict out;
            out["names"] = d.names;
            py::array_t<double> atoms({d.atom_count(), d.grid.count});
            auto a = atoms.mutable_unchecked<2>();
            for (int i = 0; i < d.atom_count(); ++i)
                for (int j = 0; j < d.grid.count; ++j)
                    a(i, j) = d.atoms[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            out["atoms"] = atoms;
            out["wavelengths"] = d.grid.wavelengths();
            return out;
        },
        py::arg("start_nm"), py::arg("step_nm"), py::arg("count"));

    m.def(
        "omp",
        [](const std::vector<double>& spectrum, const std::vector<std::vector<double>>& atoms,
           int k, double eps_res) {
            return solution_to_dict(omp(spectrum, dictionary_from_rows(atoms), k, eps_res));
        },
        py::arg("spectrum"), py::arg("atoms"), py::arg("k"), py::arg("eps_res") = 1e-8,
        "Greedy sparse fit; atoms is a list of spectra on the same grid.");
    m.def(
        "brute_force_sparse",
        [](const std::vector<double>& spectrum, const std::vector<std::vector<double>>& atoms,
           int k) {
            return solution_to_dict(brute_force_sparse(spectrum, dictionary_from_rows(atoms), k));
        },
        py::arg("spectrum"), py::arg("atoms"), py::arg("k"));

    m.def(
        "simulate_preset",
        [](const std::string& name, std::uint64_t seed, const std::filesystem::path& out) {
            simulate_scene(preset_scene(name), seed, out);
        },
        py::arg("name"), py::arg("seed"), py::arg("out"),
        "Render a built-in scene with ground truth into a directory.");

    m.def(
        "run_pipeline",
        [](const std::filesystem::path& config) {
            const PipelineResult result = run_pipeline(load_pipeline_config(config));
            py::dict out;
            out["output"] = result.output.string();
            out["report"] = result.report_path.string();
            out["checksums"] = result.checksums;
            return out;
        },
        py::arg("config"), "Run the full workflow from a pipeline config JSON.");

    m.def(
        "load_cube",
        [](const std::filesystem::path& path) {
            const SpectralStack s = load_stack(path);
            const int A = s.angle_count();
            const int J = s.grid.count;
            py::array_t<double> values({A, J, s.height, s.width});
            py::array_t<bool> valid({A, J, s.height, s.width});
            auto v = values.mutable_unchecked<4>();
            auto ok = valid.mutable_unchecked<4>();
            for (int a = 0; a < A; ++a)
                for (int j = 0; j < J; ++j) {
                    const ImagePlane& p = s.plane(a, j);
                    for (int y = 0; y < s.height; ++y)
                        for (int x = 0; x < s.width; ++x) {
                            const std::size_t i = p.index(x, y);
                            v(a, j, y, x) = p.valid[i] ? p.values[i] : 0.0;
                            ok(a, j, y, x) = p.valid[i] != 0;
                        }
                }
            py::dict out;
            out["values"] = values;
            out["valid"] = valid;
            out["wavelengths"] = s.grid.wavelengths();
            out["azimuths"] = s.geometry.azimuths_deg;
            out["polar_deg"] = s.geometry.polar_deg;
            out["frame"] = to_string(s.frame);
            return out;
        },
        py::arg("path"),
        "Load a cube as (angle, wavelength, y, x) value and validity arrays.");
}
