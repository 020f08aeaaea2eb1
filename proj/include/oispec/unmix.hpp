#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "oispec/types.hpp"

namespace oispec {

/// Named reference reflectance spectra on a shared wavelength grid, plus a
/// unit-norm copy of each atom used for greedy selection.
struct SpectralDictionary {
    WavelengthGrid grid;
    std::vector<std::string> names;
    std::vector<std::vector<double>> atoms;

    int atom_count() const { return static_cast<int>(atoms.size()); }
    int find(const std::string& name) const;

    /// Norms and unit atoms are derived on demand and cached.
    const std::vector<double>& norms() const;
    const std::vector<std::vector<double>>& unit_atoms() const;

    /// Unique nonempty names, positive norms, one grid. Throws
    /// ValidationError.
    void validate() const;

    /// Linear interpolation onto `target`; any target wavelength outside
    /// the dictionary's span is an error (no extrapolation).
    SpectralDictionary resampled(const WavelengthGrid& target) const;

  private:
    mutable std::vector<double> norms_cache;
    mutable std::vector<std::vector<double>> unit_cache;
};

/// CSV with header "wavelength_nm,<atom>,<atom>,..." or JSON
/// {"wavelength_nm": [...], "atoms": [{"name":..., "values":[...]}]}.
/// The loader picks the format from the file extension.
SpectralDictionary load_dictionary(const std::filesystem::path& path);
void save_dictionary_csv(const SpectralDictionary& dictionary, const std::filesystem::path& path);

/// Six analytic pigment reflectance spectra (ultramarine, cadmium yellow,
/// vermilion, madder lake, zinc white, Prussian blue) evaluated on `grid`.
SpectralDictionary builtin_pigment_dictionary(const WavelengthGrid& grid);

struct SparseSolution {
    /// Dense coefficients over the original (un-normalized) atoms.
    std::vector<double> coefficients;
    /// Selected atom indices in selection order (OMP) or sorted (brute
    /// force).
    std::vector<int> support;
    /// Residual 2-norm after each OMP step; front() is ||x||.
    std::vector<double> residual_norms;
    double residual = 0.0;
};

/// Greedy orthogonal matching pursuit: pick the atom with the largest
/// |<unit atom, residual>| (ties to the lowest index), re-solve an
/// unconstrained least squares over everything selected, repeat. Stops at
/// k_sparsity atoms or when the residual drops to eps_res * ||x||.
SparseSolution omp(const std::vector<double>& spectrum, const SpectralDictionary& dictionary,
                   int k_sparsity, double eps_res = 1e-8);

/// Exhaustive oracle: best support of size <= k by least-squares residual,
/// ties resolved toward smaller then lexicographically smaller supports.
/// Throws ComputationError when the subset count exceeds 1e5.
SparseSolution brute_force_sparse(const std::vector<double>& spectrum,
                                  const SpectralDictionary& dictionary, int k_sparsity);

struct UnmixOptions {
    int k_sparsity = 2;
    /// Re-solve each selected support under nonnegativity instead of
    /// clamping at output only.
    bool nonnegative = false;
    enum class Norm { Max, Sum };
    Norm norm = Norm::Max;
    double eps_res = 1e-8;
};

struct AbundanceMaps {
    std::vector<std::string> atom_names;
    /// Per-pixel weights normalized to [0,1]; negative raw coefficients
    /// show up as 0 here.
    std::vector<ImagePlane> weights;
    /// The solver's coefficients before clamping and normalization.
    std::vector<ImagePlane> raw;
};

/// Per-pixel sparse unmixing of a single-pseudo-angle diffuse stack. A
/// pixel must be valid at every wavelength to be solved; others produce
/// zero, invalid abundances.
AbundanceMaps unmix_stack(const SpectralStack& stack, const SpectralDictionary& dictionary,
                          const UnmixOptions& options = {});

} // namespace oispec
