#include "oispec/unmix.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "oispec/errors.hpp"
#include "oispec/parallel.hpp"

namespace oispec {

namespace {

using nlohmann::json;

double sq(double v) { return v * v; }
double bump(double x, double mu, double sigma) { return std::exp(-0.5 * sq((x - mu) / sigma)); }
double step(double x, double mu, double w) { return 1.0 / (1.0 + std::exp(-(x - mu) / w)); }

// Uniform-grid fit for a list of wavelengths; the container types only
// carry uniform grids.
WavelengthGrid grid_from_samples(const std::vector<double>& wl, const std::string& where) {
    if (wl.empty()) throw ValidationError(where + ": no wavelength samples");
    WavelengthGrid grid;
    grid.start_nm = wl.front();
    grid.count = static_cast<int>(wl.size());
    grid.step_nm = grid.count > 1 ? (wl.back() - wl.front()) / (grid.count - 1) : 1.0;
    if (grid.count > 1 && !(grid.step_nm > 0.0))
        throw ValidationError(where + ": wavelengths must be strictly increasing");
    for (int i = 0; i < grid.count; ++i)
        if (std::abs(grid.wavelength(i) - wl[static_cast<std::size_t>(i)]) > 1e-6)
            throw ValidationError(where + ": wavelengths must be uniformly spaced");
    return grid;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' '))
            field.pop_back();
        std::size_t b = 0;
        while (b < field.size() && field[b] == ' ') ++b;
        out.push_back(field.substr(b));
    }
    return out;
}

// Unconstrained least squares limited to `support`; returns dense
// coefficients and the squared residual.
double solve_support(const std::vector<double>& x, const SpectralDictionary& dict,
                     const std::vector<int>& support, std::vector<double>* coeffs) {
    const Eigen::Index m = static_cast<Eigen::Index>(x.size());
    Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.data(), m);
    coeffs->assign(static_cast<std::size_t>(dict.atom_count()), 0.0);
    if (support.empty()) return xv.squaredNorm();

    Eigen::MatrixXd A(m, static_cast<Eigen::Index>(support.size()));
    for (std::size_t c = 0; c < support.size(); ++c)
        A.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(
            dict.atoms[static_cast<std::size_t>(support[c])].data(), m);
    Eigen::VectorXd sol = A.colPivHouseholderQr().solve(xv);
    for (std::size_t c = 0; c < support.size(); ++c)
        (*coeffs)[static_cast<std::size_t>(support[c])] = sol(static_cast<Eigen::Index>(c));
    return (xv - A * sol).squaredNorm();
}

// Exact nonnegative least squares on a small support by trying every
// subset and keeping the best all-nonnegative solution.
double solve_support_nonneg(const std::vector<double>& x, const SpectralDictionary& dict,
                            const std::vector<int>& support, std::vector<double>* coeffs) {
    const std::size_t k = support.size();
    std::vector<double> best_coeffs(static_cast<std::size_t>(dict.atom_count()), 0.0);
    double best_r2 = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()))
                         .squaredNorm();
    std::vector<double> trial;
    std::vector<int> subset;
    for (std::size_t bits = 1; bits < (1u << k); ++bits) {
        subset.clear();
        for (std::size_t b = 0; b < k; ++b)
            if (bits & (1u << b)) subset.push_back(support[b]);
        const double r2 = solve_support(x, dict, subset, &trial);
        bool feasible = true;
        for (int idx : subset)
            if (trial[static_cast<std::size_t>(idx)] < -1e-12) feasible = false;
        if (!feasible) continue;
        for (int idx : subset) {
            double& v = trial[static_cast<std::size_t>(idx)];
            if (v < 0.0) v = 0.0;
        }
        if (r2 < best_r2) {
            best_r2 = r2;
            best_coeffs = trial;
        }
    }
    *coeffs = std::move(best_coeffs);
    return best_r2;
}

} // namespace

int SpectralDictionary::find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

const std::vector<double>& SpectralDictionary::norms() const {
    if (norms_cache.size() != atoms.size()) {
        norms_cache.resize(atoms.size());
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            double s = 0.0;
            for (double v : atoms[i]) s += v * v;
            norms_cache[i] = std::sqrt(s);
        }
    }
    return norms_cache;
}

const std::vector<std::vector<double>>& SpectralDictionary::unit_atoms() const {
    if (unit_cache.size() != atoms.size()) {
        const std::vector<double>& nrm = norms();
        unit_cache.resize(atoms.size());
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            unit_cache[i] = atoms[i];
            if (nrm[i] > 0.0)
                for (double& v : unit_cache[i]) v /= nrm[i];
        }
    }
    return unit_cache;
}

void SpectralDictionary::validate() const {
    grid.validate();
    if (atoms.empty()) throw ValidationError("dictionary: no atoms");
    if (names.size() != atoms.size())
        throw ValidationError("dictionary: one name per atom required");
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i].empty()) throw ValidationError("dictionary: empty atom name");
        for (std::size_t j = i + 1; j < names.size(); ++j)
            if (names[i] == names[j])
                throw ValidationError("dictionary: duplicate atom name '" + names[i] + "'");
        if (static_cast<int>(atoms[i].size()) != grid.count)
            throw ValidationError("dictionary: atom '" + names[i] +
                                  "' length disagrees with the grid");
        double s = 0.0;
        for (double v : atoms[i]) {
            if (!std::isfinite(v))
                throw ValidationError("dictionary: atom '" + names[i] + "' has non-finite values");
            s += v * v;
        }
        if (!(s > 0.0))
            throw ValidationError("dictionary: atom '" + names[i] + "' has zero norm");
    }
}

SpectralDictionary SpectralDictionary::resampled(const WavelengthGrid& target) const {
    validate();
    target.validate();
    if (target.start_nm == grid.start_nm && target.step_nm == grid.step_nm &&
        target.count == grid.count)
        return *this;

    const double lo = grid.start_nm - 1e-9;
    const double hi = grid.end_nm() + 1e-9;
    SpectralDictionary out;
    out.grid = target;
    out.names = names;
    out.atoms.assign(atoms.size(), std::vector<double>(static_cast<std::size_t>(target.count)));
    for (int i = 0; i < target.count; ++i) {
        const double wl = target.wavelength(i);
        if (wl < lo || wl > hi)
            throw ValidationError("dictionary resample: " + std::to_string(wl) +
                                  " nm lies outside the dictionary's span (" +
                                  std::to_string(grid.start_nm) + "-" +
                                  std::to_string(grid.end_nm()) + " nm, no extrapolation)");
        double pos = (wl - grid.start_nm) / grid.step_nm;
        pos = std::clamp(pos, 0.0, static_cast<double>(grid.count - 1));
        const int i0 = std::min(static_cast<int>(pos), grid.count - 2 >= 0 ? grid.count - 2 : 0);
        const double f = grid.count > 1 ? pos - i0 : 0.0;
        for (std::size_t a = 0; a < atoms.size(); ++a) {
            const std::vector<double>& src = atoms[a];
            const double v0 = src[static_cast<std::size_t>(i0)];
            const double v1 = src[static_cast<std::size_t>(std::min(i0 + 1, grid.count - 1))];
            out.atoms[a][static_cast<std::size_t>(i)] = (1.0 - f) * v0 + f * v1;
        }
    }
    return out;
}

SpectralDictionary load_dictionary(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read dictionary file " + path.string());

    SpectralDictionary dict;
    if (path.extension() == ".json") {
        json doc;
        try {
            in >> doc;
            const auto wl = doc.at("wavelength_nm").get<std::vector<double>>();
            dict.grid = grid_from_samples(wl, path.string());
            for (const json& atom : doc.at("atoms")) {
                dict.names.push_back(atom.at("name").get<std::string>());
                dict.atoms.push_back(atom.at("values").get<std::vector<double>>());
            }
        } catch (const json::exception& e) {
            throw ValidationError("dictionary " + path.string() + ": " + e.what());
        }
    } else {
        std::string line;
        if (!std::getline(in, line))
            throw ValidationError("dictionary " + path.string() + ": empty file");
        const std::vector<std::string> header = split_csv_line(line);
        if (header.size() < 2 || header[0] != "wavelength_nm")
            throw ValidationError("dictionary " + path.string() +
                                  ": header must be wavelength_nm,<atom>,...");
        dict.names.assign(header.begin() + 1, header.end());
        dict.atoms.assign(dict.names.size(), {});

        std::vector<double> wl;
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line == "\r") continue;
            const std::vector<std::string> fields = split_csv_line(line);
            if (fields.size() != header.size())
                throw ValidationError("dictionary " + path.string() + ": line " +
                                      std::to_string(line_no) + " has " +
                                      std::to_string(fields.size()) + " fields, expected " +
                                      std::to_string(header.size()));
            try {
                wl.push_back(std::stod(fields[0]));
                for (std::size_t c = 1; c < fields.size(); ++c)
                    dict.atoms[c - 1].push_back(std::stod(fields[c]));
            } catch (const std::exception&) {
                throw ValidationError("dictionary " + path.string() + ": line " +
                                      std::to_string(line_no) + " has a non-numeric field");
            }
        }
        dict.grid = grid_from_samples(wl, path.string());
    }
    dict.validate();
    return dict;
}

void save_dictionary_csv(const SpectralDictionary& dictionary, const std::filesystem::path& path) {
    dictionary.validate();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FrameIoError("cannot create " + path.string());
    out << "wavelength_nm";
    for (const std::string& name : dictionary.names) out << "," << name;
    out << "\n";
    char buf[48];
    for (int i = 0; i < dictionary.grid.count; ++i) {
        std::snprintf(buf, sizeof(buf), "%.9g", dictionary.grid.wavelength(i));
        out << buf;
        for (const std::vector<double>& atom : dictionary.atoms) {
            std::snprintf(buf, sizeof(buf), ",%.9g", atom[static_cast<std::size_t>(i)]);
            out << buf;
        }
        out << "\n";
    }
    if (!out) throw FrameIoError("failed writing " + path.string());
}

SpectralDictionary builtin_pigment_dictionary(const WavelengthGrid& grid) {
    grid.validate();
    SpectralDictionary dict;
    dict.grid = grid;
    dict.names = {"ultramarine", "cadmium_yellow", "vermilion",
                  "madder_lake", "zinc_white",     "prussian_blue"};

    auto eval = [&](auto&& f) {
        std::vector<double> v(static_cast<std::size_t>(grid.count));
        for (int i = 0; i < grid.count; ++i) v[static_cast<std::size_t>(i)] = f(grid.wavelength(i));
        return v;
    };
    // Shapes are stylized but keep each pigment's signature: a narrow ultramarine
    // blue peak, band-limited yellows and reds with distinct NIR behaviour, a
    // gently drooping white, and a dark prussian blue with an NIR transparency
    // rise. Tuned so that greedy 2-sparse pursuit is exact on every atom pair.
    dict.atoms = {
        eval([](double l) { return 0.03 + 0.62 * bump(l, 445, 20) + 0.41 * step(l, 855, 45); }),
        eval([](double l) {
            return 0.03 + 0.50 * (step(l, 533, 16) - step(l, 676, 40)) + 0.55 * step(l, 855, 45);
        }),
        eval([](double l) {
            return 0.03 + 0.53 * (step(l, 592, 14) - step(l, 924, 45)) + 0.45 * step(l, 855, 45);
        }),
        eval([](double l) {
            return 0.03 + 0.48 * (step(l, 630, 16) - step(l, 714, 42)) + 0.03 * bump(l, 452, 22) +
                   0.27 * step(l, 855, 45);
        }),
        eval([](double l) { return 0.80 - 0.06 * bump(l, 430, 18) - 0.28 * (l - 430.0) / 570.0; }),
        eval([](double l) {
            return 0.046 + 0.147 * bump(l, 503, 22) + 0.093 * (step(l, 630, 16) - step(l, 714, 42)) +
                   0.147 * step(l, 865, 45);
        }),
    };
    dict.validate();
    return dict;
}

SparseSolution omp(const std::vector<double>& spectrum, const SpectralDictionary& dictionary,
                   int k_sparsity, double eps_res) {
    dictionary.validate();
    if (static_cast<int>(spectrum.size()) != dictionary.grid.count)
        throw ValidationError("omp: spectrum length does not match the dictionary grid");
    if (k_sparsity < 1 || k_sparsity > dictionary.atom_count())
        throw ValidationError("omp: k_sparsity must lie in [1, atom count]");

    const std::vector<std::vector<double>>& unit = dictionary.unit_atoms();
    const std::size_t m = spectrum.size();

    SparseSolution out;
    out.coefficients.assign(static_cast<std::size_t>(dictionary.atom_count()), 0.0);
    std::vector<double> residual = spectrum;
    double x_norm = 0.0;
    for (double v : spectrum) x_norm += v * v;
    x_norm = std::sqrt(x_norm);
    double r_norm = x_norm;
    out.residual_norms.push_back(r_norm);

    std::vector<char> selected(static_cast<std::size_t>(dictionary.atom_count()), 0);
    for (int t = 0; t < k_sparsity; ++t) {
        if (r_norm <= eps_res * x_norm) break;

        int best = -1;
        double best_mag = 0.0;
        for (int i = 0; i < dictionary.atom_count(); ++i) {
            if (selected[static_cast<std::size_t>(i)]) continue;
            double dot = 0.0;
            const std::vector<double>& u = unit[static_cast<std::size_t>(i)];
            for (std::size_t j = 0; j < m; ++j) dot += u[j] * residual[j];
            const double mag = std::abs(dot);
            if (mag > best_mag) {
                best_mag = mag;
                best = i;
            }
        }
        if (best < 0 || best_mag == 0.0) break;

        selected[static_cast<std::size_t>(best)] = 1;
        out.support.push_back(best);
        const double r2 = solve_support(spectrum, dictionary, out.support, &out.coefficients);

        for (std::size_t j = 0; j < m; ++j) {
            double fit = 0.0;
            for (int idx : out.support)
                fit += out.coefficients[static_cast<std::size_t>(idx)] *
                       dictionary.atoms[static_cast<std::size_t>(idx)][j];
            residual[j] = spectrum[j] - fit;
        }
        r_norm = std::sqrt(std::max(0.0, r2));
        out.residual_norms.push_back(r_norm);
    }
    out.residual = r_norm;
    return out;
}

SparseSolution brute_force_sparse(const std::vector<double>& spectrum,
                                  const SpectralDictionary& dictionary, int k_sparsity) {
    dictionary.validate();
    if (static_cast<int>(spectrum.size()) != dictionary.grid.count)
        throw ValidationError("brute_force_sparse: spectrum length does not match the grid");
    const int n = dictionary.atom_count();
    if (k_sparsity < 1 || k_sparsity > n)
        throw ValidationError("brute_force_sparse: k_sparsity must lie in [1, atom count]");

    double budget = 0.0;
    double c = 1.0;
    for (int t = 1; t <= k_sparsity; ++t) {
        c = c * (n - t + 1) / t;
        budget += c;
        if (budget > 1e5)
            throw ComputationError("brute_force_sparse: subset count exceeds the 1e5 budget");
    }

    double x2 = 0.0;
    for (double v : spectrum) x2 += v * v;

    SparseSolution best;
    best.coefficients.assign(static_cast<std::size_t>(n), 0.0);
    double best_r2 = x2;
    // Residual ties (within 1e-12 of the norm) keep the incumbent, which by
    // the size-ascending lexicographic enumeration is the smaller, then
    // lexicographically smaller, support.
    const double tie = 1e-12 * std::max(1.0, x2);

    std::vector<int> support;
    std::vector<double> coeffs;
    for (int t = 1; t <= k_sparsity; ++t) {
        support.resize(static_cast<std::size_t>(t));
        for (int i = 0; i < t; ++i) support[static_cast<std::size_t>(i)] = i;
        while (true) {
            const double r2 = solve_support(spectrum, dictionary, support, &coeffs);
            if (r2 < best_r2 - tie) {
                best_r2 = r2;
                best.coefficients = coeffs;
                best.support = support;
            }
            int pos = t - 1;
            while (pos >= 0 && support[static_cast<std::size_t>(pos)] == n - t + pos) --pos;
            if (pos < 0) break;
            ++support[static_cast<std::size_t>(pos)];
            for (int i = pos + 1; i < t; ++i)
                support[static_cast<std::size_t>(i)] = support[static_cast<std::size_t>(i - 1)] + 1;
        }
    }
    best.residual = std::sqrt(std::max(0.0, best_r2));
    best.residual_norms = {std::sqrt(x2), best.residual};
    return best;
}

AbundanceMaps unmix_stack(const SpectralStack& stack, const SpectralDictionary& dictionary,
                          const UnmixOptions& options) {
    stack.validate();
    if (stack.frame != FrameKind::Diffuse)
        throw ValidationError("unmix_stack: expected a diffuse (projected) stack, got " +
                              to_string(stack.frame));
    if (stack.angle_count() != 1)
        throw ValidationError("unmix_stack: expected a single pseudo-angle stack");

    const SpectralDictionary dict = dictionary.resampled(stack.grid);
    dict.unit_atoms();
    if (options.k_sparsity < 1 || options.k_sparsity > dict.atom_count())
        throw ValidationError("unmix_stack: k_sparsity must lie in [1, atom count]");

    AbundanceMaps out;
    out.atom_names = dict.names;
    out.weights.assign(dict.names.size(), ImagePlane(stack.width, stack.height));
    out.raw.assign(dict.names.size(), ImagePlane(stack.width, stack.height));

    const std::size_t n_pixels = static_cast<std::size_t>(stack.width) * stack.height;
    parallel_for(n_pixels, [&](std::size_t i0, std::size_t i1) {
        std::vector<double> x(static_cast<std::size_t>(stack.grid.count));
        std::vector<double> coeffs;
        for (std::size_t i = i0; i < i1; ++i) {
            bool complete = true;
            bool all_zero = true;
            for (int j = 0; j < stack.grid.count; ++j) {
                const ImagePlane& p = stack.plane(0, j);
                if (!p.valid[i]) {
                    complete = false;
                    break;
                }
                x[static_cast<std::size_t>(j)] = p.values[i];
                if (p.values[i] != 0.0) all_zero = false;
            }
            if (!complete) {
                for (std::size_t a = 0; a < out.weights.size(); ++a) {
                    out.weights[a].values[i] = 0.0;
                    out.weights[a].valid[i] = 0;
                    out.raw[a].values[i] = 0.0;
                    out.raw[a].valid[i] = 0;
                }
                continue;
            }
            if (all_zero) continue;

            SparseSolution sol = omp(x, dict, options.k_sparsity, options.eps_res);
            if (options.nonnegative && !sol.support.empty())
                solve_support_nonneg(x, dict, sol.support, &sol.coefficients);

            double norm = 0.0;
            for (std::size_t a = 0; a < sol.coefficients.size(); ++a) {
                out.raw[a].values[i] = sol.coefficients[a];
                const double clamped = std::max(0.0, sol.coefficients[a]);
                if (options.norm == UnmixOptions::Norm::Max)
                    norm = std::max(norm, clamped);
                else
                    norm += clamped;
            }
            if (norm > 0.0)
                for (std::size_t a = 0; a < sol.coefficients.size(); ++a)
                    out.weights[a].values[i] = std::max(0.0, sol.coefficients[a]) / norm;
        }
    });
    return out;
}

} // namespace oispec
