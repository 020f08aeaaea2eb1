#include "oispec/shape.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>

#include "oispec/colorimetry.hpp"
#include "oispec/errors.hpp"
#include "oispec/io/f32.hpp"
#include "oispec/parallel.hpp"

namespace oispec {

namespace {

using nlohmann::json;

Eigen::MatrixXd lights_matrix(const std::vector<LightVector>& lights) {
    Eigen::MatrixXd L(static_cast<Eigen::Index>(lights.size()), 3);
    for (std::size_t l = 0; l < lights.size(); ++l) {
        L(static_cast<Eigen::Index>(l), 0) = lights[l].x;
        L(static_cast<Eigen::Index>(l), 1) = lights[l].y;
        L(static_cast<Eigen::Index>(l), 2) = lights[l].z;
    }
    return L;
}

} // namespace

void NormalMap::validate() const {
    const std::size_t n = static_cast<std::size_t>(width) * height;
    if (nx.size() != n || ny.size() != n || nz.size() != n || k.size() != n || valid.size() != n)
        throw ValidationError("normal map: buffer sizes disagree with width*height");
    for (std::size_t i = 0; i < n; ++i) {
        if (!valid[i]) continue;
        const double norm = std::sqrt(nx[i] * nx[i] + ny[i] * ny[i] + nz[i] * nz[i]);
        if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-6)
            throw ValidationError("normal map: non-unit normal marked valid");
        if (!(nz[i] > 0.0)) throw ValidationError("normal map: rear-facing normal marked valid");
        if (!(k[i] >= 0.0) || !std::isfinite(k[i]))
            throw ValidationError("normal map: negative or non-finite albedo");
    }
}

NormalMap solve_normals(const std::vector<ImagePlane>& intensity_per_light,
                        const std::vector<LightVector>& lights,
                        const SolveNormalsOptions& options) {
    if (intensity_per_light.size() != lights.size())
        throw ValidationError("solve_normals: one intensity plane per light required");
    const int n_lights = static_cast<int>(lights.size());
    if (n_lights < 3)
        throw GeometryError("solve_normals: at least 3 lights required, got " +
                            std::to_string(n_lights));
    const int w = intensity_per_light[0].width;
    const int h = intensity_per_light[0].height;
    for (const ImagePlane& p : intensity_per_light) {
        if (p.width != w || p.height != h)
            throw DimensionError("solve_normals: intensity planes have mixed dimensions");
        p.validate();
    }

    const Eigen::MatrixXd L = lights_matrix(lights);
    {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(L);
        if (svd.singularValues()(2) <= 1e-9)
            throw GeometryError("solve_normals: lighting matrix is rank deficient "
                                "(lights span fewer than 3 directions)");
    }
    // Shared decomposition for the common case of a pixel lit by every
    // light; masked or trimmed pixels rebuild a subset problem.
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> full_qr(L);

    NormalMap out;
    out.width = w;
    out.height = h;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    out.nx.assign(n, 0.0);
    out.ny.assign(n, 0.0);
    out.nz.assign(n, 0.0);
    out.k.assign(n, 0.0);
    out.valid.assign(n, 0);
    out.residual_rms = ImagePlane(w, h);

    parallel_for(n, [&](std::size_t i0, std::size_t i1) {
        std::vector<int> used;
        used.reserve(lights.size());
        Eigen::VectorXd I(n_lights);
        for (std::size_t i = i0; i < i1; ++i) {
            used.clear();
            for (int l = 0; l < n_lights; ++l)
                if (intensity_per_light[l].valid[i]) used.push_back(l);

            if (options.trim && static_cast<int>(used.size()) >= 5) {
                int lo = 0, hi = 0;
                for (int u = 1; u < static_cast<int>(used.size()); ++u) {
                    const double v = intensity_per_light[used[u]].values[i];
                    if (v < intensity_per_light[used[lo]].values[i]) lo = u;
                    if (v > intensity_per_light[used[hi]].values[i]) hi = u;
                }
                // Erase the higher position first so both indices stay live.
                if (lo != hi) {
                    used.erase(used.begin() + std::max(lo, hi));
                    used.erase(used.begin() + std::min(lo, hi));
                }
            }

            if (static_cast<int>(used.size()) < 3) {
                out.residual_rms.set(static_cast<int>(i % w), static_cast<int>(i / w), 0.0, false);
                continue;
            }

            Eigen::Vector3d sol;
            double rss = 0.0;
            if (static_cast<int>(used.size()) == n_lights) {
                for (int l = 0; l < n_lights; ++l) I(l) = intensity_per_light[l].values[i];
                sol = full_qr.solve(I);
                rss = (L * sol - I).squaredNorm();
            } else {
                Eigen::MatrixXd Ls(static_cast<Eigen::Index>(used.size()), 3);
                Eigen::VectorXd Is(static_cast<Eigen::Index>(used.size()));
                for (std::size_t u = 0; u < used.size(); ++u) {
                    Ls.row(static_cast<Eigen::Index>(u)) = L.row(used[u]);
                    Is(static_cast<Eigen::Index>(u)) = intensity_per_light[used[u]].values[i];
                }
                Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Ls);
                if (qr.rank() < 3) {
                    out.residual_rms.values[i] = 0.0;
                    out.residual_rms.valid[i] = 0;
                    continue;
                }
                sol = qr.solve(Is);
                rss = (Ls * sol - Is).squaredNorm();
            }

            const double albedo = sol.norm();
            out.residual_rms.values[i] = std::sqrt(rss / static_cast<double>(used.size()));
            if (!std::isfinite(albedo) || albedo < options.eps_albedo || !(sol(2) > 0.0)) {
                out.residual_rms.valid[i] = 0;
                continue;
            }
            out.nx[i] = sol(0) / albedo;
            out.ny[i] = sol(1) / albedo;
            out.nz[i] = sol(2) / albedo;
            out.k[i] = albedo;
            out.valid[i] = 1;
        }
    });
    return out;
}

NormalMap solve_stack_normals(const SpectralStack& stack, const SolveNormalsOptions& options,
                              CollapseMode collapse) {
    stack.validate();
    if (stack.frame != FrameKind::Reflectance)
        throw ValidationError("solve_stack_normals: expected a reflectance stack, got " +
                              to_string(stack.frame));
    if (stack.sample_rotates && stack.angle_count() > 1)
        throw ValidationError("solve_stack_normals: stack must be registered first "
                              "(sample_rotates is still set)");

    std::vector<ImagePlane> scalar(stack.angle_count());
    for (int a = 0; a < stack.angle_count(); ++a) {
        if (collapse == CollapseMode::Luminance) {
            scalar[a] = luminance_plane(stack, a);
        } else {
            ImagePlane mean(stack.width, stack.height);
            parallel_for(mean.pixel_count(), [&](std::size_t i0, std::size_t i1) {
                for (std::size_t i = i0; i < i1; ++i) {
                    double sum = 0.0;
                    int used = 0;
                    for (int j = 0; j < stack.grid.count; ++j) {
                        const ImagePlane& p = stack.plane(a, j);
                        if (!p.valid[i]) continue;
                        sum += p.values[i];
                        ++used;
                    }
                    if (used == 0) {
                        mean.values[i] = 0.0;
                        mean.valid[i] = 0;
                    } else {
                        mean.values[i] = sum / used;
                    }
                }
            });
            scalar[a] = std::move(mean);
        }
    }
    return solve_normals(scalar, stack.geometry.light_vectors(), options);
}

ImagePlane shading_gradient(const NormalMap& normals, const LightVector& light, double eps_cos) {
    normals.validate();
    ImagePlane out(normals.width, normals.height);
    const std::size_t n = out.pixel_count();
    parallel_for(n, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            if (!normals.valid[i]) {
                out.values[i] = 0.0;
                out.valid[i] = 0;
                continue;
            }
            const double g =
                normals.nx[i] * light.x + normals.ny[i] * light.y + normals.nz[i] * light.z;
            if (g <= eps_cos) {
                out.values[i] = 0.0;
                out.valid[i] = 0;
            } else {
                out.values[i] = g;
            }
        }
    });
    return out;
}

SpectralStack flatten(const SpectralStack& stack, const NormalMap& normals, double eps_cos) {
    stack.validate();
    if (stack.frame != FrameKind::Reflectance)
        throw ValidationError("flatten: expected a reflectance stack, got " +
                              to_string(stack.frame));
    if (stack.sample_rotates && stack.angle_count() > 1)
        throw ValidationError("flatten: stack must be registered first");
    if (normals.width != stack.width || normals.height != stack.height)
        throw DimensionError("flatten: normal map dimensions differ from the stack");

    const std::vector<LightVector> lights = stack.geometry.light_vectors();
    SpectralStack out = stack;
    out.frame = FrameKind::Flattened;
    for (int a = 0; a < stack.angle_count(); ++a) {
        const ImagePlane gradient = shading_gradient(normals, lights[a], eps_cos);
        for (int j = 0; j < stack.grid.count; ++j) {
            ImagePlane& p = out.plane(a, j);
            parallel_for(p.pixel_count(), [&](std::size_t i0, std::size_t i1) {
                for (std::size_t i = i0; i < i1; ++i) {
                    if (!p.valid[i] || !gradient.valid[i]) {
                        p.values[i] = 0.0;
                        p.valid[i] = 0;
                    } else {
                        p.values[i] /= gradient.values[i];
                    }
                }
            });
        }
    }
    return out;
}

void save_normal_map(const NormalMap& normals, const std::filesystem::path& bin_path) {
    normals.validate();
    const std::size_t n = static_cast<std::size_t>(normals.width) * normals.height;
    // Reuse the float32 frame writer by packing the four channels into one
    // plane four times as wide.
    ImagePlane packed(normals.width * 4, normals.height);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t o = i * 4;
        if (normals.valid[i]) {
            packed.values[o] = normals.nx[i];
            packed.values[o + 1] = normals.ny[i];
            packed.values[o + 2] = normals.nz[i];
            packed.values[o + 3] = normals.k[i];
        } else {
            for (int c = 0; c < 4; ++c) packed.valid[o + c] = 0;
        }
    }
    io::write_f32(packed, bin_path);

    json header{{"width", normals.width},
                {"height", normals.height},
                {"channels", {"nx", "ny", "nz", "k"}},
                {"dtype", "float32-le"},
                {"invalid", "nan"}};
    std::filesystem::path json_path = bin_path;
    json_path.replace_extension(".json");
    std::ofstream out(json_path, std::ios::trunc);
    if (!out) throw FrameIoError("cannot create " + json_path.string());
    out << header.dump(2) << "\n";
}

NormalMap load_normal_map(const std::filesystem::path& bin_path) {
    std::filesystem::path json_path = bin_path;
    json_path.replace_extension(".json");
    std::ifstream in(json_path);
    if (!in) throw FrameIoError("cannot read normal map header " + json_path.string());
    json header;
    int w = 0, h = 0;
    try {
        in >> header;
        w = header.at("width").get<int>();
        h = header.at("height").get<int>();
    } catch (const json::exception& e) {
        throw ValidationError("normal map header " + json_path.string() + ": " + e.what());
    }

    const ImagePlane packed = io::read_f32(bin_path, w * 4, h);
    NormalMap out;
    out.width = w;
    out.height = h;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    out.nx.assign(n, 0.0);
    out.ny.assign(n, 0.0);
    out.nz.assign(n, 0.0);
    out.k.assign(n, 0.0);
    out.valid.assign(n, 0);
    out.residual_rms = ImagePlane(w, h);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t o = i * 4;
        if (!packed.valid[o] || !packed.valid[o + 1] || !packed.valid[o + 2] ||
            !packed.valid[o + 3])
            continue;
        out.nx[i] = packed.values[o];
        out.ny[i] = packed.values[o + 1];
        out.nz[i] = packed.values[o + 2];
        out.k[i] = packed.values[o + 3];
        // float32 storage loosens unit norm; renormalize so validate()'s
        // 1e-6 bound holds after a round trip.
        const double norm = std::sqrt(out.nx[i] * out.nx[i] + out.ny[i] * out.ny[i] +
                                      out.nz[i] * out.nz[i]);
        if (norm > 0.0) {
            out.nx[i] /= norm;
            out.ny[i] /= norm;
            out.nz[i] /= norm;
        }
        out.valid[i] = 1;
    }
    return out;
}

io::Image8 normal_map_image(const NormalMap& normals) {
    io::Image8 img;
    img.width = normals.width;
    img.height = normals.height;
    img.channels = 4;
    img.data.assign(static_cast<std::size_t>(img.width) * img.height * 4, 0);
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t i = 0; i < n; ++i) {
        if (!normals.valid[i]) continue;
        const double c[3] = {normals.nx[i], normals.ny[i], normals.nz[i]};
        for (int ch = 0; ch < 3; ++ch) {
            const double v = std::round((c[ch] + 1.0) * 0.5 * 255.0);
            img.data[i * 4 + ch] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
        img.data[i * 4 + 3] = 255;
    }
    return img;
}

} // namespace oispec
