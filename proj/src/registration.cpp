#include "oispec/registration.hpp"

#include <fftw3.h>
#include <json.hpp>

#include <cmath>
#include <complex>
#include <fstream>
#include <mutex>
#include <numbers>

#include "oispec/colorimetry.hpp"
#include "oispec/errors.hpp"
#include "oispec/parallel.hpp"

namespace oispec {

namespace {

using nlohmann::json;

constexpr double kDegToRad = std::numbers::pi / 180.0;

// FFTW's planner is not thread safe; plan creation and destruction are
// serialized here. Executing distinct plans is safe.
std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

bool is_identity(const RigidTransform& t) {
    return t.rotation_deg == 0.0 && t.translation_xy[0] == 0.0 && t.translation_xy[1] == 0.0;
}

struct Peak {
    int x = 0;
    int y = 0;
    double value = 0.0;
};

double parabolic_offset(double ym, double y0, double yp) {
    const double den = ym + yp - 2.0 * y0;
    if (std::abs(den) < 1e-12 * std::max(1.0, std::abs(y0))) return 0.0;
    double d = (ym - yp) / (2.0 * den);
    if (d > 0.5) d = 0.5;
    if (d < -0.5) d = -0.5;
    return d;
}

} // namespace

ImagePlane apply_rigid(const ImagePlane& plane, const RigidTransform& transform) {
    plane.validate();
    if (is_identity(transform)) return plane;

    const int w = plane.width;
    const int h = plane.height;
    const double theta = transform.rotation_deg * kDegToRad;
    // Source point for output q is c + R(-theta) (q - c - t).
    const double cr = std::cos(-theta);
    const double sr = std::sin(-theta);
    const double cx = transform.center_xy[0];
    const double cy = transform.center_xy[1];
    const double tx = transform.translation_xy[0];
    const double ty = transform.translation_xy[1];

    ImagePlane out(w, h);
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
        for (std::size_t yi = y0; yi < y1; ++yi) {
            const int y = static_cast<int>(yi);
            for (int x = 0; x < w; ++x) {
                const double dx = x - cx - tx;
                const double dy = y - cy - ty;
                const double sx = cx + cr * dx - sr * dy;
                const double sy = cy + sr * dx + cr * dy;

                const double fx0 = std::floor(sx);
                const double fy0 = std::floor(sy);
                const int x0 = static_cast<int>(fx0);
                const int y0i = static_cast<int>(fy0);
                const double fx = sx - fx0;
                const double fy = sy - fy0;

                const double wgt[4] = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy),
                                       (1.0 - fx) * fy, fx * fy};
                const int nx[4] = {x0, x0 + 1, x0, x0 + 1};
                const int ny[4] = {y0i, y0i, y0i + 1, y0i + 1};

                double acc = 0.0;
                bool ok = true;
                for (int k = 0; k < 4; ++k) {
                    // Weights this small are pure floating-point residue of
                    // lattice-aligned samples; treating them as zero keeps
                    // 90-degree rotations and integer shifts mask-exact.
                    if (wgt[k] <= 1e-12) continue;
                    if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h ||
                        !plane.is_valid(nx[k], ny[k])) {
                        ok = false;
                        break;
                    }
                    acc += wgt[k] * plane.at(nx[k], ny[k]);
                }
                if (ok)
                    out.set(x, y, acc);
                else
                    out.set(x, y, 0.0, false);
            }
        }
    });
    return out;
}

ImagePlane derotate(const ImagePlane& plane, double beta_deg, const std::array<double, 2>& center) {
    if (!std::isfinite(center[0]) || !std::isfinite(center[1]))
        throw ValidationError("derotate: non-finite rotation center");
    if (center[0] < -plane.width || center[0] > 2.0 * plane.width || center[1] < -plane.height ||
        center[1] > 2.0 * plane.height)
        throw ValidationError("derotate: rotation center far outside the image");
    return apply_rigid(plane, RigidTransform{-beta_deg, center, {0.0, 0.0}});
}

std::array<double, 2> estimate_translation(const ImagePlane& reference, const ImagePlane& moving) {
    if (!reference.same_shape(moving))
        throw DimensionError("estimate_translation: image dimensions disagree");
    const int w = reference.width;
    const int h = reference.height;
    const std::size_t n = reference.pixel_count();

    std::size_t joint = 0;
    for (std::size_t i = 0; i < n; ++i) joint += reference.valid[i] && moving.valid[i];
    if (joint * 4 < n)
        throw ValidationError("estimate_translation: fewer than 25% jointly valid pixels");

    auto stats = [](const ImagePlane& p) {
        double sum = 0.0, sum2 = 0.0;
        std::size_t m = 0;
        for (std::size_t i = 0; i < p.values.size(); ++i) {
            if (!p.valid[i]) continue;
            sum += p.values[i];
            sum2 += p.values[i] * p.values[i];
            ++m;
        }
        const double mean = m ? sum / static_cast<double>(m) : 0.0;
        const double var = m ? std::max(0.0, sum2 / static_cast<double>(m) - mean * mean) : 0.0;
        return std::pair<double, double>(mean, var);
    };
    const auto [ref_mean, ref_var] = stats(reference);
    const auto [mov_mean, mov_var] = stats(moving);
    const double floor_var = 1e-18 * std::max(1.0, ref_mean * ref_mean + mov_mean * mov_mean);
    if (ref_var <= floor_var || mov_var <= floor_var)
        throw ComputationError("estimate_translation: constant image has no correlation peak");

    // Mean-filled, Hann-windowed copies feed the FFT; the window suppresses
    // the spectral leakage of content sliding past the frame edge.
    std::vector<double> hann_x(w), hann_y(h);
    for (int x = 0; x < w; ++x)
        hann_x[x] = w == 1 ? 1.0 : 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * x / (w - 1));
    for (int y = 0; y < h; ++y)
        hann_y[y] = h == 1 ? 1.0 : 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * y / (h - 1));

    std::vector<std::complex<double>> fa(n), fb(n), cross(n);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = reference.index(x, y);
            const double wv = hann_x[x] * hann_y[y];
            fa[i] = wv * (reference.valid[i] ? reference.values[i] - ref_mean : 0.0);
            fb[i] = wv * (moving.valid[i] ? moving.values[i] - mov_mean : 0.0);
        }
    }

    fftw_plan plan_a, plan_b, plan_inv;
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        auto* ca = reinterpret_cast<fftw_complex*>(fa.data());
        auto* cb = reinterpret_cast<fftw_complex*>(fb.data());
        auto* cc = reinterpret_cast<fftw_complex*>(cross.data());
        plan_a = fftw_plan_dft_2d(h, w, ca, ca, FFTW_FORWARD, FFTW_ESTIMATE);
        plan_b = fftw_plan_dft_2d(h, w, cb, cb, FFTW_FORWARD, FFTW_ESTIMATE);
        plan_inv = fftw_plan_dft_2d(h, w, cc, cc, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan_a);
    fftw_execute(plan_b);

    // moving(q) = reference(q - s) gives F_mov = exp(-2 pi i k.s / N) F_ref,
    // so the normalized cross power F_mov conj(F_ref) inverse-transforms to
    // a delta at +s.
    for (std::size_t i = 0; i < n; ++i) {
        const std::complex<double> c = fb[i] * std::conj(fa[i]);
        const double mag = std::abs(c);
        cross[i] = mag > 1e-300 ? c / mag : std::complex<double>(0.0, 0.0);
    }
    fftw_execute(plan_inv);
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_destroy_plan(plan_a);
        fftw_destroy_plan(plan_b);
        fftw_destroy_plan(plan_inv);
    }

    // Periodic scene content (surface relief shading, repeated pattern) can
    // raise phase-correlation sidelobes to nearly the height of the true
    // peak, so the tallest bin alone is not trustworthy. Gather the leading
    // candidates with non-maximum suppression and let a masked normalized
    // cross-correlation at each integer shift arbitrate.
    constexpr int kCandidates = 8;
    constexpr int kSuppress = 3;
    std::vector<Peak> candidates;
    std::vector<std::uint8_t> taken(n, 0);
    for (int c = 0; c < kCandidates; ++c) {
        Peak peak;
        peak.value = -1.0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                const double v = cross[i].real();
                if (!taken[i] && v > peak.value) peak = Peak{x, y, v};
            }
        if (!(peak.value > 0.0)) break;
        candidates.push_back(peak);
        for (int dy = -kSuppress; dy <= kSuppress; ++dy)
            for (int dx = -kSuppress; dx <= kSuppress; ++dx) {
                const int x = ((peak.x + dx) % w + w) % w;
                const int y = ((peak.y + dy) % h + h) % h;
                taken[static_cast<std::size_t>(y) * w + x] = 1;
            }
    }
    if (candidates.empty())
        throw ComputationError("estimate_translation: no correlation peak found");

    auto wrap = [](int v, int extent) { return v > extent / 2 ? v - extent : v; };
    auto ncc_at = [&](int shift_x, int shift_y) {
        // moving(q) = reference(q - s): overlay reference(x, y) on
        // moving(x + s, y + s) over the jointly valid overlap.
        double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
        std::size_t m = 0;
        for (int y = 0; y < h; ++y) {
            const int my = y + shift_y;
            if (my < 0 || my >= h) continue;
            for (int x = 0; x < w; ++x) {
                const int mx = x + shift_x;
                if (mx < 0 || mx >= w) continue;
                const std::size_t ri = static_cast<std::size_t>(y) * w + x;
                const std::size_t mi = static_cast<std::size_t>(my) * w + mx;
                if (!reference.valid[ri] || !moving.valid[mi]) continue;
                const double a = reference.values[ri];
                const double b = moving.values[mi];
                sa += a; sb += b; saa += a * a; sbb += b * b; sab += a * b;
                ++m;
            }
        }
        if (m * 16 < n) return -2.0;
        const double md = static_cast<double>(m);
        const double cov = sab - sa * sb / md;
        const double va = saa - sa * sa / md;
        const double vb = sbb - sb * sb / md;
        if (va <= 0.0 || vb <= 0.0) return -2.0;
        return cov / std::sqrt(va * vb);
    };

    Peak best = candidates.front();
    double best_ncc = -3.0;
    for (const Peak& cand : candidates) {
        const double score = ncc_at(wrap(cand.x, w), wrap(cand.y, h));
        if (score > best_ncc) {
            best_ncc = score;
            best = cand;
        }
    }

    auto at = [&](int x, int y) {
        x = (x % w + w) % w;
        y = (y % h + h) % h;
        return cross[static_cast<std::size_t>(y) * w + x].real();
    };
    const double dx = parabolic_offset(at(best.x - 1, best.y), best.value, at(best.x + 1, best.y));
    const double dy = parabolic_offset(at(best.x, best.y - 1), best.value, at(best.x, best.y + 1));

    double sx = best.x + dx;
    double sy = best.y + dy;
    if (sx > w / 2.0) sx -= w;
    if (sy > h / 2.0) sy -= h;
    return {sx, sy};
}

std::vector<LandmarkSet> load_landmarks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read landmarks file " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ValidationError("landmarks file " + path.string() + ": invalid JSON (" + e.what() +
                              ")");
    }
    std::vector<LandmarkSet> sets;
    try {
        for (const json& angle : doc.at("angles")) {
            LandmarkSet set;
            set.azimuth_deg = angle.at("azimuth_deg").get<double>();
            for (const json& pair : angle.at("pairs")) {
                const auto r = pair.at("reference").get<std::array<double, 2>>();
                const auto m = pair.at("moving").get<std::array<double, 2>>();
                set.reference.push_back(r);
                set.moving.push_back(m);
            }
            sets.push_back(std::move(set));
        }
    } catch (const json::exception& e) {
        throw ValidationError("landmarks file " + path.string() + ": " + e.what());
    }
    return sets;
}

namespace {

// Shading from surface relief is smooth and moves with the light, not the
// sample; subtracting a local mean leaves the broadband albedo structure that
// actually follows the stage. Blur averages valid neighbours only, so the
// derotation border does not bleed inward.
ImagePlane shading_highpass(const ImagePlane& plane, int radius) {
    const int w = plane.width;
    const int h = plane.height;
    ImagePlane blur = plane;
    for (int pass = 0; pass < 2; ++pass) {
        const bool horizontal = pass == 0;
        ImagePlane next(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (!blur.is_valid(x, y)) {
                    next.set(x, y, 0.0, false);
                    continue;
                }
                double acc = 0.0;
                int m = 0;
                for (int d = -radius; d <= radius; ++d) {
                    const int sx = horizontal ? x + d : x;
                    const int sy = horizontal ? y : y + d;
                    if (sx < 0 || sx >= w || sy < 0 || sy >= h || !blur.is_valid(sx, sy)) continue;
                    acc += blur.at(sx, sy);
                    ++m;
                }
                next.at(x, y) = acc / m;
            }
        blur = std::move(next);
    }
    ImagePlane out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (plane.is_valid(x, y))
                out.at(x, y) = plane.at(x, y) - blur.at(x, y);
            else
                out.set(x, y, 0.0, false);
        }
    return out;
}

int highpass_radius(int width, int height) {
    return std::max(3, std::min(width, height) / 16);
}

} // namespace

RegisterResult register_stack(const SpectralStack& stack, const RegisterOptions& options) {
    stack.validate();
    if (stack.frame != FrameKind::Reflectance)
        throw ValidationError("register_stack: expected a reflectance stack, got " +
                              to_string(stack.frame));

    const std::array<double, 2> center = options.center          ? *options.center
                                         : stack.rotation_center ? *stack.rotation_center
                                                                 : stack.center();
    const double beta0 = stack.geometry.azimuths_deg[0];

    RegisterResult result;
    result.stack = make_stack(stack.grid, stack.geometry, stack.width, stack.height, stack.frame);
    result.stack.sample_rotates = false;
    result.stack.rotation_center = stack.rotation_center;
    result.transforms.resize(stack.angle_count());

    const int hp_radius = highpass_radius(stack.width, stack.height);
    const ImagePlane reference_lum = shading_highpass(luminance_plane(stack, 0), hp_radius);

    for (int a = 0; a < stack.angle_count(); ++a) {
        const double beta = stack.geometry.azimuths_deg[a];
        // Angle 0 defines the output frame; other angles are derotated into
        // it and shift-corrected against it.
        const double rot = stack.sample_rotates ? -(beta - beta0) : 0.0;
        RigidTransform t{rot, center, {0.0, 0.0}};

        if (a > 0) {
            if (options.mode == RegisterMode::Auto) {
                ImagePlane moving_lum = luminance_plane(stack, a);
                if (rot != 0.0) moving_lum = apply_rigid(moving_lum, RigidTransform{rot, center, {0.0, 0.0}});
                moving_lum = shading_highpass(moving_lum, hp_radius);
                try {
                    const auto s = estimate_translation(reference_lum, moving_lum);
                    t.translation_xy = {-s[0], -s[1]};
                } catch (const ComputationError& e) {
                    throw ComputationError("register_stack: azimuth " + std::to_string(beta) +
                                           " deg: " + e.what());
                } catch (const ValidationError& e) {
                    throw ValidationError("register_stack: azimuth " + std::to_string(beta) +
                                          " deg: " + e.what());
                }
            } else {
                const LandmarkSet* set = nullptr;
                for (const LandmarkSet& s : options.landmarks)
                    if (std::abs(s.azimuth_deg - beta) <= 1e-6) set = &s;
                if (!set || set->reference.size() < 2)
                    throw ValidationError("register_stack: azimuth " + std::to_string(beta) +
                                          " deg needs at least 2 landmark pairs");
                // A labeled point p in the acquired view lands at
                // c + R(rot)(p - c) after derotation; the least-squares
                // translation between point clouds is the mean offset.
                const double cr = std::cos(rot * kDegToRad);
                const double sr = std::sin(rot * kDegToRad);
                double sx = 0.0, sy = 0.0;
                for (std::size_t i = 0; i < set->reference.size(); ++i) {
                    const double px = set->moving[i][0] - center[0];
                    const double py = set->moving[i][1] - center[1];
                    const double qx = center[0] + cr * px - sr * py;
                    const double qy = center[1] + sr * px + cr * py;
                    sx += qx - set->reference[i][0];
                    sy += qy - set->reference[i][1];
                }
                const double m = static_cast<double>(set->reference.size());
                t.translation_xy = {-sx / m, -sy / m};
            }
        }

        result.transforms[a] = t;
        for (int j = 0; j < stack.grid.count; ++j)
            result.stack.plane(a, j) = apply_rigid(stack.plane(a, j), t);
    }
    return result;
}

void save_transforms(const std::vector<RigidTransform>& transforms,
                     const std::vector<double>& azimuths_deg, const std::filesystem::path& path) {
    if (transforms.size() != azimuths_deg.size())
        throw ValidationError("save_transforms: one azimuth per transform required");
    json doc;
    doc["transforms"] = json::array();
    for (std::size_t i = 0; i < transforms.size(); ++i) {
        const RigidTransform& t = transforms[i];
        doc["transforms"].push_back(json{{"azimuth_deg", azimuths_deg[i]},
                                         {"rotation_deg", t.rotation_deg},
                                         {"center_xy", t.center_xy},
                                         {"translation_xy", t.translation_xy}});
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FrameIoError("cannot create " + path.string());
    out << doc.dump(2) << "\n";
    if (!out) throw FrameIoError("failed writing " + path.string());
}

std::vector<RigidTransform> load_transforms(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read transforms file " + path.string());
    json doc;
    try {
        in >> doc;
        std::vector<RigidTransform> out;
        for (const json& entry : doc.at("transforms")) {
            RigidTransform t;
            t.rotation_deg = entry.at("rotation_deg").get<double>();
            t.center_xy = entry.at("center_xy").get<std::array<double, 2>>();
            t.translation_xy = entry.at("translation_xy").get<std::array<double, 2>>();
            out.push_back(t);
        }
        return out;
    } catch (const json::exception& e) {
        throw ValidationError("transforms file " + path.string() + ": " + e.what());
    }
}

} // namespace oispec
