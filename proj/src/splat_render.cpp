#include "curvesplat/splat_render.hpp"

#include "curvesplat/errors.hpp"
#include "curvesplat/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace curvesplat {

namespace {

constexpr double kChi2Cutoff = 9.0;    // 3 sigma
constexpr double kWindowStart = 7.29;  // 2.7 sigma

std::atomic<int> g_default_workers{0};

}  // namespace

int default_workers() {
    const int w = g_default_workers.load();
    if (w > 0) {
        return w;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

void set_default_workers(int workers) { g_default_workers.store(workers); }

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 0) {
        workers = default_workers();
    }
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    std::atomic<std::size_t> next{0};
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&]() {
            try {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n) {
                        return;
                    }
                    fn(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

double kernel_value(double chi2) {
    if (chi2 >= kChi2Cutoff) {
        return 0.0;
    }
    const double e = std::exp(-0.5 * chi2);
    if (chi2 <= kWindowStart) {
        return e;
    }
    const double u = (kChi2Cutoff - chi2) / (kChi2Cutoff - kWindowStart);
    return e * u * u * (3.0 - 2.0 * u);
}

double kernel_derivative(double chi2) {
    if (chi2 >= kChi2Cutoff) {
        return 0.0;
    }
    const double e = std::exp(-0.5 * chi2);
    if (chi2 <= kWindowStart) {
        return -0.5 * e;
    }
    const double inv_span = 1.0 / (kChi2Cutoff - kWindowStart);
    const double u = (kChi2Cutoff - chi2) * inv_span;
    const double win = u * u * (3.0 - 2.0 * u);
    const double dwin = -6.0 * u * (1.0 - u) * inv_span;
    return e * (dwin - 0.5 * win);
}

std::optional<ProjectedGaussian> project_gaussian(const GaussianPrimitive& g, const Camera& cam,
                                                  const RenderConfig& config) {
    const Vec3 mu_c = cam.to_camera(g.mean);
    if (!(mu_c.z() > config.z_near)) {
        return std::nullopt;
    }
    const double x = mu_c.x(), y = mu_c.y(), z = mu_c.z();
    const double inv_z = 1.0 / z;

    ProjectedGaussian pg;
    pg.cam_mean = mu_c;
    pg.depth = z;
    pg.mean2d = Vec2(cam.fx * x * inv_z + cam.cx, cam.fy * y * inv_z + cam.cy);
    pg.weight = g.opacity * g.mask;

    Mat23 jac;
    jac << cam.fx * inv_z, 0.0, -cam.fx * x * inv_z * inv_z,  //
        0.0, cam.fy * inv_z, -cam.fy * y * inv_z * inv_z;
    const Mat23 m = jac * cam.rotation();
    const Mat3 sigma3 =
        g.frame * g.scales.cwiseProduct(g.scales).asDiagonal() * g.frame.transpose();
    pg.cov2d = m * sigma3 * m.transpose() + config.lowpass * Mat2::Identity();

    const double det = pg.cov2d.determinant();
    if (!(det > config.det_floor)) {
        return std::nullopt;
    }
    pg.inv_cov << pg.cov2d(1, 1), -pg.cov2d(0, 1), -pg.cov2d(1, 0), pg.cov2d(0, 0);
    pg.inv_cov /= det;

    // The extreme |dx| over the 3-sigma ellipse is 3*sqrt(cov_xx); same in y.
    pg.rx = 3.0 * std::sqrt(pg.cov2d(0, 0));
    pg.ry = 3.0 * std::sqrt(pg.cov2d(1, 1));
    pg.valid = true;
    return pg;
}

double gaussian_alpha_at(const ProjectedGaussian& pg, double px, double py, double alpha_max) {
    const double dx = px - pg.mean2d.x();
    const double dy = py - pg.mean2d.y();
    const double chi2 = pg.inv_cov(0, 0) * dx * dx + 2.0 * pg.inv_cov(0, 1) * dx * dy +
                        pg.inv_cov(1, 1) * dy * dy;
    return std::min(pg.weight * kernel_value(chi2), alpha_max);
}

namespace {

struct TileRect {
    int x0, y0, x1, y1;  // pixel bounds, half-open
};

// Pixel-row range whose centers fall inside [lo, hi].
inline void row_range(double lo, double hi, int limit, int& first, int& last) {
    first = std::max(0, static_cast<int>(std::ceil(lo - 0.5)));
    last = std::min(limit - 1, static_cast<int>(std::floor(hi - 0.5)));
}

// Visit every pixel of `rect` whose center lies inside the 3-sigma ellipse of
// pg, calling fn(x, y, chi2). Rows are scanned with their exact ellipse span.
template <typename Fn>
void scan_footprint(const ProjectedGaussian& pg, const TileRect& rect, Fn&& fn) {
    const double a = pg.inv_cov(0, 0);
    const double b = pg.inv_cov(0, 1);
    const double c = pg.inv_cov(1, 1);
    const double mx = pg.mean2d.x();
    const double my = pg.mean2d.y();

    int y_first, y_last;
    row_range(my - pg.ry, my + pg.ry, rect.y1, y_first, y_last);
    y_first = std::max(y_first, rect.y0);

    for (int y = y_first; y <= y_last; ++y) {
        const double dy = (y + 0.5) - my;
        // a dx^2 + 2 b dy dx + (c dy^2 - cutoff) <= 0
        const double disc = (b * b - a * c) * dy * dy + a * kChi2Cutoff;
        if (!(disc > 0.0)) {
            continue;
        }
        const double sq = std::sqrt(disc);
        const double lo = mx + (-b * dy - sq) / a;
        const double hi = mx + (-b * dy + sq) / a;
        int x_first, x_last;
        row_range(lo, hi, rect.x1, x_first, x_last);
        x_first = std::max(x_first, rect.x0);
        for (int x = x_first; x <= x_last; ++x) {
            const double dx = (x + 0.5) - mx;
            const double chi2 = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy;
            if (chi2 >= kChi2Cutoff) {
                continue;
            }
            fn(x, y, chi2);
        }
    }
}

}  // namespace

RenderOutput render(const std::vector<GaussianPrimitive>& gaussians, const Camera& cam,
                    const RenderConfig& config) {
    for (const auto& g : gaussians) {
        if (!g.mean.allFinite() || !g.frame.allFinite() || !g.scales.allFinite() ||
            !std::isfinite(g.opacity) || !std::isfinite(g.mask)) {
            throw NonFiniteInput("render: non-finite Gaussian attribute");
        }
    }

    RenderOutput out;
    out.config = config;
    out.image = EdgeMap(cam.width, cam.height, 0.0);
    out.transmittance.assign(out.image.pixel_count(), 1.0);

    out.projected.resize(gaussians.size());
    parallel_for(gaussians.size(), config.workers, [&](std::size_t i) {
        if (auto pg = project_gaussian(gaussians[i], cam, config)) {
            out.projected[i] = *pg;
        }
    });

    const int ts = config.tile_size;
    out.tiles_x = (cam.width + ts - 1) / ts;
    out.tiles_y = (cam.height + ts - 1) / ts;
    out.tile_lists.assign(static_cast<std::size_t>(out.tiles_x) * out.tiles_y, {});

    for (std::uint32_t i = 0; i < out.projected.size(); ++i) {
        const auto& pg = out.projected[i];
        if (!pg.valid || pg.weight <= 0.0) {
            continue;
        }
        const int tx0 = std::max(0, static_cast<int>((pg.mean2d.x() - pg.rx) / ts));
        const int tx1 = std::min(out.tiles_x - 1, static_cast<int>((pg.mean2d.x() + pg.rx) / ts));
        const int ty0 = std::max(0, static_cast<int>((pg.mean2d.y() - pg.ry) / ts));
        const int ty1 = std::min(out.tiles_y - 1, static_cast<int>((pg.mean2d.y() + pg.ry) / ts));
        if (pg.mean2d.x() + pg.rx < 0.0 || pg.mean2d.y() + pg.ry < 0.0) {
            continue;
        }
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) {
                out.tile_lists[static_cast<std::size_t>(ty) * out.tiles_x + tx].push_back(i);
            }
        }
    }

    const auto& projected = out.projected;
    parallel_for(out.tile_lists.size(), config.workers, [&](std::size_t tile) {
        auto& list = out.tile_lists[tile];
        if (list.empty()) {
            return;
        }
        std::sort(list.begin(), list.end(), [&](std::uint32_t lhs, std::uint32_t rhs) {
            if (projected[lhs].depth != projected[rhs].depth) {
                return projected[lhs].depth < projected[rhs].depth;
            }
            return lhs < rhs;
        });

        const int tx = static_cast<int>(tile) % out.tiles_x;
        const int ty = static_cast<int>(tile) / out.tiles_x;
        const TileRect rect{tx * ts, ty * ts, std::min((tx + 1) * ts, cam.width),
                            std::min((ty + 1) * ts, cam.height)};
        for (const std::uint32_t gi : list) {
            const auto& pg = projected[gi];
            scan_footprint(pg, rect, [&](int x, int y, double chi2) {
                const double alpha = std::min(pg.weight * kernel_value(chi2), config.alpha_max);
                if (alpha <= 0.0) {
                    return;
                }
                out.transmittance[static_cast<std::size_t>(y) * cam.width + x] *= 1.0 - alpha;
            });
        }
        for (int y = rect.y0; y < rect.y1; ++y) {
            for (int x = rect.x0; x < rect.x1; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
                out.image.values[p] = 1.0 - out.transmittance[p];
            }
        }
    });
    return out;
}

namespace {

struct ScreenGrads {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Zero();
    double weight = 0.0;
};

// Chain screen-space gradients back through the projection to the 3D
// attributes of one Gaussian.
void project_backward(const GaussianPrimitive& g, const ProjectedGaussian& pg, const Camera& cam,
                      const ScreenGrads& sg, GaussianGrads& out) {
    const Mat3 rot = cam.rotation();
    const double x = pg.cam_mean.x(), y = pg.cam_mean.y(), z = pg.cam_mean.z();
    const double inv_z = 1.0 / z;
    const double inv_z2 = inv_z * inv_z;

    Mat23 jac;
    jac << cam.fx * inv_z, 0.0, -cam.fx * x * inv_z2,  //
        0.0, cam.fy * inv_z, -cam.fy * y * inv_z2;
    const Mat23 m = jac * rot;
    const Mat3 dsq = g.scales.cwiseProduct(g.scales).asDiagonal();
    const Mat3 sigma3 = g.frame * dsq * g.frame.transpose();

    // cov2d = M Sigma M^T + lowpass I
    const Mat23 g_m = (sg.cov2d + sg.cov2d.transpose()) * m * sigma3;
    const Mat3 g_sigma3 = m.transpose() * sg.cov2d * m;

    // Sigma = F D F^T with D = diag(s^2)
    out.frame += (g_sigma3 + g_sigma3.transpose()) * g.frame * dsq;
    const Mat3 g_d = g.frame.transpose() * g_sigma3 * g.frame;
    for (int k = 0; k < 3; ++k) {
        out.scales[k] += 2.0 * g.scales[k] * g_d(k, k);
    }

    // M = J R
    const Mat23 g_jac = g_m * rot.transpose();

    Vec3 g_cam = Vec3::Zero();
    g_cam.x() += g_jac(0, 2) * (-cam.fx * inv_z2);
    g_cam.y() += g_jac(1, 2) * (-cam.fy * inv_z2);
    g_cam.z() += g_jac(0, 0) * (-cam.fx * inv_z2) + g_jac(1, 1) * (-cam.fy * inv_z2) +
                 g_jac(0, 2) * (2.0 * cam.fx * x * inv_z2 * inv_z) +
                 g_jac(1, 2) * (2.0 * cam.fy * y * inv_z2 * inv_z);

    // mean2d = (fx x/z + cx, fy y/z + cy)
    g_cam.x() += sg.mean2d.x() * cam.fx * inv_z;
    g_cam.y() += sg.mean2d.y() * cam.fy * inv_z;
    g_cam.z() += -sg.mean2d.x() * cam.fx * x * inv_z2 - sg.mean2d.y() * cam.fy * y * inv_z2;

    out.mean += rot.transpose() * g_cam;
}

}  // namespace

std::vector<GaussianGrads> render_backward(const RenderOutput& output,
                                           const std::vector<double>& grad_image,
                                           const std::vector<GaussianPrimitive>& gaussians,
                                           const Camera& cam) {
    if (gaussians.size() != output.projected.size()) {
        throw StaleState("render_backward: Gaussian count differs from the forward pass");
    }
    if (grad_image.size() != output.image.pixel_count()) {
        throw DimensionMismatch("render_backward: grad_image size mismatch");
    }
    const RenderConfig& config = output.config;
    const int ts = config.tile_size;

    // Per-tile accumulation aligned with the tile's own Gaussian list, merged
    // in tile order afterwards so results are independent of the worker count.
    std::vector<std::vector<ScreenGrads>> tile_grads(output.tile_lists.size());

    parallel_for(output.tile_lists.size(), config.workers, [&](std::size_t tile) {
        const auto& list = output.tile_lists[tile];
        if (list.empty()) {
            return;
        }
        auto& grads = tile_grads[tile];
        grads.assign(list.size(), ScreenGrads{});

        const int tx = static_cast<int>(tile) % output.tiles_x;
        const int ty = static_cast<int>(tile) / output.tiles_x;
        const TileRect rect{tx * ts, ty * ts, std::min((tx + 1) * ts, cam.width),
                            std::min((ty + 1) * ts, cam.height)};

        for (std::size_t li = 0; li < list.size(); ++li) {
            const auto& pg = output.projected[list[li]];
            ScreenGrads& acc = grads[li];
            scan_footprint(pg, rect, [&](int x, int y, double chi2) {
                const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
                const double g_pixel = grad_image[p];
                if (g_pixel == 0.0) {
                    return;
                }
                const double kernel = kernel_value(chi2);
                const double alpha_raw = pg.weight * kernel;
                if (alpha_raw <= 0.0) {
                    return;
                }
                if (alpha_raw >= config.alpha_max) {
                    return;  // clamped: no gradient into weight or kernel
                }
                // d value / d alpha_i = prod_{j != i} (1 - alpha_j)
                const double g_alpha = g_pixel * output.transmittance[p] / (1.0 - alpha_raw);
                acc.weight += g_alpha * kernel;

                const double g_chi2 = g_alpha * pg.weight * kernel_derivative(chi2);
                const double dx = (x + 0.5) - pg.mean2d.x();
                const double dy = (y + 0.5) - pg.mean2d.y();
                const Vec2 d(dx, dy);
                const Vec2 ad = pg.inv_cov * d;
                acc.mean2d += -2.0 * g_chi2 * ad;
                // chi2 = d^T C^{-1} d: d chi2 / d C = -C^{-1} d d^T C^{-1}
                acc.cov2d += -g_chi2 * ad * ad.transpose();
            });
        }
    });

    std::vector<ScreenGrads> merged(gaussians.size());
    for (std::size_t tile = 0; tile < output.tile_lists.size(); ++tile) {
        const auto& list = output.tile_lists[tile];
        for (std::size_t li = 0; li < list.size(); ++li) {
            ScreenGrads& dst = merged[list[li]];
            const ScreenGrads& src = tile_grads[tile][li];
            dst.mean2d += src.mean2d;
            dst.cov2d += src.cov2d;
            dst.weight += src.weight;
        }
    }

    std::vector<GaussianGrads> out(gaussians.size());
    parallel_for(gaussians.size(), config.workers, [&](std::size_t i) {
        const auto& pg = output.projected[i];
        if (!pg.valid) {
            return;
        }
        out[i].opacity = merged[i].weight * gaussians[i].mask;
        out[i].mask = merged[i].weight * gaussians[i].opacity;
        project_backward(gaussians[i], pg, cam, merged[i], out[i]);
    });
    return out;
}

}  // namespace curvesplat
