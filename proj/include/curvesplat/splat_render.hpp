#pragma once

#include "curvesplat/camera.hpp"
#include "curvesplat/coupling.hpp"
#include "curvesplat/edge_map.hpp"
#include "curvesplat/types.hpp"

#include <optional>
#include <vector>

namespace curvesplat {

struct RenderConfig {
    double z_near = 1e-3;      // scene units; Gaussians at or before it are culled
    double alpha_max = 0.99;   // transmittance clamp, as in standard splatting
    double lowpass = 0.3;      // px^2 added to the projected covariance diagonal
    double det_floor = 1e-12;  // sub-floor 2D covariance -> culled
    int tile_size = 16;
    int workers = 0;  // 0 = process default
};

/// Screen-space footprint of one projected Gaussian, retained for backward.
struct ProjectedGaussian {
    bool valid = false;  // false = culled
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Zero();
    Mat2 inv_cov = Mat2::Zero();
    double depth = 0.0;
    double weight = 0.0;  // opacity * mask
    Vec3 cam_mean = Vec3::Zero();
    // conservative half-extents of the 3-sigma footprint, pixels
    double rx = 0.0, ry = 0.0;
};

/// Standard 3DGS projection without color: camera-space mean, perspective
/// Jacobian at the mean, cov2d = J W Sigma W^T J^T + lowpass. Returns nullopt
/// when culled (behind z_near or covariance below the determinant floor).
std::optional<ProjectedGaussian> project_gaussian(const GaussianPrimitive& g, const Camera& cam,
                                                  const RenderConfig& config = {});

/// Contribution kernel exp(-chi2/2), windowed to zero at the 3-sigma cutoff so
/// footprints end exactly where tile culling assumes they do. The window ramps
/// over chi2 in [7.29, 9] and leaves the kernel untouched inside 2.7 sigma.
double kernel_value(double chi2);
double kernel_derivative(double chi2);

/// Opacity contribution of a projected Gaussian at pixel center (px, py).
double gaussian_alpha_at(const ProjectedGaussian& pg, double px, double py,
                         double alpha_max = 0.99);

struct RenderOutput {
    EdgeMap image;
    std::vector<double> transmittance;         // per pixel, 1 - image value
    std::vector<ProjectedGaussian> projected;  // one per input Gaussian
    // tile -> indices of Gaussians overlapping it, sorted front to back
    std::vector<std::vector<std::uint32_t>> tile_lists;
    int tiles_x = 0, tiles_y = 0;
    RenderConfig config;
};

/// Forward splatting: per pixel, value = 1 - prod_i (1 - alpha_i). The
/// single-channel closed form is order independent; tile lists still keep a
/// front-to-back order for the compositing contract.
RenderOutput render(const std::vector<GaussianPrimitive>& gaussians, const Camera& cam,
                    const RenderConfig& config = {});

/// Adjoint of render. grad_image holds dL/dpixel; returns per-Gaussian
/// gradients of (mean, frame, scales, opacity, mask). Throws StaleState when
/// the Gaussian count differs from the forward pass, DimensionMismatch when
/// grad_image does not match the image.
std::vector<GaussianGrads> render_backward(const RenderOutput& output,
                                           const std::vector<double>& grad_image,
                                           const std::vector<GaussianPrimitive>& gaussians,
                                           const Camera& cam);

}  // namespace curvesplat
