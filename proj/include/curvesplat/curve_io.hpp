#pragma once

#include "curvesplat/curve.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace curvesplat {

/// Curve file format shared by ground truth, checkpoints and results:
/// {"curves": [{"id", "type": "cubic"|"line", "control_points", "opacity",
/// "thickness"}, ...]}. Mask logits are training state and are not part of
/// this format; loaded curves carry empty logits until resized by the caller.
std::string curves_to_json(const std::vector<ParametricCurve>& curves);
std::vector<ParametricCurve> curves_from_json(const std::string& text);

void save_curves(const std::filesystem::path& path, const std::vector<ParametricCurve>& curves);
std::vector<ParametricCurve> load_curves(const std::filesystem::path& path);

/// Resize mask logits to n entries, filling new slots with `fill`.
void ensure_mask_logits(ParametricCurve& curve, int n, double fill);

Aabb curves_bounds(const std::vector<ParametricCurve>& curves);

}  // namespace curvesplat
