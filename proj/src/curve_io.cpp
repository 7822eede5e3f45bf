#include "curvesplat/curve_io.hpp"

#include "curvesplat/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace curvesplat {

using nlohmann::json;

std::string curves_to_json(const std::vector<ParametricCurve>& curves) {
    json doc;
    doc["curves"] = json::array();
    for (const auto& c : curves) {
        json jc;
        jc["id"] = c.id;
        jc["type"] = is_cubic(c.geometry) ? "cubic" : "line";
        json pts = json::array();
        for (int k = 0; k < control_point_count(c.geometry); ++k) {
            const Vec3 p = control_point(c.geometry, k);
            pts.push_back(json::array({p.x(), p.y(), p.z()}));
        }
        jc["control_points"] = std::move(pts);
        jc["opacity"] = c.opacity;
        jc["thickness"] = c.thickness;
        doc["curves"].push_back(std::move(jc));
    }
    return doc.dump(2) + "\n";
}

namespace {

Vec3 parse_point(const json& jp) {
    if (!jp.is_array() || jp.size() != 3) {
        throw ParseError("curve file: control point must be a 3-element array");
    }
    return Vec3(jp[0].get<double>(), jp[1].get<double>(), jp[2].get<double>());
}

}  // namespace

std::vector<ParametricCurve> curves_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("curve file: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("curves") || !doc["curves"].is_array()) {
        throw ParseError("curve file: expected top-level object with a \"curves\" array");
    }
    std::vector<ParametricCurve> out;
    out.reserve(doc["curves"].size());
    for (const auto& jc : doc["curves"]) {
        ParametricCurve c;
        c.id = jc.at("id").get<CurveId>();
        const std::string type = jc.at("type").get<std::string>();
        const auto& pts = jc.at("control_points");
        if (type == "cubic") {
            if (pts.size() != 4) {
                throw ParseError("curve file: cubic curve id " + std::to_string(c.id) +
                                 " must have 4 control points, got " + std::to_string(pts.size()));
            }
            c.geometry = CubicBezier{parse_point(pts[0]), parse_point(pts[1]), parse_point(pts[2]),
                                     parse_point(pts[3])};
        } else if (type == "line") {
            if (pts.size() != 2) {
                throw ParseError("curve file: line curve id " + std::to_string(c.id) +
                                 " must have 2 control points, got " + std::to_string(pts.size()));
            }
            c.geometry = LineSegment{parse_point(pts[0]), parse_point(pts[1])};
        } else {
            throw ParseError("curve file: unknown curve type \"" + type + "\"");
        }
        c.opacity = jc.at("opacity").get<double>();
        c.thickness = jc.at("thickness").get<double>();
        if (!(c.opacity >= 0.0 && c.opacity <= 1.0)) {
            throw ParseError("curve file: opacity of curve id " + std::to_string(c.id) +
                             " outside [0,1]");
        }
        if (!(c.thickness > 0.0)) {
            throw ParseError("curve file: thickness of curve id " + std::to_string(c.id) +
                             " must be positive");
        }
        if (!geometry_finite(c.geometry)) {
            throw ParseError("curve file: non-finite control point in curve id " +
                             std::to_string(c.id));
        }
        out.push_back(std::move(c));
    }
    return out;
}

void save_curves(const std::filesystem::path& path, const std::vector<ParametricCurve>& curves) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open for writing: " + path.string());
    }
    f << curves_to_json(curves);
    if (!f) {
        throw IoError("write failed: " + path.string());
    }
}

std::vector<ParametricCurve> load_curves(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open: " + path.string());
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return curves_from_json(ss.str());
}

void ensure_mask_logits(ParametricCurve& curve, int n, double fill) {
    curve.mask_logits.resize(static_cast<std::size_t>(n), fill);
}

Aabb curves_bounds(const std::vector<ParametricCurve>& curves) {
    Aabb box;
    for (const auto& c : curves) {
        box.expand(geometry_bounds(c.geometry));
    }
    return box;
}

}  // namespace curvesplat
