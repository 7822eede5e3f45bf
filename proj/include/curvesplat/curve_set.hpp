#pragma once

#include "curvesplat/curve.hpp"
#include "curvesplat/types.hpp"

#include <vector>

namespace curvesplat {

/// The dynamic curve collection under optimization. Ids are assigned
/// monotonically and never reused within a run so topology-event logs stay
/// unambiguous.
struct CurveSet {
    std::vector<ParametricCurve> curves;
    Aabb bbox;
    std::uint64_t rng_seed = 0;
    CurveId next_id = 0;

    CurveId allocate_id() { return next_id++; }

    const ParametricCurve* find(CurveId id) const {
        for (const auto& c : curves) {
            if (c.id == id) return &c;
        }
        return nullptr;
    }
};

}  // namespace curvesplat
