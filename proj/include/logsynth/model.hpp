#pragma once

#include <string>
#include <vector>

#include "logsynth/base_shape.hpp"
#include "logsynth/centerline.hpp"
#include "logsynth/common.hpp"
#include "logsynth/grain.hpp"
#include "logsynth/knot_model.hpp"
#include "logsynth/surface_knot.hpp"
#include "logsynth/thickness.hpp"

namespace logsynth {

/// One internal knot inside a LogModel: the nine parameters plus the signed
/// rise, the knot-frame azimuth, and bookkeeping from fitting.
struct ModelKnot {
    KnotParams params;
    double delta_l = 0.0;     // signed, mm
    double theta_mean = 0.0;  // azimuth of the knot frame, rad
    int knot_id = 0;
    int cluster_id = -1;
    double fit_rmse = 0.0;    // 0 for generated knots
    bool fit_converged = true;

    double tau() const {
        return std::atan2(delta_l, params.rho_max);
    }
};

/// The unit of fitting, serialization, and generation: centerline + surface
/// sub-models + the knot list. surface_knots pairs 1:1 with knots by index.
struct LogModel {
    enum class DcSource { Base, Thickness };

    std::string name;
    std::string source;  // "fit" or "generate"
    std::uint64_t seed = 0;
    Centerline centerline;
    ThicknessModel thickness;
    BaseShape base_shape;
    DcSource dc_source = DcSource::Base;
    GrainConfig grain;
    std::vector<ModelKnot> knots;
    std::vector<SurfaceKnot> surface_knots;

    double l_min() const { return base_shape.l_min; }
    double l_max() const { return base_shape.l_max; }

    void validate() const {
        if (centerline.n < 1) throw validation_error("log model: empty centerline");
        if (!(base_shape.l_max > base_shape.l_min))
            throw validation_error("log model: empty l-domain");
        if (surface_knots.size() != knots.size())
            throw validation_error(
                "log model: every internal knot must pair with exactly one surface knot");
        for (const auto& k : knots) {
            k.params.validate();
            if (!std::isfinite(k.delta_l)) throw validation_error("log model: non-finite delta_l");
        }
        for (const auto& sk : surface_knots)
            if (!sk.degenerate) sk.validate();
        grain.validate();
        for (const auto& c : thickness.clusters)
            if (!(c.gamma > 0.0)) throw validation_error("log model: thickness gamma must be > 0");
    }
};

}  // namespace logsynth
