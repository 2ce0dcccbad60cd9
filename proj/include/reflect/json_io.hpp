#pragma once

// JSON views of solver parameters, trace records and metrics.

#include <cmath>
#include <string>

#include <json.hpp>

#include "reflect/metrics.hpp"
#include "reflect/solver.hpp"

namespace reflect {

inline nlohmann::json params_to_json(const SolverParams& p) {
    return {
        {"lambda", p.lambda},
        {"gamma", p.gamma},
        {"beta_min", p.resolved_beta_min()},
        {"beta_max", p.beta_max},
        {"kappa", p.kappa},
        {"adam_step", p.adam_step},
        {"adam_b1", p.adam_b1},
        {"adam_b2", p.adam_b2},
        {"adam_eps", p.adam_eps},
        {"inner_iters", p.inner_iters},
        {"inner_rel_tol", p.inner_rel_tol},
    };
}

/// Overrides fields of `base` from a JSON object. Unknown keys and non-numeric
/// values are rejected; the result is validated.
inline SolverParams params_from_json(const nlohmann::json& j, SolverParams base = {}) {
    if (!j.is_object()) throw ParameterError("params must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!value.is_number()) throw ParameterError("params." + key + " must be a number");
        const double v = value.get<double>();
        if (key == "lambda") base.lambda = v;
        else if (key == "gamma") base.gamma = v;
        else if (key == "beta_min") base.beta_min = v;
        else if (key == "beta_max") base.beta_max = v;
        else if (key == "kappa") base.kappa = v;
        else if (key == "adam_step") base.adam_step = v;
        else if (key == "adam_b1") base.adam_b1 = v;
        else if (key == "adam_b2") base.adam_b2 = v;
        else if (key == "adam_eps") base.adam_eps = v;
        else if (key == "inner_iters") {
            if (!value.is_number_integer() || value.get<long long>() <= 0) {
                throw ParameterError("params.inner_iters must be a positive integer");
            }
            base.inner_iters = value.get<std::size_t>();
        } else if (key == "inner_rel_tol" || key == "inner_tol") base.inner_rel_tol = v;
        else throw ParameterError("unknown parameter '" + key + "'");
    }
    base.validate();
    return base;
}

/// One trace line. Only "ms" depends on timing.
inline nlohmann::json record_to_json(const IterationRecord& r) {
    return {
        {"iter", r.index},
        {"beta", r.beta},
        {"objective", r.objective},
        {"aux_objective", r.aux_objective},
        {"inner_iters", r.inner_iterations},
        {"ms", r.milliseconds},
    };
}

inline nlohmann::json metrics_to_json(const MetricsReport& m) {
    nlohmann::json j{
        {"slmse", m.slmse},
        {"ssim", m.ssim},
        {"patch_size", m.patch_size},
        {"patch_step", m.patch_step},
        {"dynamic_range", m.dynamic_range},
    };
    if (m.psnr_perfect()) {
        j["psnr"] = "perfect";
    } else {
        j["psnr"] = m.psnr;
    }
    return j;
}

} // namespace reflect
