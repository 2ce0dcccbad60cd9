#pragma once

// Reflection suppression by half-quadratic splitting.
//
// Minimises over T
//     ||lap(T) - lap(Y)||^2 + gamma ||T - Y||^2 + lambda * sum_ij phi_ij [grad T_ij != 0]
// by introducing gradient proxies D and alternating
//   D-step: per-pixel hard threshold of grad T at lambda * phi / beta (exact),
//   T-step: ADAM on the quadratic ||lap(T-Y)||^2 + gamma ||T-Y||^2 + beta ||D - grad T||^2,
// while beta grows geometrically from beta_min to beta_max.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reflect/adam.hpp"
#include "reflect/field.hpp"
#include "reflect/operators.hpp"
#include "reflect/parallel.hpp"
#include "reflect/selection.hpp"

namespace reflect {

struct SolverParams {
    static constexpr double kDefaultLambda = 2e-3;

    double lambda = kDefaultLambda;
    double gamma = 0.012;
    /// Unset means 2 * lambda (or 2 * the default lambda when lambda is 0).
    std::optional<double> beta_min;
    double beta_max = 1e5;
    double kappa = 2.0;
    double adam_step = 1e-3;
    double adam_b1 = 0.9;
    double adam_b2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t inner_iters = 100;
    double inner_rel_tol = 1e-6;

    [[nodiscard]] double resolved_beta_min() const {
        if (beta_min) return *beta_min;
        return 2.0 * (lambda > 0.0 ? lambda : kDefaultLambda);
    }

    [[nodiscard]] AdamSettings adam() const { return {adam_step, adam_b1, adam_b2, adam_eps}; }

    void validate() const {
        auto fail = [](const std::string& m) { throw ParameterError(m); };
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be a finite value >= 0");
        if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail("gamma must be a finite value >= 0");
        const double bmin = resolved_beta_min();
        if (!(bmin > 0.0)) fail("beta_min must be > 0");
        if (!(beta_max > 0.0) || !std::isfinite(beta_max)) fail("beta_max must be a finite value > 0");
        if (bmin > beta_max) fail("beta_min must not exceed beta_max");
        if (!(kappa > 1.0) || !std::isfinite(kappa)) fail("kappa must be > 1");
        if (!(adam_step > 0.0)) fail("adam_step must be > 0");
        if (!(adam_b1 > 0.0 && adam_b1 < 1.0)) fail("adam_b1 must lie in (0,1)");
        if (!(adam_b2 > 0.0 && adam_b2 < 1.0)) fail("adam_b2 must lie in (0,1)");
        if (!(adam_eps > 0.0)) fail("adam_eps must be > 0");
        if (inner_iters == 0) fail("inner_iters must be positive");
        if (!(inner_rel_tol >= 0.0)) fail("inner_rel_tol must be >= 0");
    }
};

/// beta_min * kappa^n for n = 0, 1, ... while the value does not exceed beta_max.
inline std::vector<double> beta_schedule(const SolverParams& p) {
    p.validate();
    const double bmin = p.resolved_beta_min();
    std::vector<double> betas;
    for (int n = 0;; ++n) {
        const double b = bmin * std::pow(p.kappa, n);
        if (!(b <= p.beta_max)) break;
        betas.push_back(b);
    }
    return betas;
}

struct IterationRecord {
    std::size_t index = 0;
    double beta = 0.0;
    /// Full objective at the T after this iteration's T-step.
    double objective = 0.0;
    /// Split objective with the current D, before the D-step (previous D, or grad T on the first pass).
    double aux_before_d = 0.0;
    double aux_after_d = 0.0;
    /// Split objective after the T-step.
    double aux_objective = 0.0;
    /// ADAM steps taken, summed over channels.
    std::size_t inner_iterations = 0;
    double milliseconds = 0.0;
};

struct SolveTrace {
    std::vector<IterationRecord> iterations;
};

// ---------------------------------------------------------------------------
// Objective terms

/// sum over pixels and channels of phi_ij * [dx != 0 or dy != 0]
inline double prior_value(const SelectionMask& phi, const GradientField& d) {
    d.validate();
    require_mask_matches(phi, d.shape(), "prior_value");
    const std::size_t n = d.shape().plane_size();
    auto p = phi.values();
    double total = 0.0;
    for (std::size_t c = 0; c < d.shape().channels; ++c) {
        auto dx = d.dx.plane(c);
        auto dy = d.dy.plane(c);
        for (std::size_t k = 0; k < n; ++k) {
            if (dx[k] != 0.0 || dy[k] != 0.0) total += p[k];
        }
    }
    return total;
}

/// ||lap(t) - lap(y)||^2 + gamma ||t - y||^2
inline double fidelity_value(const ImageBuffer& t, const ImageBuffer& y, double gamma) {
    require_same_shape(t.shape(), y.shape(), "fidelity_value");
    const ScalarField r = t.retag<ScalarTag>() - y.retag<ScalarTag>();
    const ScalarField lr = laplacian(r);
    return squared_norm(lr) + gamma * squared_norm(r);
}

inline double objective_value(const ImageBuffer& t, const ImageBuffer& y, const SelectionMask& phi,
                              double lambda, double gamma) {
    require_same_shape(t.shape(), y.shape(), "objective_value");
    require_mask_matches(phi, t.shape(), "objective_value");
    return fidelity_value(t, y, gamma) + lambda * prior_value(phi, gradient(t));
}

inline double coupling_value(const ImageBuffer& t, const GradientField& d) {
    const GradientField g = gradient(t);
    require_same_shape(d.shape(), g.shape(), "coupling_value");
    return squared_norm(d.dx - g.dx) + squared_norm(d.dy - g.dy);
}

inline double aux_objective_value(const ImageBuffer& t, const GradientField& d, const ImageBuffer& y,
                                  const SelectionMask& phi, double lambda, double gamma, double beta) {
    d.validate();
    require_same_shape(t.shape(), y.shape(), "aux_objective_value");
    require_same_shape(t.shape(), d.shape(), "aux_objective_value");
    require_mask_matches(phi, t.shape(), "aux_objective_value");
    return fidelity_value(t, y, gamma) + lambda * prior_value(phi, d) + beta * coupling_value(t, d);
}

// ---------------------------------------------------------------------------
// T-subproblem

namespace detail {

/// The quadratic T-step objective on one channel, with reusable scratch buffers.
class QuadraticPlane {
public:
    QuadraticPlane(std::size_t h, std::size_t w, std::span<const double> y, std::span<const double> dx,
                   std::span<const double> dy, double gamma, double beta)
        : h_(h), w_(w), y_(y), dx_(dx), dy_(dy), gamma_(gamma), beta_(beta),
          r_(h * w), lap_(h * w), gx_(h * w), gy_(h * w), tmp_(h * w) {}

    /// Returns the objective at t and writes its gradient into grad.
    double evaluate(std::span<const double> t, std::span<double> grad) {
        const std::size_t n = h_ * w_;
        for (std::size_t k = 0; k < n; ++k) r_[k] = t[k] - y_[k];
        laplacian_plane(r_, lap_, h_, w_);
        gradient_plane(t, gx_, gy_, h_, w_);
        double fid = 0.0;
        double l2 = 0.0;
        double cpl = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            gx_[k] -= dx_[k];
            gy_[k] -= dy_[k];
            fid += lap_[k] * lap_[k];
            l2 += r_[k] * r_[k];
            cpl += gx_[k] * gx_[k] + gy_[k] * gy_[k];
        }
        laplacian_adjoint_plane(lap_, grad, h_, w_);
        gradient_adjoint_plane(gx_, gy_, tmp_, h_, w_);
        for (std::size_t k = 0; k < n; ++k) {
            grad[k] = 2.0 * grad[k] + 2.0 * gamma_ * r_[k] + 2.0 * beta_ * tmp_[k];
        }
        return fid + gamma_ * l2 + beta_ * cpl;
    }

private:
    std::size_t h_, w_;
    std::span<const double> y_, dx_, dy_;
    double gamma_, beta_;
    std::vector<double> r_, lap_, gx_, gy_, tmp_;
};

struct PlaneSolve {
    std::size_t iterations = 0;
    double initial = 0.0;
    double final = 0.0;
};

/// ADAM from a warm start; t is overwritten by the lowest-objective iterate seen.
inline PlaneSolve solve_t_plane(std::span<double> t, std::span<const double> y, std::span<const double> dx,
                                std::span<const double> dy, std::size_t h, std::size_t w, double gamma,
                                double beta, const SolverParams& params) {
    const std::size_t n = h * w;
    QuadraticPlane q(h, w, y, dx, dy, gamma, beta);
    std::vector<double> grad(n);
    std::vector<double> x(t.begin(), t.end());
    Adam adam(n, params.adam());

    PlaneSolve out;
    double f = q.evaluate(x, grad);
    if (!std::isfinite(f)) throw NumericalError("T-step objective is not finite at the start point");
    out.initial = f;
    double best = f;
    double prev = f;
    for (std::size_t k = 1; k <= params.inner_iters; ++k) {
        adam.step(x, grad);
        f = q.evaluate(x, grad);
        if (!std::isfinite(f)) {
            throw NumericalError("T-step objective became non-finite after " + std::to_string(k) +
                                 " ADAM steps (step size too large?)");
        }
        out.iterations = k;
        if (f < best) {
            best = f;
            std::copy(x.begin(), x.end(), t.begin());
        }
        const double denom = std::max(std::abs(prev), std::numeric_limits<double>::min());
        if (std::abs(f - prev) / denom < params.inner_rel_tol) break;
        prev = f;
    }
    out.final = best;
    return out;
}

inline void d_step_plane(std::span<const double> t, std::span<const double> phi, double lambda, double beta,
                         std::span<double> dx, std::span<double> dy, std::size_t h, std::size_t w) {
    gradient_plane(t, dx, dy, h, w);
    const std::size_t n = h * w;
    for (std::size_t k = 0; k < n; ++k) {
        const double threshold = lambda * phi[k] / beta;
        if (dx[k] * dx[k] + dy[k] * dy[k] <= threshold) {
            dx[k] = 0.0;
            dy[k] = 0.0;
        }
    }
}

} // namespace detail

/// ||lap(t - y)||^2 + gamma ||t - y||^2 + beta ||d - grad t||^2
inline double t_subproblem_value(const ImageBuffer& t, const GradientField& d, const ImageBuffer& y,
                                 double gamma, double beta) {
    d.validate();
    require_same_shape(t.shape(), y.shape(), "t_subproblem_value");
    require_same_shape(t.shape(), d.shape(), "t_subproblem_value");
    return fidelity_value(t, y, gamma) + beta * coupling_value(t, d);
}

/// Gradient of t_subproblem_value with respect to t:
///   2 lap^T lap(t - y) + 2 gamma (t - y) + 2 beta grad^T(grad t - d)
inline ScalarField t_subproblem_gradient(const ImageBuffer& t, const GradientField& d, const ImageBuffer& y,
                                         double gamma, double beta) {
    d.validate();
    require_same_shape(t.shape(), y.shape(), "t_subproblem_gradient");
    require_same_shape(t.shape(), d.shape(), "t_subproblem_gradient");
    require_stencil_size(t.shape(), "t_subproblem_gradient");
    ScalarField out(t.shape());
    for (std::size_t c = 0; c < t.channels(); ++c) {
        detail::QuadraticPlane q(t.height(), t.width(), y.plane(c), d.dx.plane(c), d.dy.plane(c), gamma, beta);
        q.evaluate(t.plane(c), out.plane(c));
    }
    return out;
}

struct TStepResult {
    ImageBuffer t;
    std::size_t iterations = 0;
    double initial_objective = 0.0;
    double final_objective = 0.0;
};

/// ADAM on the T-subproblem from warm start t0, per channel. Stops after
/// params.inner_iters steps or when the relative objective change between
/// consecutive steps drops below params.inner_rel_tol; returns the best iterate.
inline TStepResult solve_t_subproblem(const ImageBuffer& t0, const GradientField& d, const ImageBuffer& y,
                                      double gamma, double beta, const SolverParams& params) {
    params.validate();
    d.validate();
    require_same_shape(t0.shape(), y.shape(), "solve_t_subproblem");
    require_same_shape(t0.shape(), d.shape(), "solve_t_subproblem");
    require_stencil_size(t0.shape(), "solve_t_subproblem");
    TStepResult res{t0};
    for (std::size_t c = 0; c < t0.channels(); ++c) {
        const auto s = detail::solve_t_plane(res.t.plane(c), y.plane(c), d.dx.plane(c), d.dy.plane(c),
                                             t0.height(), t0.width(), gamma, beta, params);
        res.iterations += s.iterations;
        res.initial_objective += s.initial;
        res.final_objective += s.final;
    }
    return res;
}

/// Exact minimiser of beta ||D - grad t||^2 + lambda P(phi, D): per pixel and channel,
/// D = 0 where |grad t|^2 <= lambda phi / beta, otherwise D = grad t.
inline GradientField solve_d_subproblem(const ImageBuffer& t, const SelectionMask& phi, double lambda,
                                        double beta) {
    if (!(beta > 0.0)) throw ParameterError("solve_d_subproblem: beta must be positive");
    if (!(lambda >= 0.0)) throw ParameterError("solve_d_subproblem: lambda must be non-negative");
    require_stencil_size(t.shape(), "solve_d_subproblem");
    require_mask_matches(phi, t.shape(), "solve_d_subproblem");
    GradientField d(t.shape());
    for (std::size_t c = 0; c < t.channels(); ++c) {
        detail::d_step_plane(t.plane(c), phi.values(), lambda, beta, d.dx.plane(c), d.dy.plane(c), t.height(),
                             t.width());
    }
    return d;
}

// ---------------------------------------------------------------------------
// Full solve

struct SolveOptions {
    /// Channels are solved concurrently up to this many at a time.
    std::size_t threads = 1;
    /// Called after each outer iteration with the record and the schedule length.
    std::function<void(const IterationRecord&, std::size_t)> on_iteration;
};

struct SuppressResult {
    ImageBuffer restored;
    SolveTrace trace;
};

inline SuppressResult suppress(const ImageBuffer& y, const SelectionMask& phi, const SolverParams& params,
                               const SolveOptions& options = {}) {
    params.validate();
    require_stencil_size(y.shape(), "suppress");
    require_mask_matches(phi, y.shape(), "suppress");

    using clock = std::chrono::steady_clock;
    const std::vector<double> betas = beta_schedule(params);
    const std::size_t h = y.height();
    const std::size_t w = y.width();
    const std::size_t channels = y.channels();

    ImageBuffer t = y;
    GradientField d = gradient(t);
    SolveTrace trace;

    for (std::size_t n = 0; n < betas.size(); ++n) {
        const auto start = clock::now();
        const double beta = betas[n];
        IterationRecord rec;
        rec.index = n;
        rec.beta = beta;
        rec.aux_before_d = aux_objective_value(t, d, y, phi, params.lambda, params.gamma, beta);

        // Channels are independent problems sharing phi; each task touches only its own planes.
        parallel_for(channels, options.threads, [&](std::size_t c) {
            detail::d_step_plane(t.plane(c), phi.values(), params.lambda, beta, d.dx.plane(c), d.dy.plane(c), h, w);
        });
        rec.aux_after_d = aux_objective_value(t, d, y, phi, params.lambda, params.gamma, beta);

        std::vector<detail::PlaneSolve> solves(channels);
        parallel_for(channels, options.threads, [&](std::size_t c) {
            solves[c] = detail::solve_t_plane(t.plane(c), y.plane(c), d.dx.plane(c), d.dy.plane(c), h, w,
                                              params.gamma, beta, params);
        });
        for (const auto& s : solves) rec.inner_iterations += s.iterations;

        rec.aux_objective = aux_objective_value(t, d, y, phi, params.lambda, params.gamma, beta);
        rec.objective = objective_value(t, y, phi, params.lambda, params.gamma);
        rec.milliseconds = std::chrono::duration<double, std::milli>(clock::now() - start).count();
        trace.iterations.push_back(rec);
        if (options.on_iteration) options.on_iteration(rec, betas.size());
    }

    t.clamp(0.0, 1.0);
    return {std::move(t), std::move(trace)};
}

} // namespace reflect
