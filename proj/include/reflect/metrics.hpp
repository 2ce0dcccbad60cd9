#pragma once

// Restoration quality metrics. Argument order is (ground truth, estimate);
// slmse is normalised by the ground truth and is not symmetric.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "reflect/field.hpp"

namespace reflect {

inline constexpr std::size_t kLmsePatchSize = 20;
inline constexpr std::size_t kLmsePatchStep = 10;

struct MetricsReport {
    double slmse = 0.0;
    double ssim = 0.0;
    /// +infinity when the images are identical.
    double psnr = 0.0;
    std::size_t patch_size = kLmsePatchSize;
    std::size_t patch_step = kLmsePatchStep;
    double dynamic_range = 1.0;

    [[nodiscard]] bool psnr_perfect() const { return std::isinf(psnr) && psnr > 0; }
};

namespace detail {

/// Window origins along one axis: 0, step, 2*step, ... stopping at the first
/// window that reaches the end. That last window is clipped to the bounds.
inline std::vector<std::size_t> patch_anchors(std::size_t extent, std::size_t size, std::size_t step) {
    std::vector<std::size_t> anchors;
    for (std::size_t a = 0;; a += step) {
        anchors.push_back(a);
        if (a + size >= extent) break;
    }
    return anchors;
}

inline double lmse_plane(std::span<const double> s, std::span<const double> s_hat, std::size_t h,
                         std::size_t w) {
    const auto rows = patch_anchors(h, kLmsePatchSize, kLmsePatchStep);
    const auto cols = patch_anchors(w, kLmsePatchSize, kLmsePatchStep);
    double total = 0.0;
    for (std::size_t r0 : rows) {
        const std::size_t r1 = std::min(h, r0 + kLmsePatchSize);
        for (std::size_t c0 : cols) {
            const std::size_t c1 = std::min(w, c0 + kLmsePatchSize);
            for (std::size_t i = r0; i < r1; ++i) {
                for (std::size_t j = c0; j < c1; ++j) {
                    const double e = s[i * w + j] - s_hat[i * w + j];
                    total += e * e;
                }
            }
        }
    }
    return total;
}

inline double ssim_plane(std::span<const double> a, std::span<const double> b, double range) {
    const double n = static_cast<double>(a.size());
    double mu_a = 0.0;
    double mu_b = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        mu_a += a[k];
        mu_b += b[k];
    }
    mu_a /= n;
    mu_b /= n;
    double var_a = 0.0;
    double var_b = 0.0;
    double cov = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double da = a[k] - mu_a;
        const double db = b[k] - mu_b;
        var_a += da * da;
        var_b += db * db;
        cov += da * db;
    }
    var_a /= n;
    var_b /= n;
    cov /= n;
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);
    return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
           ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

} // namespace detail

/// Sum over 20x20 windows (stride 10) of the squared difference, over all channels.
template <typename A, typename B>
double lmse(const BasicField<A>& s, const BasicField<B>& s_hat) {
    require_same_shape(s.shape(), s_hat.shape(), "lmse");
    double total = 0.0;
    for (std::size_t c = 0; c < s.channels(); ++c) {
        total += detail::lmse_plane(s.plane(c), s_hat.plane(c), s.height(), s.width());
    }
    return total;
}

/// 1 - LMSE(s, s_hat) / LMSE(s, 0), clipped below at 0; 1 means a perfect match.
/// Computed per channel and averaged over channels whose ground truth is not
/// identically zero. Throws if the whole ground truth is zero.
template <typename A, typename B>
double slmse(const BasicField<A>& s, const BasicField<B>& s_hat) {
    require_same_shape(s.shape(), s_hat.shape(), "slmse");
    const std::vector<double> zeros(s.shape().plane_size(), 0.0);
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t c = 0; c < s.channels(); ++c) {
        const double denom = detail::lmse_plane(s.plane(c), zeros, s.height(), s.width());
        if (denom == 0.0) continue;
        const double num = detail::lmse_plane(s.plane(c), s_hat.plane(c), s.height(), s.width());
        sum += std::max(0.0, 1.0 - num / denom);
        ++used;
    }
    if (used == 0) throw ParameterError("slmse: ground truth is identically zero");
    return sum / static_cast<double>(used);
}

/// Global-statistics SSIM with population (1/N) moments, c1 = (0.01 L)^2,
/// c2 = (0.03 L)^2; averaged over channels.
template <typename A, typename B>
double ssim(const BasicField<A>& s, const BasicField<B>& s_hat, double dynamic_range = 1.0) {
    require_same_shape(s.shape(), s_hat.shape(), "ssim");
    if (!(dynamic_range > 0.0)) throw ParameterError("ssim: dynamic range must be positive");
    if (s.empty()) throw DimensionError("ssim: empty image");
    double sum = 0.0;
    for (std::size_t c = 0; c < s.channels(); ++c) sum += detail::ssim_plane(s.plane(c), s_hat.plane(c), dynamic_range);
    return sum / static_cast<double>(s.channels());
}

/// 10 log10(max_i^2 / MSE) with the MSE over every entry; +infinity when MSE is 0.
template <typename A, typename B>
double psnr(const BasicField<A>& s, const BasicField<B>& s_hat, double max_i = 1.0) {
    require_same_shape(s.shape(), s_hat.shape(), "psnr");
    if (!(max_i > 0.0)) throw ParameterError("psnr: max_i must be positive");
    if (s.empty()) throw DimensionError("psnr: empty image");
    auto a = s.values();
    auto b = s_hat.values();
    double se = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) se += (a[k] - b[k]) * (a[k] - b[k]);
    const double mse = se / static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_i * max_i / mse);
}

template <typename A, typename B>
MetricsReport evaluate(const BasicField<A>& truth, const BasicField<B>& estimate, double dynamic_range = 1.0) {
    MetricsReport r;
    r.dynamic_range = dynamic_range;
    r.slmse = slmse(truth, estimate);
    r.ssim = ssim(truth, estimate, dynamic_range);
    r.psnr = psnr(truth, estimate, dynamic_range);
    return r;
}

} // namespace reflect
