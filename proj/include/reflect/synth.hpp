#pragma once

// Synthetic reflection scenes: Y = w T + (1 - w) (k * R), with k a normalised
// Gaussian and replicate boundaries. Used for testing and demos.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "reflect/field.hpp"

namespace reflect {

struct SyntheticSceneParams {
    double w = 0.8;
    double blur_sigma = 3.0;
    /// 0 selects ceil(3 sigma).
    std::size_t kernel_radius = 0;
    std::uint64_t seed = 1;

    [[nodiscard]] std::size_t resolved_radius() const {
        return kernel_radius != 0 ? kernel_radius : static_cast<std::size_t>(std::ceil(3.0 * blur_sigma));
    }

    void validate() const {
        if (!(w >= 0.0 && w <= 1.0)) throw ParameterError("w must lie in [0,1]");
        if (!(blur_sigma > 0.0) || !std::isfinite(blur_sigma)) throw ParameterError("blur sigma must be > 0");
    }
};

/// 1D Gaussian taps for offsets -radius..radius, summing to 1.
inline std::vector<double> gaussian_kernel(double sigma, std::size_t radius) {
    if (!(sigma > 0.0)) throw ParameterError("gaussian_kernel: sigma must be > 0");
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        const double x = static_cast<double>(i) - static_cast<double>(radius);
        k[i] = std::exp(-0.5 * x * x / (sigma * sigma));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

/// Separable Gaussian blur, out-of-range samples clamped to the nearest edge pixel.
template <typename Tag>
BasicField<Tag> gaussian_blur(const BasicField<Tag>& img, double sigma, std::size_t radius) {
    const auto k = gaussian_kernel(sigma, radius);
    const auto h = static_cast<std::ptrdiff_t>(img.height());
    const auto w = static_cast<std::ptrdiff_t>(img.width());
    const auto r = static_cast<std::ptrdiff_t>(radius);
    BasicField<Tag> tmp(img.shape());
    BasicField<Tag> out(img.shape());
    for (std::size_t c = 0; c < img.channels(); ++c) {
        auto src = img.plane(c);
        auto mid = tmp.plane(c);
        auto dst = out.plane(c);
        for (std::ptrdiff_t i = 0; i < h; ++i) {
            for (std::ptrdiff_t j = 0; j < w; ++j) {
                double acc = 0.0;
                for (std::ptrdiff_t o = -r; o <= r; ++o) {
                    const std::ptrdiff_t jj = std::clamp<std::ptrdiff_t>(j + o, 0, w - 1);
                    acc += k[static_cast<std::size_t>(o + r)] * src[static_cast<std::size_t>(i * w + jj)];
                }
                mid[static_cast<std::size_t>(i * w + j)] = acc;
            }
        }
        for (std::ptrdiff_t i = 0; i < h; ++i) {
            for (std::ptrdiff_t j = 0; j < w; ++j) {
                double acc = 0.0;
                for (std::ptrdiff_t o = -r; o <= r; ++o) {
                    const std::ptrdiff_t ii = std::clamp<std::ptrdiff_t>(i + o, 0, h - 1);
                    acc += k[static_cast<std::size_t>(o + r)] * mid[static_cast<std::size_t>(ii * w + j)];
                }
                dst[static_cast<std::size_t>(i * w + j)] = acc;
            }
        }
    }
    return out;
}

/// Y = w T + (1 - w) blur(R), clamped to [0,1].
inline ImageBuffer compose_scene(const ImageBuffer& transmission, const ImageBuffer& reflection,
                                 const SyntheticSceneParams& p) {
    p.validate();
    require_same_shape(transmission.shape(), reflection.shape(), "compose_scene");
    const ImageBuffer blurred = gaussian_blur(reflection, p.blur_sigma, p.resolved_radius());
    ImageBuffer y(transmission.shape());
    auto t = transmission.values();
    auto b = blurred.values();
    auto out = y.values();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = p.w * t[k] + (1.0 - p.w) * b[k];
    y.clamp(0.0, 1.0);
    return y;
}

/// Background plus a few axis-aligned rectangles, each a flat colour in [0.15, 0.85].
inline ImageBuffer make_piecewise_constant(Shape shape, std::uint64_t seed, std::size_t rectangles = 6) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> level(0.15, 0.85);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ImageBuffer img(shape);
    for (std::size_t c = 0; c < shape.channels; ++c) {
        const double bg = level(rng);
        for (auto& v : img.plane(c)) v = bg;
    }
    for (std::size_t n = 0; n < rectangles; ++n) {
        const auto r0 = static_cast<std::size_t>(unit(rng) * 0.7 * shape.height);
        const auto c0 = static_cast<std::size_t>(unit(rng) * 0.7 * shape.width);
        const auto rh = static_cast<std::size_t>((0.15 + 0.35 * unit(rng)) * shape.height);
        const auto cw = static_cast<std::size_t>((0.15 + 0.35 * unit(rng)) * shape.width);
        std::vector<double> colour(shape.channels);
        for (auto& v : colour) v = level(rng);
        for (std::size_t i = r0; i < std::min(shape.height, r0 + rh); ++i) {
            for (std::size_t j = c0; j < std::min(shape.width, c0 + cw); ++j) {
                for (std::size_t c = 0; c < shape.channels; ++c) img.at(i, j, c) = colour[c];
            }
        }
    }
    return img;
}

/// Dark field with a few bright discs; blurred by compose_scene into soft blobs.
inline ImageBuffer make_blob_reflection(Shape shape, std::uint64_t seed, std::size_t blobs = 4) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ImageBuffer img(shape);
    const double extent = static_cast<double>(std::min(shape.height, shape.width));
    for (std::size_t n = 0; n < blobs; ++n) {
        const double ci = unit(rng) * shape.height;
        const double cj = unit(rng) * shape.width;
        const double radius = (0.06 + 0.12 * unit(rng)) * extent;
        const double value = 0.6 + 0.4 * unit(rng);
        for (std::size_t i = 0; i < shape.height; ++i) {
            for (std::size_t j = 0; j < shape.width; ++j) {
                const double di = static_cast<double>(i) - ci;
                const double dj = static_cast<double>(j) - cj;
                if (di * di + dj * dj <= radius * radius) {
                    for (std::size_t c = 0; c < shape.channels; ++c) img.at(i, j, c) = value;
                }
            }
        }
    }
    return img;
}

} // namespace reflect
