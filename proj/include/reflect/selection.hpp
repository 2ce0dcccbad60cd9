#pragma once

// Region-selection masks: phi in [0,1] per pixel, 1 where a reflection was marked.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reflect/field.hpp"
#include "reflect/image_io.hpp"

namespace reflect {

enum class ResizePolicy { strict, nearest };

inline ResizePolicy parse_resize_policy(std::string_view s) {
    if (s == "strict") return ResizePolicy::strict;
    if (s == "nearest") return ResizePolicy::nearest;
    throw ParameterError("unknown resize policy '" + std::string(s) + "' (expected strict or nearest)");
}

struct MaskDims {
    std::size_t height = 0;
    std::size_t width = 0;
    friend bool operator==(const MaskDims&, const MaskDims&) = default;
};

class SelectionMask {
public:
    SelectionMask() = default;

    SelectionMask(MaskDims dims, std::vector<double> phi) : dims_(dims), phi_(std::move(phi)) {
        if (phi_.size() != dims_.height * dims_.width) {
            throw DimensionError("mask data length " + std::to_string(phi_.size()) + " does not match " +
                                 std::to_string(dims_.height) + "x" + std::to_string(dims_.width));
        }
        for (double v : phi_) {
            if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("mask value outside [0,1]: " + std::to_string(v));
        }
    }

    [[nodiscard]] MaskDims dims() const { return dims_; }
    [[nodiscard]] std::size_t height() const { return dims_.height; }
    [[nodiscard]] std::size_t width() const { return dims_.width; }
    [[nodiscard]] double at(std::size_t row, std::size_t col) const { return phi_[row * dims_.width + col]; }
    [[nodiscard]] std::span<const double> values() const { return phi_; }

    /// The mask as a single-channel image, for saving.
    [[nodiscard]] ImageBuffer to_image() const {
        return ImageBuffer(Shape{dims_.height, dims_.width, 1}, phi_);
    }

    friend bool operator==(const SelectionMask&, const SelectionMask&) = default;

private:
    MaskDims dims_{};
    std::vector<double> phi_;
};

inline void require_mask_matches(const SelectionMask& mask, const Shape& s, const char* what) {
    if (mask.height() != s.height || mask.width() != s.width) {
        throw DimensionError(std::string(what) + ": mask " + std::to_string(mask.height()) + "x" +
                             std::to_string(mask.width()) + " vs image " + to_string(s));
    }
}

/// phi == 1 everywhere: reflections assumed present throughout.
inline SelectionMask default_mask(MaskDims dims) {
    return SelectionMask(dims, std::vector<double>(dims.height * dims.width, 1.0));
}

/// Converts a decoded image (already in [0,1]) to a mask. RGB goes through Rec.601 luma.
inline SelectionMask mask_from_image(const ImageBuffer& img) {
    const std::size_t n = img.height() * img.width();
    std::vector<double> phi(n);
    if (img.channels() == 1) {
        auto p = img.plane(0);
        std::copy(p.begin(), p.end(), phi.begin());
    } else if (img.channels() == 3) {
        auto r = img.plane(0);
        auto g = img.plane(1);
        auto b = img.plane(2);
        for (std::size_t i = 0; i < n; ++i) phi[i] = std::clamp(0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i], 0.0, 1.0);
    } else {
        throw IoError("mask: unsupported channel count " + std::to_string(img.channels()));
    }
    return SelectionMask(MaskDims{img.height(), img.width()}, std::move(phi));
}

/// Nearest-neighbour resampling onto a new grid.
inline SelectionMask resample_nearest(const SelectionMask& m, MaskDims to) {
    if (m.height() == 0 || m.width() == 0) throw DimensionError("resample: empty mask");
    std::vector<double> phi(to.height * to.width);
    for (std::size_t i = 0; i < to.height; ++i) {
        const std::size_t si = std::min(m.height() - 1, i * m.height() / to.height);
        for (std::size_t j = 0; j < to.width; ++j) {
            const std::size_t sj = std::min(m.width() - 1, j * m.width() / to.width);
            phi[i * to.width + j] = m.at(si, sj);
        }
    }
    return SelectionMask(to, std::move(phi));
}

inline SelectionMask fit_mask(SelectionMask mask, MaskDims expected, ResizePolicy policy) {
    if (mask.dims() == expected) return mask;
    if (policy == ResizePolicy::strict) {
        throw DimensionError("mask is " + std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                             " but image is " + std::to_string(expected.height) + "x" +
                             std::to_string(expected.width));
    }
    return resample_nearest(mask, expected);
}

inline SelectionMask decode_mask(std::span<const std::uint8_t> bytes, MaskDims expected,
                                 ResizePolicy policy = ResizePolicy::strict) {
    return fit_mask(mask_from_image(decode_image(bytes)), expected, policy);
}

inline SelectionMask load_mask(const std::filesystem::path& path, MaskDims expected,
                               ResizePolicy policy = ResizePolicy::strict) {
    return fit_mask(mask_from_image(load_image(path)), expected, policy);
}

inline void save_mask(const SelectionMask& mask, const std::filesystem::path& path) {
    save_image(mask.to_image(), path);
}

/// Per-pixel squared-gradient cutoff lambda * phi / beta used by the D-step.
inline std::vector<double> local_threshold(const SelectionMask& mask, double lambda, double beta) {
    if (!(beta > 0.0)) throw ParameterError("local_threshold: beta must be positive");
    if (!(lambda >= 0.0)) throw ParameterError("local_threshold: lambda must be non-negative");
    std::vector<double> out(mask.values().size());
    std::ranges::transform(mask.values(), out.begin(), [&](double p) { return lambda * p / beta; });
    return out;
}

} // namespace reflect
