#pragma once

// Discrete differential operators on H x W x C fields.
//
// gradient:   forward differences, last column (x) / last row (y) set to 0.
// laplacian:  5-point stencil, an out-of-range neighbour takes the centre value.
// The *_adjoint functions are the exact matrix transposes of the two maps, so
//   <gradient(A), B>  == <A, gradient_adjoint(B)>
//   <laplacian(A), B> == <A, laplacian_adjoint(B)>
// hold up to round-off. Channels are independent planes.

#include <cstddef>
#include <span>
#include <string>

#include "reflect/field.hpp"

namespace reflect {

namespace detail {

// Plane kernels: one H x W channel, row-major. Output spans are fully overwritten.

inline void gradient_plane(std::span<const double> t, std::span<double> gx, std::span<double> gy,
                           std::size_t h, std::size_t w) {
    for (std::size_t i = 0; i < h; ++i) {
        const std::size_t row = i * w;
        for (std::size_t j = 0; j + 1 < w; ++j) gx[row + j] = t[row + j + 1] - t[row + j];
        gx[row + w - 1] = 0.0;
        if (i + 1 < h) {
            for (std::size_t j = 0; j < w; ++j) gy[row + j] = t[row + w + j] - t[row + j];
        } else {
            for (std::size_t j = 0; j < w; ++j) gy[row + j] = 0.0;
        }
    }
}

inline void gradient_adjoint_plane(std::span<const double> bx, std::span<const double> by,
                                   std::span<double> out, std::size_t h, std::size_t w) {
    for (std::size_t i = 0; i < h; ++i) {
        const std::size_t row = i * w;
        for (std::size_t j = 0; j < w; ++j) {
            double v = 0.0;
            if (j + 1 < w) v -= bx[row + j];
            if (j > 0) v += bx[row + j - 1];
            if (i + 1 < h) v -= by[row + j];
            if (i > 0) v += by[row - w + j];
            out[row + j] = v;
        }
    }
}

inline void laplacian_plane(std::span<const double> t, std::span<double> out, std::size_t h, std::size_t w) {
    for (std::size_t i = 0; i < h; ++i) {
        const std::size_t row = i * w;
        for (std::size_t j = 0; j < w; ++j) {
            const double centre = t[row + j];
            const double up = i > 0 ? t[row - w + j] : centre;
            const double down = i + 1 < h ? t[row + w + j] : centre;
            const double left = j > 0 ? t[row + j - 1] : centre;
            const double right = j + 1 < w ? t[row + j + 1] : centre;
            out[row + j] = up + down + left + right - 4.0 * centre;
        }
    }
}

// Gathers column (i,j) of the stencil matrix: +1 from each in-range neighbour's
// row, and on the diagonal -4 plus one per out-of-range neighbour that was
// replaced by the centre value.
inline void laplacian_adjoint_plane(std::span<const double> b, std::span<double> out, std::size_t h,
                                    std::size_t w) {
    for (std::size_t i = 0; i < h; ++i) {
        const std::size_t row = i * w;
        for (std::size_t j = 0; j < w; ++j) {
            double diag = -4.0;
            double v = 0.0;
            if (i > 0) v += b[row - w + j]; else diag += 1.0;
            if (i + 1 < h) v += b[row + w + j]; else diag += 1.0;
            if (j > 0) v += b[row + j - 1]; else diag += 1.0;
            if (j + 1 < w) v += b[row + j + 1]; else diag += 1.0;
            out[row + j] = v + diag * b[row + j];
        }
    }
}

} // namespace detail

inline void require_stencil_size(const Shape& s, const char* what) {
    if (s.height < 2 || s.width < 2) {
        throw DimensionError(std::string(what) + ": image " + to_string(s) +
                             " is too small, need at least 2x2");
    }
}

template <typename Tag>
GradientField gradient(const BasicField<Tag>& img) {
    require_stencil_size(img.shape(), "gradient");
    GradientField g(img.shape());
    for (std::size_t c = 0; c < img.channels(); ++c) {
        detail::gradient_plane(img.plane(c), g.dx.plane(c), g.dy.plane(c), img.height(), img.width());
    }
    return g;
}

/// Transpose of gradient(): a signed backward difference of each component.
/// Entries in the last column of dx and last row of dy do not contribute.
inline ScalarField gradient_adjoint(const GradientField& f) {
    f.validate();
    const Shape& s = f.shape();
    require_stencil_size(s, "gradient_adjoint");
    ScalarField out(s);
    for (std::size_t c = 0; c < s.channels; ++c) {
        detail::gradient_adjoint_plane(f.dx.plane(c), f.dy.plane(c), out.plane(c), s.height, s.width);
    }
    return out;
}

template <typename Tag>
ScalarField laplacian(const BasicField<Tag>& img) {
    require_stencil_size(img.shape(), "laplacian");
    ScalarField out(img.shape());
    for (std::size_t c = 0; c < img.channels(); ++c) {
        detail::laplacian_plane(img.plane(c), out.plane(c), img.height(), img.width());
    }
    return out;
}

/// Transpose of laplacian(). Computed column-wise from the stencil rather than
/// by calling laplacian(); with replicate boundaries the two coincide.
template <typename Tag>
ScalarField laplacian_adjoint(const BasicField<Tag>& f) {
    require_stencil_size(f.shape(), "laplacian_adjoint");
    ScalarField out(f.shape());
    for (std::size_t c = 0; c < f.channels(); ++c) {
        detail::laplacian_adjoint_plane(f.plane(c), out.plane(c), f.height(), f.width());
    }
    return out;
}

} // namespace reflect
