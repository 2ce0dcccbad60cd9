#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "reflect/error.hpp"

namespace reflect {

struct Shape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;

    [[nodiscard]] std::size_t plane_size() const { return height * width; }
    [[nodiscard]] std::size_t size() const { return height * width * channels; }

    friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
    return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}

struct ImageTag {};
struct ScalarTag {};

/// H x W x C array of doubles, stored as C contiguous row-major planes.
///
/// The tag keeps images (values meant to live in [0,1]) apart from derived
/// scalar fields such as Laplacians and adjoint outputs; the storage and
/// arithmetic are identical.
template <typename Tag>
class BasicField {
public:
    BasicField() = default;

    explicit BasicField(Shape shape, double fill = 0.0)
        : shape_(shape), values_(shape.size(), fill) {}

    BasicField(Shape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
        if (values_.size() != shape_.size()) {
            throw DimensionError("field data length " + std::to_string(values_.size()) +
                                 " does not match shape " + to_string(shape_));
        }
    }

    [[nodiscard]] const Shape& shape() const { return shape_; }
    [[nodiscard]] std::size_t height() const { return shape_.height; }
    [[nodiscard]] std::size_t width() const { return shape_.width; }
    [[nodiscard]] std::size_t channels() const { return shape_.channels; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] bool empty() const { return values_.empty(); }

    double& at(std::size_t row, std::size_t col, std::size_t ch = 0) {
        return values_[(ch * shape_.height + row) * shape_.width + col];
    }
    [[nodiscard]] double at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
        return values_[(ch * shape_.height + row) * shape_.width + col];
    }

    std::span<double> plane(std::size_t ch) {
        return {values_.data() + ch * shape_.plane_size(), shape_.plane_size()};
    }
    [[nodiscard]] std::span<const double> plane(std::size_t ch) const {
        return {values_.data() + ch * shape_.plane_size(), shape_.plane_size()};
    }

    std::span<double> values() { return values_; }
    [[nodiscard]] std::span<const double> values() const { return values_; }

    /// Copies one channel out as a single-channel field.
    [[nodiscard]] BasicField channel(std::size_t ch) const {
        auto p = plane(ch);
        return BasicField(Shape{shape_.height, shape_.width, 1}, std::vector<double>(p.begin(), p.end()));
    }

    void set_channel(std::size_t ch, const BasicField& src) {
        if (src.channels() != 1 || src.height() != height() || src.width() != width()) {
            throw DimensionError("set_channel: source " + to_string(src.shape()) +
                                 " does not fit plane of " + to_string(shape_));
        }
        std::copy(src.values_.begin(), src.values_.end(), plane(ch).begin());
    }

    void clamp(double lo = 0.0, double hi = 1.0) {
        for (auto& v : values_) v = std::clamp(v, lo, hi);
    }

    BasicField& operator+=(const BasicField& o) {
        require_same(o, "+=");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    BasicField& operator-=(const BasicField& o) {
        require_same(o, "-=");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    BasicField& operator*=(double s) {
        for (auto& v : values_) v *= s;
        return *this;
    }

    friend BasicField operator+(BasicField a, const BasicField& b) { return a += b; }
    friend BasicField operator-(BasicField a, const BasicField& b) { return a -= b; }
    friend BasicField operator*(double s, BasicField a) { return a *= s; }

    friend bool operator==(const BasicField&, const BasicField&) = default;

    /// Same storage viewed under another tag.
    template <typename Other>
    [[nodiscard]] BasicField<Other> retag() const {
        return BasicField<Other>(shape_, values_);
    }

private:
    void require_same(const BasicField& o, const char* what) const {
        if (o.shape_ != shape_) {
            throw DimensionError(std::string("operator") + what + ": shape " + to_string(shape_) +
                                 " vs " + to_string(o.shape_));
        }
    }

    Shape shape_{};
    std::vector<double> values_;
};

using ImageBuffer = BasicField<ImageTag>;
using ScalarField = BasicField<ScalarTag>;

/// Forward differences along x (columns) and y (rows), one pair per pixel and channel.
struct GradientField {
    ScalarField dx;
    ScalarField dy;

    GradientField() = default;
    explicit GradientField(Shape shape) : dx(shape), dy(shape) {}
    GradientField(ScalarField x, ScalarField y) : dx(std::move(x)), dy(std::move(y)) {
        validate();
    }

    [[nodiscard]] const Shape& shape() const { return dx.shape(); }

    void validate() const {
        if (dx.shape() != dy.shape()) {
            throw DimensionError("gradient field components disagree: " + to_string(dx.shape()) +
                                 " vs " + to_string(dy.shape()));
        }
    }

    friend bool operator==(const GradientField&, const GradientField&) = default;
};

template <typename A, typename B>
double dot(const BasicField<A>& a, const BasicField<B>& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("dot: shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
    double s = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
    return s;
}

inline double dot(const GradientField& a, const GradientField& b) {
    return dot(a.dx, b.dx) + dot(a.dy, b.dy);
}

template <typename Tag>
double squared_norm(const BasicField<Tag>& a) {
    return dot(a, a);
}

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
    if (a != b) {
        throw DimensionError(std::string(what) + ": shape " + to_string(a) + " vs " + to_string(b));
    }
}

} // namespace reflect
