#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace reflect {

struct AdamSettings {
    double step = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Full-batch ADAM with bias-corrected moments.
class Adam {
public:
    Adam(std::size_t n, AdamSettings settings) : s_(settings), m_(n, 0.0), v_(n, 0.0) {}

    void reset() {
        std::fill(m_.begin(), m_.end(), 0.0);
        std::fill(v_.begin(), v_.end(), 0.0);
        t_ = 0;
        b1_pow_ = 1.0;
        b2_pow_ = 1.0;
    }

    /// x <- x - step * m_hat / (sqrt(v_hat) + eps)
    void step(std::span<double> x, std::span<const double> grad) {
        ++t_;
        b1_pow_ *= s_.beta1;
        b2_pow_ *= s_.beta2;
        const double c1 = 1.0 - b1_pow_;
        const double c2 = 1.0 - b2_pow_;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double g = grad[i];
            m_[i] = s_.beta1 * m_[i] + (1.0 - s_.beta1) * g;
            v_[i] = s_.beta2 * v_[i] + (1.0 - s_.beta2) * g * g;
            const double m_hat = m_[i] / c1;
            const double v_hat = v_[i] / c2;
            x[i] -= s_.step * m_hat / (std::sqrt(v_hat) + s_.epsilon);
        }
    }

    [[nodiscard]] std::size_t iterations() const { return t_; }

private:
    AdamSettings s_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t t_ = 0;
    double b1_pow_ = 1.0;
    double b2_pow_ = 1.0;
};

} // namespace reflect
