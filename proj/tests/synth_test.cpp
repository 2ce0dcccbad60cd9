#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "reflect/synth.hpp"
#include "test_support.hpp"

using namespace reflect;
using reflect::testing::random_image;

TEST(GaussianKernel, NormalisedAndSymmetric) {
    const auto k = gaussian_kernel(3.0, 9);
    ASSERT_EQ(k.size(), 19u);
    double sum = 0.0;
    for (double v : k) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-15);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(k[i], k[18 - i]);
    EXPECT_NEAR(k[10] / k[9], std::exp(-0.5 / 9.0), 1e-15);
    EXPECT_THROW(gaussian_kernel(0.0, 3), ParameterError);
}

TEST(GaussianBlur, MatchesDirectConvolution) {
    std::mt19937_64 rng(91);
    const auto img = random_image(Shape{11, 13, 2}, rng);
    const double sigma = 1.7;
    const long r = 5;
    const auto out = gaussian_blur(img, sigma, static_cast<std::size_t>(r));
    const long h = 11, w = 13;
    for (std::size_t c = 0; c < 2; ++c) {
        for (long i = 0; i < h; ++i) {
            for (long j = 0; j < w; ++j) {
                double acc = 0.0, norm = 0.0;
                for (long a = -r; a <= r; ++a) {
                    for (long b = -r; b <= r; ++b) {
                        const double wgt = std::exp(-(a * a + b * b) / (2 * sigma * sigma));
                        const auto ii = static_cast<std::size_t>(std::clamp(i + a, 0L, h - 1));
                        const auto jj = static_cast<std::size_t>(std::clamp(j + b, 0L, w - 1));
                        acc += wgt * img.at(ii, jj, c);
                        norm += wgt;
                    }
                }
                EXPECT_NEAR(out.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j), c), acc / norm, 1e-10);
            }
        }
    }
}

TEST(ComposeScene, FullTransmissionWeightReturnsT) {
    std::mt19937_64 rng(92);
    const auto t = random_image(Shape{10, 10, 3}, rng);
    const auto r = random_image(Shape{10, 10, 3}, rng);
    SyntheticSceneParams p;
    p.w = 1.0;
    EXPECT_EQ(compose_scene(t, r, p), t);
}

TEST(ComposeScene, ZeroWeightWithConstantReflection) {
    std::mt19937_64 rng(93);
    const auto t = random_image(Shape{10, 12, 1}, rng);
    const ImageBuffer r(t.shape(), 0.6);
    SyntheticSceneParams p;
    p.w = 0.0;
    const auto y = compose_scene(t, r, p);
    for (double v : y.values()) EXPECT_NEAR(v, 0.6, 1e-15);
}

TEST(ComposeScene, MixesLinearly) {
    std::mt19937_64 rng(94);
    const auto t = random_image(Shape{9, 9, 1}, rng);
    const ImageBuffer r(t.shape(), 0.5);
    const auto y = compose_scene(t, r, SyntheticSceneParams{});
    for (std::size_t k = 0; k < y.size(); ++k) EXPECT_NEAR(y.values()[k], 0.8 * t.values()[k] + 0.1, 1e-14);
}

TEST(ComposeScene, RejectsBadParameters) {
    const ImageBuffer t(Shape{4, 4, 1});
    SyntheticSceneParams p;
    p.w = 1.5;
    EXPECT_THROW(compose_scene(t, t, p), ParameterError);
    p.w = 0.5;
    p.blur_sigma = 0.0;
    EXPECT_THROW(compose_scene(t, t, p), ParameterError);
    EXPECT_THROW(compose_scene(t, ImageBuffer(Shape{4, 5, 1}), SyntheticSceneParams{}), DimensionError);
}

TEST(Generators, SeededAndInRange) {
    const Shape s{32, 40, 3};
    EXPECT_EQ(make_piecewise_constant(s, 7), make_piecewise_constant(s, 7));
    EXPECT_NE(make_piecewise_constant(s, 7), make_piecewise_constant(s, 8));
    const auto t = make_piecewise_constant(s, 7);
    for (double v : t.values()) {
        EXPECT_GE(v, 0.15);
        EXPECT_LE(v, 0.85);
    }
    const auto r = make_blob_reflection(s, 7);
    EXPECT_GT(*std::max_element(r.values().begin(), r.values().end()), 0.5);
    EXPECT_EQ(*std::min_element(r.values().begin(), r.values().end()), 0.0);
}

TEST(ComposeScene, DefaultSceneMatchesDirectConvolution) {
    // w = 0.8, sigma = 3, radius ceil(3 sigma) = 9.
    const auto t = make_piecewise_constant(Shape{24, 20, 1}, 3);
    const auto r = make_blob_reflection(t.shape(), 3);
    const auto y = compose_scene(t, r, SyntheticSceneParams{});
    const long h = 24, w = 20, rad = 9;
    for (long i = 0; i < h; ++i) {
        for (long j = 0; j < w; ++j) {
            double acc = 0.0, norm = 0.0;
            for (long a = -rad; a <= rad; ++a) {
                for (long b = -rad; b <= rad; ++b) {
                    const double wgt = std::exp(-(a * a + b * b) / 18.0);
                    acc += wgt * r.at(static_cast<std::size_t>(std::clamp(i + a, 0L, h - 1)),
                                      static_cast<std::size_t>(std::clamp(j + b, 0L, w - 1)));
                    norm += wgt;
                }
            }
            const auto ii = static_cast<std::size_t>(i);
            const auto jj = static_cast<std::size_t>(j);
            const double expect = std::clamp(0.8 * t.at(ii, jj) + 0.2 * acc / norm, 0.0, 1.0);
            EXPECT_NEAR(y.at(ii, jj), expect, 1e-10);
        }
    }
}
