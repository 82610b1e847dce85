#include <gtest/gtest.h>

#include <cmath>

#include "kanmlp/error.hpp"
#include "kanmlp/layers.hpp"

using namespace kanmlp;

namespace {

Matrix random(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (double& v : m.values()) v = rng.uniform(lo, hi);
    return m;
}

double cox_de_boor(const std::vector<double>& t, std::size_t j, std::size_t p, double x) {
    if (p == 0) return (t[j] <= x && x < t[j + 1]) ? 1.0 : 0.0;
    double out = 0.0;
    if (t[j + p] > t[j]) out += (x - t[j]) / (t[j + p] - t[j]) * cox_de_boor(t, j, p - 1, x);
    if (t[j + p + 1] > t[j + 1]) {
        out += (t[j + p + 1] - x) / (t[j + p + 1] - t[j + 1]) * cox_de_boor(t, j + 1, p - 1, x);
    }
    return out;
}

}  // namespace

TEST(Activations, KnownValues) {
    EXPECT_EQ(silu(0.0), 0.0);
    EXPECT_NEAR(silu(1.0), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
    EXPECT_NEAR(silu(-2.0), -2.0 / (1.0 + std::exp(2.0)), 1e-15);
    EXPECT_EQ(sigmoid(0.0), 0.5);
    EXPECT_EQ(sigmoid(-1000.0), 0.0);
    EXPECT_EQ(sigmoid(1000.0), 1.0);
    EXPECT_TRUE(std::isfinite(silu(-1000.0)));
    EXPECT_NEAR(silu_derivative(0.0), 0.5, 1e-15);
}

TEST(Activations, SoftmaxRowsStable) {
    const Matrix z{{1000.0, 1001.0}, {-5.0, -5.0}, {0.0, 3.0}};
    const Matrix p = softmax_rows(z);
    for (std::size_t r = 0; r < p.rows(); ++r) EXPECT_NEAR(p(r, 0) + p(r, 1), 1.0, 1e-15);
    EXPECT_NEAR(p(0, 1), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
    EXPECT_EQ(p(1, 0), 0.5);
}

TEST(Activations, ReluAndBackward) {
    const Matrix x{{-1.0, 2.0}};
    EXPECT_EQ(relu(x), (Matrix{{0.0, 2.0}}));
    EXPECT_EQ(relu_backward(x, Matrix{{5.0, 7.0}}), (Matrix{{0.0, 7.0}}));
}

TEST(Dense, MatchesLoopOracle) {
    Rng rng(1);
    DenseLayer layer(5, 3);
    init_dense(layer, rng);
    const Matrix x = random(rng, 4, 5);
    const Matrix y = dense_forward(layer, x);
    for (std::size_t b = 0; b < 4; ++b)
        for (std::size_t o = 0; o < 3; ++o) {
            double s = layer.bias[o];
            for (std::size_t i = 0; i < 5; ++i) s += layer.weight(o, i) * x(b, i);
            EXPECT_NEAR(y(b, o), s, 1e-14);
        }
    EXPECT_THROW(dense_forward(layer, Matrix(2, 4)), ShapeError);
}

TEST(Dense, InitBounds) {
    Rng rng(2);
    DenseLayer layer(64, 32);
    init_dense(layer, rng);
    const double bound = std::sqrt(6.0 / 64.0);
    double max_abs = 0.0;
    for (double w : layer.weight.values()) max_abs = std::max(max_abs, std::abs(w));
    EXPECT_LE(max_abs, bound);
    EXPECT_GT(max_abs, 0.9 * bound);
    for (double b : layer.bias) EXPECT_LE(std::abs(b), 1.0 / 8.0);
}

TEST(KanLinear, MatchesLoopOracle) {
    Rng rng(3);
    KanLinearLayer layer(6, 4, build_grid(10, 3));
    init_kan(layer, rng);
    for (double& w : layer.spline_weight.values()) w = rng.normal();
    // Includes out-of-range inputs, which clamp.
    const Matrix x = random(rng, 5, 6, -1.3, 1.3);
    const Matrix y = kan_forward(layer, x);
    const auto& t = layer.grid.knots();
    for (std::size_t b = 0; b < 5; ++b)
        for (std::size_t o = 0; o < 4; ++o) {
            double s = 0.0;
            for (std::size_t i = 0; i < 6; ++i) {
                const double v = x(b, i);
                s += layer.base_weight(o, i) * v / (1.0 + std::exp(-v));
                const double u = std::clamp(v, -1.0, 1.0);
                for (std::size_t j = 0; j < 13; ++j) {
                    s += layer.spline_weight(o, i, j) * cox_de_boor(t, j, 3, u);
                }
            }
            EXPECT_NEAR(y(b, o), s, 1e-12);
        }
}

TEST(KanLinear, ZeroSplineIsSiluLinear) {
    Rng rng(4);
    KanLinearLayer layer(3, 2, build_grid(10, 3));
    init_kan(layer, rng);
    for (double& w : layer.spline_weight.values()) w = 0.0;
    const Matrix x = random(rng, 4, 3);
    const Matrix want = matmul(silu(x), transpose(layer.base_weight));
    const Matrix got = kan_forward(layer, x);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.values()[i], want.values()[i], 1e-14);
}

TEST(KanLinear, InitStatistics) {
    Rng rng(5);
    KanLinearLayer layer(128, 64, build_grid(10, 3));
    init_kan(layer, rng);
    const auto w = layer.spline_weight.values();
    double sq = 0.0;
    for (double v : w) sq += v * v;
    EXPECT_NEAR(std::sqrt(sq / w.size()), 0.1 / std::sqrt(13.0), 0.001);
}

TEST(BatchNorm, TrainNormalizesAndUpdatesRunningStats) {
    Rng rng(6);
    BatchNormLayer bn(3);
    Matrix x = random(rng, 8, 3, -2.0, 5.0);
    BatchNormCache cache;
    const Matrix y = batchnorm_forward(bn, x, Mode::Train, &cache);
    for (std::size_t f = 0; f < 3; ++f) {
        double mean = 0.0, var = 0.0, ymean = 0.0, yvar = 0.0;
        for (std::size_t b = 0; b < 8; ++b) {
            mean += x(b, f) / 8.0;
            ymean += y(b, f) / 8.0;
        }
        for (std::size_t b = 0; b < 8; ++b) {
            var += (x(b, f) - mean) * (x(b, f) - mean);
            yvar += (y(b, f) - ymean) * (y(b, f) - ymean) / 8.0;
        }
        EXPECT_NEAR(ymean, 0.0, 1e-12);
        EXPECT_NEAR(yvar, (var / 8.0) / (var / 8.0 + 1e-5), 1e-9);
        EXPECT_NEAR(bn.running_mean[f], 0.1 * mean, 1e-12);
        EXPECT_NEAR(bn.running_var[f], 0.9 + 0.1 * var / 7.0, 1e-12);
    }
}

TEST(BatchNorm, EvalUsesRunningStatsAndIsPure) {
    BatchNormLayer bn(2);
    bn.running_mean = {1.0, -2.0};
    bn.running_var = {4.0, 0.25};
    bn.gamma = {2.0, 1.0};
    bn.beta = {0.5, 0.0};
    const BatchNormLayer before = bn;
    const Matrix y = batchnorm_forward(bn, Matrix{{3.0, -1.0}}, Mode::Eval);
    EXPECT_NEAR(y(0, 0), 2.0 * (3.0 - 1.0) / std::sqrt(4.0 + 1e-5) + 0.5, 1e-12);
    EXPECT_NEAR(y(0, 1), (-1.0 + 2.0) / std::sqrt(0.25 + 1e-5), 1e-12);
    EXPECT_EQ(bn.running_mean, before.running_mean);
    EXPECT_EQ(bn.running_var, before.running_var);
}

TEST(BatchNorm, TrainNeedsTwoRows) {
    BatchNormLayer bn(2);
    EXPECT_THROW(batchnorm_forward(bn, Matrix(1, 2), Mode::Train), InputError);
    EXPECT_NO_THROW(batchnorm_forward(bn, Matrix(1, 2), Mode::Eval));
}

TEST(Dropout, EvalIsIdentityAndConsumesNothing) {
    Rng rng(7);
    const Rng before = rng;
    const Matrix x{{1.0, 2.0}, {3.0, 4.0}};
    const auto out = dropout_forward(DropoutLayer(0.5), x, rng, Mode::Eval);
    EXPECT_EQ(out.output, x);
    EXPECT_TRUE(rng == before);
}

TEST(Dropout, TrainMaskIsInverted) {
    Rng rng(8);
    const Matrix x(200, 50, 1.0);
    const auto out = dropout_forward(DropoutLayer(0.5), x, rng, Mode::Train);
    std::size_t kept = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double m = out.mask.values()[i];
        EXPECT_TRUE(m == 0.0 || m == 2.0);
        EXPECT_EQ(out.output.values()[i], m);
        kept += m != 0.0;
        sum += out.output.values()[i];
    }
    EXPECT_NEAR(static_cast<double>(kept) / x.size(), 0.5, 0.03);
    EXPECT_NEAR(sum / x.size(), 1.0, 0.06);
    EXPECT_EQ(dropout_backward(out.mask, x), out.output);
}

TEST(Dropout, RateValidated) {
    EXPECT_THROW(DropoutLayer(1.0), InputError);
    EXPECT_THROW(DropoutLayer(-0.1), InputError);
    EXPECT_NO_THROW(DropoutLayer(0.0));
}
