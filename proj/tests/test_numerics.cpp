#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "kanmlp/error.hpp"
#include "kanmlp/numerics.hpp"

using namespace kanmlp;

namespace {

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

Matrix random(Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& v : m.values()) v = rng.uniform(-2.0, 2.0);
    return m;
}

}  // namespace

TEST(Matrix, IdentityIsNeutral) {
    const Matrix m{{1, 2, 3}, {4, 5, 6}};
    EXPECT_EQ(matmul(m, Matrix::identity(3)), m);
    EXPECT_EQ(matmul(Matrix::identity(2), m), m);
}

TEST(Matrix, KnownProduct) {
    const Matrix a{{1, 2}, {3, 4}};
    const Matrix b{{5, 6}, {7, 8}};
    EXPECT_EQ(matmul(a, b), (Matrix{{19, 22}, {43, 50}}));
}

TEST(Matrix, MatchesNaiveTripleLoop) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + rng.below(9), k = 1 + rng.below(9), m = 1 + rng.below(9);
        const Matrix a = random(rng, n, k);
        const Matrix b = random(rng, k, m);
        const Matrix got = matmul(a, b);
        const Matrix want = naive_matmul(a, b);
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_NEAR(got.values()[i], want.values()[i], 1e-12);
        }
    }
}

TEST(Matrix, ShapeMismatchNamesBothShapes) {
    try {
        matmul(Matrix(2, 3), Matrix(4, 5));
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("4x5"), std::string::npos) << msg;
    }
}

TEST(Matrix, TransposeTwiceIsIdentity) {
    Rng rng(3);
    const Matrix a = random(rng, 4, 7);
    const Matrix t = transpose(a);
    EXPECT_EQ(t.rows(), 7u);
    EXPECT_EQ(t(6, 3), a(3, 6));
    EXPECT_EQ(transpose(t), a);
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        differs = differs || x != c.next_u64();
    }
    EXPECT_TRUE(differs);
}

TEST(Rng, ZeroSeedIsUsable) {
    Rng r(0);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 64; ++i) seen.insert(r.next_u64());
    EXPECT_EQ(seen.size(), 64u);
}

TEST(Rng, UniformMoments) {
    Rng r(5);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
        sq += u * u;
    }
    EXPECT_NEAR(sum / n, 0.5, 0.005);
    EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 0.002);
}

TEST(Rng, BelowIsUniform) {
    Rng r(9);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const auto v = r.below(7);
        ASSERT_LT(v, 7u);
        ++counts[v];
    }
    // Chi-square with 6 degrees of freedom; 22.5 is the 0.999 quantile.
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
    EXPECT_LT(chi2, 22.5);
}

TEST(Rng, NormalMoments) {
    Rng r(17);
    const auto xs = rng_normal(r, 200000, 2.0, 3.0);
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= xs.size() - 1;
    EXPECT_NEAR(mean, 2.0, 0.03);
    EXPECT_NEAR(std::sqrt(var), 3.0, 0.03);
}

TEST(Rng, DerivedStreamsDiffer) {
    Rng a = derive_rng(7, 1);
    Rng b = derive_rng(7, 2);
    Rng a2 = derive_rng(7, 1);
    EXPECT_NE(a.next_u64(), b.next_u64());
    EXPECT_EQ(derive_rng(7, 1).next_u64(), a2.next_u64());
}

TEST(Rng, ShuffleIsPermutationAndDeterministic) {
    std::vector<int> a(50), b(50);
    std::iota(a.begin(), a.end(), 0);
    b = a;
    Rng r1(4), r2(4);
    shuffle(std::span(a), r1);
    shuffle(std::span(b), r2);
    EXPECT_EQ(a, b);
    std::vector<int> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
    EXPECT_NE(a, sorted);
}

TEST(FiniteDifference, QuadraticIsExact) {
    // f(x) = sum c_i x_i^2 has gradient 2 c_i x_i; central differences are exact up to rounding.
    const std::vector<double> c{1.0, -2.0, 0.5};
    const ScalarFunction f = [&](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += c[i] * x[i] * x[i];
        return s;
    };
    const std::vector<double> x{0.3, -1.2, 2.0};
    const auto g = finite_difference_gradient(f, x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(g[i], 2.0 * c[i] * x[i], 1e-9);
}

TEST(FiniteDifference, NonFiniteNamesCoordinate) {
    const ScalarFunction f = [](std::span<const double> x) { return std::log(x[1]); };
    const std::vector<double> x{1.0, 1e-6};
    try {
        finite_difference_gradient(f, x);
        FAIL() << "expected EvaluationError";
    } catch (const EvaluationError& e) {
        EXPECT_EQ(e.index(), 1u);
    }
}

TEST(RelativeError, ScaleFreeAndFloored) {
    const std::vector<double> a{1.0, 2.0}, b{1.0, 2.0};
    EXPECT_EQ(relative_error(a, b), 0.0);
    const std::vector<double> c{1e6, 0.0}, d{1e6 + 1.0, 0.0};
    EXPECT_NEAR(relative_error(c, d), 1.0 / (1e6 + 1.0), 1e-15);
    const std::vector<double> z{0.0}, tiny{1e-12};
    EXPECT_LT(relative_error(z, tiny), 1e-3);
}
