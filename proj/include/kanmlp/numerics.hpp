#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace kanmlp {

// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    std::string shape_string() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Row-major 3-axis array, used for spline coefficients and basis evaluations.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t d0, std::size_t d1, std::size_t d2, double fill = 0.0);

    std::size_t dim0() const noexcept { return d0_; }
    std::size_t dim1() const noexcept { return d1_; }
    std::size_t dim2() const noexcept { return d2_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept {
        return data_[(i * d1_ + j) * d2_ + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return data_[(i * d1_ + j) * d2_ + k];
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    bool operator==(const Tensor3&) const = default;

private:
    std::size_t d0_ = 0;
    std::size_t d1_ = 0;
    std::size_t d2_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// xoshiro256++ (Blackman & Vigna), state seeded through splitmix64 so that any
// 64-bit seed yields a well-mixed nonzero state. Normals use Box-Muller; the
// second value of each pair is cached. No std:: distributions are used, so
// streams are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept;
    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, n). Unbiased (rejection sampling). n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept;
    double normal() noexcept;

    bool operator==(const Rng&) const = default;

private:
    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Independent stream for a named purpose (init, split, shuffle, ...) under one run seed.
Rng derive_rng(std::uint64_t seed, std::uint64_t stream);

std::vector<double> rng_normal(Rng& rng, std::size_t n, double mean, double stddev);

// Fisher-Yates driven by Rng::below.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

using ScalarFunction = std::function<double(std::span<const double>)>;

// Central differences, one coordinate at a time. Throws EvaluationError naming
// the coordinate if f is non-finite at either probe point.
std::vector<double> finite_difference_gradient(const ScalarFunction& f, std::span<const double> x,
                                               double h = 1e-5);

// ||a - b|| / max(||a||, ||b||), with the denominator floored at `floor` so that
// two vanishing gradients compare as equal.
double relative_error(std::span<const double> analytic, std::span<const double> numeric,
                      double floor = 1e-8);

bool all_finite(std::span<const double> values) noexcept;

}  // namespace kanmlp
