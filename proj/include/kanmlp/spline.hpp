#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kanmlp/numerics.hpp"

namespace kanmlp {

// Uniform B-spline knot grid over [range_min, range_max].
//
// The interior grid has grid_size cells of width epsilon; it is padded with
// `order` extra knots of the same spacing on each side so that all
// grid_size + order basis functions of degree `order` are complete on the
// interior. Inputs are clamped to [range_min, range_max] before evaluation.
class SplineGrid {
public:
    SplineGrid(std::size_t grid_size, std::size_t order, double range_min = -1.0,
               double range_max = 1.0);

    std::size_t grid_size() const noexcept { return grid_size_; }
    std::size_t order() const noexcept { return order_; }
    double range_min() const noexcept { return range_min_; }
    double range_max() const noexcept { return range_max_; }
    // Smallest knot spacing; on a uniform grid, the spacing itself.
    double epsilon() const noexcept { return epsilon_; }
    const std::vector<double>& knots() const noexcept { return knots_; }
    std::size_t basis_count() const noexcept { return grid_size_ + order_; }

    double clamp(double x) const noexcept;

    bool operator==(const SplineGrid&) const = default;

private:
    std::size_t grid_size_;
    std::size_t order_;
    double range_min_;
    double range_max_;
    double epsilon_;
    std::vector<double> knots_;
};

SplineGrid build_grid(std::size_t grid_size, std::size_t order, double range_min = -1.0,
                      double range_max = 1.0);

// Largest supported spline order; keeps local evaluation allocation-free.
inline constexpr std::size_t kMaxSplineOrder = 15;

// Writes the order + 1 basis values that can be nonzero at x into `values`
// and returns the basis index of the first one. When `derivatives` is
// non-empty it receives d/dx of each value (all zero if x was clamped).
// Throws InputError for NaN.
std::size_t local_basis(const SplineGrid& grid, double x, std::span<double> values,
                        std::span<double> derivatives = {});

// Dense row of basis_count values.
std::vector<double> basis_at(const SplineGrid& grid, double x);

// d/dx of basis_at (zero outside the clamping range).
std::vector<double> basis_derivative_at(const SplineGrid& grid, double x);

// [batch x input_dim x basis_count]
Tensor3 basis_matrix(const SplineGrid& grid, const Matrix& xs);

}  // namespace kanmlp
