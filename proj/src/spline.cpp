#include "kanmlp/spline.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "kanmlp/error.hpp"

namespace kanmlp {

SplineGrid::SplineGrid(std::size_t grid_size, std::size_t order, double range_min, double range_max)
    : grid_size_(grid_size), order_(order), range_min_(range_min), range_max_(range_max) {
    if (grid_size == 0) throw InputError("spline grid_size must be at least 1");
    if (order > kMaxSplineOrder) {
        throw InputError("spline order " + std::to_string(order) + " exceeds the supported maximum " +
                         std::to_string(kMaxSplineOrder));
    }
    if (!std::isfinite(range_min) || !std::isfinite(range_max) || !(range_min < range_max)) {
        throw InputError("spline range must satisfy range_min < range_max");
    }
    epsilon_ = (range_max - range_min) / static_cast<double>(grid_size);

    const std::size_t k = order;
    knots_.resize(grid_size + 2 * k + 1);
    for (std::size_t i = 0; i <= grid_size; ++i) {
        knots_[k + i] = range_min + (range_max - range_min) * static_cast<double>(i) /
                                        static_cast<double>(grid_size);
    }
    knots_[k + grid_size] = range_max;
    for (std::size_t p = 1; p <= k; ++p) {
        knots_[k - p] = range_min - static_cast<double>(p) * epsilon_;
        knots_[k + grid_size + p] = range_max + static_cast<double>(p) * epsilon_;
    }
}

double SplineGrid::clamp(double x) const noexcept { return std::clamp(x, range_min_, range_max_); }

SplineGrid build_grid(std::size_t grid_size, std::size_t order, double range_min, double range_max) {
    return SplineGrid(grid_size, order, range_min, range_max);
}

std::size_t local_basis(const SplineGrid& grid, double x, std::span<double> values,
                        std::span<double> derivatives) {
    if (std::isnan(x)) throw InputError("spline input is NaN");
    const std::size_t k = grid.order();
    const std::size_t g = grid.grid_size();
    const auto& t = grid.knots();
    if (values.size() != k + 1 || (!derivatives.empty() && derivatives.size() != k + 1)) {
        throw ShapeError("local_basis buffers must hold order + 1 values");
    }

    const bool clamped = x < grid.range_min() || x > grid.range_max();
    const double u = grid.clamp(x);

    // Knot span m with t[m] <= u < t[m+1], restricted to the interior cells.
    // The right boundary falls into the last cell (left-continuity there).
    const double cell = std::floor((u - grid.range_min()) / grid.epsilon());
    std::size_t m = k + static_cast<std::size_t>(std::clamp(cell, 0.0, static_cast<double>(g - 1)));
    while (m > k && u < t[m]) --m;
    while (m + 1 < k + g && u >= t[m + 1]) ++m;

    std::array<double, kMaxSplineOrder + 1> left{};
    std::array<double, kMaxSplineOrder + 1> right{};
    std::array<double, kMaxSplineOrder + 1> lower{};  // degree k - 1 values
    values[0] = 1.0;
    for (std::size_t j = 1; j <= k; ++j) {
        if (j == k) std::copy_n(values.begin(), k, lower.begin());
        left[j] = u - t[m + 1 - j];
        right[j] = t[m + j] - u;
        double saved = 0.0;
        for (std::size_t r = 0; r < j; ++r) {
            const double temp = values[r] / (right[r + 1] + left[j - r]);
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }

    if (!derivatives.empty()) {
        std::fill(derivatives.begin(), derivatives.end(), 0.0);
        if (k > 0 && !clamped) {
            const double p = static_cast<double>(k);
            for (std::size_t r = 0; r <= k; ++r) {
                const std::size_t j = m - k + r;
                double d = 0.0;
                if (r >= 1) d += lower[r - 1] / (t[j + k] - t[j]);
                if (r + 1 <= k) d -= lower[r] / (t[j + k + 1] - t[j + 1]);
                derivatives[r] = p * d;
            }
        }
    }
    return m - k;
}

std::vector<double> basis_at(const SplineGrid& grid, double x) {
    std::array<double, kMaxSplineOrder + 1> local{};
    const std::size_t n = grid.order() + 1;
    const std::size_t first = local_basis(grid, x, std::span(local.data(), n));
    std::vector<double> row(grid.basis_count(), 0.0);
    std::copy_n(local.begin(), n, row.begin() + static_cast<std::ptrdiff_t>(first));
    return row;
}

std::vector<double> basis_derivative_at(const SplineGrid& grid, double x) {
    std::array<double, kMaxSplineOrder + 1> local{};
    std::array<double, kMaxSplineOrder + 1> deriv{};
    const std::size_t n = grid.order() + 1;
    const std::size_t first =
        local_basis(grid, x, std::span(local.data(), n), std::span(deriv.data(), n));
    std::vector<double> row(grid.basis_count(), 0.0);
    std::copy_n(deriv.begin(), n, row.begin() + static_cast<std::ptrdiff_t>(first));
    return row;
}

Tensor3 basis_matrix(const SplineGrid& grid, const Matrix& xs) {
    Tensor3 out(xs.rows(), xs.cols(), grid.basis_count());
    std::array<double, kMaxSplineOrder + 1> local{};
    const std::size_t n = grid.order() + 1;
    for (std::size_t r = 0; r < xs.rows(); ++r) {
        for (std::size_t c = 0; c < xs.cols(); ++c) {
            std::size_t first = 0;
            try {
                first = local_basis(grid, xs(r, c), std::span(local.data(), n));
            } catch (const InputError& e) {
                throw InputError(std::string(e.what()) + " at (" + std::to_string(r) + ", " +
                                 std::to_string(c) + ")");
            }
            for (std::size_t q = 0; q < n; ++q) out(r, c, first + q) = local[q];
        }
    }
    return out;
}

}  // namespace kanmlp
