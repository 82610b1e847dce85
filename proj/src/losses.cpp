#include "kanmlp/losses.hpp"

#include <algorithm>
#include <cmath>

#include "kanmlp/error.hpp"

namespace kanmlp {

void validate_binary_labels(std::span<const int> labels) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw InputError("label " + std::to_string(labels[i]) + " at index " +
                             std::to_string(i) + " is not 0 or 1");
        }
    }
}

LossResult bce_loss(const Matrix& probabilities, std::span<const int> labels) {
    if (probabilities.cols() != 1 || probabilities.rows() != labels.size()) {
        throw ShapeError("bce_loss expects [" + std::to_string(labels.size()) +
                         "x1] probabilities, got " + probabilities.shape_string());
    }
    validate_binary_labels(labels);
    const std::size_t n = labels.size();
    LossResult r{0.0, Matrix(n, 1)};
    if (n == 0) return r;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t b = 0; b < n; ++b) {
        const double raw = probabilities(b, 0);
        const double p = std::clamp(raw, kProbabilityClamp, 1.0 - kProbabilityClamp);
        const bool inside = raw == p;
        if (labels[b] == 1) {
            r.loss -= std::log(p);
            r.gradient(b, 0) = inside ? -inv_n / p : 0.0;
        } else {
            r.loss -= std::log1p(-p);
            r.gradient(b, 0) = inside ? inv_n / (1.0 - p) : 0.0;
        }
    }
    r.loss *= inv_n;
    return r;
}

LossResult nll_softmax_loss(const Matrix& probabilities, std::span<const int> labels) {
    if (probabilities.cols() != 2 || probabilities.rows() != labels.size()) {
        throw ShapeError("nll_softmax_loss expects [" + std::to_string(labels.size()) +
                         "x2] probabilities, got " + probabilities.shape_string());
    }
    validate_binary_labels(labels);
    const std::size_t n = labels.size();
    LossResult r{0.0, Matrix(n, 2)};
    if (n == 0) return r;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t b = 0; b < n; ++b) {
        const auto y = static_cast<std::size_t>(labels[b]);
        const double p = std::clamp(probabilities(b, y), kProbabilityClamp, 1.0 - kProbabilityClamp);
        r.loss -= std::log(p);
        for (std::size_t c = 0; c < 2; ++c) {
            r.gradient(b, c) = (probabilities(b, c) - (c == y ? 1.0 : 0.0)) * inv_n;
        }
    }
    r.loss *= inv_n;
    return r;
}

}  // namespace kanmlp
