#pragma once

#include <span>
#include <vector>

#include "kanmlp/numerics.hpp"

namespace kanmlp {

// Probabilities are clamped to [kProbabilityClamp, 1 - kProbabilityClamp] before the log.
inline constexpr double kProbabilityClamp = 1e-7;

struct LossResult {
    double loss = 0.0;
    Matrix gradient;
};

// Mean binary cross-entropy over a [batch x 1] column of probabilities.
// gradient is dL/dp; it is zero wherever p was clamped.
LossResult bce_loss(const Matrix& probabilities, std::span<const int> labels);

// Mean negative log-likelihood of a [batch x 2] softmax output.
// gradient is dL/dlogits = (probabilities - onehot(y)) / batch.
LossResult nll_softmax_loss(const Matrix& probabilities, std::span<const int> labels);

// Throws InputError unless every label is 0 or 1.
void validate_binary_labels(std::span<const int> labels);

}  // namespace kanmlp
