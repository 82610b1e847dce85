#pragma once

#include <cstddef>
#include <vector>

#include "kanmlp/numerics.hpp"
#include "kanmlp/spline.hpp"

namespace kanmlp {

enum class Mode { Train, Eval };

// ---- activations -------------------------------------------------------------

Matrix silu(const Matrix& x);
Matrix sigmoid(const Matrix& x);
Matrix relu(const Matrix& x);
// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& x);

double silu(double x) noexcept;
double silu_derivative(double x) noexcept;
double sigmoid(double x) noexcept;

// Backward passes take the forward input (or output, for sigmoid/softmax) and
// the upstream gradient, and return the gradient at the forward input.
Matrix silu_backward(const Matrix& x, const Matrix& upstream);
Matrix relu_backward(const Matrix& x, const Matrix& upstream);
Matrix sigmoid_backward(const Matrix& output, const Matrix& upstream);
Matrix softmax_rows_backward(const Matrix& output, const Matrix& upstream);

// ---- dense -------------------------------------------------------------------

// y = x W^T + b, with W stored [out x in].
struct DenseLayer {
    Matrix weight;
    std::vector<double> bias;

    DenseLayer() = default;
    DenseLayer(std::size_t in_dim, std::size_t out_dim);
    std::size_t in_dim() const noexcept { return weight.cols(); }
    std::size_t out_dim() const noexcept { return weight.rows(); }
};

struct DenseGradients {
    Matrix weight;
    std::vector<double> bias;
    Matrix input;
};

// Kaiming-uniform weights and biases, bound sqrt(6 / fan_in) and 1 / sqrt(fan_in).
void init_dense(DenseLayer& layer, Rng& rng);

Matrix dense_forward(const DenseLayer& layer, const Matrix& x);
DenseGradients dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& upstream);

// ---- KANLinear ---------------------------------------------------------------

// out[b,o] = sum_i base_weight[o,i] * silu(x[b,i])
//          + sum_i sum_j spline_weight[o,i,j] * B_j(x[b,i])
struct KanLinearLayer {
    SplineGrid grid;
    Matrix base_weight;    // [out x in]
    Tensor3 spline_weight; // [out x in x basis_count]

    KanLinearLayer(std::size_t in_dim, std::size_t out_dim, SplineGrid grid);
    std::size_t in_dim() const noexcept { return base_weight.cols(); }
    std::size_t out_dim() const noexcept { return base_weight.rows(); }
};

struct KanGradients {
    Matrix base_weight;
    Tensor3 spline_weight;
    Matrix input;
};

// Base weights Kaiming-uniform by fan-in; spline weights ~ N(0, 0.1 / sqrt(basis_count)).
void init_kan(KanLinearLayer& layer, Rng& rng);

Matrix kan_forward(const KanLinearLayer& layer, const Matrix& x);
KanGradients kan_backward(const KanLinearLayer& layer, const Matrix& x, const Matrix& upstream);

// ---- batch normalization -----------------------------------------------------

struct BatchNormLayer {
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;
    double stability_eps = 1e-5;

    BatchNormLayer() = default;
    explicit BatchNormLayer(std::size_t features, double momentum = 0.1,
                            double stability_eps = 1e-5);
    std::size_t features() const noexcept { return gamma.size(); }
};

// Saved by the train-mode forward pass for the backward pass.
struct BatchNormCache {
    Matrix normalized;
    std::vector<double> inv_std;
};

struct BatchNormGradients {
    std::vector<double> gamma;
    std::vector<double> beta;
    Matrix input;
};

// Train mode normalizes with the biased batch variance and folds the batch mean
// and unbiased variance into the running statistics; requires batch >= 2.
// Eval mode uses the running statistics and leaves the layer untouched.
Matrix batchnorm_forward(BatchNormLayer& layer, const Matrix& x, Mode mode,
                         BatchNormCache* cache = nullptr);
BatchNormGradients batchnorm_backward(const BatchNormLayer& layer, const BatchNormCache& cache,
                                      const Matrix& upstream);

// ---- dropout -----------------------------------------------------------------

struct DropoutLayer {
    double rate = 0.5;

    DropoutLayer() = default;
    explicit DropoutLayer(double rate);
};

struct DropoutResult {
    Matrix output;
    // Per-entry multiplier applied to the input: 0 or 1 / (1 - rate).
    Matrix mask;
};

// Inverted dropout. Eval mode (or rate 0) is the identity and draws nothing from rng.
DropoutResult dropout_forward(const DropoutLayer& layer, const Matrix& x, Rng& rng, Mode mode);
Matrix dropout_backward(const Matrix& mask, const Matrix& upstream);

}  // namespace kanmlp
