#include "kanmlp/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "kanmlp/layers.hpp"
#include "kanmlp/losses.hpp"
#include "kanmlp/models.hpp"

namespace kanmlp {

double compare_gradient(std::span<double> block, const std::function<double()>& objective,
                        std::span<const double> analytic, double step) {
    const std::vector<double> original(block.begin(), block.end());
    const ScalarFunction f = [&](std::span<const double> xs) {
        std::copy(xs.begin(), xs.end(), block.begin());
        return objective();
    };
    const auto numeric = finite_difference_gradient(f, original, step);
    std::copy(original.begin(), original.end(), block.begin());
    return relative_error(analytic, numeric);
}

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
    Matrix m(rows, cols);
    for (double& v : m.values()) v = rng.uniform(lo, hi);
    return m;
}

Matrix normal_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    return Matrix(rows, cols, rng_normal(rng, rows * cols, 0.0, 1.0));
}

// sum(upstream .* y), whose gradient with respect to y is upstream.
double weighted_sum(const Matrix& y, const Matrix& upstream) {
    double s = 0.0;
    const auto a = y.values();
    const auto b = upstream.values();
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Keeps |x| away from the ReLU kink so central differences never straddle it.
Matrix away_from_zero(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix m = random_matrix(rng, rows, cols, 0.05, 2.0);
    for (double& v : m.values()) {
        if (rng.uniform() < 0.5) v = -v;
    }
    return m;
}

double activation_check(Rng& rng, double h, Matrix (*forward)(const Matrix&),
                        Matrix (*backward)(const Matrix&, const Matrix&), bool backward_takes_output,
                        bool avoid_zero) {
    const std::size_t rows = 3 + rng.below(4);
    const std::size_t cols = 2 + rng.below(5);
    Matrix x = avoid_zero ? away_from_zero(rng, rows, cols) : normal_matrix(rng, rows, cols);
    const Matrix up = normal_matrix(rng, rows, cols);
    const Matrix grad = backward(backward_takes_output ? forward(x) : x, up);
    return compare_gradient(
        x.values(), [&] { return weighted_sum(forward(x), up); }, grad.values(), h);
}

double dense_check(Rng& rng, double h) {
    DenseLayer layer(2 + rng.below(6), 1 + rng.below(5));
    init_dense(layer, rng);
    Matrix x = normal_matrix(rng, 2 + rng.below(5), layer.in_dim());
    const Matrix up = normal_matrix(rng, x.rows(), layer.out_dim());
    const auto g = dense_backward(layer, x, up);
    const auto objective = [&] { return weighted_sum(dense_forward(layer, x), up); };
    return std::max({compare_gradient(layer.weight.values(), objective, g.weight.values(), h),
                     compare_gradient(layer.bias, objective, g.bias, h),
                     compare_gradient(x.values(), objective, g.input.values(), h)});
}

double kan_check(Rng& rng, double h) {
    const std::size_t grid_size = 3 + rng.below(10);
    const std::size_t order = 1 + rng.below(4);
    KanLinearLayer layer(2 + rng.below(5), 1 + rng.below(4), build_grid(grid_size, order));
    init_kan(layer, rng);
    // Larger spline weights than the initializer so the spline path dominates.
    for (double& w : layer.spline_weight.values()) w = rng.normal();
    Matrix x = random_matrix(rng, 2 + rng.below(5), layer.in_dim(), -0.98, 0.98);
    const Matrix up = normal_matrix(rng, x.rows(), layer.out_dim());
    const auto g = kan_backward(layer, x, up);
    const auto objective = [&] { return weighted_sum(kan_forward(layer, x), up); };
    return std::max(
        {compare_gradient(layer.base_weight.values(), objective, g.base_weight.values(), h),
         compare_gradient(layer.spline_weight.values(), objective, g.spline_weight.values(), h),
         compare_gradient(x.values(), objective, g.input.values(), h)});
}

double batchnorm_check(Rng& rng, double h) {
    BatchNormLayer layer(1 + rng.below(5));
    for (double& v : layer.gamma) v = rng.uniform(0.5, 2.0);
    for (double& v : layer.beta) v = rng.normal();
    Matrix x = normal_matrix(rng, 2 + rng.below(7), layer.features());
    const Matrix up = normal_matrix(rng, x.rows(), layer.features());
    BatchNormCache cache;
    BatchNormLayer scratch = layer;
    batchnorm_forward(scratch, x, Mode::Train, &cache);
    const auto g = batchnorm_backward(layer, cache, up);
    const auto objective = [&] {
        BatchNormLayer fresh = layer;
        return weighted_sum(batchnorm_forward(fresh, x, Mode::Train), up);
    };
    return std::max({compare_gradient(layer.gamma, objective, g.gamma, h),
                     compare_gradient(layer.beta, objective, g.beta, h),
                     compare_gradient(x.values(), objective, g.input.values(), h)});
}

double dropout_check(Rng& rng, double h) {
    DropoutLayer layer(rng.uniform(0.1, 0.8));
    Matrix x = normal_matrix(rng, 2 + rng.below(5), 2 + rng.below(5));
    const Matrix up = normal_matrix(rng, x.rows(), x.cols());
    const Rng mask_rng = rng;
    rng.next_u64();
    Rng r = mask_rng;
    const auto fwd = dropout_forward(layer, x, r, Mode::Train);
    const Matrix grad = dropout_backward(fwd.mask, up);
    const auto objective = [&] {
        Rng replay = mask_rng;
        return weighted_sum(dropout_forward(layer, x, replay, Mode::Train).output, up);
    };
    return compare_gradient(x.values(), objective, grad.values(), h);
}

double spline_derivative_check(Rng& rng, double h) {
    const SplineGrid grid = build_grid(3 + rng.below(10), 1 + rng.below(4));
    std::vector<double> point{rng.uniform(-0.98, 0.98)};
    const auto analytic = basis_derivative_at(grid, point[0]);
    double worst = 0.0;
    for (std::size_t j = 0; j < grid.basis_count(); ++j) {
        const std::vector<double> d{analytic[j]};
        worst = std::max(worst, compare_gradient(
                                    point, [&] { return basis_at(grid, point[0])[j]; }, d, h));
    }
    return worst;
}

std::vector<int> random_labels(Rng& rng, std::size_t n) {
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng.below(2));
    // Both classes present, as in real batches.
    y[0] = 0;
    y[n - 1] = 1;
    return y;
}

double bce_check(Rng& rng, double h) {
    const std::size_t n = 2 + rng.below(8);
    Matrix p = random_matrix(rng, n, 1, 0.01, 0.99);
    const auto y = random_labels(rng, n);
    const auto analytic = bce_loss(p, y).gradient;
    return compare_gradient(
        p.values(), [&] { return bce_loss(p, y).loss; }, analytic.values(), h);
}

double nll_check(Rng& rng, double h) {
    const std::size_t n = 2 + rng.below(8);
    Matrix logits = normal_matrix(rng, n, 2);
    for (double& v : logits.values()) v *= 2.0;
    const auto y = random_labels(rng, n);
    const auto analytic = nll_softmax_loss(softmax_rows(logits), y).gradient;
    return compare_gradient(
        logits.values(), [&] { return nll_softmax_loss(softmax_rows(logits), y).loss; },
        analytic.values(), h);
}

double model_check(Classifier& model, Rng& rng, double h, double lo, double hi) {
    const std::size_t n = 4 + rng.below(6);
    const Matrix x = random_matrix(rng, n, model.input_dim(), lo, hi);
    const auto y = random_labels(rng, n);
    const Rng dropout_rng(rng.next_u64());

    Gradients analytic;
    Rng r = dropout_rng;
    model.loss_and_gradients(x, y, r, analytic);

    const auto objective = [&] {
        Rng replay = dropout_rng;
        Gradients unused;
        return model.loss_and_gradients(x, y, replay, unused);
    };
    double worst = 0.0;
    auto params = model.parameters();
    for (std::size_t b = 0; b < params.size(); ++b) {
        worst = std::max(worst, compare_gradient(params[b].values, objective, analytic[b], h));
    }
    return worst;
}

double hybrid_check(Rng& rng, double h) {
    HybridConfig config;
    config.input_dim = 3 + rng.below(4);
    config.kan_widths = {3 + rng.below(3)};
    if (rng.below(2) == 1) config.kan_widths.push_back(2 + rng.below(3));
    config.hidden = 2 + rng.below(4);
    config.grid_size = 4 + rng.below(7);
    HybridKanMlp model(config, rng);
    for (auto& block : model.blocks()) {
        for (double& w : block.kan.spline_weight.values()) w = 0.5 * rng.normal();
    }
    return model_check(model, rng, h, -0.95, 0.95);
}

double baseline_check(Rng& rng, double h) {
    BaselineConfig config;
    config.input_dim = 3 + rng.below(5);
    config.hidden = {2 + rng.below(5), 2 + rng.below(4)};
    BaselineMlp model(config, rng);
    return model_check(model, rng, h, -1.0, 1.0);
}

}  // namespace

std::vector<GradCheck> standard_gradchecks() {
    return {
        {"silu", [](Rng& r, double h) { return activation_check(r, h, silu, silu_backward, false, false); }},
        {"sigmoid",
         [](Rng& r, double h) { return activation_check(r, h, sigmoid, sigmoid_backward, true, false); }},
        {"relu", [](Rng& r, double h) { return activation_check(r, h, relu, relu_backward, false, true); }},
        {"softmax",
         [](Rng& r, double h) {
             return activation_check(r, h, softmax_rows, softmax_rows_backward, true, false);
         }},
        {"spline_basis", spline_derivative_check},
        {"dense", dense_check},
        {"kan_linear", kan_check},
        {"batchnorm", batchnorm_check},
        {"dropout", dropout_check},
        {"bce_loss", bce_check},
        {"nll_softmax_loss", nll_check},
        {"hybrid_model", hybrid_check},
        {"baseline_model", baseline_check},
    };
}

std::vector<GradCheckResult> run_gradchecks(std::span<const GradCheck> checks,
                                            const GradCheckOptions& options) {
    std::vector<GradCheckResult> results;
    for (std::size_t c = 0; c < checks.size(); ++c) {
        Rng rng = derive_rng(options.seed, c + 1);
        GradCheckResult result;
        result.component = checks[c].component;
        for (std::size_t i = 0; i < options.instances; ++i) {
            const double err = checks[c].instance(rng, options.step);
            // NaN must fail, so compare with the negated form.
            if (!(err <= result.worst_error)) result.worst_error = err;
            ++result.instances;
        }
        result.passed = result.worst_error < options.tolerance;
        results.push_back(result);
    }
    return results;
}

}  // namespace kanmlp
