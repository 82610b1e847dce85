#include "kanmlp/layers.hpp"

#include <algorithm>
#include <cmath>

#include "kanmlp/error.hpp"

namespace kanmlp {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
    }
}

template <typename F>
Matrix map(const Matrix& x, F f) {
    Matrix out(x.rows(), x.cols());
    auto src = x.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
    return out;
}

void kaiming_uniform(std::span<double> values, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : values) v = rng.uniform(-bound, bound);
}

}  // namespace

// ---- activations -------------------------------------------------------------

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double silu(double x) noexcept { return x * sigmoid(x); }

double silu_derivative(double x) noexcept {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

Matrix silu(const Matrix& x) { return map(x, [](double v) { return silu(v); }); }
Matrix sigmoid(const Matrix& x) { return map(x, [](double v) { return sigmoid(v); }); }
Matrix relu(const Matrix& x) { return map(x, [](double v) { return v > 0.0 ? v : 0.0; }); }

Matrix softmax_rows(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto in = x.row(r);
        auto dst = out.row(r);
        const double peak = *std::max_element(in.begin(), in.end());
        double total = 0.0;
        for (std::size_t c = 0; c < in.size(); ++c) {
            dst[c] = std::exp(in[c] - peak);
            total += dst[c];
        }
        for (auto& v : dst) v /= total;
    }
    return out;
}

Matrix silu_backward(const Matrix& x, const Matrix& upstream) {
    require_same_shape(x, upstream, "silu_backward");
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i)
        out.values()[i] = upstream.values()[i] * silu_derivative(x.values()[i]);
    return out;
}

Matrix relu_backward(const Matrix& x, const Matrix& upstream) {
    require_same_shape(x, upstream, "relu_backward");
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i)
        out.values()[i] = x.values()[i] > 0.0 ? upstream.values()[i] : 0.0;
    return out;
}

Matrix sigmoid_backward(const Matrix& output, const Matrix& upstream) {
    require_same_shape(output, upstream, "sigmoid_backward");
    Matrix out(output.rows(), output.cols());
    for (std::size_t i = 0; i < output.size(); ++i) {
        const double s = output.values()[i];
        out.values()[i] = upstream.values()[i] * s * (1.0 - s);
    }
    return out;
}

Matrix softmax_rows_backward(const Matrix& output, const Matrix& upstream) {
    require_same_shape(output, upstream, "softmax_rows_backward");
    Matrix out(output.rows(), output.cols());
    for (std::size_t r = 0; r < output.rows(); ++r) {
        const auto s = output.row(r);
        const auto g = upstream.row(r);
        double dot = 0.0;
        for (std::size_t c = 0; c < s.size(); ++c) dot += s[c] * g[c];
        for (std::size_t c = 0; c < s.size(); ++c) out(r, c) = s[c] * (g[c] - dot);
    }
    return out;
}

// ---- dense -------------------------------------------------------------------

DenseLayer::DenseLayer(std::size_t in_dim, std::size_t out_dim)
    : weight(out_dim, in_dim), bias(out_dim, 0.0) {
    if (in_dim == 0 || out_dim == 0) throw InputError("dense layer dimensions must be positive");
}

void init_dense(DenseLayer& layer, Rng& rng) {
    kaiming_uniform(layer.weight.values(), layer.in_dim(), rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_dim()));
    for (auto& b : layer.bias) b = rng.uniform(-bound, bound);
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
    if (x.cols() != layer.in_dim()) {
        throw ShapeError("dense_forward: input " + x.shape_string() + " vs weight " +
                         layer.weight.shape_string());
    }
    Matrix out(x.rows(), layer.out_dim());
    for (std::size_t b = 0; b < x.rows(); ++b) {
        const auto xin = x.row(b);
        for (std::size_t o = 0; o < layer.out_dim(); ++o) {
            const auto w = layer.weight.row(o);
            double acc = layer.bias[o];
            for (std::size_t i = 0; i < xin.size(); ++i) acc += w[i] * xin[i];
            out(b, o) = acc;
        }
    }
    return out;
}

DenseGradients dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& upstream) {
    if (x.cols() != layer.in_dim() || upstream.cols() != layer.out_dim() ||
        upstream.rows() != x.rows()) {
        throw ShapeError("dense_backward: input " + x.shape_string() + ", upstream " +
                         upstream.shape_string() + ", weight " + layer.weight.shape_string());
    }
    DenseGradients g{Matrix(layer.out_dim(), layer.in_dim()),
                     std::vector<double>(layer.out_dim(), 0.0), Matrix(x.rows(), x.cols())};
    for (std::size_t b = 0; b < x.rows(); ++b) {
        const auto xin = x.row(b);
        auto dx = g.input.row(b);
        for (std::size_t o = 0; o < layer.out_dim(); ++o) {
            const double d = upstream(b, o);
            if (d == 0.0) continue;
            g.bias[o] += d;
            auto dw = g.weight.row(o);
            const auto w = layer.weight.row(o);
            for (std::size_t i = 0; i < xin.size(); ++i) {
                dw[i] += d * xin[i];
                dx[i] += d * w[i];
            }
        }
    }
    return g;
}

// ---- KANLinear ---------------------------------------------------------------

KanLinearLayer::KanLinearLayer(std::size_t in_dim, std::size_t out_dim, SplineGrid grid_)
    : grid(std::move(grid_)),
      base_weight(out_dim, in_dim),
      spline_weight(out_dim, in_dim, grid.basis_count()) {
    if (in_dim == 0 || out_dim == 0) throw InputError("KANLinear dimensions must be positive");
}

void init_kan(KanLinearLayer& layer, Rng& rng) {
    kaiming_uniform(layer.base_weight.values(), layer.in_dim(), rng);
    const double stddev = 0.1 / std::sqrt(static_cast<double>(layer.grid.basis_count()));
    for (auto& w : layer.spline_weight.values()) w = stddev * rng.normal();
}

namespace {

// Per-(row, input) local basis: start index, order+1 values and derivatives.
struct SparseBasis {
    std::size_t width = 0;
    std::vector<std::size_t> first;
    std::vector<double> values;
    std::vector<double> derivatives;
    std::vector<double> activated;  // silu(x)

    SparseBasis(const SplineGrid& grid, const Matrix& x, bool with_derivatives)
        : width(grid.order() + 1),
          first(x.size()),
          values(x.size() * width),
          derivatives(with_derivatives ? x.size() * width : 0),
          activated(x.size()) {
        for (std::size_t n = 0; n < x.size(); ++n) {
            const double v = x.values()[n];
            std::span<double> vals(values.data() + n * width, width);
            std::span<double> ders;
            if (with_derivatives) ders = std::span<double>(derivatives.data() + n * width, width);
            first[n] = local_basis(grid, v, vals, ders);
            activated[n] = silu(v);
        }
    }
};

}  // namespace

Matrix kan_forward(const KanLinearLayer& layer, const Matrix& x) {
    if (x.cols() != layer.in_dim()) {
        throw ShapeError("kan_forward: input " + x.shape_string() + " vs in_dim " +
                         std::to_string(layer.in_dim()));
    }
    const SparseBasis basis(layer.grid, x, false);
    const std::size_t in = layer.in_dim();
    const std::size_t nb = layer.grid.basis_count();
    const std::size_t width = basis.width;
    const auto spline = layer.spline_weight.values();

    Matrix out(x.rows(), layer.out_dim());
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
        const auto base = layer.base_weight.row(o);
        const double* coeff_o = spline.data() + o * in * nb;
        for (std::size_t b = 0; b < x.rows(); ++b) {
            double acc = 0.0;
            const std::size_t row = b * in;
            for (std::size_t i = 0; i < in; ++i) {
                const std::size_t n = row + i;
                acc += base[i] * basis.activated[n];
                const double* c = coeff_o + i * nb + basis.first[n];
                const double* v = basis.values.data() + n * width;
                for (std::size_t q = 0; q < width; ++q) acc += c[q] * v[q];
            }
            out(b, o) = acc;
        }
    }
    return out;
}

KanGradients kan_backward(const KanLinearLayer& layer, const Matrix& x, const Matrix& upstream) {
    if (x.cols() != layer.in_dim() || upstream.cols() != layer.out_dim() ||
        upstream.rows() != x.rows()) {
        throw ShapeError("kan_backward: input " + x.shape_string() + ", upstream " +
                         upstream.shape_string());
    }
    const SparseBasis basis(layer.grid, x, true);
    const std::size_t in = layer.in_dim();
    const std::size_t nb = layer.grid.basis_count();
    const std::size_t width = basis.width;
    const auto spline = layer.spline_weight.values();

    std::vector<double> act_grad(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) act_grad[n] = silu_derivative(x.values()[n]);

    KanGradients g{Matrix(layer.out_dim(), in), Tensor3(layer.out_dim(), in, nb),
                   Matrix(x.rows(), in)};
    auto dspline = g.spline_weight.values();
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
        const auto base = layer.base_weight.row(o);
        auto dbase = g.base_weight.row(o);
        const double* coeff_o = spline.data() + o * in * nb;
        double* dcoeff_o = dspline.data() + o * in * nb;
        for (std::size_t b = 0; b < x.rows(); ++b) {
            const double d = upstream(b, o);
            if (d == 0.0) continue;
            auto dx = g.input.row(b);
            const std::size_t row = b * in;
            for (std::size_t i = 0; i < in; ++i) {
                const std::size_t n = row + i;
                dbase[i] += d * basis.activated[n];
                const std::size_t offset = i * nb + basis.first[n];
                const double* c = coeff_o + offset;
                double* dc = dcoeff_o + offset;
                const double* v = basis.values.data() + n * width;
                const double* dv = basis.derivatives.data() + n * width;
                double slope = base[i] * act_grad[n];
                for (std::size_t q = 0; q < width; ++q) {
                    dc[q] += d * v[q];
                    slope += c[q] * dv[q];
                }
                dx[i] += d * slope;
            }
        }
    }
    return g;
}

// ---- batch normalization -----------------------------------------------------

BatchNormLayer::BatchNormLayer(std::size_t features, double momentum_, double stability_eps_)
    : gamma(features, 1.0),
      beta(features, 0.0),
      running_mean(features, 0.0),
      running_var(features, 1.0),
      momentum(momentum_),
      stability_eps(stability_eps_) {
    if (features == 0) throw InputError("batchnorm feature count must be positive");
    if (!(momentum > 0.0 && momentum <= 1.0)) throw InputError("batchnorm momentum must lie in (0, 1]");
    if (!(stability_eps > 0.0)) throw InputError("batchnorm stability_eps must be positive");
}

Matrix batchnorm_forward(BatchNormLayer& layer, const Matrix& x, Mode mode, BatchNormCache* cache) {
    const std::size_t f = layer.features();
    if (x.cols() != f) {
        throw ShapeError("batchnorm_forward: input " + x.shape_string() + " vs " +
                         std::to_string(f) + " features");
    }
    const std::size_t n = x.rows();
    Matrix out(n, f);

    if (mode == Mode::Eval) {
        for (std::size_t j = 0; j < f; ++j) {
            const double scale = layer.gamma[j] / std::sqrt(layer.running_var[j] + layer.stability_eps);
            for (std::size_t b = 0; b < n; ++b)
                out(b, j) = scale * (x(b, j) - layer.running_mean[j]) + layer.beta[j];
        }
        return out;
    }

    if (n < 2) {
        throw InputError("batchnorm in train mode needs a batch of at least 2, got " +
                         std::to_string(n));
    }
    BatchNormCache local;
    BatchNormCache& c = cache ? *cache : local;
    c.normalized = Matrix(n, f);
    c.inv_std.assign(f, 0.0);
    const double count = static_cast<double>(n);
    for (std::size_t j = 0; j < f; ++j) {
        double mean = 0.0;
        for (std::size_t b = 0; b < n; ++b) mean += x(b, j);
        mean /= count;
        double var = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            const double d = x(b, j) - mean;
            var += d * d;
        }
        var /= count;
        const double inv_std = 1.0 / std::sqrt(var + layer.stability_eps);
        c.inv_std[j] = inv_std;
        for (std::size_t b = 0; b < n; ++b) {
            const double xhat = (x(b, j) - mean) * inv_std;
            c.normalized(b, j) = xhat;
            out(b, j) = layer.gamma[j] * xhat + layer.beta[j];
        }
        const double m = layer.momentum;
        layer.running_mean[j] = (1.0 - m) * layer.running_mean[j] + m * mean;
        layer.running_var[j] = (1.0 - m) * layer.running_var[j] + m * var * count / (count - 1.0);
    }
    return out;
}

BatchNormGradients batchnorm_backward(const BatchNormLayer& layer, const BatchNormCache& cache,
                                      const Matrix& upstream) {
    require_same_shape(cache.normalized, upstream, "batchnorm_backward");
    const std::size_t n = upstream.rows();
    const std::size_t f = upstream.cols();
    if (f != layer.features()) throw ShapeError("batchnorm_backward: feature count mismatch");
    BatchNormGradients g{std::vector<double>(f, 0.0), std::vector<double>(f, 0.0), Matrix(n, f)};
    const double count = static_cast<double>(n);
    for (std::size_t j = 0; j < f; ++j) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            sum_dy += upstream(b, j);
            sum_dy_xhat += upstream(b, j) * cache.normalized(b, j);
        }
        g.beta[j] = sum_dy;
        g.gamma[j] = sum_dy_xhat;
        const double scale = layer.gamma[j] * cache.inv_std[j] / count;
        for (std::size_t b = 0; b < n; ++b) {
            g.input(b, j) =
                scale * (count * upstream(b, j) - sum_dy - cache.normalized(b, j) * sum_dy_xhat);
        }
    }
    return g;
}

// ---- dropout -----------------------------------------------------------------

DropoutLayer::DropoutLayer(double rate_) : rate(rate_) {
    if (!(rate >= 0.0 && rate < 1.0)) throw InputError("dropout rate must lie in [0, 1)");
}

DropoutResult dropout_forward(const DropoutLayer& layer, const Matrix& x, Rng& rng, Mode mode) {
    if (mode == Mode::Eval || layer.rate == 0.0) {
        return {x, Matrix(x.rows(), x.cols(), 1.0)};
    }
    const double keep_scale = 1.0 / (1.0 - layer.rate);
    DropoutResult r{Matrix(x.rows(), x.cols()), Matrix(x.rows(), x.cols())};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double m = rng.uniform() < layer.rate ? 0.0 : keep_scale;
        r.mask.values()[i] = m;
        r.output.values()[i] = x.values()[i] * m;
    }
    return r;
}

Matrix dropout_backward(const Matrix& mask, const Matrix& upstream) {
    require_same_shape(mask, upstream, "dropout_backward");
    Matrix out(mask.rows(), mask.cols());
    for (std::size_t i = 0; i < mask.size(); ++i)
        out.values()[i] = mask.values()[i] * upstream.values()[i];
    return out;
}

}  // namespace kanmlp
