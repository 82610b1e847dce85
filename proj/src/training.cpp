#include "kanmlp/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "kanmlp/error.hpp"
#include "kanmlp/metrics.hpp"

namespace kanmlp {

AdamState::AdamState(AdamConfig cfg, std::span<const ParamBlock> params) : config(cfg) {
    m.reserve(params.size());
    v.reserve(params.size());
    for (const auto& p : params) {
        m.emplace_back(p.values.size(), 0.0);
        v.emplace_back(p.values.size(), 0.0);
    }
}

void adam_step(AdamState& state, std::span<const ParamBlock> params, const Gradients& grads) {
    if (params.size() != state.m.size() || grads.size() != params.size()) {
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameter blocks, " +
                         std::to_string(grads.size()) + " gradient blocks, optimizer state for " +
                         std::to_string(state.m.size()));
    }
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].values.size() != grads[b].size() ||
            params[b].values.size() != state.m[b].size()) {
            throw ShapeError("adam_step: block '" + params[b].name + "' has " +
                             std::to_string(params[b].values.size()) + " values but " +
                             std::to_string(grads[b].size()) + " gradients");
        }
    }

    const auto& c = state.config;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);

    for (std::size_t b = 0; b < params.size(); ++b) {
        auto theta = params[b].values;
        auto& m = state.m[b];
        auto& v = state.v[b];
        const auto& g = grads[b];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            theta[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.eps);
        }
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw InputError("learning_rate must be a positive finite number");
    }
    if (batch_size < 2) {
        throw InputError("batch_size must be at least 2 (batch normalization needs a variance)");
    }
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw InputError("validation_fraction must lie in [0, 1)");
    }
    if (early_stop_patience && *early_stop_patience == 0) {
        throw InputError("early_stop_patience must be at least 1 when set");
    }
}

namespace {

LossResult model_loss(const Matrix& probabilities, std::span<const int> labels) {
    return probabilities.cols() == 1 ? bce_loss(probabilities, labels)
                                     : nll_softmax_loss(probabilities, labels);
}

void check_dims(const Classifier& model, const Dataset& data, const char* which) {
    if (!data.empty() && data.dim != model.input_dim()) {
        throw DimensionError(std::string(which) + " embeddings have dimension " +
                             std::to_string(data.dim) + " but the model expects " +
                             std::to_string(model.input_dim()));
    }
}

void require_both_classes(std::span<const int> labels) {
    validate_binary_labels(labels);
    const auto generated = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kGenerated));
    if (generated == 0 || generated == labels.size()) {
        throw TrainingError("training data must contain both real and generated records (got " +
                            std::to_string(labels.size() - generated) + " real, " +
                            std::to_string(generated) + " generated)");
    }
}

}  // namespace

double evaluate_loss(Classifier& model, const Dataset& data) {
    check_dims(model, data, "evaluation");
    if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto labels = label_vector(data);
    return model_loss(model.forward(feature_matrix(data), Mode::Eval), labels).loss;
}

TrainReport fit(Classifier& model, const Dataset& train, const Dataset& validation,
                const TrainConfig& config) {
    config.validate();
    check_dims(model, train, "training");
    check_dims(model, validation, "validation");

    const auto labels = label_vector(train);
    require_both_classes(labels);

    const auto start = std::chrono::steady_clock::now();
    TrainReport report;

    const Matrix x = feature_matrix(train);
    const Matrix x_val = validation.empty() ? Matrix() : feature_matrix(validation);
    const auto y_val = label_vector(validation);

    Rng shuffle_rng = derive_rng(config.seed, static_cast<std::uint64_t>(SeedStream::Shuffle));
    Rng dropout_rng = derive_rng(config.seed, static_cast<std::uint64_t>(SeedStream::Dropout));

    auto params = model.parameters();
    AdamState adam(AdamConfig{.learning_rate = config.learning_rate}, params);
    Gradients grads;

    std::vector<std::size_t> order(train.size());
    std::vector<int> batch_labels;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(std::span(order), shuffle_rng);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        std::size_t step = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t n = std::min(config.batch_size, order.size() - begin);
            if (n < 2) break;
            ++step;
            const std::span<const std::size_t> rows(order.data() + begin, n);
            const Matrix xb = [&] {
                Matrix m(n, x.cols());
                for (std::size_t r = 0; r < n; ++r) {
                    const auto src = x.row(rows[r]);
                    std::copy(src.begin(), src.end(), m.row(r).begin());
                }
                return m;
            }();
            batch_labels.resize(n);
            for (std::size_t r = 0; r < n; ++r) batch_labels[r] = labels[rows[r]];

            const double loss = model.loss_and_gradients(xb, batch_labels, dropout_rng, grads);
            bool finite = std::isfinite(loss);
            for (const auto& g : grads) finite = finite && all_finite(g);
            if (!finite) {
                throw DivergenceError("non-finite loss or gradient at epoch " +
                                      std::to_string(epoch) + ", step " + std::to_string(step));
            }
            adam_step(adam, params, grads);
            loss_sum += loss * static_cast<double>(n);
            seen += n;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(seen);
        stats.val_loss = std::numeric_limits<double>::quiet_NaN();
        stats.val_f1 = std::numeric_limits<double>::quiet_NaN();
        if (!validation.empty()) {
            const Matrix probs = model.forward(x_val, Mode::Eval);
            stats.val_loss = model_loss(probs, y_val).loss;
            stats.val_f1 = precision_recall_f1(confusion(y_val, predict_label(probs))).f1;
            if (!std::isfinite(stats.val_loss)) {
                throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
            }
        }
        report.epochs.push_back(stats);

        if (config.early_stop_patience && !validation.empty()) {
            if (stats.val_loss < best_val) {
                best_val = stats.val_loss;
                since_best = 0;
            } else if (++since_best >= *config.early_stop_patience) {
                report.stopped_early = epoch < config.epochs;
                break;
            }
        }
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

TrainReport fit(Classifier& model, const Dataset& data, const TrainConfig& config) {
    config.validate();
    require_both_classes(label_vector(data));
    SplitSpec spec;
    spec.train_fraction = 1.0 - config.validation_fraction;
    spec.validation_fraction = config.validation_fraction;
    spec.seed = derive_rng(config.seed, static_cast<std::uint64_t>(SeedStream::Split)).next_u64();
    spec.stratify = true;
    const auto split = stratified_split(data, spec);
    return fit(model, split.train, split.validation, config);
}

void write_train_report_csv(const TrainReport& report, std::ostream& out) {
    const auto num = [](double v) -> std::string {
        if (std::isnan(v)) return "nan";
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        return {buf, res.ptr};
    };
    out << "epoch,train_loss,val_loss,val_f1\n";
    for (const auto& e : report.epochs) {
        out << e.epoch << ',' << num(e.train_loss) << ',' << num(e.val_loss) << ','
            << num(e.val_f1) << '\n';
    }
}

}  // namespace kanmlp
