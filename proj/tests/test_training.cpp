#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "kanmlp/error.hpp"
#include "kanmlp/training.hpp"

using namespace kanmlp;

namespace {

// Scalar Adam written out directly from the update rule.
struct ScalarAdam {
    double m = 0.0, v = 0.0;
    int t = 0;
    double step(double theta, double g, double lr = 1e-3) {
        ++t;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1.0 - std::pow(0.9, t));
        const double vh = v / (1.0 - std::pow(0.999, t));
        return theta - lr * mh / (std::sqrt(vh) + 1e-8);
    }
};

HybridConfig small_hybrid(std::size_t dim) {
    HybridConfig c;
    c.input_dim = dim;
    c.kan_widths = {8};
    c.hidden = 8;
    c.grid_size = 5;
    return c;
}

std::vector<double> flat(const Classifier& m) {
    std::vector<double> out;
    for (const auto& p : m.parameters()) out.insert(out.end(), p.values.begin(), p.values.end());
    for (const auto& p : m.buffers()) out.insert(out.end(), p.values.begin(), p.values.end());
    return out;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParameters) {
    std::vector<double> theta{1.0, -2.0, 3.0};
    std::vector<ParamBlock> params{{"w", theta}};
    AdamState state(AdamConfig{}, params);
    adam_step(state, params, Gradients{{0.0, 0.0, 0.0}});
    EXPECT_EQ(theta, (std::vector<double>{1.0, -2.0, 3.0}));
    EXPECT_EQ(state.step, 1u);
}

TEST(Adam, MatchesScalarReference) {
    Rng rng(1);
    std::vector<double> theta{0.5, -0.25};
    std::vector<ParamBlock> params{{"a", std::span(theta).subspan(0, 1)},
                                   {"b", std::span(theta).subspan(1, 1)}};
    AdamState state(AdamConfig{}, params);
    ScalarAdam ra, rb;
    double a = 0.5, b = -0.25;
    for (int i = 0; i < 100; ++i) {
        const double ga = rng.normal(), gb = 10.0 * rng.normal();
        adam_step(state, params, Gradients{{ga}, {gb}});
        a = ra.step(a, ga);
        b = rb.step(b, gb);
        EXPECT_NEAR(theta[0], a, 1e-15);
        EXPECT_NEAR(theta[1], b, 1e-15);
    }
}

TEST(Adam, FirstStepMagnitude) {
    for (double g : {1e-3, 0.5, -3.0, 1e6}) {
        std::vector<double> theta{0.0};
        std::vector<ParamBlock> params{{"w", theta}};
        AdamState state(AdamConfig{}, params);
        adam_step(state, params, Gradients{{g}});
        EXPECT_NEAR(theta[0], -1e-3 * g / (std::abs(g) + 1e-8), 1e-18);
        if (std::abs(g) > 0.1) EXPECT_NEAR(theta[0], -1e-3 * (g > 0 ? 1 : -1), 1e-10);
    }
}

TEST(Adam, ShapeMismatch) {
    std::vector<double> theta{0.0, 1.0};
    std::vector<ParamBlock> params{{"w", theta}};
    AdamState state(AdamConfig{}, params);
    EXPECT_THROW(adam_step(state, params, Gradients{{1.0}}), ShapeError);
    EXPECT_THROW(adam_step(state, params, Gradients{}), ShapeError);
}

TEST(TrainConfig, Validation) {
    EXPECT_NO_THROW(TrainConfig{}.validate());
    EXPECT_THROW(TrainConfig{.learning_rate = 0.0}.validate(), InputError);
    EXPECT_THROW(TrainConfig{.batch_size = 1}.validate(), InputError);
    EXPECT_THROW(TrainConfig{.validation_fraction = 1.0}.validate(), InputError);
    EXPECT_THROW(TrainConfig{.validation_fraction = -0.1}.validate(), InputError);
}

TEST(Fit, ZeroEpochsLeavesModelUnchanged) {
    const auto data = synthetic_gaussians(20, 16, 6.0, 1);
    Rng init(2);
    HybridKanMlp model(small_hybrid(16), init);
    const auto before = flat(model);
    const auto report = fit(model, data, TrainConfig{.epochs = 0});
    EXPECT_TRUE(report.epochs.empty());
    EXPECT_EQ(flat(model), before);
}

TEST(Fit, SingleClassIsRejected) {
    auto data = synthetic_gaussians(20, 16, 6.0, 1);
    for (auto& r : data.records) r.label = kGenerated;
    Rng init(2);
    BaselineMlp model(BaselineConfig{16, {8}}, init);
    EXPECT_THROW(fit(model, data, TrainConfig{.epochs = 1}), TrainingError);
    EXPECT_THROW(fit(model, data, Dataset{16, {}}, TrainConfig{.epochs = 1}), TrainingError);
}

TEST(Fit, DimensionMismatch) {
    const auto data = synthetic_gaussians(20, 16, 6.0, 1);
    BaselineMlp model(BaselineConfig{8, {4}});
    EXPECT_THROW(fit(model, data, TrainConfig{.epochs = 1}), DimensionError);
}

TEST(Fit, DivergenceNamesEpochAndStep) {
    const auto data = synthetic_gaussians(100, 16, 6.0, 1);
    Rng init(2);
    BaselineMlp model(BaselineConfig{16, {8}}, init);
    try {
        fit(model, data, TrainConfig{.learning_rate = 1e300, .epochs = 5});
        FAIL() << "expected DivergenceError";
    } catch (const DivergenceError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("epoch"), std::string::npos) << msg;
        EXPECT_NE(msg.find("step"), std::string::npos) << msg;
    }
}

TEST(Fit, DeterministicForSameSeed) {
    const auto data = synthetic_gaussians(100, 16, 3.0, 4);
    const TrainConfig config{.epochs = 3, .seed = 11};
    std::vector<std::vector<double>> params;
    std::vector<std::vector<double>> losses;
    for (int run = 0; run < 2; ++run) {
        Rng init = derive_rng(config.seed, static_cast<std::uint64_t>(SeedStream::Init));
        HybridKanMlp model(small_hybrid(16), init);
        const auto report = fit(model, data, config);
        std::vector<double> l;
        for (const auto& e : report.epochs) l.push_back(e.train_loss);
        losses.push_back(l);
        params.push_back(flat(model));
    }
    EXPECT_EQ(losses[0], losses[1]);
    EXPECT_EQ(params[0], params[1]);
}

TEST(Fit, FirstEpochLowersLossForEverySeed) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto data = synthetic_gaussians(200, 32, 6.0, seed);
        Rng init = derive_rng(seed, static_cast<std::uint64_t>(SeedStream::Init));
        HybridKanMlp hybrid(small_hybrid(32), init);
        BaselineMlp baseline(BaselineConfig{32, {16, 8}}, init);
        for (Classifier* model : std::initializer_list<Classifier*>{&hybrid, &baseline}) {
            const double before = evaluate_loss(*model, data);
            fit(*model, data, Dataset{32, {}}, TrainConfig{.epochs = 1, .seed = seed});
            EXPECT_LT(evaluate_loss(*model, data), before)
                << architecture_name(model->architecture()) << " seed " << seed;
        }
    }
}

TEST(Fit, ReportsValidationAndLearnsSeparableData) {
    const auto data = synthetic_gaussians(300, 32, 6.0, 3);
    Rng init(5);
    BaselineMlp model(BaselineConfig{32, {16, 8}}, init);
    const auto report = fit(model, data, TrainConfig{.epochs = 60, .seed = 5});
    ASSERT_EQ(report.epochs.size(), 60u);
    EXPECT_EQ(report.epochs.front().epoch, 1u);
    EXPECT_LT(report.epochs.back().train_loss, report.epochs.front().train_loss);
    EXPECT_GE(report.epochs.back().val_f1, 0.98);
    EXPECT_FALSE(report.stopped_early);
}

TEST(Fit, NoValidationGivesNan) {
    const auto data = synthetic_gaussians(30, 8, 6.0, 3);
    BaselineMlp model(BaselineConfig{8, {4}});
    const auto report = fit(model, data, TrainConfig{.epochs = 1, .validation_fraction = 0.0});
    ASSERT_EQ(report.epochs.size(), 1u);
    EXPECT_TRUE(std::isnan(report.epochs[0].val_loss));
    EXPECT_TRUE(std::isnan(report.epochs[0].val_f1));
}

TEST(Fit, EarlyStoppingHaltsOnFlatValidation) {
    const auto data = synthetic_gaussians(100, 16, 0.0, 9);
    Rng init(3);
    BaselineMlp model(BaselineConfig{16, {32}}, init);
    const auto report = fit(model, data,
                            TrainConfig{.learning_rate = 1e-2, .epochs = 200, .seed = 3,
                                        .validation_fraction = 0.2, .early_stop_patience = 3});
    EXPECT_TRUE(report.stopped_early);
    EXPECT_LT(report.epochs.size(), 200u);
}

TEST(Fit, ShortFinalBatchIsDropped) {
    // 65 training rows at batch 64 leaves one row, which batchnorm cannot use.
    auto data = synthetic_gaussians(33, 8, 6.0, 3);
    data.records.pop_back();
    ASSERT_EQ(data.size(), 65u);
    Rng init(1);
    HybridKanMlp model(small_hybrid(8), init);
    EXPECT_NO_THROW(fit(model, data, Dataset{8, {}}, TrainConfig{.epochs = 2}));
}

TEST(TrainReportCsv, Layout) {
    TrainReport report;
    report.epochs.push_back({1, 0.5, 0.25, 1.0});
    report.epochs.push_back({2, 0.125, std::nan(""), std::nan("")});
    std::ostringstream out;
    write_train_report_csv(report, out);
    EXPECT_EQ(out.str(), "epoch,train_loss,val_loss,val_f1\n1,0.5,0.25,1\n2,0.125,nan,nan\n");
}
