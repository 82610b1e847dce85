#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "kanmlp/dataset.hpp"
#include "kanmlp/losses.hpp"
#include "kanmlp/models.hpp"

namespace kanmlp {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t step = 0;

    AdamState() = default;
    AdamState(AdamConfig config, std::span<const ParamBlock> params);
};

// One bias-corrected Adam update; increments state.step first.
void adam_step(AdamState& state, std::span<const ParamBlock> params, const Gradients& grads);

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    std::size_t epochs = 100;
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;
    // Stop after this many epochs without a validation-loss improvement.
    std::optional<std::size_t> early_stop_patience;

    void validate() const;
};

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;  // NaN without a validation set
    double val_f1 = 0.0;    // F1 of the Generated class; NaN without a validation set
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    double wall_seconds = 0.0;
    bool stopped_early = false;
};

// Random streams derived from the run seed.
enum class SeedStream : std::uint64_t { Init = 1, Split = 2, Shuffle = 3, Dropout = 4 };

// Trains on `train`, reporting per-epoch validation metrics on `validation`
// (which may be empty). Each epoch shuffles with the run seed, takes mini-batches
// of batch_size and drops a final batch shorter than 2.
TrainReport fit(Classifier& model, const Dataset& train, const Dataset& validation,
                const TrainConfig& config);

// Stratified split of `data` by config.validation_fraction, then fit.
TrainReport fit(Classifier& model, const Dataset& data, const TrainConfig& config);

// Eval-mode mean loss over a whole dataset.
double evaluate_loss(Classifier& model, const Dataset& data);

// epoch,train_loss,val_loss,val_f1
void write_train_report_csv(const TrainReport& report, std::ostream& out);

}  // namespace kanmlp
