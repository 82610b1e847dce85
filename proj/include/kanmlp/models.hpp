#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kanmlp/labels.hpp"
#include "kanmlp/layers.hpp"
#include "kanmlp/numerics.hpp"

namespace kanmlp {

enum class Architecture : std::uint8_t { HybridKanMlp = 1, BaselineMlp = 2 };

std::string_view architecture_name(Architecture arch) noexcept;  // "hybrid" / "baseline"
Architecture parse_architecture(std::string_view name);

struct HybridConfig {
    std::size_t input_dim = 512;
    // One KANLinear -> BatchNorm -> Dropout block per entry.
    std::vector<std::size_t> kan_widths{128};
    std::size_t hidden = 64;
    std::size_t grid_size = 10;
    std::size_t spline_order = 3;
    double range_min = -1.0;
    double range_max = 1.0;
    double dropout = 0.5;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;

    bool operator==(const HybridConfig&) const = default;
};

struct BaselineConfig {
    std::size_t input_dim = 512;
    // Hidden widths; empty means a single input -> 2 affine layer.
    std::vector<std::size_t> hidden{256, 128};

    bool operator==(const BaselineConfig&) const = default;
};

struct ParamBlock {
    std::string name;
    std::span<double> values;
};

struct ConstParamBlock {
    std::string name;
    std::span<const double> values;
};

// One vector per parameter block, in parameters() order.
using Gradients = std::vector<std::vector<double>>;

class Classifier {
public:
    virtual ~Classifier() = default;

    virtual Architecture architecture() const noexcept = 0;
    virtual std::size_t input_dim() const noexcept = 0;
    // Columns of forward(): 1 for the sigmoid head, 2 for the softmax head.
    virtual std::size_t output_dim() const noexcept = 0;

    // Output probabilities. Train mode needs rng (dropout) and updates batchnorm
    // running statistics; eval mode is a pure function of the parameters.
    virtual Matrix forward(const Matrix& x, Mode mode, Rng* rng = nullptr) = 0;

    // Train-mode forward, loss (BCE for the sigmoid head, NLL for softmax) and
    // backward. Returns the mean batch loss and fills `grads`.
    virtual double loss_and_gradients(const Matrix& x, std::span<const int> labels, Rng& rng,
                                      Gradients& grads) = 0;

    // Trainable parameters in serialization order.
    virtual std::vector<ParamBlock> parameters() = 0;
    // Non-trainable state (batchnorm running statistics), saved after parameters.
    virtual std::vector<ParamBlock> buffers() = 0;

    virtual std::unique_ptr<Classifier> clone() const = 0;

    std::vector<ConstParamBlock> parameters() const;
    std::vector<ConstParamBlock> buffers() const;
    std::size_t parameter_count() const;

    // Eval-mode P(Generated) per row.
    std::vector<double> score(const Matrix& x);
};

// KANLinear -> BatchNorm -> Dropout (per KAN block) -> Dense + ReLU -> Dense -> sigmoid.
class HybridKanMlp final : public Classifier {
public:
    struct KanBlock {
        KanLinearLayer kan;
        BatchNormLayer bn;
        DropoutLayer dropout;
    };

    // Zero-initialized parameters (running stats at mean 0 / var 1).
    explicit HybridKanMlp(HybridConfig config);
    HybridKanMlp(HybridConfig config, Rng& init_rng);

    const HybridConfig& config() const noexcept { return config_; }
    std::vector<KanBlock>& blocks() noexcept { return blocks_; }
    const std::vector<KanBlock>& blocks() const noexcept { return blocks_; }
    DenseLayer& fc1() noexcept { return fc1_; }
    const DenseLayer& fc1() const noexcept { return fc1_; }
    DenseLayer& head() noexcept { return head_; }
    const DenseLayer& head() const noexcept { return head_; }

    Architecture architecture() const noexcept override { return Architecture::HybridKanMlp; }
    std::size_t input_dim() const noexcept override { return config_.input_dim; }
    std::size_t output_dim() const noexcept override { return 1; }
    Matrix forward(const Matrix& x, Mode mode, Rng* rng = nullptr) override;
    double loss_and_gradients(const Matrix& x, std::span<const int> labels, Rng& rng,
                              Gradients& grads) override;
    std::vector<ParamBlock> parameters() override;
    std::vector<ParamBlock> buffers() override;
    std::unique_ptr<Classifier> clone() const override;
    using Classifier::buffers;
    using Classifier::parameters;

private:
    struct Trace;
    Matrix run(const Matrix& x, Mode mode, Rng* rng, Trace* trace);

    HybridConfig config_;
    std::vector<KanBlock> blocks_;
    DenseLayer fc1_;
    DenseLayer head_;
};

// Dense + ReLU stack with a 2-way softmax head.
class BaselineMlp final : public Classifier {
public:
    explicit BaselineMlp(BaselineConfig config);
    BaselineMlp(BaselineConfig config, Rng& init_rng);

    const BaselineConfig& config() const noexcept { return config_; }
    std::vector<DenseLayer>& layers() noexcept { return layers_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

    Architecture architecture() const noexcept override { return Architecture::BaselineMlp; }
    std::size_t input_dim() const noexcept override { return config_.input_dim; }
    std::size_t output_dim() const noexcept override { return 2; }
    Matrix forward(const Matrix& x, Mode mode, Rng* rng = nullptr) override;
    double loss_and_gradients(const Matrix& x, std::span<const int> labels, Rng& rng,
                              Gradients& grads) override;
    std::vector<ParamBlock> parameters() override;
    std::vector<ParamBlock> buffers() override;
    std::unique_ptr<Classifier> clone() const override;
    using Classifier::buffers;
    using Classifier::parameters;

private:
    BaselineConfig config_;
    std::vector<DenseLayer> layers_;
};

// P(Generated) per row: column 0 of a sigmoid output, column 1 of a softmax output.
std::vector<double> generated_probability(const Matrix& probabilities);

// Sigmoid output: Generated iff p >= threshold. Softmax output: argmax, ties to
// Generated (threshold is not consulted).
std::vector<int> predict_label(const Matrix& probabilities, double threshold = 0.5);

// ---- parameter files ---------------------------------------------------------

inline constexpr std::uint16_t kModelFormatVersion = 1;

std::vector<std::uint8_t> save_params(const Classifier& model);
std::unique_ptr<Classifier> load_params(std::span<const std::uint8_t> bytes);
// Throws ArchitectureError if the file holds the other architecture.
HybridKanMlp load_hybrid(std::span<const std::uint8_t> bytes);
BaselineMlp load_baseline(std::span<const std::uint8_t> bytes);

void save_model_file(const Classifier& model, const std::string& path);
std::unique_ptr<Classifier> load_model_file(const std::string& path);

}  // namespace kanmlp
