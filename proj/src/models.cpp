#include "kanmlp/models.hpp"

#include <algorithm>

#include "kanmlp/byte_io.hpp"
#include "kanmlp/error.hpp"
#include "kanmlp/losses.hpp"

namespace kanmlp {

std::string_view architecture_name(Architecture arch) noexcept {
    switch (arch) {
        case Architecture::HybridKanMlp: return "hybrid";
        case Architecture::BaselineMlp: return "baseline";
    }
    return "unknown";
}

Architecture parse_architecture(std::string_view name) {
    if (name == "hybrid") return Architecture::HybridKanMlp;
    if (name == "baseline") return Architecture::BaselineMlp;
    throw InputError("unknown architecture '" + std::string(name) +
                     "' (expected 'hybrid' or 'baseline')");
}

// ---- Classifier --------------------------------------------------------------

namespace {

std::vector<ConstParamBlock> as_const(std::vector<ParamBlock> blocks) {
    std::vector<ConstParamBlock> out;
    out.reserve(blocks.size());
    for (auto& b : blocks) out.push_back({std::move(b.name), b.values});
    return out;
}

void put(Gradients& grads, std::size_t& slot, std::span<const double> values) {
    grads[slot++].assign(values.begin(), values.end());
}

void check_input(const Matrix& x, std::size_t input_dim) {
    if (x.cols() != input_dim) {
        throw ShapeError("model expects " + std::to_string(input_dim) + " input columns, got " +
                         x.shape_string());
    }
}

}  // namespace

std::vector<ConstParamBlock> Classifier::parameters() const {
    return as_const(const_cast<Classifier*>(this)->parameters());
}

std::vector<ConstParamBlock> Classifier::buffers() const {
    return as_const(const_cast<Classifier*>(this)->buffers());
}

std::size_t Classifier::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.values.size();
    return n;
}

std::vector<double> Classifier::score(const Matrix& x) {
    return generated_probability(forward(x, Mode::Eval));
}

// ---- HybridKanMlp ------------------------------------------------------------

namespace {

void validate(const HybridConfig& c) {
    if (c.input_dim == 0) throw InputError("hybrid input_dim must be positive");
    if (c.kan_widths.empty()) throw InputError("hybrid model needs at least one KANLinear layer");
    for (auto w : c.kan_widths)
        if (w == 0) throw InputError("hybrid KANLinear widths must be positive");
    if (c.hidden == 0) throw InputError("hybrid hidden width must be positive");
}

void validate(const BaselineConfig& c) {
    if (c.input_dim == 0) throw InputError("baseline input_dim must be positive");
    for (auto w : c.hidden)
        if (w == 0) throw InputError("baseline hidden widths must be positive");
}

}  // namespace

HybridKanMlp::HybridKanMlp(HybridConfig config) : config_(std::move(config)) {
    validate(config_);
    const SplineGrid grid(config_.grid_size, config_.spline_order, config_.range_min,
                          config_.range_max);
    std::size_t in = config_.input_dim;
    for (auto width : config_.kan_widths) {
        blocks_.push_back({KanLinearLayer(in, width, grid),
                           BatchNormLayer(width, config_.bn_momentum, config_.bn_eps),
                           DropoutLayer(config_.dropout)});
        in = width;
    }
    fc1_ = DenseLayer(in, config_.hidden);
    head_ = DenseLayer(config_.hidden, 1);
}

HybridKanMlp::HybridKanMlp(HybridConfig config, Rng& init_rng) : HybridKanMlp(std::move(config)) {
    for (auto& block : blocks_) init_kan(block.kan, init_rng);
    init_dense(fc1_, init_rng);
    init_dense(head_, init_rng);
}

struct HybridKanMlp::Trace {
    struct Block {
        Matrix input;
        BatchNormCache bn;
        Matrix mask;
    };
    std::vector<Block> blocks;
    Matrix fc1_input;
    Matrix fc1_pre;
    Matrix fc1_out;
    Matrix probabilities;
};

Matrix HybridKanMlp::run(const Matrix& x, Mode mode, Rng* rng, Trace* trace) {
    check_input(x, config_.input_dim);
    if (mode == Mode::Train && rng == nullptr) {
        throw InputError("train-mode forward needs a random generator for dropout");
    }
    Matrix h = x;
    for (auto& block : blocks_) {
        Matrix kan_out = kan_forward(block.kan, h);
        BatchNormCache cache;
        Matrix normalized = batchnorm_forward(block.bn, kan_out, mode, &cache);
        if (trace) trace->blocks.push_back({std::move(h), std::move(cache), Matrix()});
        if (mode == Mode::Train) {
            auto dropped = dropout_forward(block.dropout, normalized, *rng, mode);
            h = std::move(dropped.output);
            if (trace) trace->blocks.back().mask = std::move(dropped.mask);
        } else {
            h = std::move(normalized);
        }
    }
    Matrix pre = dense_forward(fc1_, h);
    Matrix act = relu(pre);
    Matrix probabilities = sigmoid(dense_forward(head_, act));
    if (trace) {
        trace->fc1_input = std::move(h);
        trace->fc1_pre = std::move(pre);
        trace->fc1_out = std::move(act);
        trace->probabilities = probabilities;
    }
    return probabilities;
}

Matrix HybridKanMlp::forward(const Matrix& x, Mode mode, Rng* rng) {
    return run(x, mode, rng, nullptr);
}

double HybridKanMlp::loss_and_gradients(const Matrix& x, std::span<const int> labels, Rng& rng,
                                        Gradients& grads) {
    Trace trace;
    run(x, Mode::Train, &rng, &trace);
    const LossResult loss = bce_loss(trace.probabilities, labels);

    const Matrix dlogit = sigmoid_backward(trace.probabilities, loss.gradient);
    const DenseGradients head_g = dense_backward(head_, trace.fc1_out, dlogit);
    const Matrix dpre = relu_backward(trace.fc1_pre, head_g.input);
    const DenseGradients fc1_g = dense_backward(fc1_, trace.fc1_input, dpre);

    grads.assign(4 * blocks_.size() + 4, {});
    std::size_t slot = 4 * blocks_.size();
    put(grads, slot, fc1_g.weight.values());
    put(grads, slot, fc1_g.bias);
    put(grads, slot, head_g.weight.values());
    put(grads, slot, head_g.bias);

    Matrix dh = fc1_g.input;
    for (std::size_t l = blocks_.size(); l-- > 0;) {
        auto& block = blocks_[l];
        const auto& saved = trace.blocks[l];
        const Matrix dnorm = dropout_backward(saved.mask, dh);
        const BatchNormGradients bn_g = batchnorm_backward(block.bn, saved.bn, dnorm);
        const KanGradients kan_g = kan_backward(block.kan, saved.input, bn_g.input);
        slot = 4 * l;
        put(grads, slot, kan_g.base_weight.values());
        put(grads, slot, kan_g.spline_weight.values());
        put(grads, slot, bn_g.gamma);
        put(grads, slot, bn_g.beta);
        dh = kan_g.input;
    }
    return loss.loss;
}

std::vector<ParamBlock> HybridKanMlp::parameters() {
    std::vector<ParamBlock> p;
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        auto& b = blocks_[l];
        const std::string kan = "kan" + std::to_string(l);
        const std::string bn = "bn" + std::to_string(l);
        p.push_back({kan + ".base_weight", b.kan.base_weight.values()});
        p.push_back({kan + ".spline_weight", b.kan.spline_weight.values()});
        p.push_back({bn + ".gamma", b.bn.gamma});
        p.push_back({bn + ".beta", b.bn.beta});
    }
    p.push_back({"fc1.weight", fc1_.weight.values()});
    p.push_back({"fc1.bias", fc1_.bias});
    p.push_back({"head.weight", head_.weight.values()});
    p.push_back({"head.bias", head_.bias});
    return p;
}

std::vector<ParamBlock> HybridKanMlp::buffers() {
    std::vector<ParamBlock> p;
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const std::string bn = "bn" + std::to_string(l);
        p.push_back({bn + ".running_mean", blocks_[l].bn.running_mean});
        p.push_back({bn + ".running_var", blocks_[l].bn.running_var});
    }
    return p;
}

std::unique_ptr<Classifier> HybridKanMlp::clone() const {
    return std::make_unique<HybridKanMlp>(*this);
}

// ---- BaselineMlp -------------------------------------------------------------

BaselineMlp::BaselineMlp(BaselineConfig config) : config_(std::move(config)) {
    validate(config_);
    std::size_t in = config_.input_dim;
    for (auto width : config_.hidden) {
        layers_.emplace_back(in, width);
        in = width;
    }
    layers_.emplace_back(in, 2);
}

BaselineMlp::BaselineMlp(BaselineConfig config, Rng& init_rng) : BaselineMlp(std::move(config)) {
    for (auto& layer : layers_) init_dense(layer, init_rng);
}

Matrix BaselineMlp::forward(const Matrix& x, Mode /*mode*/, Rng* /*rng*/) {
    check_input(x, config_.input_dim);
    Matrix h = x;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) h = relu(dense_forward(layers_[l], h));
    return softmax_rows(dense_forward(layers_.back(), h));
}

double BaselineMlp::loss_and_gradients(const Matrix& x, std::span<const int> labels, Rng& /*rng*/,
                                       Gradients& grads) {
    check_input(x, config_.input_dim);
    std::vector<Matrix> inputs;  // input to each dense layer
    std::vector<Matrix> pre;     // pre-activation of each hidden layer
    Matrix h = x;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        inputs.push_back(h);
        pre.push_back(dense_forward(layers_[l], h));
        h = relu(pre.back());
    }
    inputs.push_back(h);
    const Matrix probabilities = softmax_rows(dense_forward(layers_.back(), h));
    const LossResult loss = nll_softmax_loss(probabilities, labels);

    grads.assign(2 * layers_.size(), {});
    Matrix upstream = loss.gradient;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        if (l + 1 < layers_.size()) upstream = relu_backward(pre[l], upstream);
        DenseGradients g = dense_backward(layers_[l], inputs[l], upstream);
        std::size_t slot = 2 * l;
        put(grads, slot, g.weight.values());
        put(grads, slot, g.bias);
        upstream = std::move(g.input);
    }
    return loss.loss;
}

std::vector<ParamBlock> BaselineMlp::parameters() {
    std::vector<ParamBlock> p;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::string name = "dense" + std::to_string(l);
        p.push_back({name + ".weight", layers_[l].weight.values()});
        p.push_back({name + ".bias", layers_[l].bias});
    }
    return p;
}

std::vector<ParamBlock> BaselineMlp::buffers() { return {}; }

std::unique_ptr<Classifier> BaselineMlp::clone() const {
    return std::make_unique<BaselineMlp>(*this);
}

// ---- prediction --------------------------------------------------------------

std::vector<double> generated_probability(const Matrix& probabilities) {
    if (probabilities.cols() != 1 && probabilities.cols() != 2) {
        throw ShapeError("expected a 1- or 2-column probability matrix, got " +
                         probabilities.shape_string());
    }
    const std::size_t col = probabilities.cols() - 1;
    std::vector<double> p(probabilities.rows());
    for (std::size_t r = 0; r < p.size(); ++r) p[r] = probabilities(r, col);
    return p;
}

std::vector<int> predict_label(const Matrix& probabilities, double threshold) {
    std::vector<int> labels(probabilities.rows());
    if (probabilities.cols() == 2) {
        for (std::size_t r = 0; r < labels.size(); ++r)
            labels[r] = probabilities(r, 1) >= probabilities(r, 0) ? kGenerated : kReal;
        return labels;
    }
    const auto p = generated_probability(probabilities);
    for (std::size_t r = 0; r < labels.size(); ++r) labels[r] = p[r] >= threshold ? kGenerated : kReal;
    return labels;
}

// ---- parameter files ---------------------------------------------------------
//
// "KANM" | u16 version | u8 architecture | u32 hyperparameter byte count |
// hyperparameters | u32 block count | blocks
// block: u16 name length | name | u64 value count | f64 values
// All integers and floats little-endian. Trainable blocks come first, in
// parameters() order, followed by buffers().

namespace {

constexpr std::string_view kModelMagic = "KANM";

std::uint32_t narrow32(std::size_t v, const char* what) {
    if (v > 0xFFFFFFFFu) throw InputError(std::string(what) + " does not fit in 32 bits");
    return static_cast<std::uint32_t>(v);
}

void write_hyper(ByteWriter& w, const HybridConfig& c) {
    w.u32(narrow32(c.input_dim, "input_dim"));
    w.u32(narrow32(c.kan_widths.size(), "KAN layer count"));
    for (auto width : c.kan_widths) w.u32(narrow32(width, "KAN width"));
    w.u32(narrow32(c.hidden, "hidden width"));
    w.u32(narrow32(c.grid_size, "grid_size"));
    w.u32(narrow32(c.spline_order, "spline_order"));
    w.f64(c.range_min);
    w.f64(c.range_max);
    w.f64(c.dropout);
    w.f64(c.bn_momentum);
    w.f64(c.bn_eps);
}

void write_hyper(ByteWriter& w, const BaselineConfig& c) {
    w.u32(narrow32(c.input_dim, "input_dim"));
    w.u32(narrow32(c.hidden.size(), "hidden layer count"));
    for (auto width : c.hidden) w.u32(narrow32(width, "hidden width"));
}

// Caps list lengths read from disk before allocating.
std::size_t read_count(ByteReader& r, std::size_t limit, const char* what) {
    const std::uint32_t n = r.u32();
    if (n > limit) r.fail(std::string("implausible ") + what + " " + std::to_string(n));
    return n;
}

HybridConfig read_hybrid_hyper(ByteReader& r) {
    HybridConfig c;
    c.input_dim = r.u32();
    c.kan_widths.resize(read_count(r, 64, "KAN layer count"));
    for (auto& width : c.kan_widths) width = r.u32();
    c.hidden = r.u32();
    c.grid_size = r.u32();
    c.spline_order = r.u32();
    c.range_min = r.f64();
    c.range_max = r.f64();
    c.dropout = r.f64();
    c.bn_momentum = r.f64();
    c.bn_eps = r.f64();
    return c;
}

BaselineConfig read_baseline_hyper(ByteReader& r) {
    BaselineConfig c;
    c.input_dim = r.u32();
    c.hidden.resize(read_count(r, 64, "hidden layer count"));
    for (auto& width : c.hidden) width = r.u32();
    return c;
}

struct Header {
    Architecture arch;
    std::size_t hyper_end;
};

Header read_header(ByteReader& r) {
    if (r.remaining() < kModelMagic.size() || r.raw(kModelMagic.size(), "magic") != kModelMagic) {
        throw FormatError("not a model parameter file: bad magic at byte offset 0");
    }
    const std::uint16_t version = r.u16();
    if (version != kModelFormatVersion) {
        throw FormatError("unsupported model format version " + std::to_string(version) +
                          " (expected " + std::to_string(kModelFormatVersion) + ")");
    }
    const std::uint8_t tag = r.u8();
    if (tag != static_cast<std::uint8_t>(Architecture::HybridKanMlp) &&
        tag != static_cast<std::uint8_t>(Architecture::BaselineMlp)) {
        throw ArchitectureError("unknown architecture tag " + std::to_string(tag) +
                                " at byte offset " + std::to_string(r.offset() - 1));
    }
    const std::uint32_t hyper_len = r.u32();
    return {static_cast<Architecture>(tag), r.offset() + hyper_len};
}

void read_blocks(ByteReader& r, Classifier& model) {
    auto expected = model.parameters();
    for (auto& b : model.buffers()) expected.push_back(std::move(b));
    const std::uint32_t count = r.u32();
    if (count != expected.size()) {
        r.fail("expected " + std::to_string(expected.size()) + " parameter blocks, found " +
               std::to_string(count));
    }
    for (auto& block : expected) {
        const std::uint16_t name_len = r.u16();
        const std::string name = r.raw(name_len, "block name");
        if (name != block.name) r.fail("expected block '" + block.name + "', found '" + name + "'");
        const std::uint64_t n = r.u64();
        if (n != block.values.size()) {
            r.fail("block '" + name + "' holds " + std::to_string(n) + " values, expected " +
                   std::to_string(block.values.size()));
        }
        for (auto& v : block.values) v = r.f64();
    }
    if (r.remaining() != 0) r.fail("trailing bytes after the last parameter block");
}

template <typename Model, typename Config>
Model finish_load(ByteReader& r, const Header& h, Config config) {
    if (r.offset() != h.hyper_end) r.fail("hyperparameter block length mismatch");
    try {
        Model model(std::move(config));
        read_blocks(r, model);
        return model;
    } catch (const InputError& e) {
        throw FormatError(std::string("invalid hyperparameters: ") + e.what());
    }
}

}  // namespace

std::vector<std::uint8_t> save_params(const Classifier& model) {
    ByteWriter w;
    w.raw(kModelMagic);
    w.u16(kModelFormatVersion);
    w.u8(static_cast<std::uint8_t>(model.architecture()));

    ByteWriter hyper;
    if (const auto* h = dynamic_cast<const HybridKanMlp*>(&model)) {
        write_hyper(hyper, h->config());
    } else if (const auto* b = dynamic_cast<const BaselineMlp*>(&model)) {
        write_hyper(hyper, b->config());
    } else {
        throw ArchitectureError("cannot serialize an unknown classifier type");
    }
    w.u32(narrow32(hyper.size(), "hyperparameter block"));
    for (auto byte : hyper.bytes()) w.u8(byte);

    auto blocks = model.parameters();
    for (auto& b : model.buffers()) blocks.push_back(std::move(b));
    w.u32(narrow32(blocks.size(), "block count"));
    for (const auto& block : blocks) {
        w.u16(static_cast<std::uint16_t>(block.name.size()));
        w.raw(block.name);
        w.u64(block.values.size());
        for (double v : block.values) w.f64(v);
    }
    return std::move(w).take();
}

std::unique_ptr<Classifier> load_params(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const Header h = read_header(r);
    if (h.arch == Architecture::HybridKanMlp) {
        return std::make_unique<HybridKanMlp>(finish_load<HybridKanMlp>(r, h, read_hybrid_hyper(r)));
    }
    return std::make_unique<BaselineMlp>(finish_load<BaselineMlp>(r, h, read_baseline_hyper(r)));
}

HybridKanMlp load_hybrid(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const Header h = read_header(r);
    if (h.arch != Architecture::HybridKanMlp) {
        throw ArchitectureError("model file holds a '" + std::string(architecture_name(h.arch)) +
                                "' model, expected 'hybrid'");
    }
    return finish_load<HybridKanMlp>(r, h, read_hybrid_hyper(r));
}

BaselineMlp load_baseline(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const Header h = read_header(r);
    if (h.arch != Architecture::BaselineMlp) {
        throw ArchitectureError("model file holds a '" + std::string(architecture_name(h.arch)) +
                                "' model, expected 'baseline'");
    }
    return finish_load<BaselineMlp>(r, h, read_baseline_hyper(r));
}

void save_model_file(const Classifier& model, const std::string& path) {
    write_file_bytes(path, save_params(model));
}

std::unique_ptr<Classifier> load_model_file(const std::string& path) {
    return load_params(read_file_bytes(path));
}

}  // namespace kanmlp
