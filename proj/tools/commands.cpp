#include "commands.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "kanmlp/dataset.hpp"
#include "kanmlp/error.hpp"
#include "kanmlp/metrics.hpp"

namespace kanmlp::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void reject_unknown_keys(const ojson& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    if (!obj.is_object()) throw InputError(where + " must be a JSON object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key)) throw InputError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void read_field(const ojson& obj, const char* key, T& target, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        target = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InputError(where + "." + key + " has the wrong type");
    }
}

// Non-negative integers only; nlohmann would otherwise wrap -1 into a huge size_t.
void read_count(const ojson& obj, const char* key, std::size_t& target, const std::string& where) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number_unsigned()) throw InputError(where + "." + key + " must be a non-negative integer");
    target = v.get<std::size_t>();
}

std::string resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return (path.is_absolute() || base.empty() ? path : base / path).lexically_normal().string();
}

ojson model_json(const RunConfig& c) {
    ojson m;
    if (c.architecture == Architecture::HybridKanMlp) {
        const auto& h = c.hybrid;
        m["input_dim"] = h.input_dim;
        m["kan_widths"] = h.kan_widths;
        m["hidden"] = h.hidden;
        m["grid_size"] = h.grid_size;
        m["spline_order"] = h.spline_order;
        m["range_min"] = h.range_min;
        m["range_max"] = h.range_max;
        m["dropout"] = h.dropout;
        m["bn_momentum"] = h.bn_momentum;
        m["bn_eps"] = h.bn_eps;
    } else {
        m["input_dim"] = c.baseline.input_dim;
        m["hidden"] = c.baseline.hidden;
    }
    return m;
}

ojson config_json(const RunConfig& c, bool with_output_dir) {
    ojson j;
    j["schema"] = kRunConfigSchema;
    j["architecture"] = architecture_name(c.architecture);
    j["seed"] = c.training.seed;
    j["model"] = model_json(c);
    ojson t;
    t["learning_rate"] = c.training.learning_rate;
    t["batch_size"] = c.training.batch_size;
    t["epochs"] = c.training.epochs;
    t["validation_fraction"] = c.training.validation_fraction;
    t["early_stop_patience"] =
        c.training.early_stop_patience ? ojson(*c.training.early_stop_patience) : ojson(nullptr);
    j["training"] = t;
    ojson d;
    d["train"] = c.train_path;
    d["validation"] = c.validation_path ? ojson(*c.validation_path) : ojson(nullptr);
    j["data"] = d;
    if (with_output_dir) j["output_dir"] = c.output_dir;
    return j;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string num(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw InputError("cannot write " + path.string());
}

fs::path ensure_directory(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory " + dir);
    return fs::path(dir);
}

Dataset load_for_model(const Classifier& model, const std::string& path) {
    return load_dataset(path, model.input_dim());
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text, const fs::path& base_dir) {
    ojson j;
    try {
        j = ojson::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown_keys(j, {"schema", "architecture", "seed", "model", "training", "data", "output_dir"},
                        "config");
    if (!j.contains("schema") || !j["schema"].is_string() ||
        j["schema"].get<std::string>() != kRunConfigSchema) {
        throw InputError("config.schema must be \"" + std::string(kRunConfigSchema) + "\"");
    }

    RunConfig c;
    if (j.contains("architecture")) {
        if (!j["architecture"].is_string()) throw InputError("config.architecture must be a string");
        try {
            c.architecture = parse_architecture(j["architecture"].get<std::string>());
        } catch (const Error& e) {
            throw InputError(std::string("config.architecture: ") + e.what());
        }
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw InputError("config.seed must be a non-negative integer");
        c.training.seed = j["seed"].get<std::uint64_t>();
    }

    if (j.contains("model")) {
        const auto& m = j["model"];
        if (c.architecture == Architecture::HybridKanMlp) {
            reject_unknown_keys(m, {"input_dim", "kan_widths", "hidden", "grid_size", "spline_order",
                                    "range_min", "range_max", "dropout", "bn_momentum", "bn_eps"},
                                "config.model");
            auto& h = c.hybrid;
            read_count(m, "input_dim", h.input_dim, "config.model");
            read_field(m, "kan_widths", h.kan_widths, "config.model");
            read_count(m, "hidden", h.hidden, "config.model");
            read_count(m, "grid_size", h.grid_size, "config.model");
            read_count(m, "spline_order", h.spline_order, "config.model");
            read_field(m, "range_min", h.range_min, "config.model");
            read_field(m, "range_max", h.range_max, "config.model");
            read_field(m, "dropout", h.dropout, "config.model");
            read_field(m, "bn_momentum", h.bn_momentum, "config.model");
            read_field(m, "bn_eps", h.bn_eps, "config.model");
        } else {
            reject_unknown_keys(m, {"input_dim", "hidden"}, "config.model");
            read_count(m, "input_dim", c.baseline.input_dim, "config.model");
            read_field(m, "hidden", c.baseline.hidden, "config.model");
        }
    }

    if (j.contains("training")) {
        const auto& t = j["training"];
        reject_unknown_keys(t, {"learning_rate", "batch_size", "epochs", "validation_fraction",
                                "early_stop_patience"},
                            "config.training");
        read_field(t, "learning_rate", c.training.learning_rate, "config.training");
        read_count(t, "batch_size", c.training.batch_size, "config.training");
        read_count(t, "epochs", c.training.epochs, "config.training");
        read_field(t, "validation_fraction", c.training.validation_fraction, "config.training");
        if (t.contains("early_stop_patience") && !t["early_stop_patience"].is_null()) {
            std::size_t patience = 0;
            read_count(t, "early_stop_patience", patience, "config.training");
            c.training.early_stop_patience = patience;
        }
    }

    if (!j.contains("data")) throw InputError("config.data.train is required");
    const auto& d = j["data"];
    reject_unknown_keys(d, {"train", "validation"}, "config.data");
    if (!d.contains("train") || !d["train"].is_string()) {
        throw InputError("config.data.train must be a path string");
    }
    c.train_path = resolve(base_dir, d["train"].get<std::string>());
    if (d.contains("validation") && !d["validation"].is_null()) {
        if (!d["validation"].is_string()) throw InputError("config.data.validation must be a path string");
        c.validation_path = resolve(base_dir, d["validation"].get<std::string>());
    }

    if (j.contains("output_dir")) {
        if (!j["output_dir"].is_string()) throw InputError("config.output_dir must be a string");
        c.output_dir = j["output_dir"].get<std::string>();
    }
    c.output_dir = resolve(base_dir, c.output_dir);

    c.training.validate();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), fs::path(path).parent_path());
}

std::string run_config_json(const RunConfig& config) { return config_json(config, true).dump(2); }

std::string run_directory_name(const RunConfig& config) {
    std::ostringstream name;
    name << architecture_name(config.architecture) << "-s" << config.training.seed << '-'
         << std::hex << std::setw(8) << std::setfill('0')
         << (fnv1a(config_json(config, false).dump()) & 0xffffffffULL);
    return name.str();
}

void apply_overrides(RunConfig& config, const TrainOverrides& o) {
    if (o.seed) config.training.seed = *o.seed;
    if (o.epochs) config.training.epochs = *o.epochs;
    if (o.batch_size) config.training.batch_size = *o.batch_size;
    if (o.learning_rate) config.training.learning_rate = *o.learning_rate;
    if (o.validation_fraction) config.training.validation_fraction = *o.validation_fraction;
    if (o.output_dir) config.output_dir = *o.output_dir;
    if (o.train_path) config.train_path = *o.train_path;
    config.training.validate();
}

std::unique_ptr<Classifier> build_model(const RunConfig& config) {
    Rng init = derive_rng(config.training.seed, static_cast<std::uint64_t>(SeedStream::Init));
    try {
        if (config.architecture == Architecture::HybridKanMlp) {
            return std::make_unique<HybridKanMlp>(config.hybrid, init);
        }
        return std::make_unique<BaselineMlp>(config.baseline, init);
    } catch (const InputError& e) {
        throw InputError(std::string("config.model: ") + e.what());
    }
}

fs::path train_run(const RunConfig& config, std::ostream& out) {
    auto model = build_model(config);
    const Dataset train = load_for_model(*model, config.train_path);
    for (const auto& w : norm_warnings(train)) out << "warning: " << w << '\n';

    TrainReport report;
    if (config.validation_path) {
        const Dataset validation = load_for_model(*model, *config.validation_path);
        report = fit(*model, train, validation, config.training);
    } else {
        report = fit(*model, train, config.training);
    }

    const fs::path dir = ensure_directory((fs::path(config.output_dir) / run_directory_name(config)).string());
    save_model_file(*model, (dir / "model.kanm").string());

    std::ostringstream csv;
    write_train_report_csv(report, csv);
    write_text(dir / "train_report.csv", csv.str());

    ojson manifest;
    manifest["schema"] = kRunManifestSchema;
    manifest["run"] = run_directory_name(config);
    manifest["seed"] = config.training.seed;
    manifest["formats"] = {{"model", kModelFormatVersion}, {"dataset", kDatasetFormatVersion}};
    manifest["parameter_count"] = model->parameter_count();
    manifest["train_records"] = train.size();
    manifest["epochs_completed"] = report.epochs.size();
    manifest["stopped_early"] = report.stopped_early;
    if (!report.epochs.empty()) {
        const auto& last = report.epochs.back();
        const auto maybe = [](double v) { return std::isnan(v) ? ojson(nullptr) : ojson(v); };
        manifest["final"] = {{"train_loss", last.train_loss},
                             {"val_loss", maybe(last.val_loss)},
                             {"val_f1", maybe(last.val_f1)}};
    }
    manifest["config"] = config_json(config, true);
    write_text(dir / "run_manifest.json", manifest.dump(2) + "\n");

    out << "run directory: " << dir.string() << '\n';
    out << "epochs: " << report.epochs.size() << (report.stopped_early ? " (stopped early)" : "")
        << ", wall time " << std::fixed << std::setprecision(1) << report.wall_seconds << " s\n"
        << std::defaultfloat;
    if (!report.epochs.empty()) {
        const auto& last = report.epochs.back();
        out << "final train_loss " << num(last.train_loss) << ", val_loss " << num(last.val_loss)
            << ", val_f1 " << num(last.val_f1) << '\n';
    }
    return dir;
}

int report_error(const std::exception& e, std::ostream& err) {
    const auto emit = [&](const char* kind, int code) {
        err << "error[" << kind << "]: " << e.what() << '\n';
        return code;
    };
    if (dynamic_cast<const DivergenceError*>(&e)) return emit("divergence", kExitDivergence);
    if (dynamic_cast<const ArchitectureError*>(&e)) return emit("incompatible", kExitIncompatible);
    if (dynamic_cast<const DimensionError*>(&e)) return emit("incompatible", kExitIncompatible);
    if (dynamic_cast<const ShapeError*>(&e)) return emit("incompatible", kExitIncompatible);
    if (dynamic_cast<const FormatError*>(&e)) return emit("format", kExitInput);
    if (dynamic_cast<const TrainingError*>(&e)) return emit("training", kExitInput);
    if (dynamic_cast<const SplitError*>(&e)) return emit("split", kExitInput);
    if (dynamic_cast<const MetricError*>(&e)) return emit("metric", kExitInput);
    if (dynamic_cast<const InputError*>(&e)) return emit("input", kExitInput);
    if (dynamic_cast<const fs::filesystem_error*>(&e)) return emit("io", kExitInput);
    return emit("internal", kExitInternal);
}

int cmd_train(const std::string& config_path, const TrainOverrides& overrides, std::ostream& out,
              std::ostream& err) {
    try {
        RunConfig config;
        try {
            config = load_run_config(config_path);
            apply_overrides(config, overrides);
        } catch (const InputError& e) {
            err << "error[config]: " << e.what() << '\n';
            return kExitInput;
        }
        train_run(config, out);
        return kExitOk;
    } catch (const std::exception& e) {
        return report_error(e, err);
    }
}

int cmd_eval(const std::string& model_path, const std::string& dataset_path,
             const std::string& output_dir, std::ostream& out, std::ostream& err) {
    try {
        auto model = load_model_file(model_path);
        const Dataset data = load_for_model(*model, dataset_path);
        for (const auto& w : norm_warnings(data)) err << "warning: " << w << '\n';

        const auto labels = label_vector(data);
        const Matrix probs = model->forward(feature_matrix(data), Mode::Eval);
        const auto predicted = predict_label(probs);
        const ClassReport report = per_class_report(labels, predicted);

        const fs::path dir = ensure_directory(output_dir);
        std::ostringstream report_csv;
        write_report_csv_header(report_csv);
        write_report_csv_rows(report, fs::path(dataset_path).stem().string(),
                              std::string(architecture_name(model->architecture())), report_csv);
        write_text(dir / "report.csv", report_csv.str());

        std::ostringstream confusion_csv;
        write_confusion_csv(report.matrix, confusion_csv);
        write_text(dir / "confusion.csv", confusion_csv.str());

        std::ostringstream roc_csv;
        std::string auc_text = "nan";
        const auto scores = generated_probability(probs);
        const bool both = report.real.support > 0 && report.generated.support > 0;
        if (both) {
            const RocCurve curve = roc_curve(scores, labels);
            write_roc_csv(curve, roc_csv);
            auc_text = num(curve.auc);
        } else {
            roc_csv << kRocCsvHeader << '\n';
            err << "warning: ROC/AUC undefined, dataset holds a single class\n";
        }
        write_text(dir / "roc.csv", roc_csv.str());
        write_text(dir / "auc.txt", auc_text + "\n");

        out << "records " << data.size() << ", accuracy " << num(report.accuracy) << ", auc "
            << auc_text << '\n';
        out << report_csv.str();
        return kExitOk;
    } catch (const std::exception& e) {
        return report_error(e, err);
    }
}

int cmd_predict(const std::string& model_path, const std::string& dataset_path,
                const std::string& output_path, std::ostream& out, std::ostream& err) {
    try {
        auto model = load_model_file(model_path);
        const Dataset data = load_for_model(*model, dataset_path);

        std::ostringstream csv;
        csv << "id,p_generated,label\n";
        if (!data.empty()) {
            const Matrix probs = model->forward(feature_matrix(data), Mode::Eval);
            const auto p = generated_probability(probs);
            const auto predicted = predict_label(probs);
            for (std::size_t i = 0; i < data.size(); ++i) {
                csv << data.records[i].id << ',' << num(p[i]) << ',' << label_name(predicted[i])
                    << '\n';
            }
        }
        if (output_path.empty()) {
            out << csv.str();
        } else {
            const fs::path parent = fs::path(output_path).parent_path();
            if (!parent.empty()) ensure_directory(parent.string());
            write_text(output_path, csv.str());
        }
        return kExitOk;
    } catch (const std::exception& e) {
        return report_error(e, err);
    }
}

int cmd_gradcheck(const GradCheckOptions& options, std::span<const GradCheck> extra,
                  std::ostream& out, std::ostream& err) {
    try {
        auto checks = standard_gradchecks();
        checks.insert(checks.end(), extra.begin(), extra.end());
        const auto results = run_gradchecks(checks, options);

        out << std::left << std::setw(20) << "component" << std::right << std::setw(10)
            << "instances" << std::setw(16) << "worst_rel_err" << "  status\n";
        std::vector<std::string> failed;
        for (const auto& r : results) {
            out << std::left << std::setw(20) << r.component << std::right << std::setw(10)
                << r.instances << std::setw(16) << std::scientific << std::setprecision(3)
                << r.worst_error << std::defaultfloat << "  " << (r.passed ? "ok" : "FAIL") << '\n';
            if (!r.passed) failed.push_back(r.component);
        }
        if (!failed.empty()) {
            err << "error[verification]: gradient check failed for";
            for (const auto& name : failed) err << ' ' << name;
            err << " (tolerance " << options.tolerance << ")\n";
            return kExitVerification;
        }
        out << "all " << results.size() << " components within " << options.tolerance << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        return report_error(e, err);
    }
}

int cmd_summarize(const std::string& dataset_path, std::ostream& out, std::ostream& err) {
    try {
        const Dataset data = load_dataset(dataset_path, 0);
        print_manifest(summarize(data), out);
        for (const auto& w : norm_warnings(data)) err << "warning: " << w << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        return report_error(e, err);
    }
}

int cmd_synth(const std::string& output_path, std::size_t n_per_class, std::size_t dim,
              double separation, std::uint64_t seed, std::ostream& out, std::ostream& err) {
    try {
        if (dim == 0) throw InputError("dim must be positive");
        if (!std::isfinite(separation) || separation < 0.0) {
            throw InputError("separation must be a non-negative number");
        }
        const Dataset data = synthetic_gaussians(n_per_class, dim, separation, seed);
        const fs::path parent = fs::path(output_path).parent_path();
        if (!parent.empty()) ensure_directory(parent.string());
        write_dataset(data, output_path);
        out << "wrote " << data.size() << " records to " << output_path << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        return report_error(e, err);
    }
}

}  // namespace kanmlp::cli
