#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "kanmlp/gradcheck.hpp"
#include "kanmlp/models.hpp"
#include "kanmlp/training.hpp"

namespace kanmlp::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitInput = 2,
    kExitDivergence = 3,
    kExitIncompatible = 4,
    kExitVerification = 5,
};

inline constexpr std::string_view kRunConfigSchema = "kanmlp.run.v1";
inline constexpr std::string_view kRunManifestSchema = "kanmlp.run-manifest.v1";

struct RunConfig {
    Architecture architecture = Architecture::HybridKanMlp;
    HybridConfig hybrid;
    BaselineConfig baseline;
    TrainConfig training;  // training.seed is the run seed
    std::string train_path;
    std::optional<std::string> validation_path;
    std::string output_dir = "runs";
};

// Relative dataset and output paths resolve against base_dir (the config file's
// directory). Throws InputError on unknown keys, wrong types or a schema mismatch.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::string& path);

// Canonical JSON echo, including the schema field.
std::string run_config_json(const RunConfig& config);

// "<arch>-s<seed>-<8 hex digits>", the hash covering every field but output_dir.
std::string run_directory_name(const RunConfig& config);

struct TrainOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> learning_rate;
    std::optional<double> validation_fraction;
    std::optional<std::string> output_dir;
    std::optional<std::string> train_path;
};

void apply_overrides(RunConfig& config, const TrainOverrides& overrides);

std::unique_ptr<Classifier> build_model(const RunConfig& config);

// Writes model.kanm, train_report.csv and run_manifest.json under
// <output_dir>/<run_directory_name>/ and returns that directory.
std::filesystem::path train_run(const RunConfig& config, std::ostream& out);

// ---- subcommands ----------------------------------------------------------------
// Each returns an exit code and reports failures on `err` as "error[<kind>]: message".

int cmd_train(const std::string& config_path, const TrainOverrides& overrides, std::ostream& out,
              std::ostream& err);

// Writes report.csv, confusion.csv, roc.csv and auc.txt into output_dir.
int cmd_eval(const std::string& model_path, const std::string& dataset_path,
             const std::string& output_dir, std::ostream& out, std::ostream& err);

// id,p_generated,label rows to output_path, or to `out` when output_path is empty.
int cmd_predict(const std::string& model_path, const std::string& dataset_path,
                const std::string& output_path, std::ostream& out, std::ostream& err);

// `extra` checks run after the standard suite (used to test the harness itself).
int cmd_gradcheck(const GradCheckOptions& options, std::span<const GradCheck> extra,
                  std::ostream& out, std::ostream& err);

int cmd_summarize(const std::string& dataset_path, std::ostream& out, std::ostream& err);

int cmd_synth(const std::string& output_path, std::size_t n_per_class, std::size_t dim,
              double separation, std::uint64_t seed, std::ostream& out, std::ostream& err);

// Maps an exception onto the exit-code contract and prints the prefixed message.
int report_error(const std::exception& e, std::ostream& err);

}  // namespace kanmlp::cli
