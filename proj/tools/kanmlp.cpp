#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace kanmlp::cli;

int main(int argc, char** argv) {
    CLI::App app{"Hybrid KAN-MLP and baseline MLP classifiers for image embeddings"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "Train a model from a JSON run config");
    std::string config_path;
    TrainOverrides overrides;
    train->add_option("config", config_path, "Run config (JSON)")->required();
    train->add_option("--seed", overrides.seed, "Override the run seed");
    train->add_option("--epochs", overrides.epochs, "Override training.epochs");
    train->add_option("--batch-size", overrides.batch_size, "Override training.batch_size");
    train->add_option("--learning-rate", overrides.learning_rate, "Override training.learning_rate");
    train->add_option("--validation-fraction", overrides.validation_fraction,
                      "Override training.validation_fraction");
    train->add_option("--output-dir", overrides.output_dir, "Override output_dir");
    train->add_option("--train", overrides.train_path, "Override data.train");

    auto* eval = app.add_subcommand("eval", "Evaluate a model; writes report, confusion, ROC and AUC files");
    std::string model_path, dataset_path, output_dir;
    eval->add_option("model", model_path, "Model file")->required();
    eval->add_option("dataset", dataset_path, "Embedding dataset (.jsonl or binary)")->required();
    eval->add_option("output_dir", output_dir, "Directory for the result files")->required();

    auto* predict = app.add_subcommand("predict", "Score every record: id,p_generated,label");
    std::string predict_out;
    predict->add_option("model", model_path, "Model file")->required();
    predict->add_option("dataset", dataset_path, "Embedding dataset")->required();
    predict->add_option("-o,--output", predict_out, "CSV path (default: standard output)");

    auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
    kanmlp::GradCheckOptions gc;
    gradcheck->add_option("--instances", gc.instances, "Random instances per component")
        ->check(CLI::PositiveNumber);
    gradcheck->add_option("--seed", gc.seed, "Seed for the random instances");

    auto* summarize = app.add_subcommand("summarize", "Per-source and per-label record counts");
    summarize->add_option("dataset", dataset_path, "Embedding dataset")->required();

    auto* synth = app.add_subcommand("synth", "Write a two-Gaussian synthetic dataset");
    std::string synth_out;
    std::size_t n_per_class = 1000;
    std::size_t dim = kanmlp::kEmbeddingDim;
    double separation = 6.0;
    std::uint64_t synth_seed = 7;
    synth->add_option("output", synth_out, "Output path (.bin/.kemb for binary, else JSON lines)")
        ->required();
    synth->add_option("--n-per-class", n_per_class, "Records per class")->capture_default_str();
    synth->add_option("--dim", dim, "Embedding dimension")->capture_default_str();
    synth->add_option("--separation", separation, "Distance between class means")->capture_default_str();
    synth->add_option("--seed", synth_seed, "Seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error[usage]: " << e.what() << '\n';
        return kExitInput;
    }

    if (*train) return cmd_train(config_path, overrides, std::cout, std::cerr);
    if (*eval) return cmd_eval(model_path, dataset_path, output_dir, std::cout, std::cerr);
    if (*predict) return cmd_predict(model_path, dataset_path, predict_out, std::cout, std::cerr);
    if (*gradcheck) return cmd_gradcheck(gc, {}, std::cout, std::cerr);
    if (*summarize) return cmd_summarize(dataset_path, std::cout, std::cerr);
    if (*synth) {
        return cmd_synth(synth_out, n_per_class, dim, separation, synth_seed, std::cout, std::cerr);
    }
    return kExitInput;
}
