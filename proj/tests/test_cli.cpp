#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "commands.hpp"
#include "kanmlp/dataset.hpp"
#include "kanmlp/error.hpp"

using namespace kanmlp;
using namespace kanmlp::cli;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               (std::string("kanmlp-cli-") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    void write(const std::string& name, const std::string& text) const {
        std::ofstream(path(name), std::ios::binary) << text;
    }

    std::string config(const std::string& extra_training = "", const std::string& arch = "baseline",
                       const std::string& model = R"({"input_dim": 16, "hidden": [8]})") const {
        return R"({"schema": "kanmlp.run.v1", "architecture": ")" + arch + R"(", "seed": 3,
                   "model": )" + model + R"(,
                   "training": {"epochs": 3)" + extra_training + R"(},
                   "data": {"train": "train.jsonl"}, "output_dir": "runs"})";
    }

    fs::path dir_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

// Two-feature baseline whose logits are the features themselves.
void write_identity_model(const std::string& path) {
    BaselineMlp m(BaselineConfig{2, {}});
    auto& layer = m.layers()[0];
    layer.weight = Matrix{{5.0, 0.0}, {0.0, 5.0}};
    layer.bias = {0.0, 0.0};
    save_model_file(m, path);
}

Dataset separable_pairs() {
    Dataset d;
    d.dim = 2;
    for (int i = 0; i < 10; ++i) {
        d.records.push_back({"r" + std::to_string(i), kReal, "cam", {1.0, 0.0}});
        d.records.push_back({"g" + std::to_string(i), kGenerated, "gen", {0.0, 1.0}});
    }
    return d;
}

int run_tool(const std::string& args) {
    const int status = std::system((std::string(KANMLP_TOOL_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_F(CliTest, ConfigDefaultsAndPathResolution) {
    const auto c = parse_run_config(R"({"schema": "kanmlp.run.v1", "data": {"train": "d/t.jsonl"}})", dir_);
    EXPECT_EQ(c.architecture, Architecture::HybridKanMlp);
    EXPECT_EQ(c.hybrid, HybridConfig{});
    EXPECT_EQ(c.training.learning_rate, 1e-3);
    EXPECT_EQ(c.training.batch_size, 64u);
    EXPECT_EQ(c.training.epochs, 100u);
    EXPECT_FALSE(c.training.early_stop_patience);
    EXPECT_EQ(c.train_path, (dir_ / "d/t.jsonl").string());
    EXPECT_EQ(c.output_dir, (dir_ / "runs").string());
}

TEST_F(CliTest, ConfigErrors) {
    EXPECT_THROW(parse_run_config("{", dir_), InputError);
    EXPECT_THROW(parse_run_config(R"({"data": {"train": "x"}})", dir_), InputError);
    EXPECT_THROW(parse_run_config(R"({"schema": "kanmlp.run.v1", "data": {"train": "x"}, "epochs": 3})", dir_),
                 InputError);
    EXPECT_THROW(parse_run_config(R"({"schema": "kanmlp.run.v1", "data": {"train": 4}})", dir_), InputError);
    EXPECT_THROW(parse_run_config(
                     R"({"schema": "kanmlp.run.v1", "data": {"train": "x"}, "training": {"batch_size": 1}})", dir_),
                 InputError);
    EXPECT_THROW(parse_run_config(
                     R"({"schema": "kanmlp.run.v1", "data": {"train": "x"}, "training": {"epochs": -1}})", dir_),
                 InputError);
    EXPECT_THROW(parse_run_config(R"({"schema": "kanmlp.run.v1", "architecture": "cnn", "data": {"train": "x"}})", dir_),
                 InputError);
}

TEST_F(CliTest, RunDirectoryNameIsStable) {
    auto c = parse_run_config(config(), dir_);
    const auto name = run_directory_name(c);
    EXPECT_EQ(name.rfind("baseline-s3-", 0), 0u) << name;
    EXPECT_EQ(name.size(), std::string("baseline-s3-").size() + 8);
    EXPECT_EQ(run_directory_name(c), name);
    c.output_dir = "elsewhere";
    EXPECT_EQ(run_directory_name(c), name);
    c.training.epochs = 4;
    EXPECT_NE(run_directory_name(c), name);
    // The echo parses back to the same configuration.
    EXPECT_EQ(run_config_json(parse_run_config(run_config_json(c), {})), run_config_json(c));
}

TEST_F(CliTest, TrainWritesArtifactsDeterministically) {
    write_dataset(synthetic_gaussians(60, 16, 6.0, 1), path("train.jsonl"));
    write("run.json", config());
    std::ostringstream out, err;
    ASSERT_EQ(cmd_train(path("run.json"), {}, out, err), kExitOk) << err.str();
    const auto run = dir_ / "runs" / run_directory_name(load_run_config(path("run.json")));
    for (const char* f : {"model.kanm", "train_report.csv", "run_manifest.json"}) {
        EXPECT_TRUE(fs::exists(run / f)) << f;
    }
    const auto model = slurp(run / "model.kanm");
    const auto report = slurp(run / "train_report.csv");
    const auto manifest = slurp(run / "run_manifest.json");
    EXPECT_EQ(report.substr(0, report.find('\n')), "epoch,train_loss,val_loss,val_f1");
    EXPECT_NE(manifest.find("\"seed\": 3"), std::string::npos);
    EXPECT_NE(manifest.find("\"model\": 1"), std::string::npos);

    std::ostringstream out2, err2;
    ASSERT_EQ(cmd_train(path("run.json"), {}, out2, err2), kExitOk);
    EXPECT_EQ(slurp(run / "model.kanm"), model);
    EXPECT_EQ(slurp(run / "train_report.csv"), report);
    EXPECT_EQ(slurp(run / "run_manifest.json"), manifest);

    // Flags override scalar fields and land in a different run directory.
    TrainOverrides o;
    o.seed = 4;
    std::ostringstream out3, err3;
    ASSERT_EQ(cmd_train(path("run.json"), o, out3, err3), kExitOk);
    EXPECT_NE(out3.str().find("baseline-s4-"), std::string::npos) << out3.str();
}

TEST_F(CliTest, TrainErrorsMapToExitCodes) {
    write("run.json", config());
    std::ostringstream out, err;
    EXPECT_EQ(cmd_train(path("run.json"), {}, out, err), kExitInput);
    EXPECT_NE(err.str().find("train.jsonl"), std::string::npos) << err.str();
    EXPECT_EQ(err.str().rfind("error[", 0), 0u);

    write("bad.json", "{\"schema\": \"nope\"}");
    std::ostringstream e2;
    EXPECT_EQ(cmd_train(path("bad.json"), {}, out, e2), kExitInput);
    EXPECT_EQ(e2.str().rfind("error[config]", 0), 0u) << e2.str();

    write_dataset(synthetic_gaussians(60, 16, 6.0, 1), path("train.jsonl"));
    write("diverge.json", config(", \"learning_rate\": 1e300"));
    std::ostringstream e3;
    EXPECT_EQ(cmd_train(path("diverge.json"), {}, out, e3), kExitDivergence);
    EXPECT_EQ(e3.str().rfind("error[divergence]", 0), 0u) << e3.str();

    write("wrongdim.json", config("", "baseline", R"({"input_dim": 8, "hidden": [4]})"));
    std::ostringstream e4;
    EXPECT_EQ(cmd_train(path("wrongdim.json"), {}, out, e4), kExitIncompatible);
}

TEST_F(CliTest, EvalPerfectClassifier) {
    write_identity_model(path("m.kanm"));
    write_dataset(separable_pairs(), path("pairs.jsonl"));
    std::ostringstream out, err;
    ASSERT_EQ(cmd_eval(path("m.kanm"), path("pairs.jsonl"), path("eval"), out, err), kExitOk) << err.str();
    EXPECT_EQ(slurp(dir_ / "eval" / "report.csv"),
              "dataset,approach,class,precision,recall,f1,support\n"
              "pairs,baseline,real,1.0000,1.0000,1.0000,10\n"
              "pairs,baseline,generated,1.0000,1.0000,1.0000,10\n");
    EXPECT_EQ(slurp(dir_ / "eval" / "confusion.csv"),
              ",actual_generated,actual_real\npredicted_generated,10,0\npredicted_real,0,10\n");
    EXPECT_EQ(slurp(dir_ / "eval" / "auc.txt"), "1\n");
    EXPECT_EQ(slurp(dir_ / "eval" / "roc.csv").rfind("fpr,tpr,threshold\n", 0), 0u);

    // Idempotent.
    const auto roc = slurp(dir_ / "eval" / "roc.csv");
    std::ostringstream out2, err2;
    ASSERT_EQ(cmd_eval(path("m.kanm"), path("pairs.jsonl"), path("eval"), out2, err2), kExitOk);
    EXPECT_EQ(slurp(dir_ / "eval" / "roc.csv"), roc);
}

TEST_F(CliTest, EvalIncompatibleAndBadInputs) {
    write_identity_model(path("m.kanm"));
    write_dataset(synthetic_gaussians(5, 16, 1.0, 1), path("wide.jsonl"));
    std::ostringstream out, err;
    EXPECT_EQ(cmd_eval(path("m.kanm"), path("wide.jsonl"), path("eval"), out, err), kExitIncompatible);
    EXPECT_EQ(err.str().rfind("error[incompatible]", 0), 0u) << err.str();

    write("garbage.kanm", "not a model");
    std::ostringstream e2;
    EXPECT_EQ(cmd_eval(path("garbage.kanm"), path("wide.jsonl"), path("eval"), out, e2), kExitInput);
    EXPECT_EQ(e2.str().rfind("error[format]", 0), 0u) << e2.str();
}

TEST_F(CliTest, PredictRows) {
    write_identity_model(path("m.kanm"));
    write_dataset(separable_pairs(), path("pairs.jsonl"));
    std::ostringstream out, err;
    ASSERT_EQ(cmd_predict(path("m.kanm"), path("pairs.jsonl"), "", out, err), kExitOk);
    std::istringstream lines(out.str());
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "id,p_generated,label");
    std::getline(lines, line);
    // Softmax class-1 probability of logits (5, 0).
    const double p = 1.0 / (1.0 + std::exp(5.0));
    std::ostringstream want;
    want << "r0," << std::setprecision(17) << p;
    EXPECT_NEAR(std::stod(line.substr(3, line.rfind(',') - 3)), p, 1e-16);
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "real");
    std::getline(lines, line);
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "generated");

    write("empty.jsonl", "");
    std::ostringstream out2;
    ASSERT_EQ(cmd_predict(path("m.kanm"), path("empty.jsonl"), path("p.csv"), out2, err), kExitOk);
    EXPECT_EQ(slurp(dir_ / "p.csv"), "id,p_generated,label\n");
}

TEST_F(CliTest, PredictHybridProbabilitiesInsideUnitInterval) {
    HybridConfig hc;
    hc.input_dim = 16;
    hc.kan_widths = {4};
    hc.hidden = 4;
    Rng init(1);
    save_model_file(HybridKanMlp(hc, init), path("h.kanm"));
    write_dataset(synthetic_gaussians(10, 16, 2.0, 3), path("d.bin"));
    std::ostringstream out, err;
    ASSERT_EQ(cmd_predict(path("h.kanm"), path("d.bin"), "", out, err), kExitOk) << err.str();
    std::istringstream lines(out.str());
    std::string line;
    std::getline(lines, line);
    std::size_t rows = 0;
    while (std::getline(lines, line)) {
        const auto a = line.find(',');
        const double p = std::stod(line.substr(a + 1, line.rfind(',') - a - 1));
        EXPECT_GT(p, 0.0);
        EXPECT_LT(p, 1.0);
        ++rows;
    }
    EXPECT_EQ(rows, 20u);
}

TEST_F(CliTest, SummarizeCounts) {
    Dataset d;
    d.dim = 2;
    const std::vector<std::tuple<std::string, int, int>> table{
        {"raise1k", kReal, 1000}, {"sd3-ultra", kGenerated, 340}, {"dalle3", kGenerated, 333},
        {"midjourney6", kGenerated, 333}};
    for (const auto& [source, label, n] : table)
        for (int i = 0; i < n; ++i) d.records.push_back({source + std::to_string(i), label, source, {0.6, 0.8}});
    write_dataset(d, path("table.kemb"));
    std::ostringstream out, err;
    ASSERT_EQ(cmd_summarize(path("table.kemb"), out, err), kExitOk) << err.str();
    EXPECT_NE(out.str().find("total"), std::string::npos);
    EXPECT_NE(out.str().find("2006"), std::string::npos);
    EXPECT_TRUE(err.str().empty()) << err.str();

    write("empty.jsonl", "");
    std::ostringstream out2;
    ASSERT_EQ(cmd_summarize(path("empty.jsonl"), out2, err), kExitOk);
    EXPECT_NE(out2.str().find("total"), std::string::npos);

    write("bad.jsonl", "nonsense\n");
    std::ostringstream e3;
    EXPECT_EQ(cmd_summarize(path("bad.jsonl"), out2, e3), kExitInput);
    EXPECT_EQ(cmd_summarize(path("absent.jsonl"), out2, e3), kExitInput);
}

TEST_F(CliTest, ToolBinaryExitCodes) {
    EXPECT_EQ(run_tool("gradcheck --instances 2"), 0);
    EXPECT_EQ(run_tool("summarize " + path("absent.jsonl")), 2);
    EXPECT_EQ(run_tool("no-such-command"), 2);
    EXPECT_EQ(run_tool("synth " + path("s.jsonl") + " --n-per-class 4 --dim 8"), 0);
    EXPECT_EQ(run_tool("summarize " + path("s.jsonl")), 0);
    EXPECT_EQ(run_tool("--help"), 0);
}
