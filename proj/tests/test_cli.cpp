#include "akgnn/dataset.hpp"
#include "akgnn/synthetic.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace akgnn;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code{-1};
    std::string output; ///< stdout and stderr interleaved
};

RunResult run_cli(const std::string& args)
{
    const std::string cmd = std::string("\"") + AKGNN_CLI_PATH + "\" " + args + " 2>&1";
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe)
        return r;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, pipe))
        r.output += buf;
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("akgnn_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

fs::path synthetic_dir(const std::string& name, Index features, std::uint64_t seed)
{
    SyntheticSpec spec;
    spec.nodes = 120;
    spec.classes = 3;
    spec.features = features;
    spec.train_per_class = 5;
    spec.val_size = 30;
    spec.test_size = 40;
    spec.seed = seed;
    const auto ds = generate_synthetic(spec);
    const auto dir = scratch(name);
    write_dataset(dir, ds.data, ds.graph);
    return dir;
}

double value_after(const std::string& text, const std::string& key)
{
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(key + " ", 0) == 0)
            return std::stod(line.substr(key.size() + 1));
    }
    ADD_FAILURE() << "no line starting with '" << key << "' in:\n" << text;
    return 0.0;
}

const std::string kQuick = "--layers 2 --hidden 8 --max-epochs 15 --patience 5";

} // namespace

TEST(Cli, HelpListsDefaults)
{
    const auto r = run_cli("train --help");
    EXPECT_EQ(r.exit_code, 0);
    for (const char* s : {"--layers", "5", "--hidden", "64", "--dropout", "0.6", "--lr", "0.01", "--weight-decay",
                          "0.0005", "--patience", "100", "--max-epochs", "1000", "--variant", "full"})
        EXPECT_NE(r.output.find(s), std::string::npos) << s << "\n" << r.output;
}

TEST(Cli, BadFlagIsUsageError)
{
    EXPECT_EQ(run_cli("train --data x --bogus").exit_code, 2);
    EXPECT_EQ(run_cli("").exit_code, 2);
    EXPECT_EQ(run_cli("train --data x --variant gat").exit_code, 2);
}

TEST(Cli, InvalidConfigIsUsageError)
{
    const auto data = synthetic_dir("cfg", 20, 1);
    EXPECT_EQ(run_cli("train --data " + data.string() + " --patience 10 --max-epochs 5").exit_code, 2);
}

TEST(Cli, MissingDataDirectoryNamesPath)
{
    const auto r = run_cli("train --data /no/such/akgnn_dataset --out " + scratch("missing").string());
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("/no/such/akgnn_dataset"), std::string::npos) << r.output;
}

TEST(Cli, TrainThenEvalReproducesTestAccuracy)
{
    const auto data = synthetic_dir("train", 20, 2);
    const auto out = scratch("train_run");
    const auto t = run_cli("train --data " + data.string() + " --out " + out.string() + " --seed 3 " + kQuick);
    ASSERT_EQ(t.exit_code, 0) << t.output;
    EXPECT_NE(t.output.find("test accuracy"), std::string::npos);
    for (const char* f : {"config.json", "checkpoint.json", "metrics.json", "loss_curve.csv", "lambda_trace.csv"})
        EXPECT_TRUE(fs::exists(out / f)) << f;

    std::ifstream in(out / "metrics.json");
    const auto metrics = nlohmann::json::parse(in);
    const auto e = run_cli("eval --checkpoint " + (out / "checkpoint.json").string() + " --data " + data.string() +
                           " --mask test");
    ASSERT_EQ(e.exit_code, 0) << e.output;
    EXPECT_EQ(value_after(e.output, "test accuracy"), metrics.at("test_accuracy").get<double>());

    const auto tr = run_cli("eval --checkpoint " + (out / "checkpoint.json").string() + " --data " + data.string() +
                            " --mask train");
    EXPECT_EQ(tr.exit_code, 0);
    EXPECT_EQ(value_after(tr.output, "train accuracy"), metrics.at("train_accuracy").get<double>());
}

TEST(Cli, TrainIsReproducibleFromConfig)
{
    const auto data = synthetic_dir("repro", 20, 2);
    const auto a = scratch("repro_a");
    const auto b = scratch("repro_b");
    ASSERT_EQ(run_cli("train --data " + data.string() + " --out " + a.string() + " --seed 4 " + kQuick).exit_code, 0);
    ASSERT_EQ(run_cli("train --data " + data.string() + " --out " + b.string() + " --seed 4 " + kQuick).exit_code, 0);
    for (const char* f : {"metrics.json", "loss_curve.csv", "lambda_trace.csv", "checkpoint.json"}) {
        std::ifstream fa(a / f);
        std::ifstream fb(b / f);
        std::stringstream sa;
        std::stringstream sb;
        sa << fa.rdbuf();
        sb << fb.rdbuf();
        EXPECT_EQ(sa.str(), sb.str()) << f;
    }
}

TEST(Cli, NoPtVariantTrains)
{
    const auto data = synthetic_dir("nopt", 20, 2);
    const auto out = scratch("nopt_run");
    const auto r = run_cli("train --data " + data.string() + " --out " + out.string() + " --variant no-pt " + kQuick);
    EXPECT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("no-pt"), std::string::npos);
}

TEST(Cli, EvalDimensionMismatch)
{
    const auto data = synthetic_dir("dim_a", 20, 2);
    const auto other = synthetic_dir("dim_b", 25, 2);
    const auto out = scratch("dim_run");
    ASSERT_EQ(run_cli("train --data " + data.string() + " --out " + out.string() + " " + kQuick).exit_code, 0);
    const auto r = run_cli("eval --checkpoint " + (out / "checkpoint.json").string() + " --data " + other.string());
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("feature"), std::string::npos) << r.output;
}

TEST(Cli, SpectrumExamples)
{
    const auto data = synthetic_dir("spectrum", 20, 2);
    const auto one = run_cli("spectrum --data " + data.string() + " --phi 1");
    ASSERT_EQ(one.exit_code, 0) << one.output;
    EXPECT_EQ(value_after(one.output, "a"), 1.0);
    EXPECT_EQ(value_after(one.output, "b"), 1.0);
    EXPECT_EQ(value_after(one.output, "lambda_max"), 2.0);
    EXPECT_LE(value_after(one.output, "max_eigenvalue"), 1.0 + 1e-5);

    const auto zero = run_cli("spectrum --data " + data.string() + " --phi 0");
    EXPECT_EQ(value_after(zero.output, "diagonal_mass_fraction"), 0.0);

    const auto big = run_cli("spectrum --data " + data.string() + " --phi 1e6");
    EXPECT_LT(value_after(big.output, "max_abs_deviation_from_identity"), 1e-3);
}

TEST(Cli, SpectrumFallsBackOnLargeGraphs)
{
    SyntheticSpec spec;
    spec.nodes = 800;
    spec.features = 10;
    spec.seed = 1;
    const auto ds = generate_synthetic(spec);
    const auto dir = scratch("spectrum_large");
    write_dataset(dir, ds.data, ds.graph);
    const auto r = run_cli("spectrum --data " + dir.string() + " --phi 2");
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_NE(r.output.find("note:"), std::string::npos);
    EXPECT_EQ(r.output.find("max_eigenvalue"), std::string::npos);
}

TEST(Cli, GradcheckPasses)
{
    for (const char* args : {"--nodes 20 --seed 0", "--nodes 5"}) {
        const auto r = run_cli(std::string("gradcheck ") + args);
        EXPECT_EQ(r.exit_code, 0) << args << "\n" << r.output;
        for (const char* name : {"W*", "phi_1", "phi_5", "head_W", "head_b"})
            EXPECT_NE(r.output.find(name), std::string::npos) << name;
    }
}

TEST(Cli, AblateAndSweepWriteCsv)
{
    const auto data = synthetic_dir("ablate", 20, 2);
    const auto out = scratch("ablate_out");
    const auto a = run_cli("ablate --data " + data.string() + " --out " + out.string() + " --seeds 2 --jobs 2 " +
                           "--layers 2 --hidden 8 --max-epochs 6 --patience 3");
    ASSERT_EQ(a.exit_code, 0) << a.output;
    EXPECT_TRUE(fs::exists(out / "ablation.csv"));
    const auto s = run_cli("sweep-layers --data " + data.string() + " --out " + out.string() +
                           " --layer-list 1,3 --seeds 2 --hidden 8 --max-epochs 6 --patience 3");
    ASSERT_EQ(s.exit_code, 0) << s.output;
    std::ifstream in(out / "layer_sweep.csv");
    int lines = 0;
    for (std::string line; std::getline(in, line);)
        ++lines;
    EXPECT_EQ(lines, 1 + 2 * 2);
}
