// Command-line driver: train, eval, ablate, sweep-layers, spectrum, gradcheck.

#include "akgnn/dataset.hpp"
#include "akgnn/gradcheck.hpp"
#include "akgnn/kernel.hpp"
#include "akgnn/run_io.hpp"
#include "akgnn/trainer.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace akgnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct CommonFlags {
    std::string data;
    std::string out;
    std::string variant{"full"};
    TrainConfig config;
    int jobs{1};
    bool no_normalize{false};
};

void add_hyperparameters(CLI::App& cmd, CommonFlags& f)
{
    cmd.add_option("--seed", f.config.seed, "Master random seed");
    cmd.add_option("--layers", f.config.layers, "Number of propagation layers K")->check(CLI::PositiveNumber);
    cmd.add_option("--hidden", f.config.hidden, "Hidden size")->check(CLI::PositiveNumber);
    cmd.add_option("--dropout", f.config.dropout, "Dropout rate")->check(CLI::Range(0.0, 0.999999));
    cmd.add_option("--lr", f.config.learning_rate, "Adam learning rate");
    cmd.add_option("--weight-decay", f.config.weight_decay, "L2 weight decay on weight matrices");
    cmd.add_option("--patience", f.config.patience, "Early-stopping patience (epochs)");
    cmd.add_option("--max-epochs", f.config.max_epochs, "Epoch cap");
    cmd.add_option("--head-depth", f.config.head_depth, "Affine maps in the prediction head");
    cmd.add_option("--variant", f.variant, "Model variant")
        ->check(CLI::IsMember({"full", "no-lambda", "no-pt", "no-readout"}));
    cmd.add_option("--jobs", f.jobs, "Parallel training jobs (ablate, sweep-layers)")->check(CLI::PositiveNumber);
    cmd.add_flag("--no-normalize", f.no_normalize, "Skip feature row normalization");
}

LoadedDataset load(const CommonFlags& f)
{
    LoadOptions opts;
    opts.normalize_features = !f.no_normalize;
    auto loaded = load_dataset(f.data, opts);
    for (const auto& w : loaded.warnings)
        std::cerr << "warning: " << w << '\n';
    return loaded;
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, int count)
{
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
    std::iota(seeds.begin(), seeds.end(), first);
    return seeds;
}

int cmd_train(CommonFlags& f)
{
    f.config.variant = parse_variant(f.variant);
    f.config.validate();
    const auto loaded = load(f);
    const auto result = train(f.config, loaded.data, loaded.graph);
    const fs::path out = f.out.empty() ? fs::path("runs") / ("seed" + std::to_string(f.config.seed)) : fs::path(f.out);
    write_run_directory(out, result, f.config, f.data);
    std::cout << "variant " << to_string(f.config.variant) << ", best epoch " << result.best_epoch
              << ", stopped at epoch " << result.stopped_epoch << '\n';
    std::cout << "lambda_max";
    for (double l : lambda_trace(result.best))
        std::cout << ' ' << format_short(l);
    std::cout << '\n';
    std::cout << "test accuracy " << format_short(result.test_accuracy) << '\n';
    std::cout << "run directory " << out.string() << '\n';
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const CommonFlags& f, const std::string& mask_name)
{
    TrainConfig cfg;
    const ModelParams params = load_checkpoint(checkpoint, &cfg);
    const auto loaded = load(f);
    const Dataset& data = loaded.data;
    if (data.num_features() != params.dims.features || data.num_classes != params.dims.classes)
        throw DimensionError("checkpoint expects " + std::to_string(params.dims.features) + " features and " +
                             std::to_string(params.dims.classes) + " classes; dataset has " +
                             std::to_string(data.num_features()) + " features and " +
                             std::to_string(data.num_classes) + " classes");
    const auto& mask = mask_name == "train" ? data.train : mask_name == "val" ? data.val : data.test;
    const double acc = evaluate(params, data, loaded.graph, mask);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", acc);
    std::cout << mask_name << " accuracy " << buf << " (" << std::lround(acc * static_cast<double>(mask.size()))
              << "/" << mask.size() << ")\n";
    return kExitOk;
}

int cmd_ablate(CommonFlags& f, int num_seeds)
{
    f.config.validate();
    const auto loaded = load(f);
    const auto seeds = seed_range(f.config.seed, num_seeds);
    const auto summary = run_ablation(loaded.data, loaded.graph, f.config, seeds, f.jobs);

    std::string csv = "variant,seed,test_accuracy\n";
    for (const auto& s : summary) {
        for (std::size_t i = 0; i < seeds.size(); ++i)
            csv += std::string(to_string(s.variant)) + "," + std::to_string(seeds[i]) + "," +
                   format_short(s.test_accuracy[i]) + "\n";
        std::printf("%-11s %.2f +- %.2f  (%zu seeds)\n", std::string(to_string(s.variant)).c_str(), 100.0 * s.mean,
                    100.0 * s.stddev, seeds.size());
    }
    if (!f.out.empty()) {
        fs::create_directories(f.out);
        std::ofstream(fs::path(f.out) / "ablation.csv") << csv;
    }
    return kExitOk;
}

int cmd_sweep(CommonFlags& f, const std::vector<Index>& layer_counts, int num_seeds)
{
    f.config.validate();
    const auto loaded = load(f);
    const auto seeds = seed_range(f.config.seed, num_seeds);
    const auto rows = run_layer_sweep(loaded.data, loaded.graph, f.config, layer_counts, seeds, f.jobs);

    std::string csv = "layers,seed,train_acc,val_acc,test_acc\n";
    for (const auto& r : rows)
        csv += std::to_string(r.layers) + "," + std::to_string(r.seed) + "," + format_short(r.train_accuracy) + "," +
               format_short(r.val_accuracy) + "," + format_short(r.test_accuracy) + "\n";
    std::cout << csv;
    if (!f.out.empty()) {
        fs::create_directories(f.out);
        std::ofstream(fs::path(f.out) / "layer_sweep.csv") << csv;
    }
    return kExitOk;
}

int cmd_spectrum(const CommonFlags& f, double phi)
{
    const auto loaded = load(f);
    const CsrGraph& graph = loaded.graph;
    const auto kernel = build_kernel(graph, phi);
    const auto& w = kernel.weights();

    const double diag_mass = kernel.diagonal().sum();
    const double total_mass = diag_mass + kernel.off_diagonal().sum();
    double max_from_identity = (kernel.diagonal().array() - 1.0).abs().maxCoeff();
    if (kernel.off_diagonal().size() > 0)
        max_from_identity = std::max(max_from_identity, kernel.off_diagonal().cwiseAbs().maxCoeff());

    std::cout << "phi " << format_short(phi) << '\n'
              << "a " << format_short(w.a) << '\n'
              << "b " << format_short(w.b) << '\n'
              << "lambda_max " << format_short(w.lambda_max) << '\n'
              << "diagonal_mass_fraction " << format_short(diag_mass / total_mass) << '\n'
              << "max_abs_deviation_from_identity " << format_short(max_from_identity) << '\n';

    if (graph.num_nodes() <= kSpectrumLimit) {
        const auto spec = spectrum(kernel.to_dense());
        std::cout << "min_eigenvalue " << format_short(spec.eigenvalues.minCoeff()) << '\n'
                  << "max_eigenvalue " << format_short(spec.eigenvalues.maxCoeff()) << '\n';
    } else {
        std::cout << "note: " << graph.num_nodes() << " nodes exceeds the dense limit of " << kSpectrumLimit
                  << "; eigenvalues skipped, entry statistics only\n";
        std::cout << "min_diagonal " << format_short(kernel.diagonal().minCoeff()) << '\n'
                  << "max_diagonal " << format_short(kernel.diagonal().maxCoeff()) << '\n';
    }
    return kExitOk;
}

int cmd_gradcheck(const GradcheckSetup& setup)
{
    const auto report = model_gradcheck(setup);
    for (const auto& r : report.parameters)
        std::printf("%-10s checked %6ld  max rel err %.3e\n", r.name.c_str(), static_cast<long>(r.checked),
                    r.max_rel_error);
    std::printf("relu margin %.3e after %d parameter draw%s\n", report.kink_margin, report.attempts,
                report.attempts == 1 ? "" : "s");
    std::printf("max rel err %.3e (worst: %s)\n", report.max_rel_error, report.worst_parameter.c_str());
    if (report.max_rel_error < 1e-4)
        return kExitOk;
    std::fprintf(stderr, "gradient check failed: %s exceeds 1e-4\n", report.worst_parameter.c_str());
    return kExitFailure;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Adaptive-kernel graph neural network: training, evaluation and diagnostics"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    CommonFlags flags;

    auto* train_cmd = app.add_subcommand("train", "Train one model and write a run directory");
    train_cmd->add_option("--data", flags.data, "Dataset directory")->required();
    train_cmd->add_option("--out", flags.out, "Run directory (default runs/seed<SEED>)");
    add_hyperparameters(*train_cmd, flags);

    std::string checkpoint;
    std::string mask_name = "test";
    auto* eval_cmd = app.add_subcommand("eval", "Accuracy of a checkpoint on one mask");
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint.json from a run directory")->required();
    eval_cmd->add_option("--data", flags.data, "Dataset directory")->required();
    eval_cmd->add_option("--mask", mask_name, "Mask to score")->check(CLI::IsMember({"train", "val", "test"}));
    eval_cmd->add_flag("--no-normalize", flags.no_normalize, "Skip feature row normalization");

    int num_seeds = 5;
    auto* ablate_cmd = app.add_subcommand("ablate", "Train all four variants over several seeds");
    ablate_cmd->add_option("--data", flags.data, "Dataset directory")->required();
    ablate_cmd->add_option("--out", flags.out, "Directory for ablation.csv");
    ablate_cmd->add_option("--seeds", num_seeds, "Number of consecutive seeds starting at --seed")
        ->check(CLI::Range(2, 1000));
    add_hyperparameters(*ablate_cmd, flags);

    std::vector<Index> layer_counts{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    int sweep_seeds = 3;
    auto* sweep_cmd = app.add_subcommand("sweep-layers", "Accuracy as a function of the number of layers");
    sweep_cmd->add_option("--data", flags.data, "Dataset directory")->required();
    sweep_cmd->add_option("--out", flags.out, "Directory for layer_sweep.csv");
    sweep_cmd->add_option("--layer-list", layer_counts, "Layer counts to train")->delimiter(',');
    sweep_cmd->add_option("--seeds", sweep_seeds, "Number of consecutive seeds starting at --seed")
        ->check(CLI::PositiveNumber);
    add_hyperparameters(*sweep_cmd, flags);

    double phi = 1.0;
    auto* spectrum_cmd = app.add_subcommand("spectrum", "Filter weights and kernel statistics for one phi");
    spectrum_cmd->add_option("--data", flags.data, "Dataset directory")->required();
    spectrum_cmd->add_option("--phi", phi, "Kernel parameter phi");
    spectrum_cmd->add_flag("--no-normalize", flags.no_normalize, "Skip feature row normalization");

    GradcheckSetup gc;
    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every model gradient");
    gradcheck_cmd->add_option("--nodes", gc.nodes, "Nodes in the random graph")->check(CLI::Range(2, 100000));
    gradcheck_cmd->add_option("--seed", gc.seed, "Random seed");
    gradcheck_cmd->add_option("--layers", gc.layers, "Propagation layers")->check(CLI::PositiveNumber);
    gradcheck_cmd->add_option("--hidden", gc.hidden, "Hidden size")->check(CLI::PositiveNumber);
    gradcheck_cmd->add_option("--features", gc.features, "Feature dimension")->check(CLI::PositiveNumber);
    gradcheck_cmd->add_option("--classes", gc.classes, "Classes")->check(CLI::PositiveNumber);
    std::string gc_variant = "full";
    gradcheck_cmd->add_option("--variant", gc_variant, "Model variant")
        ->check(CLI::IsMember({"full", "no-lambda", "no-pt", "no-readout"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*train_cmd)
            return cmd_train(flags);
        if (*eval_cmd)
            return cmd_eval(checkpoint, flags, mask_name);
        if (*ablate_cmd) {
            flags.config.variant = parse_variant(flags.variant);
            return cmd_ablate(flags, num_seeds);
        }
        if (*sweep_cmd) {
            flags.config.variant = parse_variant(flags.variant);
            return cmd_sweep(flags, layer_counts, sweep_seeds);
        }
        if (*spectrum_cmd)
            return cmd_spectrum(flags, phi);
        if (*gradcheck_cmd) {
            gc.variant = parse_variant(gc_variant);
            return cmd_gradcheck(gc);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}
