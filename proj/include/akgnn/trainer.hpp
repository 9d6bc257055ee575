#ifndef AKGNN_TRAINER_HPP
#define AKGNN_TRAINER_HPP

#include "akgnn/dataset.hpp"
#include "akgnn/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace akgnn {

struct TrainConfig {
    Index layers{5};
    Index hidden{64};
    double dropout{0.6};
    double learning_rate{0.01};
    double weight_decay{5e-4};
    int patience{100};
    int max_epochs{1000};
    std::uint64_t seed{0};
    ModelVariant variant{ModelVariant::Full};
    Index head_depth{1};

    /// Throws ConfigError when a field is out of range.
    void validate() const;
};

struct AdamState {
    double beta1{0.9};
    double beta2{0.999};
    double epsilon{1e-8};
    long step{0};
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
};

/// One bias-corrected Adam update. Weight decay is added to the gradient of
/// parameters flagged `decay` only; untrainable parameters are left alone.
void adam_step(std::span<const ParamRef> params, std::span<const Matrix> grads, AdamState& state,
               double learning_rate, double weight_decay);

struct EpochRecord {
    int epoch{};
    double train_loss{};
    double val_loss{};
    double val_accuracy{};
    std::vector<double> lambda_max; ///< values used by this epoch's training pass
};

struct TrainResult {
    ModelParams best;
    std::vector<EpochRecord> history;
    int best_epoch{};
    int stopped_epoch{};
    double best_val_loss{};
    double train_accuracy{};
    double val_accuracy{};
    double test_accuracy{};
};

/// Full-batch training with early stopping on validation loss. Accuracies in
/// the result are those of the best-validation-loss snapshot.
TrainResult train(const TrainConfig& config, const Dataset& data, const CsrGraph& graph);

/// Fraction of masked nodes whose argmax logit equals the label; ties resolve
/// to the lowest class id.
double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const Index> mask);

double evaluate(const ModelParams& params, const Dataset& data, const CsrGraph& graph, std::span<const Index> mask);

/// Eval-mode masked cross-entropy.
double evaluate_loss(const ModelParams& params, const Dataset& data, const CsrGraph& graph,
                     std::span<const Index> mask);

struct VariantSummary {
    ModelVariant variant{};
    std::vector<double> test_accuracy; ///< one per seed
    double mean{};
    double stddev{}; ///< sample standard deviation
};

/// Trains every variant for every seed. Independent runs execute on up to
/// `jobs` threads; results do not depend on `jobs`.
std::vector<VariantSummary> run_ablation(const Dataset& data, const CsrGraph& graph, const TrainConfig& base,
                                         std::span<const std::uint64_t> seeds, int jobs = 1,
                                         std::span<const ModelVariant> variants = {});

struct SweepRow {
    Index layers{};
    std::uint64_t seed{};
    double train_accuracy{};
    double val_accuracy{};
    double test_accuracy{};
    std::vector<double> lambda_max;
};

std::vector<SweepRow> run_layer_sweep(const Dataset& data, const CsrGraph& graph, const TrainConfig& base,
                                      std::span<const Index> layer_counts, std::span<const std::uint64_t> seeds,
                                      int jobs = 1);

/// Median wall time (seconds) of one propagation pass: kernel construction,
/// K sparse products forward and their backward, on random hidden states.
double time_propagation(const CsrGraph& graph, Index hidden, Index layers, int repetitions, std::uint64_t seed);

double mean(std::span<const double> xs);
double sample_stddev(std::span<const double> xs);

} // namespace akgnn

#endif // AKGNN_TRAINER_HPP
