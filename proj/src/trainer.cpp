#include "akgnn/trainer.hpp"

#include "akgnn/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>

namespace akgnn {

void TrainConfig::validate() const
{
    if (layers < 1)
        throw ConfigError("layers must be >= 1");
    if (hidden < 1)
        throw ConfigError("hidden size must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw ConfigError("dropout must lie in [0, 1)");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("learning rate must be finite and >= 0");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
        throw ConfigError("weight decay must be finite and >= 0");
    if (patience < 1 || max_epochs < 1)
        throw ConfigError("patience and max_epochs must be >= 1");
    if (patience >= max_epochs)
        throw ConfigError("patience (" + std::to_string(patience) + ") must be smaller than max_epochs (" +
                          std::to_string(max_epochs) + ")");
    if (head_depth < 1)
        throw ConfigError("head depth must be >= 1");
}

void adam_step(std::span<const ParamRef> params, std::span<const Matrix> grads, AdamState& state,
               double learning_rate, double weight_decay)
{
    if (params.size() != grads.size())
        throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                             std::to_string(grads.size()) + " gradients");
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
            state.second_moment.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
        }
    }
    if (state.first_moment.size() != params.size())
        throw DimensionError("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                             " parameters, got " + std::to_string(params.size()));

    ++state.step;
    const double correction1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        if (!p.trainable)
            continue;
        Matrix& w = *p.value;
        if (grads[i].rows() != w.rows() || grads[i].cols() != w.cols())
            throw DimensionError("adam_step: gradient of " + p.name + " is " + shape_string(grads[i]) +
                                 ", parameter is " + shape_string(w));
        Matrix g = grads[i];
        if (p.decay && weight_decay != 0.0)
            g += weight_decay * w;
        Matrix& m = state.first_moment[i];
        Matrix& v = state.second_moment[i];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        w.array() -= learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + state.epsilon);
    }
}

double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const Index> mask)
{
    if (mask.empty())
        throw ConfigError("accuracy: empty mask");
    Index correct = 0;
    for (Index row : mask) {
        Index best = 0;
        for (Index c = 1; c < logits.cols(); ++c) {
            if (logits(row, c) > logits(row, best))
                best = c;
        }
        if (best == labels[static_cast<std::size_t>(row)])
            ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(mask.size());
}

double evaluate(const ModelParams& params, const Dataset& data, const CsrGraph& graph, std::span<const Index> mask)
{
    return accuracy(predict_logits(params, graph, data.features), data.labels, mask);
}

double evaluate_loss(const ModelParams& params, const Dataset& data, const CsrGraph& graph,
                     std::span<const Index> mask)
{
    ad::Tape tape;
    ad::Rng unused(0);
    const auto out = forward(tape, params, graph, data.features, {ad::Mode::Eval, 0.0}, unused);
    return tape.value(ad::masked_softmax_xent(tape, out.logits, data.labels, mask))(0, 0);
}

TrainResult train(const TrainConfig& config, const Dataset& data, const CsrGraph& graph)
{
    config.validate();
    validate_dataset(data, graph);

    const ModelDims dims{data.num_features(), config.hidden, data.num_classes, config.layers, config.head_depth};
    ModelParams params = init_params(dims, config.variant, config.seed);
    AdamState adam;

    TrainResult result;
    result.best = params;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lambda_max = lambda_trace(params);

        {
            ad::Tape tape;
            auto rng = make_rng(config.seed, Stream::Dropout, static_cast<std::uint64_t>(epoch));
            const auto out = forward(tape, params, graph, data.features, {ad::Mode::Train, config.dropout}, rng);
            const auto loss = ad::masked_softmax_xent(tape, out.logits, data.labels, data.train);
            rec.train_loss = tape.value(loss)(0, 0);
            const auto grads = ad::backward(tape, loss);
            const auto flat = gather_gradients(tape, grads, out.params, params);
            const auto refs = params.parameters();
            adam_step(refs, flat, adam, config.learning_rate, config.weight_decay);
        }

        {
            ad::Tape tape;
            ad::Rng unused(0);
            const auto out = forward(tape, params, graph, data.features, {ad::Mode::Eval, 0.0}, unused);
            rec.val_loss = tape.value(ad::masked_softmax_xent(tape, out.logits, data.labels, data.val))(0, 0);
            rec.val_accuracy = accuracy(tape.value(out.logits), data.labels, data.val);
        }

        result.stopped_epoch = epoch;
        const bool improved = rec.val_loss < result.best_val_loss;
        result.history.push_back(std::move(rec));
        if (improved) {
            result.best_val_loss = result.history.back().val_loss;
            result.best_epoch = epoch;
            result.best = params;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }

    const Matrix logits = predict_logits(result.best, graph, data.features);
    result.train_accuracy = accuracy(logits, data.labels, data.train);
    result.val_accuracy = accuracy(logits, data.labels, data.val);
    result.test_accuracy = accuracy(logits, data.labels, data.test);
    return result;
}

double mean(std::span<const double> xs)
{
    if (xs.empty())
        return 0.0;
    double s = 0.0;
    for (double x : xs)
        s += x;
    return s / static_cast<double>(xs.size());
}

double sample_stddev(std::span<const double> xs)
{
    if (xs.size() < 2)
        return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs)
        ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

namespace {

/// Runs fn(0..count-1) on up to `jobs` threads. Each index writes only its own slot.
void run_jobs(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn)
{
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, count); ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count && !failed; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true))
                        failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace

std::vector<VariantSummary> run_ablation(const Dataset& data, const CsrGraph& graph, const TrainConfig& base,
                                         std::span<const std::uint64_t> seeds, int jobs,
                                         std::span<const ModelVariant> variants)
{
    if (seeds.size() < 2)
        throw ConfigError("run_ablation: at least two seeds are required");
    static constexpr ModelVariant kAll[] = {ModelVariant::Full, ModelVariant::NoLambda, ModelVariant::NoPt,
                                            ModelVariant::NoReadout};
    if (variants.empty())
        variants = kAll;

    std::vector<VariantSummary> out(variants.size());
    for (std::size_t v = 0; v < variants.size(); ++v) {
        out[v].variant = variants[v];
        out[v].test_accuracy.resize(seeds.size());
    }
    run_jobs(variants.size() * seeds.size(), jobs, [&](std::size_t job) {
        const std::size_t v = job / seeds.size();
        const std::size_t s = job % seeds.size();
        TrainConfig cfg = base;
        cfg.variant = variants[v];
        cfg.seed = seeds[s];
        out[v].test_accuracy[s] = train(cfg, data, graph).test_accuracy;
    });
    for (auto& summary : out) {
        summary.mean = mean(summary.test_accuracy);
        summary.stddev = sample_stddev(summary.test_accuracy);
    }
    return out;
}

std::vector<SweepRow> run_layer_sweep(const Dataset& data, const CsrGraph& graph, const TrainConfig& base,
                                      std::span<const Index> layer_counts, std::span<const std::uint64_t> seeds,
                                      int jobs)
{
    for (Index k : layer_counts) {
        if (k < 1)
            throw ConfigError("run_layer_sweep: layer counts must be >= 1, got " + std::to_string(k));
    }
    std::vector<SweepRow> rows(layer_counts.size() * seeds.size());
    run_jobs(rows.size(), jobs, [&](std::size_t job) {
        TrainConfig cfg = base;
        cfg.layers = layer_counts[job / seeds.size()];
        cfg.seed = seeds[job % seeds.size()];
        const auto r = train(cfg, data, graph);
        rows[job] = SweepRow{cfg.layers, cfg.seed, r.train_accuracy, r.val_accuracy, r.test_accuracy,
                             lambda_trace(r.best)};
    });
    return rows;
}

double time_propagation(const CsrGraph& graph, Index hidden, Index layers, int repetitions, std::uint64_t seed)
{
    if (repetitions < 1)
        throw ConfigError("time_propagation: repetitions must be >= 1");
    auto rng = make_rng(seed, Stream::Gradcheck);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix h0(graph.num_nodes(), hidden);
    for (Index i = 0; i < h0.size(); ++i)
        h0.data()[i] = normal(rng);
    const Matrix phi = Matrix::Ones(1, layers);

    std::vector<double> samples;
    for (int rep = 0; rep <= repetitions; ++rep) {
        const auto start = std::chrono::steady_clock::now();
        ad::Tape tape;
        const auto phi_node = tape.parameter(phi);
        auto h = tape.parameter(h0);
        for (Index k = 0; k < layers; ++k)
            h = ad::kernel_spmm(tape, ad::adaptive_kernel(tape, graph, phi_node, k), h);
        ad::backward(tape, ad::sum_all(tape, h));
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        if (rep > 0) // first pass warms caches and the allocator
            samples.push_back(elapsed.count());
    }
    std::sort(samples.begin(), samples.end());
    return samples[samples.size() / 2];
}

} // namespace akgnn
