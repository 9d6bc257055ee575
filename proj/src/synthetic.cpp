#include "akgnn/synthetic.hpp"

#include "akgnn/rng.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace akgnn {

CsrGraph random_connected_graph(Index n, Index extra_edges, std::mt19937_64& rng)
{
    if (n < 2)
        throw ConfigError("random_connected_graph: need at least 2 nodes");
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<Edge> edges;
    for (std::size_t i = 1; i < order.size(); ++i)
        edges.emplace_back(order[i - 1], order[i]);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    for (Index e = 0; e < extra_edges; ++e) {
        const Index i = pick(rng);
        const Index j = pick(rng);
        if (i != j)
            edges.emplace_back(i, j);
    }
    return build_graph(n, edges);
}

LoadedDataset generate_synthetic(const SyntheticSpec& spec)
{
    if (spec.nodes < 2 || spec.classes < 1 || spec.features < spec.classes || spec.words_per_node < 1)
        throw ConfigError("generate_synthetic: degenerate specification");
    const Index needed = spec.train_per_class * spec.classes + spec.val_size + spec.test_size;
    if (needed > spec.nodes)
        throw ConfigError("generate_synthetic: split needs " + std::to_string(needed) + " nodes, only " +
                          std::to_string(spec.nodes) + " generated");

    auto rng = make_rng(spec.seed, Stream::Synthetic);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    LoadedDataset out;
    Dataset& data = out.data;
    data.num_classes = spec.classes;
    data.labels.resize(static_cast<std::size_t>(spec.nodes));
    for (Index i = 0; i < spec.nodes; ++i)
        data.labels[static_cast<std::size_t>(i)] = static_cast<int>(i % spec.classes);
    std::shuffle(data.labels.begin(), data.labels.end(), rng);

    std::vector<std::vector<Index>> members(static_cast<std::size_t>(spec.classes));
    for (Index i = 0; i < spec.nodes; ++i)
        members[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])].push_back(i);

    std::vector<Edge> edges;
    const auto stubs = static_cast<Index>(spec.avg_degree * static_cast<double>(spec.nodes) / 2.0);
    std::uniform_int_distribution<Index> any_node(0, spec.nodes - 1);
    for (Index e = 0; e < stubs; ++e) {
        const Index i = any_node(rng);
        const auto& same = members[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])];
        Index j = unit(rng) < spec.homophily
                      ? same[std::uniform_int_distribution<std::size_t>(0, same.size() - 1)(rng)]
                      : any_node(rng);
        if (i != j)
            edges.emplace_back(i, j);
    }
    // Attach any node left without neighbors to a random member of its class.
    {
        std::vector<bool> touched(static_cast<std::size_t>(spec.nodes), false);
        for (const auto& [i, j] : edges) {
            touched[static_cast<std::size_t>(i)] = true;
            touched[static_cast<std::size_t>(j)] = true;
        }
        for (Index i = 0; i < spec.nodes; ++i) {
            if (touched[static_cast<std::size_t>(i)])
                continue;
            const auto& same = members[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])];
            Index j = i;
            while (j == i) {
                j = same.size() > 1 ? same[std::uniform_int_distribution<std::size_t>(0, same.size() - 1)(rng)]
                                    : any_node(rng);
            }
            edges.emplace_back(i, j);
            touched[static_cast<std::size_t>(j)] = true;
        }
    }
    out.graph = build_graph(spec.nodes, edges);

    const Index vocab = spec.features / spec.classes;
    data.features = Matrix::Zero(spec.nodes, spec.features);
    std::uniform_int_distribution<Index> any_word(0, spec.features - 1);
    std::uniform_int_distribution<Index> topic_word(0, vocab - 1);
    for (Index i = 0; i < spec.nodes; ++i) {
        const int label = data.labels[static_cast<std::size_t>(i)];
        for (Index w = 0; w < spec.words_per_node; ++w) {
            const Index word = unit(rng) < spec.feature_signal ? label * vocab + topic_word(rng) : any_word(rng);
            data.features(i, word) += 1.0;
        }
    }

    if (spec.normalize_features)
        data.features = row_normalize(data.features);

    std::vector<Index> order(static_cast<std::size_t>(spec.nodes));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Index> taken(static_cast<std::size_t>(spec.classes), 0);
    std::vector<Index> rest;
    for (Index i : order) {
        auto& t = taken[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])];
        if (t < spec.train_per_class) {
            data.train.push_back(i);
            ++t;
        } else {
            rest.push_back(i);
        }
    }
    data.val.assign(rest.begin(), rest.begin() + spec.val_size);
    data.test.assign(rest.begin() + spec.val_size, rest.begin() + spec.val_size + spec.test_size);
    std::sort(data.train.begin(), data.train.end());
    std::sort(data.val.begin(), data.val.end());
    std::sort(data.test.begin(), data.test.end());

    out.warnings = validate_dataset(data, out.graph);
    return out;
}

} // namespace akgnn
